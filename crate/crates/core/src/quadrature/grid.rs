//! Real-line discretisation with the Gaussian factor `exp(-z^2/2)` folded
//! into the weights.

use crate::error::{Error, Result};
use crate::model::LatticeModel;
use crate::scalar::{log_sum_exp, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    GaussHermite,
    Trapezoid,
}

/// Nodes and log-weights for `int g(z) exp(-z^2/2) dz ~ sum_k exp(log_weights[k]) g(nodes[k])`.
#[derive(Clone, Debug)]
pub struct QuadratureGrid<T> {
    nodes: Vec<T>,
    log_weights: Vec<T>,
    truncation: T,
    field_cover: T,
    scheme: Scheme,
}

/// Tolerance on `|sigma|` beyond the window a grid was built for.
const COVER_SLACK: f64 = 1e-9;

impl<T: Real> QuadratureGrid<T> {
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn log_weights(&self) -> &[T] {
        &self.log_weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn truncation(&self) -> T {
        self.truncation
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Largest external field magnitude the grid was sized for.
    pub fn field_cover(&self) -> T {
        self.field_cover
    }

    /// Rejects fields beyond the window the grid was built for.
    pub fn check_field(&self, sigma: T) -> Result<()> {
        if sigma.abs() > self.field_cover + T::lit(COVER_SLACK) {
            return Err(Error::Resolution(format!(
                "grid was built for |sigma| <= {}, asked for sigma = {sigma}; rebuild with a wider window",
                self.field_cover
            )));
        }
        Ok(())
    }

    pub fn integrate(&self, mut f: impl FnMut(T) -> T) -> T {
        let terms: Vec<T> = self
            .nodes
            .iter()
            .zip(&self.log_weights)
            .map(|(&z, &lw)| lw.exp() * f(z))
            .collect();
        crate::scalar::pairwise_sum(&terms)
    }
}

/// Gauss-Hermite rule for the weight `exp(-z^2/2)`, computed in `f64`.
///
/// Nodes come from the symmetric Jacobi matrix (Golub-Welsch), refined by
/// Newton on the orthonormal recurrence; weights use the Christoffel form
/// `w_k = 1 / (N p_{N-1}(z_k)^2)` evaluated in log space.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let jacobi = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = nalgebra::SymmetricEigen::new(jacobi)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    let mut log_weights = Vec::with_capacity(n);
    for z in nodes.iter_mut() {
        for _ in 0..4 {
            let (pn, pn1, _) = orthonormal_hermite(n, *z);
            let step = pn / ((n as f64).sqrt() * pn1);
            *z -= step;
            if step.abs() < 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, pn1, log_scale) = orthonormal_hermite(n, *z);
        log_weights.push(-(n as f64).ln() - 2.0 * (pn1.abs().ln() + log_scale));
    }
    // Exact symmetry of the rule.
    for k in 0..n / 2 {
        let z = 0.5 * (nodes[n - 1 - k] - nodes[k]);
        nodes[k] = -z;
        nodes[n - 1 - k] = z;
        let lw = 0.5 * (log_weights[k] + log_weights[n - 1 - k]);
        log_weights[k] = lw;
        log_weights[n - 1 - k] = lw;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, log_weights)
}

/// `(p_n(z), p_{n-1}(z), log_scale)` for polynomials orthonormal under
/// `exp(-z^2/2)`; the true values are the returned ones times `exp(log_scale)`.
fn orthonormal_hermite(n: usize, z: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = (2.0 * std::f64::consts::PI).powf(-0.25);
    let mut log_scale = 0.0;
    for k in 0..n {
        let next = (z * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        let mag = cur.abs().max(prev.abs());
        if mag > 1e100 {
            cur /= mag;
            prev /= mag;
            log_scale += mag.ln();
        }
    }
    (cur, prev, log_scale)
}

/// Required half-width: the positive root of
/// `-R^2/2 + (|sigma| + max|s| + bound_sup + |J| R) R = ln(target_tol)`.
pub fn required_truncation<T: Real>(
    model: &LatticeModel<T>,
    sigma_max: T,
    target_tol: f64,
) -> Result<f64> {
    let c = sigma_max.abs().to_f64_lossy()
        + model.max_abs_field().to_f64_lossy()
        + model.potential().bound_sup().to_f64_lossy();
    let j = model.coupling().abs().to_f64_lossy();
    if !(target_tol > 0.0 && target_tol < 1.0) {
        return Err(Error::Config(format!(
            "target_tol must lie in (0, 1), got {target_tol}"
        )));
    }
    let ln_tol = target_tol.ln();
    let a = 0.5 - j;
    let r = (c + (c * c - 4.0 * a * ln_tol).sqrt()) / (2.0 * a);
    Ok(r)
}

/// Grid sized for fields `|sigma| <= |model.sigma|`.
pub fn build_grid<T: Real>(
    model: &LatticeModel<T>,
    n: usize,
    target_tol: f64,
) -> Result<QuadratureGrid<T>> {
    build_grid_for_window(model, n, target_tol, model.sigma().abs())
}

/// Gauss-Hermite grid trusted for every `|sigma| <= sigma_max`.
pub fn build_grid_for_window<T: Real>(
    model: &LatticeModel<T>,
    n: usize,
    target_tol: f64,
    sigma_max: T,
) -> Result<QuadratureGrid<T>> {
    if n < 16 {
        return Err(Error::Resolution(format!(
            "grid needs N >= 16 nodes, got {n}"
        )));
    }
    let r = required_truncation(model, sigma_max, target_tol)?;
    let (nodes, log_weights) = gauss_hermite(n);
    let span = nodes[n - 1];
    if span < r {
        return Err(Error::Resolution(format!(
            "N = {n} Gauss-Hermite nodes reach |z| = {span:.3} but truncation R = {r:.3} is needed \
             for tolerance {target_tol:e}; increase N"
        )));
    }
    Ok(QuadratureGrid {
        nodes: nodes.into_iter().map(T::lit).collect(),
        log_weights: log_weights.into_iter().map(T::lit).collect(),
        truncation: T::lit(r),
        field_cover: sigma_max.abs(),
        scheme: Scheme::GaussHermite,
    })
}

/// Uniform trapezoid grid on `[-R, R]` with `n` nodes.
pub fn build_trapezoid_grid<T: Real>(
    model: &LatticeModel<T>,
    n: usize,
    target_tol: f64,
    sigma_max: T,
) -> Result<QuadratureGrid<T>> {
    if n < 16 {
        return Err(Error::Resolution(format!(
            "grid needs N >= 16 nodes, got {n}"
        )));
    }
    let r = required_truncation(model, sigma_max, target_tol)?;
    let h = 2.0 * r / (n - 1) as f64;
    let nodes: Vec<f64> = (0..n).map(|k| -r + h * k as f64).collect();
    let log_weights = nodes
        .iter()
        .map(|z| h.ln() - 0.5 * z * z)
        .collect::<Vec<_>>();
    Ok(QuadratureGrid {
        nodes: nodes.into_iter().map(T::lit).collect(),
        log_weights: log_weights.into_iter().map(T::lit).collect(),
        truncation: T::lit(r),
        field_cover: sigma_max.abs(),
        scheme: Scheme::Trapezoid,
    })
}

/// `ln int exp(-z^2/2) dz` as seen by the grid.
pub fn gaussian_mass<T: Real>(grid: &QuadratureGrid<T>) -> T {
    log_sum_exp(grid.log_weights())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

    fn gaussian(sigma: f64) -> LatticeModel<f64> {
        LatticeModel::gaussian(1, 0.0, sigma).unwrap()
    }

    #[test]
    fn mass_and_moments_are_exact() {
        for n in [16, 64, 128, 256] {
            let grid = build_grid(&gaussian(0.0), n, 1e-6).unwrap();
            assert!((gaussian_mass(&grid) - HALF_LN_2PI).abs() < 1e-12, "n={n}");
            assert!(grid.nodes().windows(2).all(|w| w[1] > w[0]));
            let norm = (2.0 * std::f64::consts::PI).sqrt();
            let m2 = grid.integrate(|z| z * z) / norm;
            let m4 = grid.integrate(|z| z.powi(4)) / norm;
            assert!(
                (m2 - 1.0).abs() < 1e-12 && (m4 - 3.0).abs() < 1e-11,
                "n={n}: {m2} {m4}"
            );
        }
    }

    #[test]
    fn small_hermite_rule_matches_closed_form() {
        // N = 3: nodes 0, +-sqrt(3); weights sqrt(2 pi) * (2/3, 1/6, 1/6).
        let (z, lw) = gauss_hermite(3);
        let s = (2.0 * std::f64::consts::PI).sqrt();
        assert!((z[2] - 3f64.sqrt()).abs() < 1e-14 && z[1] == 0.0);
        assert!((lw[1].exp() - s * 2.0 / 3.0).abs() < 1e-14);
        assert!((lw[0].exp() - s / 6.0).abs() < 1e-14);
    }

    #[test]
    fn build_examples() {
        let g0 = build_grid(&gaussian(0.0), 64, 1e-12).unwrap();
        assert!((gaussian_mass(&g0) - HALF_LN_2PI).abs() < 1e-12);
        let g3 = build_grid(&gaussian(3.0), 64, 1e-12).unwrap();
        assert!(g3.truncation() >= 3.0 + g0.truncation());
        assert!(matches!(
            build_grid(&gaussian(0.0), 8, 1e-14),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn field_window_is_enforced() {
        let g = build_grid(&gaussian(1.0), 64, 1e-12).unwrap();
        assert!(g.check_field(-1.0).is_ok());
        assert!(matches!(g.check_field(1.5), Err(Error::Resolution(_))));
    }

    #[test]
    fn trapezoid_mass() {
        let g = build_trapezoid_grid(&gaussian(0.0), 400, 1e-14, 0.0).unwrap();
        assert!((gaussian_mass(&g) - HALF_LN_2PI).abs() < 1e-12);
        assert_eq!(g.scheme(), Scheme::Trapezoid);
    }

    #[test]
    fn large_rule_has_finite_log_weights() {
        let (z, lw) = gauss_hermite(512);
        assert!(lw.iter().all(|w| w.is_finite()));
        let mass = log_sum_exp(&lw);
        assert!((mass - HALF_LN_2PI).abs() < 1e-12);
        assert!(z[511] > 30.0);
    }
}
