//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use ensemble_lab::model::LatticeModel;
use nalgebra::{DMatrix, DVector};

pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Closed-form thermodynamics of the Gaussian chain (`psi_b = 0`) with
/// precision matrix `A` (unit diagonal, `-J` off the diagonal) and linear
/// term `b = sigma 1 - s`.
pub struct GaussianOracle {
    pub k: usize,
    pub precision: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub log_det: f64,
    pub log_z: f64,
    pub var_sum: f64,
}

impl GaussianOracle {
    pub fn new(k: usize, j: f64, sigma: f64, s: &[f64]) -> Self {
        let precision = DMatrix::from_fn(k, k, |a, b| {
            if a == b {
                1.0
            } else if a + 1 == b || b + 1 == a {
                -j
            } else {
                0.0
            }
        });
        let chol = precision.clone().cholesky().expect("positive definite");
        let covariance = chol.inverse();
        let b = DVector::from_fn(k, |i, _| sigma - s[i % s.len()]);
        let mean = &covariance * &b;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let log_z = k as f64 * HALF_LN_2PI - 0.5 * log_det + 0.5 * b.dot(&mean);
        let var_sum = covariance.sum();
        Self {
            k,
            precision,
            covariance,
            mean,
            log_det,
            log_z,
            var_sum,
        }
    }

    pub fn from_model(model: &LatticeModel<f64>, sigma: f64) -> Self {
        Self::new(model.size(), model.coupling(), sigma, model.field())
    }

    pub fn m(&self) -> f64 {
        self.mean.sum() / self.k as f64
    }

    /// `|phi(xi)|` of the normalised centred sum.
    pub fn phi(&self, xi: f64) -> f64 {
        (-xi * xi * self.var_sum / (2.0 * self.k as f64)).exp()
    }

    pub fn g0(&self) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * self.var_sum / self.k as f64).sqrt()
    }

    /// `-(1/K) ln` of the constrained integral `int_{sum x = K m} exp(-H) dH^{K-1}`
    /// for `b = 0` shifted to mean spin `m` (the `sigma` term is constant on the plane).
    pub fn h_bar(&self, m: f64, s: &[f64]) -> f64 {
        // With field s, -H = -x'Ax/2 - s'x; write it as the gce at sigma = 0.
        let k = self.k as f64;
        let c = k * m;
        let b0 = DVector::from_fn(self.k, |i, _| -s[i % s.len()]);
        let mu0 = &self.covariance * &b0;
        let log_z0 = k * HALF_LN_2PI - 0.5 * self.log_det + 0.5 * b0.dot(&mu0);
        let mean_sum = mu0.sum();
        let log_density = -0.5 * (2.0 * std::f64::consts::PI * self.var_sum).ln()
            - (c - mean_sum).powi(2) / (2.0 * self.var_sum);
        -(log_z0 + log_density + 0.5 * k.ln()) / k
    }
}

/// `ln int exp(sigma sum x - H(x)) dx` by a dense tensor trapezoid rule on
/// `[-L, L]^K`, independent of the transfer engine.
pub fn dense_log_partition(
    model: &LatticeModel<f64>,
    sigma: f64,
    half_width: f64,
    step: f64,
) -> f64 {
    let k = model.size();
    let n = (2.0 * half_width / step).round() as usize + 1;
    let axis: Vec<f64> = (0..n).map(|a| -half_width + step * a as f64).collect();
    let mut idx = vec![0usize; k];
    let mut x = vec![0.0; k];
    let mut logs = Vec::with_capacity(n.pow(k as u32));
    loop {
        for (slot, &a) in x.iter_mut().zip(&idx) {
            *slot = axis[a];
        }
        logs.push(sigma * x.iter().sum::<f64>() - model.hamiltonian(&x).unwrap());
        let mut d = 0;
        while d < k {
            idx[d] += 1;
            if idx[d] < n {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == k {
            break;
        }
    }
    log_sum_exp(&logs) + k as f64 * step.ln()
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + v.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

/// Mean of `X_1` and `Var(X_1)` under the canonical measure at mean spin `m`
/// for `K = 2, 3`, by trapezoid over the first `K - 1` coordinates.
pub fn constrained_site_moments(
    model: &LatticeModel<f64>,
    m: f64,
    half_width: f64,
    step: f64,
) -> (f64, f64) {
    let k = model.size();
    assert!(k == 2 || k == 3);
    let n = (2.0 * half_width / step).round() as usize + 1;
    let axis: Vec<f64> = (0..n).map(|a| m - half_width + step * a as f64).collect();
    let mut pts = Vec::new();
    let mut logs = Vec::new();
    let total = k as f64 * m;
    if k == 2 {
        for &a in &axis {
            let x = [a, total - a];
            pts.push(a);
            logs.push(-model.hamiltonian(&x).unwrap());
        }
    } else {
        for &a in &axis {
            for &b in &axis {
                let x = [a, b, total - a - b];
                pts.push(a);
                logs.push(-model.hamiltonian(&x).unwrap());
            }
        }
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    let mean = w.iter().zip(&pts).map(|(w, x)| w * x).sum::<f64>() / z;
    let var = w
        .iter()
        .zip(&pts)
        .map(|(w, x)| w * (x - mean).powi(2))
        .sum::<f64>()
        / z;
    (mean, var)
}

/// Density of `(X_1 + X_2 - 2m)/sqrt(2)` at zero for `K = 2`: the line
/// integral `int f(m + t, m - t) sqrt(2) dt / Z` (the gradient of the
/// normalised sum has unit length).
pub fn k2_density_at_zero(
    model: &LatticeModel<f64>,
    sigma: f64,
    m: f64,
    half_width: f64,
    step: f64,
) -> f64 {
    assert_eq!(model.size(), 2);
    let n = (2.0 * half_width / step).round() as usize + 1;
    let logs: Vec<f64> = (0..n)
        .map(|a| {
            let t = -half_width + step * a as f64;
            let x = [m + t, m - t];
            sigma * 2.0 * m - model.hamiltonian(&x).unwrap()
        })
        .collect();
    let log_line = log_sum_exp(&logs) + step.ln() + 0.5 * 2f64.ln();
    let log_z = dense_log_partition(model, sigma, half_width + m.abs(), step);
    (log_line - log_z).exp()
}

/// Standard normal CDF-free helper: cumulative trapezoid of the one-site
/// density `exp(sigma x - psi(x) - s x)` on a fine grid, normalised.
pub fn one_site_cdf(model: &LatticeModel<f64>, lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
    let f: Vec<f64> = xs
        .iter()
        .map(|&x| (model.sigma() * x - model.hamiltonian(&[x]).unwrap()).exp())
        .collect();
    let mut cdf = vec![0.0; n];
    for i in 1..n {
        cdf[i] = cdf[i - 1] + 0.5 * h * (f[i] + f[i - 1]);
    }
    let total = cdf[n - 1];
    cdf.iter_mut().for_each(|c| *c /= total);
    (xs, cdf)
}
