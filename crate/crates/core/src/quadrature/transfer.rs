//! Transfer-operator recursions on a quadrature grid.
//!
//! With symmetric weights `u(x) = sqrt(w_x) f(x)` the chain integral becomes
//! a product of the symmetric kernel
//! `S(x, y) = sqrt(w_x) exp(J x y) sqrt(w_y)` and diagonal site factors
//! `r_i(x) = exp((sigma - s_i) x - psi_b(x))`. Every step is renormalised
//! by its sup norm and the log of the factor is accumulated separately.

use std::collections::BTreeMap;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::LatticeModel;
use crate::quadrature::grid::QuadratureGrid;
use crate::scalar::{pairwise_sum, Real};

/// Forward message of a single transfer chain.
#[derive(Clone, Debug)]
pub struct TransferState<T> {
    pub log_scale: T,
    pub vector: Vec<Complex<T>>,
}

impl<T: Real> TransferState<T> {
    /// Divides by the sup norm; returns `false` if the message vanished.
    pub fn renormalize(&mut self) -> bool {
        let max = self.vector.iter().fold(T::zero(), |m, z| m.max(z.norm()));
        if !(max > T::zero() && max.is_finite()) {
            return false;
        }
        let inv = max.recip();
        for z in &mut self.vector {
            *z = *z * inv;
        }
        self.log_scale = self.log_scale + max.ln();
        true
    }
}

/// The kernel and grid of one `(model, grid)` pair, shared by every evaluation.
#[derive(Clone, Debug)]
pub struct TransferOperator<T> {
    model: LatticeModel<T>,
    grid: QuadratureGrid<T>,
    sqrt_w: Vec<T>,
    kernel: Vec<T>,
}

/// Entries below this are flushed to zero to keep subnormals out of the products.
fn flush_floor<T: Real>() -> T {
    T::min_positive_value().sqrt()
}

impl<T: Real> TransferOperator<T> {
    pub fn new(model: &LatticeModel<T>, grid: &QuadratureGrid<T>) -> Self {
        let n = grid.len();
        let half = T::lit(0.5);
        let j = model.coupling();
        let z = grid.nodes();
        let lw = grid.log_weights();
        let floor = flush_floor::<T>();
        let mut kernel = vec![T::zero(); n * n];
        for a in 0..n {
            for b in 0..n {
                let v = (j * z[a] * z[b] + half * (lw[a] + lw[b])).exp();
                kernel[a * n + b] = if v < floor { T::zero() } else { v };
            }
        }
        let sqrt_w = lw.iter().map(|&l| (half * l).exp()).collect();
        Self {
            model: model.clone(),
            grid: grid.clone(),
            sqrt_w,
            kernel,
        }
    }

    pub fn model(&self) -> &LatticeModel<T> {
        &self.model
    }

    pub fn grid(&self) -> &QuadratureGrid<T> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    fn site_factor(&self, site: usize, sigma: T) -> Vec<T> {
        self.grid
            .nodes()
            .iter()
            .map(|&x| self.model.site_exponent(site, sigma, x).exp())
            .collect()
    }

    /// `out = S * input` for `cols` column-interleaved channels.
    fn apply(&self, input: &[T], cols: usize, out: &mut [T]) {
        let n = self.len();
        T::gemm(n, n, cols, &self.kernel, input, out);
    }

    /// `ln int exp(sum (sigma + tilt) x_i - H(x)) dx` for each tilt.
    ///
    /// The imaginary part is the principal argument of the final inner
    /// product; the accumulated rescaling is real.
    pub fn log_partition_batch(&self, sigma: T, tilts: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        for t in tilts {
            self.grid.check_field(sigma + t.re)?;
        }
        let n = self.len();
        let c = tilts.len();
        if c == 0 {
            return Ok(vec![]);
        }
        let k = self.model.size();
        let cols = 2 * c;
        let z = self.grid.nodes();
        let phase: Vec<Complex<T>> = z
            .iter()
            .flat_map(|&x| tilts.iter().map(move |t| (*t * x).exp()))
            .collect();
        let mut log_scale = vec![T::zero(); c];
        let mut msg = vec![T::zero(); n * cols];
        let r = self.site_factor(k - 1, sigma);
        for x in 0..n {
            for col in 0..c {
                let v = phase[x * c + col] * (self.sqrt_w[x] * r[x]);
                msg[x * cols + 2 * col] = v.re;
                msg[x * cols + 2 * col + 1] = v.im;
            }
        }
        renormalize_complex_columns(&mut msg, n, c, &mut log_scale)?;
        let mut tmp = vec![T::zero(); n * cols];
        for site in (0..k - 1).rev() {
            self.apply(&msg, cols, &mut tmp);
            let r = self.site_factor(site, sigma);
            for x in 0..n {
                for col in 0..c {
                    let g = Complex::new(tmp[x * cols + 2 * col], tmp[x * cols + 2 * col + 1]);
                    let v = phase[x * c + col] * g * r[x];
                    msg[x * cols + 2 * col] = v.re;
                    msg[x * cols + 2 * col + 1] = v.im;
                }
            }
            renormalize_complex_columns(&mut msg, n, c, &mut log_scale)?;
        }
        let mut out = Vec::with_capacity(c);
        for col in 0..c {
            let re: Vec<T> = (0..n)
                .map(|x| self.sqrt_w[x] * msg[x * cols + 2 * col])
                .collect();
            let im: Vec<T> = (0..n)
                .map(|x| self.sqrt_w[x] * msg[x * cols + 2 * col + 1])
                .collect();
            let total = Complex::new(pairwise_sum(&re), pairwise_sum(&im));
            if total.norm().is_zero() || !total.norm().is_finite() {
                return Err(Error::Invariant(format!(
                    "transfer chain inner product degenerated to {total} at tilt {}",
                    tilts[col]
                )));
            }
            out.push(total.ln() + log_scale[col]);
        }
        Ok(out)
    }

    /// Single-tilt convenience wrapper around [`Self::log_partition_batch`].
    pub fn log_partition(&self, sigma: T, tilt: Complex<T>) -> Result<Complex<T>> {
        Ok(self.log_partition_batch(sigma, &[tilt])?[0])
    }

    /// Runs the real chain in both directions, recording everything the
    /// moment and covariance computations need.
    ///
    /// `max_order` centred sum moments `E[(sum_i (X_i - m_i))^p]`, `p <= max_order`,
    /// are carried as companion channels of the forward sweep.
    pub fn solve(&self, sigma: T, max_order: usize) -> Result<ChainSolution<T>> {
        if max_order > 4 {
            return Err(Error::Unsupported(format!(
                "centred sum moments of order {max_order} (max 4)"
            )));
        }
        self.grid.check_field(sigma)?;
        let n = self.len();
        let k = self.model.size();
        let z = self.grid.nodes().to_vec();
        let factors: Vec<Vec<T>> = (0..k).map(|i| self.site_factor(i, sigma)).collect();

        // Backward sweep: rho[i] = S u_{i+1}, with rho[K-1] = sqrt(w).
        let mut rho = vec![Vec::new(); k];
        rho[k - 1] = normalized(&self.sqrt_w)?.0;
        let mut u: Vec<T> = (0..n).map(|x| self.sqrt_w[x] * factors[k - 1][x]).collect();
        u = normalized(&u)?.0;
        let mut tmp = vec![T::zero(); n];
        for i in (0..k - 1).rev() {
            self.apply(&u, 1, &mut tmp);
            let (r, _) = normalized(&tmp)?;
            u = normalized(
                &r.iter()
                    .zip(&factors[i])
                    .map(|(a, b)| *a * *b)
                    .collect::<Vec<_>>(),
            )?
            .0;
            rho[i] = r;
        }

        // Forward sweep with companion channels 0..=max_order.
        let cols = max_order + 1;
        let binom = binomials::<T>(cols);
        let mut lam = Vec::with_capacity(k);
        let mut scales = Vec::with_capacity(k);
        let mut means = Vec::with_capacity(k);
        let mut site_var = Vec::with_capacity(k);
        let mut site_m4 = Vec::with_capacity(k);
        let mut chan = vec![T::zero(); n * cols];
        let mut g = vec![T::zero(); n * cols];
        let mut log_z = T::zero();
        for i in 0..k {
            if i == 0 {
                g.iter_mut().for_each(|v| *v = T::zero());
                for x in 0..n {
                    g[x * cols] = self.sqrt_w[x];
                }
            } else {
                T::gemm(n, n, cols, &self.kernel, &chan, &mut g);
            }
            let base: Vec<T> = (0..n).map(|x| factors[i][x] * g[x * cols]).collect();
            let (base, s) = normalized(&base)?;
            log_z = log_z + s.ln();
            let inv = s.recip();

            let weights: Vec<T> = base.iter().zip(&rho[i]).map(|(a, b)| *a * *b).collect();
            let mass = pairwise_sum(&weights);
            if !(mass > T::zero()) {
                return Err(Error::Invariant(format!(
                    "vanishing marginal at site {}",
                    i + 1
                )));
            }
            let mean = pairwise_sum(
                &weights
                    .iter()
                    .zip(&z)
                    .map(|(w, x)| *w * *x)
                    .collect::<Vec<_>>(),
            ) / mass;
            let c2: Vec<T> = weights
                .iter()
                .zip(&z)
                .map(|(w, x)| *w * (*x - mean).powi(2))
                .collect();
            let c4: Vec<T> = weights
                .iter()
                .zip(&z)
                .map(|(w, x)| *w * (*x - mean).powi(4))
                .collect();
            means.push(mean);
            site_var.push(pairwise_sum(&c2) / mass);
            site_m4.push(pairwise_sum(&c4) / mass);

            for x in 0..n {
                let y = z[x] - mean;
                chan[x * cols] = base[x];
                for p in 1..cols {
                    let mut acc = T::zero();
                    let mut ypow = T::one();
                    for t in (0..=p).rev() {
                        acc = acc + binom[p][t] * ypow * g[x * cols + t];
                        ypow = ypow * y;
                    }
                    chan[x * cols + p] = acc * factors[i][x] * inv;
                }
            }
            flush(&mut chan);
            lam.push(base);
            scales.push(s);
        }
        let mut sums = vec![T::zero(); cols];
        for (p, slot) in sums.iter_mut().enumerate() {
            let terms: Vec<T> = (0..n)
                .map(|x| self.sqrt_w[x] * chan[x * cols + p])
                .collect();
            *slot = pairwise_sum(&terms);
        }
        log_z = log_z + sums[0].ln();
        let centered_sum_moments = sums.iter().map(|&v| v / sums[0]).collect();

        Ok(ChainSolution {
            sigma,
            log_z,
            lam,
            scales,
            rho,
            factors,
            means,
            site_var,
            site_m4,
            centered_sum_moments,
        })
    }

    /// `cov(X_i, X_j)` for `j = i..=j_max` (0-based sites), by propagating
    /// the insertion `x_i - m_i` through the forward chain.
    pub fn covariance_row(&self, sol: &ChainSolution<T>, i: usize, j_max: usize) -> Vec<T> {
        let n = self.len();
        let z = self.grid.nodes();
        let mut eta: Vec<T> = (0..n)
            .map(|x| sol.lam[i][x] * (z[x] - sol.means[i]))
            .collect();
        let mut out = Vec::with_capacity(j_max + 1 - i);
        let mut tmp = vec![T::zero(); n];
        for j in i..=j_max {
            if j > i {
                self.apply(&eta, 1, &mut tmp);
                let inv = sol.scales[j].recip();
                for x in 0..n {
                    eta[x] = sol.factors[j][x] * tmp[x] * inv;
                }
                flush(&mut eta);
            }
            let num: Vec<T> = (0..n)
                .map(|x| eta[x] * (z[x] - sol.means[j]) * sol.rho[j][x])
                .collect();
            let den: Vec<T> = (0..n).map(|x| sol.lam[j][x] * sol.rho[j][x]).collect();
            out.push(pairwise_sum(&num) / pairwise_sum(&den));
        }
        out
    }

    /// Full covariance matrix (row-major, `K x K`).
    pub fn covariance_matrix(&self, sol: &ChainSolution<T>) -> Vec<T> {
        let k = self.model.size();
        let mut cov = vec![T::zero(); k * k];
        for i in 0..k {
            let row = self.covariance_row(sol, i, k - 1);
            for (d, v) in row.into_iter().enumerate() {
                cov[i * k + i + d] = v;
                cov[(i + d) * k + i] = v;
            }
        }
        cov
    }
}

/// Everything recorded by one full two-way sweep at fixed `sigma`.
#[derive(Clone, Debug)]
pub struct ChainSolution<T> {
    pub sigma: T,
    pub log_z: T,
    lam: Vec<Vec<T>>,
    scales: Vec<T>,
    rho: Vec<Vec<T>>,
    factors: Vec<Vec<T>>,
    pub means: Vec<T>,
    /// `E|X_i - m_i|^2` per site.
    pub site_var: Vec<T>,
    /// `E|X_i - m_i|^4` per site.
    pub site_m4: Vec<T>,
    /// `E[(sum_i (X_i - m_i))^p]` for `p = 0..=max_order`.
    pub centered_sum_moments: Vec<T>,
}

impl<T: Real> ChainSolution<T> {
    /// Normalised marginal weights of site `i` on the grid nodes.
    pub fn marginal(&self, i: usize) -> Vec<T> {
        let w: Vec<T> = self.lam[i]
            .iter()
            .zip(&self.rho[i])
            .map(|(a, b)| *a * *b)
            .collect();
        let total = pairwise_sum(&w);
        w.into_iter().map(|v| v / total).collect()
    }
}

/// One-pass covariances needed by callers: map of requested `(i, j)` pairs.
pub fn requested_covariances<T: Real>(
    op: &TransferOperator<T>,
    sol: &ChainSolution<T>,
    pairs: &[(usize, usize)],
) -> BTreeMap<(usize, usize), T> {
    let mut out = BTreeMap::new();
    for &(a, b) in pairs {
        let (i, j) = (a.min(b), a.max(b));
        let row = op.covariance_row(sol, i, j);
        out.insert((a, b), row[j - i]);
    }
    out
}

fn normalized<T: Real>(v: &[T]) -> Result<(Vec<T>, T)> {
    let max = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if !(max > T::zero() && max.is_finite()) {
        return Err(Error::Invariant(format!(
            "transfer message degenerated (sup = {max})"
        )));
    }
    let inv = max.recip();
    let floor = flush_floor::<T>();
    Ok((
        v.iter()
            .map(|&x| {
                let y = x * inv;
                if y.abs() < floor {
                    T::zero()
                } else {
                    y
                }
            })
            .collect(),
        max,
    ))
}

fn flush<T: Real>(v: &mut [T]) {
    let floor = flush_floor::<T>();
    for x in v.iter_mut() {
        if x.abs() < floor {
            *x = T::zero();
        }
    }
}

fn renormalize_complex_columns<T: Real>(
    msg: &mut [T],
    n: usize,
    c: usize,
    log_scale: &mut [T],
) -> Result<()> {
    let cols = 2 * c;
    let floor = flush_floor::<T>();
    for col in 0..c {
        let mut max = T::zero();
        for x in 0..n {
            let re = msg[x * cols + 2 * col];
            let im = msg[x * cols + 2 * col + 1];
            max = max.max(re.hypot(im));
        }
        if !(max > T::zero() && max.is_finite()) {
            return Err(Error::Invariant(format!(
                "complex transfer message degenerated (sup = {max})"
            )));
        }
        let inv = max.recip();
        for x in 0..n {
            for part in 0..2 {
                let v = &mut msg[x * cols + 2 * col + part];
                *v = *v * inv;
                if v.abs() < floor {
                    *v = T::zero();
                }
            }
        }
        log_scale[col] = log_scale[col] + max.ln();
    }
    Ok(())
}

fn binomials<T: Real>(n: usize) -> Vec<Vec<T>> {
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(n);
    for p in 0..n {
        let mut row = vec![T::one(); p + 1];
        for t in 1..p {
            row[t] = rows[p - 1][t - 1] + rows[p - 1][t];
        }
        rows.push(row);
    }
    rows
}
