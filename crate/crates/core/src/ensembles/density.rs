//! Characteristic function of the normalised centred sum and its Fourier
//! inversion at zero.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use super::Ensemble;
use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Real};

/// xi values per transfer batch; fixed so results do not depend on thread count.
const XI_CHUNK: usize = 64;
/// Give up when `|phi|` has not decayed by `XI_LIMIT * sqrt(K)`.
const XI_LIMIT: f64 = 64.0;

/// Uniform Simpson grid on `[0, Xi]`; `inner_intervals` intervals reach `delta sqrt(K)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct XiGrid {
    pub step: f64,
    pub inner_intervals: usize,
    pub intervals: usize,
}

impl XiGrid {
    pub fn xi_max(&self) -> f64 {
        self.step * self.intervals as f64
    }

    fn nodes(&self) -> Vec<f64> {
        (0..=self.intervals).map(|k| self.step * k as f64).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "T: Real"))]
pub struct DensityResult<T> {
    pub g0: T,
    pub delta: T,
    /// `(1/2pi) int_{|xi| <= delta sqrt(K)} phi`.
    #[serde(serialize_with = "serialize_complex")]
    pub inner_value: Complex<T>,
    /// `|phi|` sampled on `[Xi, 2 Xi]`, times the length of both tails over `2 pi`.
    pub outer_bound: T,
    pub xi_step: T,
    pub xi_max: T,
    pub sigma: T,
    pub m: T,
    pub var_sum: T,
}

fn serialize_complex<S: serde::Serializer, T: Real>(
    z: &Complex<T>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    (z.re, z.im).serialize(s)
}

/// Composite Simpson weights `h/3 [1, 4, 2, ..., 4, 1]` over `intervals` (even) intervals.
fn simpson<T: Real>(values: &[T], step: T, intervals: usize) -> T {
    debug_assert!(intervals.is_multiple_of(2) && values.len() > intervals);
    let terms: Vec<T> = (0..=intervals)
        .map(|k| {
            let w = if k == 0 || k == intervals {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            T::lit(w) * values[k]
        })
        .collect();
    pairwise_sum(&terms) * step / T::lit(3.0)
}

impl<T: Real> Ensemble<T> {
    /// `phi(xi) = E exp(i xi K^{-1/2} sum_k (X_k - m))` for every `xi`.
    pub fn char_fn_batch(&self, sigma: T, m: T, xis: &[f64]) -> Result<Vec<Complex<T>>> {
        let k = self.size() as f64;
        let sqrt_k = k.sqrt();
        let op = self.operator();
        let base = op.log_partition(sigma, Complex::new(T::zero(), T::zero()))?;
        let chunks: Vec<&[f64]> = xis.chunks(XI_CHUNK).collect();
        let parts: Vec<Result<Vec<Complex<T>>>> = chunks
            .par_iter()
            .map(|chunk| {
                let tilts: Vec<Complex<T>> = chunk
                    .iter()
                    .map(|&xi| Complex::new(T::zero(), T::lit(xi / sqrt_k)))
                    .collect();
                let logs = op.log_partition_batch(sigma, &tilts)?;
                Ok(chunk
                    .iter()
                    .zip(logs)
                    .map(|(&xi, lz)| {
                        let shift = Complex::new(T::zero(), -T::lit(xi * sqrt_k) * m);
                        (lz - base + shift).exp()
                    })
                    .collect())
            })
            .collect();
        let mut out = Vec::with_capacity(xis.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    pub fn char_fn(&self, sigma: T, m: T, xi: f64) -> Result<Complex<T>> {
        Ok(self.char_fn_batch(sigma, m, &[xi])?[0])
    }

    /// Simpson grid adapted to `Var(sum X)/K` at the given point.
    pub fn xi_grid(&self, var_per_site: f64) -> XiGrid {
        let s = &self.settings;
        let sqrt_k = (self.size() as f64).sqrt();
        let inner_edge = s.delta * sqrt_k;
        let target_step = s.max_step.min(0.5 / var_per_site.sqrt());
        // Largest step <= target that puts delta sqrt(K) on an even node.
        let pairs = (inner_edge / (2.0 * target_step)).ceil().max(1.0);
        let step = inner_edge / (2.0 * pairs);
        let inner_intervals = 2 * pairs as usize;
        // Gaussian estimate of where |phi| reaches the tolerance, with margin.
        let gauss_edge = 1.1 * (2.0 * (1.0 / s.decay_tol).ln() / var_per_site).sqrt();
        let mut intervals = inner_intervals;
        if gauss_edge > inner_edge {
            intervals = 2 * (gauss_edge / (2.0 * step)).ceil() as usize;
        }
        XiGrid {
            step,
            inner_intervals,
            intervals,
        }
    }

    /// `g_{K,m}(0)` at the conjugate pair `(sigma, m(sigma))`.
    pub fn density_at_zero(&self, sigma: T) -> Result<DensityResult<T>> {
        let mom = self.moments(sigma, 2)?;
        let v = (mom.var_sum / T::lit(self.size() as f64)).to_f64_lossy();
        let grid = self.xi_grid(v);
        self.density_with_grid(sigma, mom.m, mom.var_sum, grid, true)
    }

    /// Same as [`Self::density_at_zero`] on a prescribed xi grid (used by
    /// finite-difference stencils so neighbouring points share a grid).
    pub fn density_on(&self, sigma: T, grid: XiGrid) -> Result<DensityResult<T>> {
        let mom = self.moments(sigma, 2)?;
        self.density_with_grid(sigma, mom.m, mom.var_sum, grid, false)
    }

    fn density_with_grid(
        &self,
        sigma: T,
        m: T,
        var_sum: T,
        mut grid: XiGrid,
        adapt: bool,
    ) -> Result<DensityResult<T>> {
        let tol = self.settings.decay_tol;
        let limit = XI_LIMIT * (self.size() as f64).sqrt();
        let phi = loop {
            let phi = self.char_fn_batch(sigma, m, &grid.nodes())?;
            let tail = phi[grid.intervals].norm().to_f64_lossy();
            if tail <= tol || !adapt {
                break phi;
            }
            if grid.xi_max() >= limit {
                return Err(Error::NonDecay {
                    tol,
                    xi_max: grid.xi_max(),
                });
            }
            let grown = 2 * ((grid.intervals as f64 * 1.5 / 2.0).ceil() as usize);
            grid.intervals = grown.min(2 * (limit / (2.0 * grid.step)).ceil() as usize);
        };
        let step = T::lit(grid.step);
        let re: Vec<T> = phi.iter().map(|z| z.re).collect();
        // phi(-xi) = conj(phi(xi)) for a real measure: the symmetric integral
        // of phi is twice the integral of Re(phi) over [0, Xi].
        let pi = T::PI();
        let g0 = simpson(&re, step, grid.intervals) / pi;
        let inner = simpson(&re, step, grid.inner_intervals) / pi;

        let xi_max = grid.xi_max();
        let probes: Vec<f64> = (0..8).map(|k| xi_max * (1.0 + k as f64 / 7.0)).collect();
        let tail = self.char_fn_batch(sigma, m, &probes)?;
        let tail_max = tail.iter().fold(T::zero(), |a, z| a.max(z.norm()));
        let outer_bound = T::lit(xi_max) * tail_max / pi;

        if !(g0 > T::zero()) {
            return Err(Error::Invariant(format!(
                "density at zero is not positive: {g0}"
            )));
        }
        Ok(DensityResult {
            g0,
            delta: T::lit(self.settings.delta),
            inner_value: Complex::new(inner, T::zero()),
            outer_bound,
            xi_step: step,
            xi_max: T::lit(xi_max),
            sigma,
            m,
            var_sum,
        })
    }
}
