//! Canonical free energy and the coarse-grained Hamiltonian.
//!
//! Both follow from the grand canonical side plus `ln g_{K,m}(0) / K`.
//! Derivatives add the exact grand canonical part to central differences of
//! `ln g0 / K`, with every stencil point sharing one xi grid.

use serde::Serialize;

use super::{DensityResult, Ensemble};
use crate::error::{Error, Result};
use crate::model::LatticeModel;
use crate::scalar::{log_sum_exp, Real};

/// `ln g0` at three stencil points and the central density.
pub(crate) struct Stencil<T> {
    pub lower: T,
    pub centre: DensityResult<T>,
    pub upper: T,
}

impl<T: Real> Stencil<T> {
    pub fn first(&self, h: T) -> T {
        (self.upper - self.lower) / (T::lit(2.0) * h)
    }

    pub fn second(&self, h: T) -> T {
        (self.upper - T::lit(2.0) * self.centre.g0.ln() + self.lower) / (h * h)
    }
}

impl<T: Real> Ensemble<T> {
    /// Centred `ln g0` stencil in sigma.
    pub(crate) fn sigma_stencil(&self, sigma: T) -> Result<Stencil<T>> {
        let h = T::lit(self.settings.h_sigma);
        let centre = self.density_at_zero(sigma)?;
        let grid = self.xi_grid_of(&centre);
        let lower = self.density_on(sigma - h, grid)?.g0.ln();
        let upper = self.density_on(sigma + h, grid)?.g0.ln();
        Ok(Stencil {
            lower,
            centre,
            upper,
        })
    }

    /// Centred `ln g0(sigma(m))` stencil in m; returns the conjugate fields too.
    pub(crate) fn m_stencil(&self, m: T, sigma: T, var_sum: T) -> Result<(Stencil<T>, [T; 2])> {
        let h = T::lit(self.settings.h_m);
        let centre = self.density_at_zero(sigma)?;
        let grid = self.xi_grid_of(&centre);
        let slope = self.k() / var_sum;
        let s_lo = self.sigma_of_m(m - h, Some(sigma - h * slope))?;
        let s_hi = self.sigma_of_m(m + h, Some(sigma + h * slope))?;
        let lower = self.density_on(s_lo, grid)?.g0.ln();
        let upper = self.density_on(s_hi, grid)?.g0.ln();
        Ok((
            Stencil {
                lower,
                centre,
                upper,
            },
            [s_lo, s_hi],
        ))
    }

    fn xi_grid_of(&self, d: &DensityResult<T>) -> super::XiGrid {
        let step = d.xi_step.to_f64_lossy();
        let sqrt_k = (self.size() as f64).sqrt();
        let inner_intervals = (self.settings.delta * sqrt_k / step).round() as usize;
        let intervals = (d.xi_max.to_f64_lossy() / step).round() as usize;
        super::XiGrid {
            step,
            inner_intervals,
            intervals,
        }
    }

    /// `(A_ce, dA_ce/dsigma, d^2 A_ce/dsigma^2)` with `A_ce = A_gce + ln g0 / K`.
    pub fn a_ce(&self, sigma: T) -> Result<(T, T, T)> {
        let (a, d1, d2) = self.a_gce(sigma)?;
        let st = self.sigma_stencil(sigma)?;
        let h = T::lit(self.settings.h_sigma);
        let k = self.k();
        Ok((
            a + st.centre.g0.ln() / k,
            d1 + st.first(h) / k,
            d2 + st.second(h) / k,
        ))
    }

    /// `(H_bar, H_bar', H_bar'')` at mean spin `m`, from `H_bar = H_K - ln g0 / K`.
    pub fn h_bar(&self, m: T) -> Result<(T, T, T)> {
        let sigma = self.sigma_of_m(m, None)?;
        let mom = self.moments(sigma, 2)?;
        let k = self.k();
        let h_k = sigma * m - mom.log_z / k;
        let (st, _) = self.m_stencil(m, sigma, mom.var_sum)?;
        let h = T::lit(self.settings.h_m);
        Ok((
            h_k - st.centre.g0.ln() / k,
            sigma - st.first(h) / k,
            k / mom.var_sum - st.second(h) / k,
        ))
    }
}

/// Mesh of the brute-force constrained integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DirectResolution {
    /// Each integrated coordinate ranges over `m +- half_width`.
    pub half_width: f64,
    pub step: f64,
}

impl Default for DirectResolution {
    fn default() -> Self {
        Self {
            half_width: 10.0,
            step: 0.05,
        }
    }
}

/// `-(1/K) ln int_{sum x = K m} exp(-H) dH^{K-1}` by a dense trapezoid rule
/// over the first `K - 1` coordinates (area factor `sqrt(K)`).
///
/// Independent of the transfer engine; only affordable for `K <= 4`.
pub fn h_bar_direct<T: Real>(model: &LatticeModel<T>, m: T, res: DirectResolution) -> Result<T> {
    let k = model.size();
    if k > 4 {
        return Err(Error::Unsupported(format!(
            "direct constrained integral needs K <= 4, got K = {k}"
        )));
    }
    if !(res.step > 0.0 && res.half_width > 0.0) {
        return Err(Error::Config(format!("invalid direct resolution {res:?}")));
    }
    if k == 1 {
        return model.hamiltonian(&[m]);
    }
    let n = (2.0 * res.half_width / res.step).round() as usize + 1;
    let axis: Vec<T> = (0..n)
        .map(|a| m + T::lit(-res.half_width + res.step * a as f64))
        .collect();
    let free = k - 1;
    let total = T::lit(k as f64) * m;
    let mut logs = Vec::with_capacity(n.pow(free as u32));
    let mut idx = vec![0usize; free];
    let mut x = vec![T::zero(); k];
    loop {
        for (slot, &a) in x.iter_mut().zip(&idx) {
            *slot = axis[a];
        }
        let partial: T = x[..free].iter().copied().sum();
        x[free] = total - partial;
        logs.push(-model.hamiltonian(&x)?);
        // Odometer over the tensor grid.
        let mut d = 0;
        while d < free {
            idx[d] += 1;
            if idx[d] < n {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == free {
            break;
        }
    }
    let kf = T::lit(k as f64);
    let log_int = log_sum_exp(&logs) + T::lit(free as f64 * res.step.ln()) + kf.sqrt().ln();
    Ok(-log_int / kf)
}
