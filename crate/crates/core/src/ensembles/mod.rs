//! Thermodynamics of both ensembles from the transfer engine.
//!
//! The grand canonical free energy and its derivatives come from exact
//! (quadrature-level) moments. The canonical side is reached through the
//! exponential-tilting identity `A_ce - A_gce = ln g_{K,m}(0) / K`, where
//! `g_{K,m}` is the density of `K^{-1/2} sum_i (X_i - m)` obtained by Fourier
//! inversion of its characteristic function.

mod coarse;
mod density;
mod report;

use std::collections::BTreeMap;

use serde::Serialize;

pub use coarse::{h_bar_direct, DirectResolution};
pub use density::{DensityResult, XiGrid};
pub use report::{
    a_ce, a_gce, char_fn, density_at_zero, h_bar, legendre_hk, sigma_of_m, thermo_report,
    CramerPoint, ThermoReport, IDENTITY_TOL,
};

use crate::error::{Error, Result};
use crate::model::LatticeModel;
use crate::quadrature::{requested_covariances, ChainSolution, QuadratureGrid, TransferOperator};
use crate::scalar::Real;

/// Quadrature-level moments of the grand canonical measure.
#[derive(Clone, Debug, Serialize)]
pub struct GceMoments<T> {
    pub sigma: T,
    pub m_per_site: Vec<T>,
    pub m: T,
    pub var_sum: T,
    /// Requested covariances keyed by 0-based `(i, j)`.
    #[serde(skip)]
    pub cov: BTreeMap<(usize, usize), T>,
    pub centered_sum_p3: Option<T>,
    pub centered_sum_p4: Option<T>,
    /// `E|X_i - m_i|^2` per site.
    pub site_var: Vec<T>,
    /// `E|X_i - m_i|^4` per site.
    pub site_m4: Vec<T>,
    pub log_z: T,
}

impl<T: Real> GceMoments<T> {
    pub fn compute(
        op: &TransferOperator<T>,
        sigma: T,
        max_order: usize,
        pairs: &[(usize, usize)],
    ) -> Result<Self> {
        let order = max_order.max(2);
        let sol = op.solve(sigma, order)?;
        let cov = requested_covariances(op, &sol, pairs);
        Ok(Self::from_solution(&sol, max_order, cov))
    }

    fn from_solution(
        sol: &ChainSolution<T>,
        max_order: usize,
        cov: BTreeMap<(usize, usize), T>,
    ) -> Self {
        let k = T::lit(sol.means.len() as f64);
        let m = crate::scalar::pairwise_sum(&sol.means) / k;
        let moments = &sol.centered_sum_moments;
        Self {
            sigma: sol.sigma,
            m_per_site: sol.means.clone(),
            m,
            var_sum: moments[2],
            cov,
            centered_sum_p3: (max_order >= 3).then(|| moments[3]),
            centered_sum_p4: (max_order >= 4).then(|| moments[4]),
            site_var: sol.site_var.clone(),
            site_m4: sol.site_m4.clone(),
            log_z: sol.log_z,
        }
    }
}

/// Knobs of the Fourier inversion and the finite-difference stencils.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensitySettings {
    /// Inner/outer split `|xi| = delta sqrt(K)`; recorded, the integral runs past it.
    pub delta: f64,
    /// `|phi(Xi)|` threshold that ends the xi integral.
    pub decay_tol: f64,
    /// Upper bound on the xi step.
    pub max_step: f64,
    /// Step of the sigma stencils for `A_ce` derivatives.
    pub h_sigma: f64,
    /// Step of the m stencils for `H_bar` derivatives.
    pub h_m: f64,
}

impl Default for DensitySettings {
    fn default() -> Self {
        Self {
            delta: 1.0,
            decay_tol: 1e-12,
            max_step: 0.05,
            h_sigma: 1e-3,
            h_m: 1e-3,
        }
    }
}

/// Residual at which `sigma_of_m` stops.
pub const CONJUGACY_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 100;

/// A model, its grid and kernel, and the density settings: the object all
/// thermodynamic evaluations go through.
#[derive(Clone, Debug)]
pub struct Ensemble<T> {
    op: TransferOperator<T>,
    settings: DensitySettings,
}

impl<T: Real> Ensemble<T> {
    pub fn new(model: &LatticeModel<T>, grid: &QuadratureGrid<T>) -> Self {
        Self {
            op: TransferOperator::new(model, grid),
            settings: DensitySettings::default(),
        }
    }

    pub fn with_settings(mut self, settings: DensitySettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn settings(&self) -> &DensitySettings {
        &self.settings
    }

    pub fn model(&self) -> &LatticeModel<T> {
        self.op.model()
    }

    pub fn grid(&self) -> &QuadratureGrid<T> {
        self.op.grid()
    }

    pub fn operator(&self) -> &TransferOperator<T> {
        &self.op
    }

    pub fn size(&self) -> usize {
        self.model().size()
    }

    fn k(&self) -> T {
        T::lit(self.size() as f64)
    }

    pub fn moments(&self, sigma: T, max_order: usize) -> Result<GceMoments<T>> {
        GceMoments::compute(&self.op, sigma, max_order, &[])
    }

    /// `(A_gce, dA_gce/dsigma, d^2 A_gce/dsigma^2)` from exact moments.
    pub fn a_gce(&self, sigma: T) -> Result<(T, T, T)> {
        let mom = self.moments(sigma, 2)?;
        Ok((mom.log_z / self.k(), mom.m, mom.var_sum / self.k()))
    }

    /// The unique `sigma` with `dA_gce/dsigma = m`, by Newton safeguarded
    /// with bisection inside the grid's field window.
    pub fn sigma_of_m(&self, m: T, guess: Option<T>) -> Result<T> {
        let cover = self.grid().field_cover();
        let (mut lo, mut hi) = (-cover, cover);
        let mut sigma = guess.unwrap_or(m).max(lo).min(hi);
        let tol = T::lit(CONJUGACY_TOL);
        let two = T::lit(2.0);
        for _ in 0..NEWTON_MAX_ITER {
            let (_, d1, d2) = self.a_gce(sigma)?;
            let f = d1 - m;
            if f.abs() <= tol {
                // One polishing step; the residual is already below tolerance.
                let polished = sigma - f / d2;
                if polished > lo && polished < hi {
                    let (_, p1, _) = self.a_gce(polished)?;
                    if (p1 - m).abs() <= f.abs() {
                        return Ok(polished);
                    }
                }
                return Ok(sigma);
            }
            if f > T::zero() {
                hi = sigma;
            } else {
                lo = sigma;
            }
            if hi - lo <= T::epsilon() * (T::one() + sigma.abs()) {
                break;
            }
            let newton = sigma - f / d2;
            sigma = if newton > lo && newton < hi {
                newton
            } else {
                (lo + hi) / two
            };
        }
        Err(Error::Convergence {
            iterations: NEWTON_MAX_ITER,
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
        })
    }

    /// Legendre transform `H_K(m) = sigma m - A_gce(sigma)` at `sigma = sigma(m)`,
    /// with `H_K'' = K / Var(sum X)`. Returns `(value, d2, sigma)`.
    pub fn legendre_hk(&self, m: T) -> Result<(T, T, T)> {
        let sigma = self.sigma_of_m(m, None)?;
        let (a, _, d2) = self.a_gce(sigma)?;
        Ok((sigma * m - a, d2.recip(), sigma))
    }
}
