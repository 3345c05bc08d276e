//! Convexity, correlation decay, conditional-law and outer-integral scans.

use rayon::prelude::*;
use serde::Serialize;

use super::{fit_line, Study};
use crate::error::{Error, Result};
use crate::model::LatticeModel;
use crate::quadrature::{build_grid, conditional_site, TransferOperator};
use crate::sampler::ChainRng;

/// Second derivatives of `H_bar`, `H_K` over an `m` grid and of `A_ce` over
/// the study's sigma window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexityScan {
    #[serde(rename = "K")]
    pub k: usize,
    pub m_grid: Vec<f64>,
    pub h_bar_d2: Vec<f64>,
    #[serde(rename = "h_K_d2")]
    pub h_k_d2: Vec<f64>,
    /// Range of `h_bar_d2`.
    pub lower: f64,
    pub upper: f64,
    pub sigma_grid: Vec<f64>,
    pub a_ce_d2: Vec<f64>,
    pub a_ce_lower: f64,
    pub a_ce_upper: f64,
}

fn range(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Full reports (identities checked) on `m_grid`, and `A_ce''` on the window.
pub fn convexity_scan(study: &Study, k: usize, m_grid: &[f64]) -> Result<ConvexityScan> {
    if k < 2 {
        return Err(Error::Config(format!(
            "convexity scan needs K >= 2, got {k}"
        )));
    }
    if m_grid.is_empty() {
        return Err(Error::Config("empty m grid".into()));
    }
    let e = study.ensemble(k)?;
    let reports: Vec<_> = m_grid
        .par_iter()
        .map(|&m| e.report_at_m(m).map_err(|err| err.at_cell(k, m)))
        .collect::<Result<_>>()?;
    let sigma_grid = study.window.points();
    let a_ce_d2: Vec<f64> = sigma_grid
        .par_iter()
        .map(|&s| {
            let mom = e.moments(s, 2)?;
            let st = e.sigma_stencil(s)?;
            e.cramer_point(s, &st.centre, &mom)
                .map_err(|err| err.at_cell(k, s))?;
            Ok(mom.var_sum / k as f64 + st.second(e.settings().h_sigma) / k as f64)
        })
        .collect::<Result<_>>()?;
    let h_bar_d2: Vec<f64> = reports.iter().map(|r| r.h_bar_d2).collect();
    let (lower, upper) = range(&h_bar_d2);
    let (a_ce_lower, a_ce_upper) = range(&a_ce_d2);
    Ok(ConvexityScan {
        k,
        m_grid: m_grid.to_vec(),
        h_k_d2: reports.iter().map(|r| r.h_k_d2).collect(),
        h_bar_d2,
        lower,
        upper,
        sigma_grid,
        a_ce_d2,
        a_ce_lower,
        a_ce_upper,
    })
}

/// Exponential fit `|cov(X_c, X_{c+d})| ~ prefactor exp(-rate_c d)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    /// 0-based centre site `ceil(K/2) - 1`.
    pub centre: usize,
    pub distances: Vec<usize>,
    pub cov_values: Vec<f64>,
    pub rate_c: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    /// Smallest covariance over all pairs (FKG check for `J >= 0`).
    pub min_cov: f64,
}

/// Covariances below this are treated as numerically zero.
pub const COV_FLOOR: f64 = 1e-13;

/// Covariances from the centre site at the model's `sigma`, fitted over
/// distances `d >= 1` above [`COV_FLOOR`].
pub fn decay_study(
    model: &LatticeModel<f64>,
    grid_n: usize,
    target_tol: f64,
    max_distance: usize,
) -> Result<DecayFit> {
    let k = model.size();
    if k < 2 * max_distance || max_distance == 0 {
        return Err(Error::Config(format!(
            "decay study needs K >= 2 max_distance and max_distance >= 1 (K = {k})"
        )));
    }
    let grid = build_grid(model, grid_n, target_tol)?;
    let op = TransferOperator::new(model, &grid);
    let sol = op.solve(model.sigma(), 1)?;
    let centre = k.div_ceil(2) - 1;
    let row = op.covariance_row(&sol, centre, (centre + max_distance).min(k - 1));
    let distances: Vec<usize> = (0..row.len()).collect();
    let min_cov = op
        .covariance_matrix(&sol)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let (xs, ys): (Vec<f64>, Vec<f64>) = distances
        .iter()
        .zip(&row)
        .filter(|(&d, c)| d >= 1 && c.abs() > COV_FLOOR)
        .map(|(&d, c)| (d as f64, c.abs().ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::Degenerate(format!(
            "fewer than two covariances above {COV_FLOOR:e} (J = {}); nothing to fit",
            model.coupling()
        )));
    }
    let fit = fit_line(&xs, &ys).ok_or_else(|| Error::Degenerate("decay fit failed".into()))?;
    Ok(DecayFit {
        centre,
        distances,
        cov_values: row,
        rate_c: -fit.slope,
        prefactor: fit.intercept.exp(),
        r_squared: fit.r_squared,
        min_cov,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionalSummary {
    pub trials: usize,
    pub min: f64,
    pub max: f64,
    pub min_mean: f64,
    pub max_mean: f64,
}

/// Range of the conditional variance over random neighbours in `[-10, 10]^2`,
/// fields in `[-3, 3]` and interior sites.
pub fn conditional_bound_study(
    base: &LatticeModel<f64>,
    trials: usize,
    seed: u64,
) -> Result<ConditionalSummary> {
    if trials < 100 {
        return Err(Error::Config(format!("need >= 100 trials, got {trials}")));
    }
    let model = if base.size() < 3 {
        base.with_size(3)?
    } else {
        base.clone()
    };
    let grid = build_grid(&model.with_sigma(0.0), 128, 1e-12)?;
    let mut rng = ChainRng::new(seed);
    let k = model.size() as u64;
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_mean, mut max_mean) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..trials {
        let left = 20.0 * rng.uniform() - 10.0;
        let right = 20.0 * rng.uniform() - 10.0;
        let sigma = 6.0 * rng.uniform() - 3.0;
        let site = 1 + rng.below(k - 2) as usize;
        let c = conditional_site(&model, &grid, sigma, site, left, right);
        min = min.min(c.s_i2_sq);
        max = max.max(c.s_i2_sq);
        min_mean = min_mean.min(c.m_i2);
        max_mean = max_mean.max(c.m_i2);
    }
    Ok(ConditionalSummary {
        trials,
        min,
        max,
        min_mean,
        max_mean,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OuterDecay {
    #[serde(rename = "K")]
    pub k: usize,
    pub delta: f64,
    pub sigma: f64,
    pub max_abs_phi: f64,
    pub xi_at_max: f64,
    pub g0: f64,
}

/// Largest `|phi(xi)|` at 64 points of `[delta sqrt(K), 4 delta sqrt(K)]`.
pub fn outer_decay_study(study: &Study, k: usize, delta: f64, sigma: f64) -> Result<OuterDecay> {
    if k < 8 {
        return Err(Error::Config(format!(
            "outer decay study needs K >= 8, got {k}"
        )));
    }
    let e = study.ensemble(k)?;
    let mom = e.moments(sigma, 2)?;
    let a = delta * (k as f64).sqrt();
    let xis: Vec<f64> = (0..64).map(|j| a + 3.0 * a * j as f64 / 63.0).collect();
    let phi = e.char_fn_batch(sigma, mom.m, &xis)?;
    let (xi_at_max, max_abs_phi) = xis
        .iter()
        .zip(&phi)
        .map(|(&x, z)| (x, z.norm()))
        .fold((f64::NAN, -1.0), |acc, p| if p.1 > acc.1 { p } else { acc });
    let g0 = e.density_at_zero(sigma)?.g0;
    Ok(OuterDecay {
        k,
        delta,
        sigma,
        max_abs_phi,
        xi_at_max,
        g0,
    })
}
