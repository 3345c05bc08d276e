//! Convergence rates of `A_ce` to `A_gce` and the density-at-zero proxies.

use rayon::prelude::*;
use serde::Serialize;

use super::{fit_log_log, validate_k_list, LineFit, SigmaWindow, Study, VARIANCE_THRESHOLD};
use crate::ensembles::Ensemble;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Quantity {
    C0,
    C1,
    C2,
}

/// Everything measured at one `(K, sigma)` cell of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateCell {
    #[serde(rename = "K")]
    pub k: usize,
    pub sigma: f64,
    pub m: f64,
    pub var_per_site: f64,
    pub a_gce: f64,
    pub a_ce: f64,
    pub g0: f64,
    /// `g0` at `sigma - h` and `sigma + h`.
    pub g0_lower: f64,
    pub g0_upper: f64,
    /// `|A_gce - A_ce|` and its first two sigma-derivatives.
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// `E[(sum (X_i - m_i))^3] / K`.
    pub p3_per_site: f64,
    pub max_site_m2: f64,
    pub max_site_m4: f64,
    pub outer_bound: f64,
}

fn evaluate_cell(e: &Ensemble<f64>, sigma: f64) -> Result<RateCell> {
    let k = e.size();
    let kf = k as f64;
    let mom = e.moments(sigma, 3)?;
    let var_per_site = mom.var_sum / kf;
    if e.model().coupling() < 0.0 && var_per_site < VARIANCE_THRESHOLD {
        return Err(Error::VarianceCondition {
            threshold: VARIANCE_THRESHOLD,
            observed: var_per_site,
        });
    }
    let st = e.sigma_stencil(sigma)?;
    let point = e.cramer_point(sigma, &st.centre, &mom)?;
    let h = e.settings().h_sigma;
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(RateCell {
        k,
        sigma,
        m: mom.m,
        var_per_site,
        a_gce: point.a_gce,
        a_ce: point.a_ce,
        g0: point.g0,
        g0_lower: st.lower.exp(),
        g0_upper: st.upper.exp(),
        c0: (point.a_gce - point.a_ce).abs(),
        c1: st.first(h).abs() / kf,
        c2: st.second(h).abs() / kf,
        p3_per_site: mom.centered_sum_p3.unwrap_or(f64::NAN) / kf,
        max_site_m2: max(&mom.site_var),
        max_site_m4: max(&mom.site_m4),
        outer_bound: st.centre.outer_bound,
    })
}

/// Evaluates every `(K, sigma)` cell; results are ordered by `K` then sigma
/// regardless of scheduling.
pub fn sweep_cells(study: &Study, k_list: &[usize]) -> Result<Vec<RateCell>> {
    let sigmas = study.window.points();
    let ensembles: Vec<Ensemble<f64>> = k_list
        .iter()
        .map(|&k| study.ensemble(k))
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, f64)> = (0..k_list.len())
        .flat_map(|a| sigmas.iter().map(move |&s| (a, s)))
        .collect();
    tasks
        .par_iter()
        .map(|&(a, s)| evaluate_cell(&ensembles[a], s).map_err(|e| e.at_cell(k_list[a], s)))
        .collect()
}

/// Refit after dropping the smallest `K`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Refit {
    pub dropped_k: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub quantity_tag: Quantity,
    #[serde(rename = "K_list")]
    pub k_list: Vec<usize>,
    pub sup_diff: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub refit: Option<Refit>,
    /// `max_K (K sup_diff) / (K_0 sup_diff_0)`.
    pub scaled_max_ratio: f64,
}

/// Below this `r^2` the smallest `K` is treated as pre-asymptotic.
pub const REFIT_R_SQUARED: f64 = 0.9;

impl RateFit {
    pub fn new(quantity_tag: Quantity, k_list: Vec<usize>, sup_diff: Vec<f64>) -> Self {
        let ks: Vec<f64> = k_list.iter().map(|&k| k as f64).collect();
        let nan = LineFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            r_squared: f64::NAN,
        };
        let fit = fit_log_log(&ks, &sup_diff).unwrap_or(nan);
        let refit = if fit.r_squared < REFIT_R_SQUARED && ks.len() > 2 {
            fit_log_log(&ks[1..], &sup_diff[1..]).map(|f| Refit {
                dropped_k: k_list[0],
                slope: f.slope,
                intercept: f.intercept,
                r_squared: f.r_squared,
            })
        } else {
            None
        };
        let scaled: Vec<f64> = ks.iter().zip(&sup_diff).map(|(k, d)| k * d).collect();
        let scaled_max_ratio = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max) / scaled[0];
        Self {
            quantity_tag,
            k_list,
            sup_diff,
            slope: fit.slope,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            refit,
            scaled_max_ratio,
        }
    }

    /// The refit when one was made, the full fit otherwise.
    pub fn effective(&self) -> (f64, f64) {
        match self.refit {
            Some(r) => (r.slope, r.r_squared),
            None => (self.slope, self.r_squared),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RateStudy {
    pub window: SigmaWindow,
    pub k_list: Vec<usize>,
    pub cells: Vec<RateCell>,
    pub c0: RateFit,
    pub c1: RateFit,
    pub c2: RateFit,
}

fn sup_by_k(cells: &[RateCell], k_list: &[usize], f: impl Fn(&RateCell) -> f64) -> Vec<f64> {
    k_list
        .iter()
        .map(|&k| {
            cells
                .iter()
                .filter(|c| c.k == k)
                .map(&f)
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Sup-norm differences between the two free energies and their first two
/// sigma-derivatives over the study window, for each `K`, with log-log fits.
pub fn rate_study(study: &Study, k_list: &[usize]) -> Result<RateStudy> {
    validate_k_list(k_list, 4)?;
    let cells = sweep_cells(study, k_list)?;
    Ok(rate_study_from_cells(study.window, k_list, cells))
}

pub fn rate_study_from_cells(
    window: SigmaWindow,
    k_list: &[usize],
    cells: Vec<RateCell>,
) -> RateStudy {
    let fit =
        |q, f: fn(&RateCell) -> f64| RateFit::new(q, k_list.to_vec(), sup_by_k(&cells, k_list, f));
    RateStudy {
        window,
        k_list: k_list.to_vec(),
        c0: fit(Quantity::C0, |c| c.c0),
        c1: fit(Quantity::C1, |c| c.c1),
        c2: fit(Quantity::C2, |c| c.c2),
        cells,
    }
}

/// Bounds on `g_{K,m}(0)` and its sigma-differences per `K`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GDerivativeStudy {
    #[serde(rename = "K_list")]
    pub k_list: Vec<usize>,
    pub g0_min: Vec<f64>,
    pub g0_max: Vec<f64>,
    /// `max_sigma |g(sigma + h) - g(sigma - h)| / 2h`.
    pub d1_max: Vec<f64>,
    /// `max_sigma |g(sigma + h) - 2 g(sigma) + g(sigma - h)| / h^2`.
    pub d2_max: Vec<f64>,
    pub d1_exponent: f64,
    pub d2_exponent: f64,
}

impl GDerivativeStudy {
    pub fn from_cells(k_list: &[usize], cells: &[RateCell], h: f64) -> Self {
        let min_by = |f: fn(&RateCell) -> f64| -> Vec<f64> {
            k_list
                .iter()
                .map(|&k| {
                    cells
                        .iter()
                        .filter(|c| c.k == k)
                        .map(f)
                        .fold(f64::INFINITY, f64::min)
                })
                .collect()
        };
        let g0_min = min_by(|c| c.g0);
        let g0_max = sup_by_k(cells, k_list, |c| c.g0);
        let d1_max = sup_by_k(cells, k_list, |c| {
            (c.g0_upper - c.g0_lower).abs() / (2.0 * h)
        });
        let d2_max = sup_by_k(cells, k_list, |c| {
            (c.g0_upper - 2.0 * c.g0 + c.g0_lower).abs() / (h * h)
        });
        let ks: Vec<f64> = k_list.iter().map(|&k| k as f64).collect();
        let exponent = |v: &[f64]| fit_log_log(&ks, v).map_or(f64::NAN, |f| f.slope);
        Self {
            k_list: k_list.to_vec(),
            d1_exponent: exponent(&d1_max),
            d2_exponent: exponent(&d2_max),
            g0_min,
            g0_max,
            d1_max,
            d2_max,
        }
    }
}

/// `g0` range and difference growth over the study window for each `K`.
pub fn g_derivative_study(study: &Study, k_list: &[usize]) -> Result<GDerivativeStudy> {
    validate_k_list(k_list, 4)?;
    let cells = sweep_cells(study, k_list)?;
    Ok(GDerivativeStudy::from_cells(
        k_list,
        &cells,
        study.settings.h_sigma,
    ))
}
