//! Sweeps over system size and field that check the equivalence of
//! ensembles and its supporting bounds, with CSV output.
//!
//! Suprema over `sigma` are taken on a finite [`SigmaWindow`] (default 25
//! points on `[-3, 3]`); nothing here claims coverage beyond it.

mod output;
mod rate;
mod scans;

use serde::Serialize;

pub use output::{write_csv, StudyFiles};
pub use rate::{
    g_derivative_study, rate_study, rate_study_from_cells, sweep_cells, GDerivativeStudy, Quantity,
    RateCell, RateFit, RateStudy, Refit,
};
pub use scans::{
    conditional_bound_study, convexity_scan, decay_study, outer_decay_study, ConditionalSummary,
    ConvexityScan, DecayFit, OuterDecay,
};

use crate::ensembles::{DensitySettings, Ensemble};
use crate::error::{Error, Result};
use crate::model::LatticeModel;
use crate::quadrature::{build_grid_for_window, DEFAULT_NODES, DEFAULT_TARGET_TOL};

/// Uniform grid of fields `lo, ..., hi` with `n` points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SigmaWindow {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for SigmaWindow {
    fn default() -> Self {
        Self {
            lo: -3.0,
            hi: 3.0,
            n: 25,
        }
    }
}

impl SigmaWindow {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) || n == 0 || (n == 1 && lo != hi) {
            return Err(Error::Config(format!("invalid sigma window {lo},{hi},{n}")));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64)
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

/// Extra field range the grids cover beyond the window, for stencils and
/// Newton iterates.
pub const WINDOW_MARGIN: f64 = 0.01;
/// `Var(sum X) / K` must exceed this for repulsive couplings.
pub const VARIANCE_THRESHOLD: f64 = 0.1;

/// A model family (everything but `K`) and the numerical settings shared by
/// every study.
#[derive(Clone, Debug)]
pub struct Study {
    pub base: LatticeModel<f64>,
    pub grid_n: usize,
    pub target_tol: f64,
    pub settings: DensitySettings,
    pub window: SigmaWindow,
}

impl Study {
    pub fn new(base: LatticeModel<f64>) -> Self {
        Self {
            base,
            grid_n: DEFAULT_NODES,
            target_tol: DEFAULT_TARGET_TOL,
            settings: DensitySettings::default(),
            window: SigmaWindow::default(),
        }
    }

    pub fn with_window(mut self, window: SigmaWindow) -> Self {
        self.window = window;
        self
    }

    pub fn with_grid_n(mut self, n: usize) -> Self {
        self.grid_n = n;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.settings.delta = delta;
        self
    }

    /// Field magnitude every grid of the study must cover.
    pub fn field_cover(&self) -> f64 {
        self.window.max_abs().max(self.base.sigma().abs()) + WINDOW_MARGIN
    }

    pub fn model(&self, k: usize) -> Result<LatticeModel<f64>> {
        self.base.with_size(k)
    }

    pub fn ensemble(&self, k: usize) -> Result<Ensemble<f64>> {
        let model = self.model(k)?;
        let grid = build_grid_for_window(&model, self.grid_n, self.target_tol, self.field_cover())?;
        Ok(Ensemble::new(&model, &grid).with_settings(self.settings))
    }
}

/// For repulsive couplings the rate checks assume `Var(sum X) >= c K`;
/// verify it at one field before relying on it.
pub fn check_variance_condition(e: &Ensemble<f64>, sigma: f64) -> Result<f64> {
    let mom = e.moments(sigma, 2)?;
    let per_site = mom.var_sum / e.size() as f64;
    if e.model().coupling() < 0.0 && per_site < VARIANCE_THRESHOLD {
        return Err(Error::VarianceCondition {
            threshold: VARIANCE_THRESHOLD,
            observed: per_site,
        });
    }
    Ok(per_site)
}

/// Least-squares line `y = slope x + intercept` with its `r^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n || x.iter().chain(y).any(|v| !v.is_finite()) {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Fit of `ln y` against `ln x`; `None` unless every value is positive.
pub fn fit_log_log(x: &[f64], y: &[f64]) -> Option<LineFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

fn validate_k_list(k_list: &[usize], min_len: usize) -> Result<()> {
    if k_list.len() < min_len {
        return Err(Error::Config(format!(
            "need >= {min_len} K values, got {}",
            k_list.len()
        )));
    }
    if k_list.windows(2).any(|w| w[1] <= w[0]) || k_list[0] == 0 {
        return Err(Error::Config(format!(
            "K list must be positive and strictly ascending: {k_list:?}"
        )));
    }
    Ok(())
}
