//! Quadrature grids and the transfer-operator engine behind every
//! expectation under the grand canonical measure.
//!
//! Site indices in this module are 0-based.

mod conditional;
mod grid;
mod transfer;

use num_complex::Complex;

pub use conditional::{conditional_site, ConditionalSite};
pub use grid::{
    build_grid, build_grid_for_window, build_trapezoid_grid, gauss_hermite, gaussian_mass,
    required_truncation, QuadratureGrid, Scheme,
};
pub use transfer::{requested_covariances, ChainSolution, TransferOperator, TransferState};

use crate::ensembles::GceMoments;
use crate::error::{Error, Result};
use crate::model::LatticeModel;
use crate::scalar::Real;

/// Default number of Gauss-Hermite nodes.
pub const DEFAULT_NODES: usize = 128;
/// Default tail tolerance used to size the truncation.
pub const DEFAULT_TARGET_TOL: f64 = 1e-12;

/// `ln int exp(sum_i (sigma + tilt) x_i - H(x)) dx` at the model's `sigma`.
pub fn log_partition<T: Real>(
    model: &LatticeModel<T>,
    grid: &QuadratureGrid<T>,
    tilt: Complex<T>,
) -> Result<Complex<T>> {
    TransferOperator::new(model, grid).log_partition(model.sigma(), tilt)
}

/// Moments of the grand canonical measure at the model's `sigma`.
pub fn gce_moments<T: Real>(
    model: &LatticeModel<T>,
    grid: &QuadratureGrid<T>,
    max_order: usize,
) -> Result<GceMoments<T>> {
    if !(1..=4).contains(&max_order) {
        return Err(Error::Unsupported(format!(
            "max_order must be in 1..=4, got {max_order}"
        )));
    }
    let op = TransferOperator::new(model, grid);
    GceMoments::compute(&op, model.sigma(), max_order, &[])
}

/// `cov(X_i, X_j)` at the model's `sigma` (0-based sites).
pub fn covariance<T: Real>(
    model: &LatticeModel<T>,
    grid: &QuadratureGrid<T>,
    i: usize,
    j: usize,
) -> Result<T> {
    let k = model.size();
    if i >= k || j >= k {
        return Err(Error::Dimension {
            expected: k,
            got: i.max(j) + 1,
        });
    }
    let op = TransferOperator::new(model, grid);
    let sol = op.solve(model.sigma(), 1)?;
    let (a, b) = (i.min(j), i.max(j));
    Ok(op.covariance_row(&sol, a, b)[b - a])
}
