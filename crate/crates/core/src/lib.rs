//! Grand canonical and canonical thermodynamics of a one-dimensional
//! unbounded-spin chain with nearest-neighbour coupling, computed by transfer
//! operators on a Gauss-Hermite grid, with Monte Carlo cross-checks.
//!
//! Numerical code is generic over [`scalar::Real`] (`f32`, `f64`); the
//! aliases below fix `f64`.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensembles;
pub mod error;
pub mod experiments;
pub mod model;
pub mod quadrature;
pub mod sampler;
pub mod scalar;

pub use error::{Error, Result};

pub type Model = model::LatticeModel<f64>;
pub type Potential = model::SingleSitePotential<f64>;
pub type Grid = quadrature::QuadratureGrid<f64>;
pub type Transfer = quadrature::TransferOperator<f64>;
pub type Moments = ensembles::GceMoments<f64>;
pub type Thermo = ensembles::Ensemble<f64>;
pub type Report = ensembles::ThermoReport<f64>;
pub type Density = ensembles::DensityResult<f64>;
