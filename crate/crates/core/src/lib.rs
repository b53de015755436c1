//! Trade-elasticity estimation from monthly export panels.
//!
//! The crate covers the full pipeline: ingesting trade, exchange-rate, and
//! commodity-price series into a log panel; constructing third-country
//! exchange-rate instruments by correlation screening with geographic
//! exclusion; fixed-effects 2SLS with Bartlett-kernel HAC inference and
//! weak/under/over-identification diagnostics; recovery of demand and
//! supply elasticities from the reduced-form coefficients; and a synthetic
//! data generator with a Monte Carlo harness that validates every estimator
//! against known parameters.
//!
//! All numerics are generic over the scalar type (any [`Scalar`], i.e. `f32`
//! or `f64`); the concrete aliases below fix `f64`, which the CLI uses.

pub mod diagnostics;
pub mod dgp;
pub mod dist;
pub mod error;
pub mod estimator;
pub mod instruments;
pub mod linalg;
pub mod month;
pub mod panel;
pub mod report;
mod scalar;
pub mod structural;

pub use error::{Error, Result};
pub use month::Month;
pub use scalar::Scalar;

/// `f64` aliases for the main pipeline types.
pub type Panel64 = panel::Panel<f64>;
pub type PanelObservation64 = panel::PanelObservation<f64>;
pub type Design64 = estimator::Design<f64>;
pub type EstimationResult64 = estimator::EstimationResult<f64>;
pub type DiagnosticsBundle64 = diagnostics::DiagnosticsBundle<f64>;
pub type SupplyResult64 = structural::SupplyResult<f64>;
pub type DgpParams64 = dgp::DgpParams<f64>;
pub type McSummary64 = dgp::McSummary<f64>;

/// `f32` aliases for reduced-precision runs.
pub type Panel32 = panel::Panel<f32>;
pub type Design32 = estimator::Design<f32>;
pub type EstimationResult32 = estimator::EstimationResult<f32>;
pub type DgpParams32 = dgp::DgpParams<f32>;
