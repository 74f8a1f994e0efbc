//! Conditional and unconditional quadrature squeezing of a detuned,
//! parametrically driven mechanical oscillator under continuous weak
//! measurement.
//!
//! The crate computes steady-state conditional covariances (the fixed
//! point of the conditioning Riccati flow), their closed-form optima in
//! the high-conditioning limit, numerically optimized detunings and
//! measurement strengths, stochastic trajectories of the conditional
//! means with linear feedback, and parameter sweeps suitable for
//! regenerating the reference figures.

pub mod analytic;
pub mod dynamics;
pub mod error;
pub mod figures;
pub mod model;
pub mod optimize;
pub mod steadystate;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{derived, to_db, DerivedQuantities, PhysicalParams, SystemParams, ValidatedParams};
pub use optimize::{optimal_detuning, optimal_measurement, OptimizationResult};
pub use steadystate::{
    bae_variance, conditional_steady_state, drift_matrix, principal_variances,
    unconditional_steady_state, v0, CovarianceState, SteadyState,
};
