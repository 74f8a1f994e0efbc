use thiserror::Error;

/// A single violated parameter constraint.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamViolation {
    #[error("gamma must be positive (got {0})")]
    NonPositiveGamma(f64),
    #[error("eta must lie in [0, 1] (got {0})")]
    EfficiencyOutOfRange(f64),
    #[error("{name} must be non-negative (got {value})")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("{name} must be finite (got {value})")]
    NonFinite { name: &'static str, value: f64 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", format_violations(.0))]
    InvalidParams(Vec<ParamViolation>),

    #[error("unstable: chi^2 >= delta^2 + gamma^2 ({chi}^2 >= {delta}^2 + {gamma}^2)")]
    Unstable { chi: f64, delta: f64, gamma: f64 },

    #[error("steady-state solver failed to converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: u64 },

    #[error("variance must be positive to express in dB (got {0})")]
    NonPositiveVariance(f64),

    #[error("chi_prime must be non-negative (got {0})")]
    NegativeChiPrime(f64),

    #[error("negative radicand {radicand:.3e} in closed-form variance at chi_prime = {chi_prime}")]
    NegativeRadicand { chi_prime: f64, radicand: f64 },

    #[error("time step {dt} exceeds the stability guard {max_dt}")]
    StepTooLarge { dt: f64, max_dt: f64 },

    #[error("covariance lost positive definiteness at t = {t}")]
    PositivityLost { t: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("measurement record incompatible with filter parameters: {0}")]
    ParamsMismatch(String),

    #[error("no stable detuning bracket could be constructed")]
    NoStableDetuning,

    #[error("invalid sweep spec: {0}")]
    SweepSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[ParamViolation]) -> String {
    v.iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
