use thiserror::Error;

/// Errors raised by the solvers and checkers.
///
/// Payload values are carried as `f64` regardless of the scalar type the
/// computation ran in, so reports stay uniform.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel evaluated at time gap {gap:e} below its validity window t_min = {t_min:e}")]
    KernelWindow { gap: f64, t_min: f64 },

    #[error("initial-datum regularization failed after {iterations} iterations (residual {residual:e}): {reason}")]
    RegularizationFailure {
        iterations: usize,
        residual: f64,
        reason: String,
    },

    #[error("Picard iteration did not contract after {iterations} iterations (last ratio {last_ratio:e})")]
    ContractionFailure {
        iterations: usize,
        last_ratio: f64,
        sup_diffs: Vec<f64>,
        ratios: Vec<f64>,
    },

    #[error("stability failure at t = {t:e}: value {value:e} at node {node}")]
    StabilityFailure { t: f64, node: usize, value: f64 },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("subsolution construction failed: {reason}")]
    ConstructionFailure { reason: String, trace: Vec<f64> },

    #[error("epsilon ladder failed at rung {rung} (epsilon = {epsilon:e}): {source}")]
    LadderFailure {
        rung: usize,
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("internal consistency violation: {0}")]
    Internal(String),

    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
