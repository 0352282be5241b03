use thiserror::Error;

/// Errors produced by the rate-function library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The θ-method LDP only holds for h ≤ 1/(2L).
    #[error("step restriction violated: h = {h} exceeds h ≤ 1/(2L) = {bound}")]
    StepRestriction { h: f64, bound: f64 },

    /// A non-finite action or gradient was met during minimization.
    #[error("numerical failure: {what}")]
    NumericalFailure { what: String, iterate: Vec<f64> },

    /// The implicit θ-step fixed-point iteration did not settle.
    #[error("implicit step did not converge after {iterations} iterations (residual {residual:e})")]
    ImplicitStep { iterations: usize, residual: f64 },

    /// A study aborted at a specific (h, x) coordinate.
    #[error("study failed at h = {h}, x = {x:?}: {source}")]
    Study {
        h: f64,
        x: Vec<f64>,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NumericalFailure { .. } | Error::ImplicitStep { .. } => true,
            Error::Study { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
