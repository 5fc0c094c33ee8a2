use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("weight exponent {mu} is not integrable near the boundary (need mu > -1)")]
    NonIntegrableExponent { mu: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge in {iterations} iterations (last residual {residual:.3e})")]
    IterationLimit {
        what: &'static str,
        iterations: usize,
        residual: f64,
        /// Last iterate, when the failing routine produces a field.
        last: Option<Trace>,
        history: Trace,
    },

    #[error("barrier construction failed: {0}")]
    Barrier(String),

    #[error("nonlinearity violates its envelope: {0}")]
    SpecInvalid(String),

    #[error("no rectangle constant C <= 2^20 closes the estimates; blocked by {0}")]
    ClosureFailure(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A vector carried by an error; `Debug` prints only its length.
#[derive(Clone, PartialEq, Default)]
pub struct Trace(pub Vec<f64>);

impl std::fmt::Debug for Trace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Trace(len={})", self.0.len())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
