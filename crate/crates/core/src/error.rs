use thiserror::Error;

/// Errors raised by the simulation, closed-form and optimization routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter or state violates its invariant.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The adaptive integrator could not make progress.
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    /// A bracketed root solve was given an interval without a sign change.
    #[error("no sign change in bracket [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    /// The closed-form cost is not available for these inputs.
    #[error("outside analytic regime: {0}")]
    Regime(String),

    /// The closed-form cost diverges (e.g. an infinitely long controlled phase).
    #[error("cost diverges: {0}")]
    Divergent(String),

    /// Reading or writing an export failed.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
