use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The field carries mass on the excluded zero x-frequency.
    #[error("mean-zero constraint violated at transverse frequency l = {l} (|u(0, l)| = {magnitude:e})")]
    MeanZero { l: i64, magnitude: f64 },

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("undefined observability ratio: initial datum is zero")]
    ZeroDatum,

    #[error("numerical consistency error: {0}")]
    Numerical(String),

    #[error("infinite spectral constant: {0}")]
    InfiniteConstant(String),

    #[error("conjugate gradient did not converge after {iterations} iterations ({reason}); last residual {last:e}", last = history.last().copied().unwrap_or(f64::NAN))]
    NonConvergence {
        iterations: usize,
        reason: String,
        history: Vec<f64>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
