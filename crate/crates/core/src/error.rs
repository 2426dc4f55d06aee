use thiserror::Error;

/// Errors raised by the model, fitting and calibration routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular response at angular frequency {omega:e} rad/s: {what}")]
    Singular { omega: f64, what: &'static str },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("search span too small: optimum found on the boundary at ({x:.4}, {y:.4}) normalized units")]
    SpanTooSmall { x: f64, y: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("at current {current:e} A, frequency {freq_hz:e} Hz: {source}")]
    At {
        current: f64,
        freq_hz: f64,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the numerics rather than by the caller's input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::At { source, .. } => source.is_numerical(),
            other => matches!(
                other,
                Error::Singular { .. } | Error::DivisionByZero(_) | Error::Numerical(_)
            ),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
