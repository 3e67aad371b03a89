use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({reason})")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("degenerate boundary: start level equals the boundary level")]
    DegenerateBoundary,

    #[error("infeasible: initial wealth {w0} is below the minimal feasible wealth {min_w0}")]
    Infeasible { w0: f64, min_w0: f64 },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(&'static str),

    #[error("accuracy failure in {what} (residual estimate {residual:e})")]
    Accuracy { what: &'static str, residual: f64 },

    #[error("root not bracketed in {0}")]
    NotBracketed(&'static str),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::Domain { name, value, reason }
}
