use thiserror::Error;

/// Errors raised by the computation modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("level {level} is degenerate with level {other} (gap {gap_hz:.3e} Hz); derivative is ill-defined")]
    DegenerateLevels { level: usize, other: usize, gap_hz: f64 },

    #[error("singular geometry: point lies on the wire axis")]
    SingularGeometry,

    #[error("regime unreachable: {0}")]
    UnreachableRegime(String),

    #[error("spins are undetectable: polarization is zero")]
    Undetectable,

    #[error("no transfer optimum found within {window_s:.3e} s")]
    NoTransfer { window_s: f64 },

    #[error("numerical instability: non-finite amplitude at t = {time_s:.3e} s")]
    NumericalInstability { time_s: f64 },

    #[error("capacity exceeded: {modes} modes requested for {spins} spins")]
    Capacity { modes: usize, spins: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
