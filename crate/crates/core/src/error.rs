use thiserror::Error;

/// Errors raised across the crate.
///
/// The CLI maps [`Error::NonConvergence`] to exit code 3 and every other
/// variant to exit code 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("s = {s} lies inside the guard band around the pole at s = 3")]
    Pole { s: f64 },

    #[error("lattice sum diverges for s = {s} (requires s > 3)")]
    Divergent { s: f64 },

    #[error("invalid periodic set: {0}")]
    InvalidPeriodicSet(String),

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("no interior minimum: {0}")]
    NoInteriorMinimum(String),

    #[error("bracket failure: {0}")]
    Bracket(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
