use thiserror::Error;

use crate::lattice::Site;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("interior sites do not form a connected graph")]
    Disconnected,

    #[error("site {0:?} is not part of the domain")]
    UnknownSite(Site),

    #[error("site {0:?} is not an interior site")]
    NotInterior(Site),

    #[error("missing value at site {0:?}")]
    MissingValue(Site),

    #[error("field has {got} entries, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("non-finite value at site {site:?} at t = {time} (dt = {dt}); step size too large?")]
    NonFinite { site: Site, time: f64, dt: f64 },

    #[error("{flagged} of {total} walks did not exit before the horizon; estimate refused")]
    TooManyFlagged { flagged: usize, total: usize },

    #[error("potential violates {condition} at x = {witness} (margin {margin:e})")]
    PotentialViolation { condition: String, witness: f64, margin: f64 },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
