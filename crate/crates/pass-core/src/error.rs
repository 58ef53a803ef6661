//! Error type shared by all modules.

use thiserror::Error;

/// Crate-wide error enumeration.
#[derive(Debug, Error)]
pub enum Error {
    /// Configuration rejected; every violation is listed, not just the first.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    /// A radiation split coefficient left `[0, 1]`.
    #[error("radiation split coefficient {value} at element {index} outside [0, 1]")]
    SplitOutOfRange { index: usize, value: f64 },

    /// A waveguide segment length was negative.
    #[error("waveguide segment length {value} at element {index} is negative")]
    NegativeSegment { index: usize, value: f64 },

    /// A user sits exactly on an antenna; the path-loss model diverges.
    #[error("user {user} coincides with antenna (waveguide {waveguide}, element {element})")]
    DegenerateGeometry {
        user: usize,
        waveguide: usize,
        element: usize,
    },

    /// A linear system expected to be positive definite was not.
    #[error("linear system is not positive definite")]
    SingularSystem,

    /// A coarse grid cannot host the required number of distinct antennas.
    #[error("waveguide {waveguide}: {points} coarse grid points cannot host {needed} distinct antennas")]
    GridTooSmall {
        waveguide: usize,
        points: usize,
        needed: usize,
    },

    /// An I/O failure while writing result files.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV serialization failure.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// JSON serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
