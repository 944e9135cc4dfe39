//! Crate-wide error type.

/// Errors reported by kernels, field evaluations, constructions and probes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input outside an operation's mathematical domain (singular matrix,
    /// non-SPD argument, point outside the grid window, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Two fields that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The grid cannot resolve the requested geometry.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// The requested geometry does not exist (e.g. lens volume exceeds the
    /// maximal area attainable at the given diameter).
    #[error("infeasible geometry: {0}")]
    Infeasible(String),

    /// A probe's hypothesis gate failed; the probe refuses to report a
    /// value that would be outside its domain of validity.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// Not enough data for a requested fit.
    #[error("fit error: {0}")]
    Fit(String),

    /// A deformation failed an admissibility requirement at a named cell.
    #[error("non-admissible at cell ({i}, {j}): {reason}")]
    NonAdmissible { i: usize, j: usize, reason: String },

    /// A diagnostic search found no candidate satisfying all requirements.
    #[error("search failed: {0}")]
    SearchFailed(String),

    /// Malformed dump or config input.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
