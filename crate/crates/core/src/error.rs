use std::path::PathBuf;

use thiserror::Error;

/// Coarse grouping of errors, used by front-ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad arguments or out-of-domain parameters.
    Usage,
    /// Unreadable, malformed, or insufficient data.
    Data,
    /// Singular priors, divergence, and other numerical failures.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} is out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid label {0}: labels must be +1 or -1")]
    InvalidLabel(f64),

    #[error("no triplets: cannot estimate the keep probability from an empty dataset")]
    EmptyDataset,

    #[error("estimated keep probability {pi_t} is below 0.75 beyond tolerance; triplet counts are inconsistent")]
    InconsistentCounts { pi_t: f64 },

    #[error("class prior {pi_plus} lies within {margin} of 0.5; the mixing matrix is singular")]
    SingularPrior { pi_plus: f64, margin: f64 },

    #[error("bag {0} is empty")]
    EmptyBag(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("labeled pool exhausted after {available} draws")]
    SourceExhausted { available: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("training diverged at epoch {epoch}: empirical risk is {risk}")]
    Diverged { epoch: usize, risk: f64 },

    #[error("grid points inside the singularity guard band: {0:?}")]
    GridInGuardBand(Vec<f64>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trial {index}: {source}")]
    Trial {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Domain { .. } | Error::Config(_) | Error::GridInGuardBand(_) => {
                ErrorCategory::Usage
            }
            Error::InvalidLabel(_)
            | Error::EmptyDataset
            | Error::EmptyBag(_)
            | Error::DimensionMismatch { .. }
            | Error::Parse { .. }
            | Error::Io { .. }
            | Error::SourceExhausted { .. }
            | Error::DegenerateData(_) => ErrorCategory::Data,
            Error::InconsistentCounts { .. }
            | Error::SingularPrior { .. }
            | Error::Diverged { .. } => ErrorCategory::Numerical,
            Error::Trial { source, .. } => source.category(),
        }
    }

    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::InvalidLabel(_) => "invalid_label",
            Error::EmptyDataset => "empty_dataset",
            Error::InconsistentCounts { .. } => "inconsistent_counts",
            Error::SingularPrior { .. } => "singular_prior",
            Error::EmptyBag(_) => "empty_bag",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::SourceExhausted { .. } => "source_exhausted",
            Error::DegenerateData(_) => "degenerate_data",
            Error::Diverged { .. } => "diverged",
            Error::GridInGuardBand(_) => "grid_in_guard_band",
            Error::Config(_) => "config",
            Error::Trial { source, .. } => source.code(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
