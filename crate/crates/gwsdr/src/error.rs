//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or generator argument violates its contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Feature, layer, or class-count dimensions do not compose.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A dataset or model file could not be parsed. Row numbers are 1-based
    /// file line numbers.
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// The top-k eigenvalues are not separated well enough for a stable
    /// first-order eigenvector gradient. Callers training with the
    /// directional penalty should skip the term for this step.
    #[error("degenerate spectrum: eigengap {gap:.3e} below tolerance {tolerance:.3e}; skip the directional term for this step")]
    DegenerateSpectrum { gap: f64, tolerance: f64 },

    /// Relabeling ran out of unused source samples.
    #[error("augmentation budget exhausted for target class {class} in round {round}: need {needed}, have {available}")]
    BudgetExhausted {
        class: usize,
        round: usize,
        needed: usize,
        available: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(path: &std::path::Path, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }
}
