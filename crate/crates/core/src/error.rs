use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape mismatch or malformed computation graph.
    #[error("structural error in {op}: expected {expected}, got {actual}")]
    Structure {
        op: &'static str,
        expected: String,
        actual: String,
    },

    #[error("non-finite gradient for parameter `{param}`")]
    NonFiniteGradient { param: String },

    #[error("training diverged at epoch {epoch} (last finite epoch: {last_finite:?})")]
    Divergence { epoch: usize, last_finite: Option<usize> },

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("ingestion error at {location}: {message}")]
    Ingestion { location: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("not enough samples: {0}")]
    TooFewSamples(String),

    #[error("no reference sample is predicted as class {target}")]
    NoCandidate { target: usize },

    #[error("corrupt bundle: {0}")]
    CorruptBundle(String),

    #[error("unsupported bundle version {found} (expected {expected})")]
    BundleVersion { found: u32, expected: u32 },

    #[error("evaluation hygiene violated: {0}")]
    Hygiene(String),

    /// Failure inside one cross-validation fold.
    #[error("fold {fold}: {source}")]
    InFold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Structure {
            op,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse category, used by the CLI to pick an exit code.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Structure { .. } => ErrorCategory::Structure,
            Error::NonFiniteGradient { .. } | Error::Divergence { .. } | Error::NonFiniteLoss { .. } => {
                ErrorCategory::Numerical
            }
            Error::Ingestion { .. } | Error::TooFewSamples(_) | Error::NoCandidate { .. } => ErrorCategory::Data,
            Error::Config(_) | Error::Hygiene(_) => ErrorCategory::Config,
            Error::CorruptBundle(_) | Error::BundleVersion { .. } => ErrorCategory::Bundle,
            Error::Io { .. } => ErrorCategory::Io,
            Error::InFold { source, .. } => source.category(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Structure,
    Numerical,
    Bundle,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::Structure => 4,
            ErrorCategory::Numerical => 5,
            ErrorCategory::Bundle => 6,
            ErrorCategory::Io => 7,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Data => "data",
            ErrorCategory::Structure => "structure",
            ErrorCategory::Numerical => "numerical",
            ErrorCategory::Bundle => "bundle",
            ErrorCategory::Io => "io",
        }
    }
}
