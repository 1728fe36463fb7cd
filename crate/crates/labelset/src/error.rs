use thiserror::Error;

/// Errors surfaced by dataset ingestion, model fitting, calibration, and
/// artifact parsing.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The data itself is unusable (non-numeric cells, zero variance, ...).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A class required for calibration has no samples.
    #[error("class {class} has no calibration samples")]
    EmptyClass { class: usize },

    /// The model was not fitted on the fit half of the split it is being
    /// calibrated against, so calibration scores would leak training rows.
    #[error("training-data fingerprint mismatch: the model must be fitted on the split's fit half only")]
    Leakage,

    /// An artifact file declares a format version this build does not read.
    #[error("unsupported {kind} artifact version {found:?} (expected {expected:?})")]
    UnsupportedVersion {
        kind: &'static str,
        found: String,
        expected: &'static str,
    },

    /// An artifact file is structurally malformed.
    #[error("malformed {kind} artifact: {msg}")]
    MalformedArtifact { kind: &'static str, msg: String },

    /// Underlying I/O failure, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invalid_data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
