//! Exit-code discipline: 0 success, 2 validation error, 3 data error,
//! 4 artifact-version error.

use labelset::Error;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_VERSION: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: i32,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: EXIT_VALIDATION,
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: EXIT_DATA,
        }
    }

    pub fn version(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: EXIT_VERSION,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::InvalidArgument(_) | Error::Leakage => EXIT_VALIDATION,
            Error::InvalidData(_)
            | Error::EmptyClass { .. }
            | Error::MalformedArtifact { .. }
            | Error::Io { .. } => EXIT_DATA,
            Error::UnsupportedVersion { .. } => EXIT_VERSION,
        };
        CliError {
            message: err.to_string(),
            code,
        }
    }
}
