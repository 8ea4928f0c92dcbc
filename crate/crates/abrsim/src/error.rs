use std::io;
use std::path::PathBuf;

use abrsim_core::EngineError;
use thiserror::Error;

/// Exit status for a rejected scenario, override or sweep.
pub const EXIT_VALIDATION: u8 = 2;
/// Exit status for a failure after the run started.
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("scenario file `{}` does not exist", path.display())]
    Missing { path: PathBuf },
    #[error("cannot read `{}`: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed scenario `{origin}`: {source}")]
    Parse {
        origin: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid sweep `{spec}`: {reason}")]
    SweepSpec { spec: String, reason: String },
    #[error("field `{field}`: {reason}")]
    Override { field: String, reason: String },
    #[error("invalid scenario: {0}")]
    Invalid(#[source] EngineError),
    #[error("run failed: {0}")]
    Runtime(#[source] EngineError),
    #[error("cannot write `{}`: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{failed} of {total} sweep runs failed")]
    SweepFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) | CliError::Write { .. } | CliError::SweepFailed { .. } => EXIT_RUNTIME,
            _ => EXIT_VALIDATION,
        }
    }
}
