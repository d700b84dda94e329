//! Command-line surface for `neurocorr`: layer measures, entropy estimates,
//! data utilities and the experiment drivers behind the `experiment`
//! subcommands. Experiments are plain functions returning a [`Report`] so
//! they can be called from tests as well as from the binary.

use std::path::{Path, PathBuf};

use neurocorr::ErrorClass;
use thiserror::Error;

pub mod commands;
pub mod experiments;
pub mod plot;
pub mod report;

pub use report::{Check, Report, Table};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "NEUROCORR_OUT";
pub const DEFAULT_OUT_DIR: &str = "neurocorr-out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{operation}: {source}")]
    Core {
        operation: String,
        #[source]
        source: neurocorr::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("plotting failed: {0}")]
    Plot(String),
}

impl From<neurocorr::Error> for CliError {
    fn from(source: neurocorr::Error) -> Self {
        CliError::Core {
            operation: "neurocorr".into(),
            source,
        }
    }
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core { source, .. } => match source.class() {
                ErrorClass::Input => EXIT_INPUT,
                ErrorClass::Degenerate => EXIT_DEGENERATE,
                ErrorClass::Divergence => EXIT_DIVERGENCE,
            },
            CliError::Usage(_) | CliError::Io { .. } | CliError::Plot(_) => EXIT_INPUT,
        }
    }
}

/// Tags a core error with the operation that raised it.
pub trait Context<T> {
    fn during(self, operation: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, neurocorr::Error> {
    fn during(self, operation: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core {
            operation: operation.into(),
            source,
        })
    }
}

/// `--out` if given, else `$NEUROCORR_OUT`, else `./neurocorr-out`.
pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUT_DIR),
    }
}
