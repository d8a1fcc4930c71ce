//! Library backing the `gdrem` command-line front end: configuration
//! parsing, CSV trace serialization, excitation reports, and static SVG
//! plots. The binary in `main.rs` is a thin argument-parsing shell over
//! [`commands`].

pub mod commands;
pub mod config;
pub mod csv;
pub mod plot;

/// Errors surfaced to the command line with a nonzero exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("trace format error: {0}")]
    TraceFormat(String),
    #[error(transparent)]
    Core(#[from] gdrem_control::Error),
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
