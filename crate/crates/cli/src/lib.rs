//! Experiment driver library: manifests, experiment runners, the
//! verification suite, CSV tables and a thin SVG emitter.

pub mod experiments;
pub mod manifest;
pub mod plot;
pub mod table;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ndecs_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest error: {0}")]
    Manifest(String),
}

pub type Result<T> = std::result::Result<T, CliError>;
