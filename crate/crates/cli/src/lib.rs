//! Configuration, study drivers and output writers behind the `rcnfem`
//! binary.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

pub use commands::{compare, conv_space, conv_time, run, CompareOutcome, ConvOutcome, RunOutcome};
pub use config::{RunConfig, SchemeKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] rcnfem::Error),

    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Version line printed by `--version`.
pub fn version_string() -> String {
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    format!("{} (core {}, {profile})", env!("CARGO_PKG_VERSION"), rcnfem::VERSION)
}
