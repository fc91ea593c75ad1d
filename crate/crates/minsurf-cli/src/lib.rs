//! Scenario-driven batch experiments over the coupled Brownian motion
//! engine: strict TOML configs, seeded deterministic parallelism, CSV time
//! series, and JSON summary reports with explicit pass/fail statistics.

use thiserror::Error;

pub mod config;
pub mod runner;
pub mod scenarios;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad scenario spec: {0}")]
    BadSpec(String),
    #[error("scenario requires a surface with boundary")]
    MissingBoundary,
    #[error("engine failure: {0}")]
    Engine(String),
}
