//! Command-line front end for the `lqmle-core` estimators: CSV ingestion,
//! JSON reports with embedded run manifests, TOML scenario grids and
//! parallel Monte Carlo.

pub mod cli;
pub mod commands;
pub mod data;
pub mod error;
pub mod grid;
pub mod render;
pub mod report;

pub use cli::Cli;
pub use commands::{run, Artifact};
pub use error::{CliError, Result};
