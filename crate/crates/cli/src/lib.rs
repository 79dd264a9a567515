//! Command-line front end: subcommands `bands`, `butterfly`, `prob` and
//! `star`, deterministic CSV/JSON output with a metadata sidecar, and SVG
//! rendering of the butterfly.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod svg;

pub use commands::run;
pub use config::{Cli, Command, RunConfig};
pub use error::{CliError, Result};
