//! File formats, plots and subcommands behind the `stratdesign` binary.

pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;
pub mod svg;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
