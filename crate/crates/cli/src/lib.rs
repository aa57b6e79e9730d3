//! Command-line front end for `evpca-core`.
//!
//! Every command is a plain function from parsed arguments to a report, so
//! the binary only parses, runs and maps errors to exit codes.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

pub use args::{Cli, Command, CriterionArg, EstimateArgs, Format, InputArgs, KGrid};
pub use commands::{cmd_estimate, cmd_gap, cmd_mp, cmd_scree, cmd_simulate, run};
pub use error::{CliError, CliResult};
