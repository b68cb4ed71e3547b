//! File formats, pipelines and the property harness behind the `dpp-rerank`
//! command-line tool.

pub mod commands;
pub mod error;
pub mod formats;
pub mod selfcheck;

pub use error::{CliError, CliResult};

/// Exit status for malformed inputs or arguments.
pub const EXIT_INPUT_ERROR: u8 = 1;
/// Exit status when `selfcheck` finds a violated property.
pub const EXIT_PROPERTY_FAILURE: u8 = 2;
