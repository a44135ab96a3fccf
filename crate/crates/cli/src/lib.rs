//! Scenario-driven command-line front end for the `symtrace` library.

pub mod checks;
pub mod commands;
pub mod error;
pub mod scenario;

pub use commands::Context;
pub use error::{CliError, CliResult};
pub use scenario::Scenario;
