//! Batch front-end for the `phasestat` binary: configuration, error mapping
//! and one function per subcommand.

// `!(a <= b)` doubles as a NaN check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

pub use config::RunConfig;
pub use error::CliError;
