//! Library half of the CLI: file formats, synthetic data generation, and
//! the command implementations, kept callable for integration tests.

pub mod commands;
pub mod data;
pub mod error;
pub mod report;
pub mod spec_file;
pub mod synth;

pub use error::CmdError;
