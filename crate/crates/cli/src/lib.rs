//! IO, file formats and command implementations for the `memsim` binary.

pub mod file_config;
pub mod report;
pub mod commands;
