//! Library side of the `dcpage` command: configuration, the experiment
//! harness, cross-seed summaries and verification suites.

pub mod checks;
pub mod config;
pub mod harness;
pub mod summary;
