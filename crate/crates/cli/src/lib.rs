//! Experiment harness for the trapped-NLS Gibbs measure laboratory:
//! configuration, the statistical suites, report generation, and the
//! `gibbsflow` command-line interface.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod io;
pub mod report;
