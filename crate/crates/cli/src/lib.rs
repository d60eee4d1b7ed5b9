//! Experiment runner behind the `autosmote` binary.

pub mod config;
pub mod report;
pub mod runner;
