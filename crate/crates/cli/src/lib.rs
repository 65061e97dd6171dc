//! Experiment driver library: configuration parsing, named experiments,
//! artifact output, and the acceptance self-test suite.

pub mod artifacts;
pub mod config;
pub mod experiments;
pub mod selftest;
