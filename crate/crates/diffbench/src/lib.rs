//! Benchmark harness for the differentiation engines: adaptive-repetition
//! timing, cross-engine verification, CSV results, SVG plots and the
//! `diffbench` CLI.

pub mod check;
pub mod cli;
pub mod plot;
pub mod suite;
pub mod timing;
