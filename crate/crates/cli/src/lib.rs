//! Library surface of the experiment runner: configuration schema, built-in
//! presets and the run/sweep/analyze drivers used by the `kinotaxis` binary.

pub mod config;
pub mod presets;
pub mod runner;
