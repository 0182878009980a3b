//! Configuration, orchestration and artifact output for the `fronts` lab.

pub mod config;
pub mod experiment;
pub mod output;
pub mod plot;
