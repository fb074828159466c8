//! Config-driven experiment runner for the error equalities and two-sided bounds.

pub mod check;
pub mod config;
pub mod plotdata;
pub mod runner;

pub use config::{ExperimentConfig, Theorem};
pub use runner::{run_experiment, Summary};
