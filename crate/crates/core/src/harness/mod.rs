//! Experiment driver: configuration, pair x altitude sweeps and CSV output.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod io;

pub use config::{load_config, ExperimentConfig, StationPair};
pub use experiment::{evaluate_cell, run_cell, run_experiment, run_sweep, run_trace, CellResult, ResultRow, SweepReport};
