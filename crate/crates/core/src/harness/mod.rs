//! Experiment driver: configuration, seeded trial batches, rate fitting, output and CLI.
//!
//! Trial `t` uses seed `derive_seed(master_seed, t)`; its signal, ensemble, initializer
//! and solver each draw from a fixed sub-stream of that seed, so results do not depend on
//! scheduling.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod output;
pub mod verify;

pub use config::{ExperimentConfig, OutputFormat, SignalMode};
pub use experiment::{
    fit_rate, fit_rate_series, run_experiment, run_experiment_with, run_trial, trial_ensemble, trial_seed, EpochSample,
    TrialRecord, ERROR_FLOOR,
};
pub use output::{render, write_csv, write_json, write_records, CSV_HEADER};
pub use verify::{run_verification, Check, VerifyReport};
