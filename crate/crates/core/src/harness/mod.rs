//! Monte-Carlo experiments: configuration, paired trial execution,
//! aggregation and result files.

mod config;
mod experiment;
mod output;
mod seeds;

pub use config::{ExperimentConfig, OutputFormat, Sweep};
pub use experiment::{
    aggregate, run_experiment, run_trial, ExperimentResult, TrialRow, TrialStatus,
};
pub use output::{emit_results, emit_trials, read_csv, write_results, AggregateRow, CSV_HEADER};
pub use seeds::{trial_seeds, TrialSeeds};
