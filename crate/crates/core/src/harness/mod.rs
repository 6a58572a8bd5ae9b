//! Experiment orchestration: configuration, trials and runs, artifact
//! emission, and the command-line front end.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod output;
pub mod plot;

pub use config::{ExperimentConfig, PlantKind};
pub use experiment::{
    compare_policies, compare_with_lqr, evaluate_cartpole_policy, evaluate_linear_policy,
    run_experiment, run_trial, sweep, FailureCause, LqrComparison, RunRecord, StepRow, TrialRecord,
};
pub use output::emit_csv;
pub use plot::emit_plot;
