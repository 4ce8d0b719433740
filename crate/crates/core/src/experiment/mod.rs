//! Configuration, the per-run pipeline, and the CSV artifacts of the
//! synthetic and loaded-data experiments.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{
    default_alphas, CalibrationSpec, Evaluation, ExperimentConfig, ExpertSource, GenerateSpec, GridSpec, Method,
    Profile, TaskSource,
};
pub use pipeline::{
    alpha_sweep, evaluate_run, export_generated, mean_std, prepare_generated_run, resolve_class_sep, run_experiment, run_grid,
    ExperimentOutput, GeneratedRun, GridCell, InstanceOutcome, RunInputs, RunOutcome,
};
pub use report::{ccdf, gap_rows, gap_summary, pair_inclusion_stats, result_records, sweep_rows, write_experiment, write_grid};
