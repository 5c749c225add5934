//! Experiment orchestration: configs, evaluation, metrics and report files.

pub mod config;
pub mod evaluate;
pub mod metrics;
pub mod occupancy;
pub mod run;

pub use config::{ExperimentConfig, SCENARIOS};
pub use evaluate::{evaluate_policy, Controller, EvalSettings, Evaluation, SeedEvaluation};
pub use metrics::{MetricsSummary, Summary, WindowMetrics};
pub use occupancy::{classify_allocation, occupancy_trace, Allocation, OccupancyRow};
pub use run::{run_baseline, run_seed, sweep, sweep_seeds, RunOptions, SeedReport, SweepReport};
