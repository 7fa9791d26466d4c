//! Experiment configuration, orchestration, result files and self-checks.

pub mod backend;
pub mod config;
pub mod experiment;
pub mod normalize;
pub mod results;
pub mod verify;

pub use backend::{GpBackend, ScamlBackend};
pub use config::{Benchmark, ExperimentConfig, Method, Seeds};
pub use experiment::{run_experiment, run_seed, BenchmarkData, ExperimentOutcome, RunResult, SeedFailure};
pub use normalize::{normalize_outputs, NormMode, NormalizationState};
pub use results::{summarize, summary_path, write_results_csv, SummaryRow};
pub use verify::{CheckReport, Suite};
