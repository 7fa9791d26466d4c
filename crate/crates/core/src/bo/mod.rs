//! Sequential Bayesian optimization with an upper confidence bound
//! acquisition.

pub mod acquisition;
pub mod domain;
pub mod engine;
pub mod regret;

pub use acquisition::{maximize_acq_continuous, maximize_acq_discrete, ucb, AcquisitionConfig, PosteriorEvaluator};
pub use domain::{ContinuousBox, DiscreteTable, Domain};
pub use engine::{bo_step, BOState, IterationRecord, Objective, StepOutcome, Surrogate};
pub use regret::{cumulative_regret, simple_regret};
