//! Meta-learning multi-task GP with a modular test-task prior.
//!
//! Meta-task GPs are fitted independently; the test-task prior is the
//! weighted sum of their posteriors plus a residual kernel. Everything in
//! here must agree exactly with brute-force conditioning of the joint model
//! in [`oracle`].

pub mod cache;
pub mod coreg;
pub mod likelihood;
pub mod model;
pub mod oracle;
pub mod posterior;

pub use cache::PosteriorCache;
pub use coreg::{coreg_matrix, TaskIndex};
pub use likelihood::{
    bootstrap_test_hypers, fit_test_hypers, fit_test_hypers_with, test_prior, test_task_log_likelihood,
    test_task_log_likelihood_with_gradient, TestFitOptions, TestPriors,
};
pub use model::{fit_meta_tasks, joint_kernel, MetaModel, TaskWeights, TestHypers};
pub use oracle::{joint_mtgp_oracle, OracleResult, ORACLE_MAX_POINTS};
pub use posterior::{test_posterior, ScamlPosterior};
