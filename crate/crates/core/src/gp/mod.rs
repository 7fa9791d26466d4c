//! Exact single-task Gaussian process regression.

pub mod fit;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod prior;

pub use fit::{fit_map, fit_map_with_report, FitReport, RestartReport, DEFAULT_RESTARTS};
pub use kernel::{kernel_matrix, se_ard, KernelParams, NoiseParams};
pub use linalg::{cholesky_with_jitter, CholeskyFactor};
pub use model::{
    gp_posterior, lml_gradient, lml_with_gradient, log_map_objective, log_marginal_likelihood, DataSet, FittedGP,
    PriorMean,
};
pub use prior::{GpPriors, HyperPrior, PriorDist};
