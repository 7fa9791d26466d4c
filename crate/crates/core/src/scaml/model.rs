use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gp::kernel::{se_ard, KernelParams, NoiseParams};
use crate::gp::model::{DataSet, FittedGP, PriorMean};
use crate::gp::prior::GpPriors;
use crate::gp::fit_map;
use crate::scaml::coreg::TaskIndex;
use crate::util::{dataset_hash, stream_rng};

/// Positive per-meta-task weights `w_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskWeights(Vec<f64>);

impl TaskWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(bad) = w.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid(format!("task weight {bad} is not positive and finite")));
        }
        Ok(Self(w))
    }

    pub fn ones(m: usize) -> Self {
        Self(vec![1.0; m])
    }

    /// Weights without the positivity check; zero and negative weights are
    /// valid in the joint kernel and are used by the verification suites.
    pub fn unchecked(w: Vec<f64>) -> Self {
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Test-task hyperparameters: residual kernel `k_t`, noise `σ_t²` and the
/// meta-task weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TestHypers {
    pub kernel: KernelParams,
    pub noise: NoiseParams,
    pub weights: TaskWeights,
}

/// Fitted meta-task GPs plus the test-task hyperparameters.
#[derive(Debug, Clone)]
pub struct MetaModel {
    dim: usize,
    meta_gps: Arc<[FittedGP]>,
    hypers: TestHypers,
}

impl MetaModel {
    pub fn new(meta_gps: Vec<FittedGP>, hypers: TestHypers) -> Result<Self> {
        let dim = hypers.kernel.dim();
        for (m, gp) in meta_gps.iter().enumerate() {
            if gp.dim() != dim {
                return Err(Error::invalid(format!(
                    "meta-task {m} has dimension {} but the test kernel has {dim}",
                    gp.dim()
                )));
            }
            if !matches!(gp.prior_mean(), PriorMean::Zero) {
                return Err(Error::invalid(format!("meta-task {m} GP must have a zero prior mean")));
            }
        }
        if hypers.weights.len() != meta_gps.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} meta-tasks",
                hypers.weights.len(),
                meta_gps.len()
            )));
        }
        Ok(Self {
            dim,
            meta_gps: meta_gps.into(),
            hypers,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_meta(&self) -> usize {
        self.meta_gps.len()
    }

    pub fn meta_gps(&self) -> &[FittedGP] {
        &self.meta_gps
    }

    pub(crate) fn meta_gps_shared(&self) -> Arc<[FittedGP]> {
        Arc::clone(&self.meta_gps)
    }

    pub fn hypers(&self) -> &TestHypers {
        &self.hypers
    }

    /// Same meta-task GPs with new test-task hyperparameters.
    pub fn with_hypers(&self, hypers: TestHypers) -> Result<Self> {
        if hypers.kernel.dim() != self.dim || hypers.weights.len() != self.num_meta() {
            return Err(Error::invalid("test hyperparameters do not match the model shape"));
        }
        Ok(Self {
            dim: self.dim,
            meta_gps: Arc::clone(&self.meta_gps),
            hypers,
        })
    }
}

/// Joint multi-task kernel between `(x, nu)` and `(x2, nu2)`.
pub fn joint_kernel(x: &[f64], nu: TaskIndex, x2: &[f64], nu2: TaskIndex, model: &MetaModel) -> Result<f64> {
    let m_count = model.num_meta();
    nu.check(m_count)?;
    nu2.check(m_count)?;
    let mut value = if nu == TaskIndex::Test && nu2 == TaskIndex::Test {
        se_ard(x, x2, &model.hypers.kernel)?
    } else {
        0.0
    };
    for (m, (gp, &w)) in model.meta_gps.iter().zip(model.hypers.weights.as_slice()).enumerate() {
        let g = nu.loading(m, w) * nu2.loading(m, w);
        if g != 0.0 {
            value += g * se_ard(x, x2, gp.kernel())?;
        }
    }
    Ok(value)
}

/// Independently MAP-fits one zero-mean GP per meta-task.
///
/// Each task draws its restart points from a stream keyed by the task's
/// data content, so results do not depend on task order and identical
/// tasks get identical fits.
pub fn fit_meta_tasks<R: Rng + ?Sized>(
    meta_data: &[DataSet],
    priors: &GpPriors,
    restarts: usize,
    rng: &mut R,
) -> Result<Vec<FittedGP>> {
    let base_seed: u64 = rng.random();
    meta_data
        .par_iter()
        .enumerate()
        .map(|(index, data)| {
            if data.is_empty() {
                return Err(Error::Task {
                    index,
                    source: Box::new(Error::invalid("meta-task dataset is empty")),
                });
            }
            let mut task_rng = stream_rng(base_seed, dataset_hash(data.inputs(), data.outputs()));
            fit_map(data, priors, &PriorMean::Zero, restarts, &mut task_rng).map_err(|e| Error::Task {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}
