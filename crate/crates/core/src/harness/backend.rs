//! Modeling backends driving the optimization loop.

use nalgebra::DVector;
use rand::RngCore;

use crate::bo::{PosteriorEvaluator, Surrogate};
use crate::error::Result;
use crate::gp::{fit_map, DataSet, GpPriors, PriorMean};
use crate::harness::normalize::{normalize_outputs, NormMode, NormalizationState};
use crate::scaml::{
    bootstrap_test_hypers, fit_meta_tasks, fit_test_hypers_with, MetaModel, PosteriorCache, ScamlPosterior,
    TestFitOptions, TestHypers, TestPriors,
};

fn standardized(data: &DataSet, mode: NormMode<'_>) -> Result<(DataSet, NormalizationState)> {
    let raw: Vec<f64> = data.outputs().iter().copied().collect();
    let (z, state) = normalize_outputs(&raw, mode)?;
    Ok((data.with_outputs(DVector::from_vec(z))?, state))
}

/// Plain single-task GP refitted from scratch every iteration.
#[derive(Debug, Clone)]
pub struct GpBackend {
    pub priors: GpPriors,
    pub restarts: usize,
    pub last_normalization: Option<NormalizationState>,
}

impl GpBackend {
    pub fn new(priors: GpPriors, restarts: usize) -> Self {
        Self {
            priors,
            restarts,
            last_normalization: None,
        }
    }
}

impl Surrogate for GpBackend {
    fn condition(&mut self, data: &DataSet, rng: &mut dyn RngCore) -> Result<Box<dyn PosteriorEvaluator>> {
        let data = if data.is_empty() {
            data.clone()
        } else {
            let (z, state) = standardized(data, NormMode::PerTask)?;
            self.last_normalization = Some(state);
            z
        };
        let gp = fit_map(&data, &self.priors, &PriorMean::Zero, self.restarts, rng)?;
        Ok(Box::new(gp))
    }
}

/// Meta-learned test prior. Meta-task GPs are fitted once at construction;
/// the test-task hyperparameters are refitted every iteration.
#[derive(Debug, Clone)]
pub struct ScamlBackend {
    model: MetaModel,
    raw_meta_outputs: Vec<f64>,
    pub test_priors: TestPriors,
    pub fit_options: TestFitOptions,
    /// Seed each refit with the previous optimum as an extra start.
    pub warm_start: bool,
    pub last_hypers: Option<TestHypers>,
    pub last_normalization: Option<NormalizationState>,
}

impl ScamlBackend {
    /// Standardizes every meta-task on its own and fits one GP per task.
    pub fn new(
        meta_data: &[DataSet],
        dim: usize,
        meta_priors: &GpPriors,
        test_priors: TestPriors,
        restarts: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let standardized_meta = meta_data
            .iter()
            .map(|d| standardized(d, NormMode::PerTask).map(|(z, _)| z))
            .collect::<Result<Vec<_>>>()?;
        let gps = fit_meta_tasks(&standardized_meta, meta_priors, restarts, rng)?;
        let hypers = bootstrap_test_hypers(dim, gps.len(), &test_priors);
        let model = MetaModel::new(gps, hypers)?;
        Ok(Self {
            model,
            raw_meta_outputs: meta_data.iter().flat_map(|d| d.outputs().iter().copied()).collect(),
            test_priors,
            fit_options: TestFitOptions {
                restarts,
                ..Default::default()
            },
            warm_start: false,
            last_hypers: None,
            last_normalization: None,
        })
    }

    pub fn model(&self) -> &MetaModel {
        &self.model
    }
}

impl Surrogate for ScamlBackend {
    fn condition(&mut self, data: &DataSet, rng: &mut dyn RngCore) -> Result<Box<dyn PosteriorEvaluator>> {
        let (z, state) = standardized(
            data,
            NormMode::JointTest {
                meta_outputs: &self.raw_meta_outputs,
            },
        )?;
        self.last_normalization = Some(state);
        let cache = PosteriorCache::build(self.model.meta_gps(), z.inputs())?;
        let mut opts = self.fit_options.clone();
        if self.warm_start {
            opts.warm_start = self.last_hypers.clone();
        }
        let hypers = fit_test_hypers_with(&self.model, &cache, &z, &self.test_priors, &opts, rng)?;
        let posterior = ScamlPosterior::new(&self.model, &cache, hypers.clone(), &z)?;
        self.last_hypers = Some(hypers);
        Ok(Box::new(posterior))
    }
}
