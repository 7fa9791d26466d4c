use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use crate::bo::acquisition::{maximize_acq_continuous, maximize_acq_discrete, AcquisitionConfig, PosteriorEvaluator};
use crate::bo::domain::Domain;
use crate::bo::regret::simple_regret;
use crate::error::{Error, Result};
use crate::gp::DataSet;

/// Black-box function being maximized. Inputs are normalized; outputs are
/// raw.
pub trait Objective {
    fn dim(&self) -> usize;
    fn noiseless(&self, x: &[f64]) -> Result<f64>;
    /// Standard deviation of the Gaussian observation noise.
    fn noise_std(&self) -> f64;
}

/// Modeling backend. `condition` refits hyperparameters on the current
/// test data and returns the posterior used for acquisition.
pub trait Surrogate {
    fn condition(&mut self, data: &DataSet, rng: &mut dyn RngCore) -> Result<Box<dyn PosteriorEvaluator>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// One-based iteration index.
    pub iteration: usize,
    /// Chosen point in normalized coordinates.
    pub x: Vec<f64>,
    pub y: f64,
    pub f: f64,
    pub simple_regret: f64,
    pub cumulative_regret: f64,
    pub fit_ms: f64,
    pub acq_ms: f64,
}

#[derive(Debug, Clone)]
pub struct BOState {
    /// Observations so far: normalized inputs, noisy raw outputs.
    pub test_data: DataSet,
    /// Noiseless objective values at the queried points.
    pub noiseless: Vec<f64>,
    /// Largest noisy observation.
    pub incumbent_value: f64,
    pub true_max: f64,
    /// Rows of a discrete domain already queried.
    pub visited: BTreeSet<usize>,
    pub trace: Vec<IterationRecord>,
    /// Set once a discrete domain runs out of candidates.
    pub truncated: bool,
}

impl BOState {
    pub fn new(dim: usize, true_max: f64) -> Self {
        Self {
            test_data: DataSet::empty(dim),
            noiseless: Vec::new(),
            incumbent_value: f64::NEG_INFINITY,
            true_max,
            visited: BTreeSet::new(),
            trace: Vec::new(),
            truncated: false,
        }
    }

    /// Best noiseless value queried so far.
    pub fn best_noiseless(&self) -> f64 {
        self.noiseless.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Appended,
    /// Every candidate of a discrete domain has been queried; nothing was
    /// appended.
    Exhausted,
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// One iteration: refit, maximize UCB, query the objective, record.
pub fn bo_step<S, O, R>(
    state: &mut BOState,
    surrogate: &mut S,
    objective: &O,
    domain: &Domain,
    cfg: &AcquisitionConfig,
    rng: &mut R,
) -> Result<StepOutcome>
where
    S: Surrogate + ?Sized,
    O: Objective + ?Sized,
    R: Rng,
{
    if domain.dim() != objective.dim() || domain.dim() != state.test_data.dim() {
        return Err(Error::invalid("domain, objective and state dimensions differ"));
    }
    if let Domain::DiscreteTable(t) = domain {
        if state.visited.len() >= t.len() {
            state.truncated = true;
            return Ok(StepOutcome::Exhausted);
        }
    }

    let fit_start = Instant::now();
    let posterior = surrogate.condition(&state.test_data, rng)?;
    let fit_ms = elapsed_ms(fit_start);

    let acq_start = Instant::now();
    let x = match domain {
        Domain::ContinuousBox(b) => {
            let d = b.dim();
            maximize_acq_continuous(posterior.as_ref(), &vec![0.0; d], &vec![1.0; d], cfg, rng)?
        }
        Domain::DiscreteTable(t) => {
            let idx = maximize_acq_discrete(posterior.as_ref(), t.candidates(), &state.visited, cfg)?;
            state.visited.insert(idx);
            t.row(idx)
        }
    };
    let acq_ms = elapsed_ms(acq_start);

    let f = objective.noiseless(&x)?;
    let noise_std = objective.noise_std();
    let y = if noise_std > 0.0 {
        f + Normal::new(0.0, noise_std)
            .map_err(|e| Error::invalid(format!("noise std {noise_std}: {e}")))?
            .sample(rng)
    } else {
        f
    };
    state.test_data.push(&x, y)?;
    state.noiseless.push(f);
    state.incumbent_value = state.incumbent_value.max(y);

    let r = simple_regret(state.true_max, state);
    let cumulative = state.trace.last().map_or(0.0, |t| t.cumulative_regret) + r;
    state.trace.push(IterationRecord {
        iteration: state.trace.len() + 1,
        x,
        y,
        f,
        simple_regret: r,
        cumulative_regret: cumulative,
        fit_ms,
        acq_ms,
    });
    Ok(StepOutcome::Appended)
}
