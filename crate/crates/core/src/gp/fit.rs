//! MAP hyperparameter fitting with multi-start bounded quasi-Newton ascent.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::kernel::{KernelParams, NoiseParams, LENGTHSCALE_BOUNDS, NOISE_BOUNDS, OUTPUTSCALE_BOUNDS};
use crate::gp::model::{log_map_with_gradient, DataSet, FittedGP, PriorMean};
use crate::gp::optim::{minimize_box, LbfgsOptions};
use crate::gp::prior::{GpPriors, HyperPrior};

pub const DEFAULT_RESTARTS: usize = 5;

/// Outcome of one optimizer restart.
#[derive(Debug, Clone)]
pub struct RestartReport {
    pub initial_objective: Option<f64>,
    pub final_objective: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

impl RestartReport {
    pub(crate) fn failed(initial: Option<f64>, err: &Error) -> Self {
        Self {
            initial_objective: initial,
            final_objective: None,
            iterations: 0,
            converged: false,
            error: Some(err.to_string()),
        }
    }

    pub(crate) fn describe(&self, index: usize) -> String {
        match &self.error {
            Some(e) => format!("restart {index}: {e}"),
            None => format!(
                "restart {index}: objective {:?} after {} iterations",
                self.final_objective, self.iterations
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub restarts: Vec<RestartReport>,
    pub best_restart: Option<usize>,
    /// Diagonal jitter applied to the final factorization.
    pub jitter: f64,
}

/// Log-space box of a prior, intersected with the hard parameter box.
pub(crate) fn log_box(prior: &HyperPrior, hard: (f64, f64)) -> (f64, f64) {
    (prior.lower.max(hard.0).ln(), prior.upper.min(hard.1).ln())
}

pub(crate) fn gp_log_bounds(dim: usize, priors: &GpPriors) -> (Vec<f64>, Vec<f64>) {
    let mut lower = Vec::with_capacity(dim + 2);
    let mut upper = Vec::with_capacity(dim + 2);
    let ls = log_box(&priors.lengthscale, LENGTHSCALE_BOUNDS);
    for _ in 0..dim {
        lower.push(ls.0);
        upper.push(ls.1);
    }
    for (prior, hard) in [(&priors.outputscale, OUTPUTSCALE_BOUNDS), (&priors.noise, NOISE_BOUNDS)] {
        let b = log_box(prior, hard);
        lower.push(b.0);
        upper.push(b.1);
    }
    (lower, upper)
}

pub(crate) fn gp_params_from_log(z: &[f64], dim: usize) -> (KernelParams, NoiseParams) {
    (
        KernelParams::from_log_clamped(&z[..dim], z[dim]),
        NoiseParams::from_log_clamped(z[dim + 1]),
    )
}

pub(crate) fn sample_gp_log<R: Rng + ?Sized>(dim: usize, priors: &GpPriors, rng: &mut R) -> Vec<f64> {
    let mut z: Vec<f64> = (0..dim).map(|_| priors.lengthscale.sample(rng).ln()).collect();
    z.push(priors.outputscale.sample(rng).ln());
    z.push(priors.noise.sample(rng).ln());
    z
}

pub(crate) fn median_gp_params(dim: usize, priors: &GpPriors) -> (KernelParams, NoiseParams) {
    let z: Vec<f64> = std::iter::repeat_n(priors.lengthscale.median().ln(), dim)
        .chain([priors.outputscale.median().ln(), priors.noise.median().ln()])
        .collect();
    gp_params_from_log(&z, dim)
}

/// Runs one projected L-BFGS ascent per start point and returns the best
/// point with per-restart diagnostics.
pub(crate) fn multi_start_ascent<F>(
    objective: F,
    starts: Vec<Vec<f64>>,
    lower: &[f64],
    upper: &[f64],
    opts: &LbfgsOptions,
) -> Result<(Vec<f64>, f64, Vec<RestartReport>, usize)>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let negated = |z: &[f64]| objective(z).map(|(v, g)| (-v, g.into_iter().map(|x| -x).collect()));
    let mut reports = Vec::with_capacity(starts.len());
    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    for (i, z0) in starts.into_iter().enumerate() {
        let initial = objective(&z0).ok().map(|(v, _)| v);
        match minimize_box(&negated, &z0, lower, upper, opts) {
            Ok(res) => {
                let value = -res.value;
                reports.push(RestartReport {
                    initial_objective: initial,
                    final_objective: Some(value),
                    iterations: res.iterations,
                    converged: res.converged,
                    error: None,
                });
                if best.as_ref().is_none_or(|(_, b, _)| value > *b) {
                    best = Some((res.x, value, i));
                }
            }
            Err(e) => reports.push(RestartReport::failed(initial, &e)),
        }
    }
    match best {
        Some((z, v, i)) => Ok((z, v, reports, i)),
        None => Err(Error::OptimizationFailed {
            diagnostics: reports.iter().enumerate().map(|(i, r)| r.describe(i)).collect(),
        }),
    }
}

/// MAP-fits an SE-ARD GP to `data`.
pub fn fit_map<R: Rng + ?Sized>(
    data: &DataSet,
    priors: &GpPriors,
    prior_mean: &PriorMean,
    restarts: usize,
    rng: &mut R,
) -> Result<FittedGP> {
    fit_map_with_report(data, priors, prior_mean, restarts, &LbfgsOptions::default(), rng).map(|(gp, _)| gp)
}

pub fn fit_map_with_report<R: Rng + ?Sized>(
    data: &DataSet,
    priors: &GpPriors,
    prior_mean: &PriorMean,
    restarts: usize,
    opts: &LbfgsOptions,
    rng: &mut R,
) -> Result<(FittedGP, FitReport)> {
    if restarts == 0 {
        return Err(Error::invalid("fit_map needs at least one restart"));
    }
    let dim = data.dim();
    if dim == 0 {
        return Err(Error::invalid("dataset has zero input dimensions"));
    }
    if data.is_empty() {
        let (kernel, noise) = median_gp_params(dim, priors);
        let gp = FittedGP::new(data.clone(), kernel, noise, prior_mean.clone())?;
        let report = FitReport {
            restarts: Vec::new(),
            best_restart: None,
            jitter: 0.0,
        };
        return Ok((gp, report));
    }

    let (lower, upper) = gp_log_bounds(dim, priors);
    let starts: Vec<Vec<f64>> = (0..restarts).map(|_| sample_gp_log(dim, priors, rng)).collect();
    let objective = |z: &[f64]| {
        let (kernel, noise) = gp_params_from_log(z, dim);
        log_map_with_gradient(&kernel, &noise, data, priors, prior_mean)
    };
    let (z, _, reports, best) = multi_start_ascent(objective, starts, &lower, &upper, opts)?;
    let (kernel, noise) = gp_params_from_log(&z, dim);
    let gp = FittedGP::new(data.clone(), kernel, noise, prior_mean.clone())?;
    let jitter = gp.chol().map_or(0.0, |c| c.jitter());
    Ok((
        gp,
        FitReport {
            restarts: reports,
            best_restart: Some(best),
            jitter,
        },
    ))
}
