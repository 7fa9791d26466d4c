//! Test-task prior, likelihood and hyperparameter fitting under the
//! modular (cached meta-posterior) scheme.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::fit::{gp_log_bounds, log_box, median_gp_params, multi_start_ascent, sample_gp_log};
use crate::gp::kernel::{kernel_matrix, kernel_matrix_with_log_grads, KernelParams, NoiseParams};
use crate::gp::model::{log_prior_with_gradient, Conditioning, DataSet};
use crate::gp::optim::LbfgsOptions;
use crate::gp::prior::{weight_prior, GpPriors, HyperPrior, WEIGHT_BOUNDS};
use crate::gp::DEFAULT_RESTARTS;
use crate::scaml::cache::PosteriorCache;
use crate::scaml::model::{MetaModel, TaskWeights, TestHypers};

/// Priors over the test-task hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestPriors {
    pub kernel: GpPriors,
    pub weight: HyperPrior,
}

impl Default for TestPriors {
    fn default() -> Self {
        Self {
            kernel: GpPriors::residual_test(),
            weight: weight_prior(),
        }
    }
}

fn cache_for<'a>(
    model: &MetaModel,
    cache: Option<&'a PosteriorCache>,
    x: &DMatrix<f64>,
    scratch: &'a mut Option<PosteriorCache>,
) -> Result<&'a PosteriorCache> {
    match cache {
        Some(c) => {
            c.check(x)?;
            if c.num_meta() != model.num_meta() {
                return Err(Error::invalid(format!(
                    "cache holds {} meta-tasks, model has {}",
                    c.num_meta(),
                    model.num_meta()
                )));
            }
            Ok(c)
        }
        None => Ok(scratch.insert(PosteriorCache::build(model.meta_gps(), x)?)),
    }
}

/// Prior mean and covariance of the test task conditioned on the meta-data,
/// `Σ w_m μ_m` and `k_t + Σ w_m² Σ_m`, at `xq`.
///
/// Without a cache the meta-task posteriors are computed on the fly.
pub fn test_prior(
    model: &MetaModel,
    cache: Option<&PosteriorCache>,
    xq: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    test_prior_with(model, model.hypers(), cache, xq)
}

pub(crate) fn test_prior_with(
    model: &MetaModel,
    hypers: &TestHypers,
    cache: Option<&PosteriorCache>,
    xq: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let mut scratch = None;
    let cache = cache_for(model, cache, xq, &mut scratch)?;
    let mut cov = kernel_matrix(xq, xq, &hypers.kernel)?;
    let mut mean = DVector::zeros(xq.nrows());
    for ((&w, mu), sigma) in hypers.weights.as_slice().iter().zip(cache.means()).zip(cache.covs()) {
        mean.axpy(w, mu, 1.0);
        cov.zip_apply(sigma, |c, s| *c += w * w * s);
    }
    Ok((mean, cov))
}

fn check_test_inputs(
    hypers: &TestHypers,
    model: &MetaModel,
    test_data: &DataSet,
) -> Result<()> {
    if test_data.is_empty() {
        return Err(Error::invalid("test-task likelihood needs at least one observation"));
    }
    if hypers.weights.len() != model.num_meta() {
        return Err(Error::invalid(format!(
            "{} weights for {} meta-tasks",
            hypers.weights.len(),
            model.num_meta()
        )));
    }
    if test_data.dim() != model.dim() || hypers.kernel.dim() != model.dim() {
        return Err(Error::invalid("test data dimension does not match the model"));
    }
    Ok(())
}

/// Log-density of `y_t` under the test prior plus noise `σ_t²`.
pub fn test_task_log_likelihood(
    hypers: &TestHypers,
    model: &MetaModel,
    cache: &PosteriorCache,
    test_data: &DataSet,
) -> Result<f64> {
    check_test_inputs(hypers, model, test_data)?;
    let (mean, cov) = test_prior_with(model, hypers, Some(cache), test_data.inputs())?;
    let residual = test_data.outputs() - mean;
    let cond = Conditioning::new(cov, hypers.noise.variance(), &residual)?;
    Ok(cond.log_likelihood(&residual))
}

/// Likelihood and its gradient over
/// `[log ℓ_t.., log outputscale_t, log σ_t², log w_1..log w_M]`.
pub fn test_task_log_likelihood_with_gradient(
    hypers: &TestHypers,
    model: &MetaModel,
    cache: &PosteriorCache,
    test_data: &DataSet,
) -> Result<(f64, Vec<f64>)> {
    check_test_inputs(hypers, model, test_data)?;
    cache.check(test_data.inputs())?;
    let x = test_data.inputs();
    let weights = hypers.weights.as_slice();
    let (kt, dks) = kernel_matrix_with_log_grads(x, &hypers.kernel)?;
    let mut cov = kt;
    let mut mean = DVector::zeros(x.nrows());
    for ((&w, mu), sigma) in weights.iter().zip(cache.means()).zip(cache.covs()) {
        mean.axpy(w, mu, 1.0);
        cov.zip_apply(sigma, |c, s| *c += w * w * s);
    }
    let residual = test_data.outputs() - mean;
    let cond = Conditioning::new(cov, hypers.noise.variance(), &residual)?;
    let value = cond.log_likelihood(&residual);
    let alpha = cond.alpha();
    let chol = cond.chol().expect("nonempty test data");
    let wmat = alpha * alpha.transpose() - chol.inverse();

    let mut grad: Vec<f64> = dks.iter().map(|dk| 0.5 * wmat.component_mul(dk).sum()).collect();
    grad.push(0.5 * hypers.noise.variance() * wmat.trace());
    for ((&w, mu), sigma) in weights.iter().zip(cache.means()).zip(cache.covs()) {
        grad.push(w * alpha.dot(mu) + w * w * wmat.component_mul(sigma).sum());
    }
    Ok((value, grad))
}

fn hypers_from_log(z: &[f64], dim: usize) -> TestHypers {
    let kernel = KernelParams::from_log_clamped(&z[..dim], z[dim]);
    let noise = NoiseParams::from_log_clamped(z[dim + 1]);
    let weights = z[dim + 2..]
        .iter()
        .map(|v| v.exp().clamp(WEIGHT_BOUNDS.0, WEIGHT_BOUNDS.1))
        .collect();
    TestHypers {
        kernel,
        noise,
        weights: TaskWeights::unchecked(weights),
    }
}

fn hypers_to_log(h: &TestHypers) -> Vec<f64> {
    h.kernel
        .lengthscales()
        .iter()
        .map(|l| l.ln())
        .chain([h.kernel.outputscale().ln(), h.noise.variance().ln()])
        .chain(h.weights.as_slice().iter().map(|w| w.ln()))
        .collect()
}

/// Hyperparameters used before any test data is available: prior medians
/// for the residual kernel and unit weights.
pub fn bootstrap_test_hypers(dim: usize, num_meta: usize, priors: &TestPriors) -> TestHypers {
    let (kernel, noise) = median_gp_params(dim, &priors.kernel);
    TestHypers {
        kernel,
        noise,
        weights: TaskWeights::ones(num_meta),
    }
}

/// Options for fitting the test-task hyperparameters.
#[derive(Debug, Clone)]
pub struct TestFitOptions {
    pub restarts: usize,
    /// Extra start point, typically the previous iteration's optimum.
    pub warm_start: Option<TestHypers>,
    pub lbfgs: LbfgsOptions,
}

impl Default for TestFitOptions {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            warm_start: None,
            lbfgs: LbfgsOptions::default(),
        }
    }
}

/// Maximizes the test-task likelihood plus hyperprior log-densities over
/// the residual kernel, the test noise and the weights. Meta-task GPs stay
/// fixed.
pub fn fit_test_hypers<R: Rng + ?Sized>(
    model: &MetaModel,
    cache: &PosteriorCache,
    test_data: &DataSet,
    priors: &TestPriors,
    restarts: usize,
    rng: &mut R,
) -> Result<TestHypers> {
    let opts = TestFitOptions {
        restarts,
        ..Default::default()
    };
    fit_test_hypers_with(model, cache, test_data, priors, &opts, rng)
}

pub fn fit_test_hypers_with<R: Rng + ?Sized>(
    model: &MetaModel,
    cache: &PosteriorCache,
    test_data: &DataSet,
    priors: &TestPriors,
    opts: &TestFitOptions,
    rng: &mut R,
) -> Result<TestHypers> {
    let dim = model.dim();
    let num_meta = model.num_meta();
    if test_data.is_empty() {
        return Ok(bootstrap_test_hypers(dim, num_meta, priors));
    }
    if opts.restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    cache.check(test_data.inputs())?;

    let (mut lower, mut upper) = gp_log_bounds(dim, &priors.kernel);
    let wb = log_box(&priors.weight, WEIGHT_BOUNDS);
    lower.extend(std::iter::repeat_n(wb.0, num_meta));
    upper.extend(std::iter::repeat_n(wb.1, num_meta));

    let mut starts: Vec<Vec<f64>> = (0..opts.restarts)
        .map(|_| {
            let mut z = sample_gp_log(dim, &priors.kernel, rng);
            z.extend((0..num_meta).map(|_| priors.weight.sample(rng).ln()));
            z
        })
        .collect();
    if let Some(warm) = &opts.warm_start {
        if warm.weights.len() == num_meta && warm.kernel.dim() == dim {
            starts.push(hypers_to_log(warm));
        }
    }

    let objective = |z: &[f64]| {
        let h = hypers_from_log(z, dim);
        let (lml, mut grad) = test_task_log_likelihood_with_gradient(&h, model, cache, test_data)?;
        let (lp, gp) = log_prior_with_gradient(&h.kernel, &h.noise, &priors.kernel);
        let mut value = lml + lp;
        for (g, p) in grad.iter_mut().zip(gp) {
            *g += p;
        }
        for (g, &w) in grad[dim + 2..].iter_mut().zip(h.weights.as_slice()) {
            value += priors.weight.log_density(w);
            *g += priors.weight.log_density_grad_log(w);
        }
        Ok((value, grad))
    };
    let (z, _, _, _) = multi_start_ascent(objective, starts, &lower, &upper, &opts.lbfgs)?;
    Ok(hypers_from_log(&z, dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{log_marginal_likelihood, FittedGP, PriorMean};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn meta_gp(seed: u64, n: usize, f: impl Fn(f64) -> f64) -> FittedGP {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| f(r[0])).collect();
        let data = DataSet::from_rows(&rows, &y).unwrap();
        FittedGP::new(data, KernelParams::new(vec![0.2], 1.0).unwrap(), NoiseParams::new(1e-4).unwrap(), PriorMean::Zero).unwrap()
    }

    fn hypers(num_meta: usize, w: f64) -> TestHypers {
        TestHypers {
            kernel: KernelParams::new(vec![0.3], 0.2).unwrap(),
            noise: NoiseParams::new(1e-3).unwrap(),
            weights: TaskWeights::unchecked(vec![w; num_meta]),
        }
    }

    #[test]
    fn no_meta_tasks_gives_plain_prior() {
        let h = hypers(0, 1.0);
        let model = MetaModel::new(Vec::new(), h.clone()).unwrap();
        let xq = DMatrix::from_row_slice(3, 1, &[0.1, 0.4, 0.9]);
        let (m, c) = test_prior(&model, None, &xq).unwrap();
        assert_eq!(m, DVector::zeros(3));
        assert_eq!(c, kernel_matrix(&xq, &xq, &h.kernel).unwrap());

        let data = DataSet::from_rows(&[vec![0.2], vec![0.6]], &[0.4, -0.1]).unwrap();
        let cache = PosteriorCache::build(model.meta_gps(), data.inputs()).unwrap();
        let a = test_task_log_likelihood(&h, &model, &cache, &data).unwrap();
        let b = log_marginal_likelihood(&h.kernel, &h.noise, &data, &PriorMean::Zero).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn zero_weights_decouple() {
        let gps = vec![meta_gp(1, 6, |x| (6.0 * x).sin()), meta_gp(2, 5, |x| x * x)];
        let h = hypers(2, 0.0);
        let model = MetaModel::new(gps, h.clone()).unwrap();
        let xq = DMatrix::from_row_slice(2, 1, &[0.3, 0.7]);
        let (m, c) = test_prior(&model, None, &xq).unwrap();
        assert_eq!(m, DVector::zeros(2));
        assert_eq!(c, kernel_matrix(&xq, &xq, &h.kernel).unwrap());
    }

    #[test]
    fn stale_cache_rejected() {
        let model = MetaModel::new(vec![meta_gp(1, 4, |x| x)], hypers(1, 1.0)).unwrap();
        let a = DMatrix::from_row_slice(2, 1, &[0.3, 0.7]);
        let b = DMatrix::from_row_slice(2, 1, &[0.3, 0.71]);
        let cache = PosteriorCache::build(model.meta_gps(), &a).unwrap();
        assert!(matches!(test_prior(&model, Some(&cache), &b), Err(Error::StaleCache { .. })));
        assert!(test_prior(&model, Some(&cache), &a).is_ok());
    }

    #[test]
    fn zero_mean_meta_posteriors_leave_mean_at_zero() {
        // meta-task observed at zero outputs: posterior mean is exactly zero
        let gp = meta_gp(3, 5, |_| 0.0);
        let model = MetaModel::new(vec![gp], hypers(1, 1.0)).unwrap();
        let xq = DMatrix::from_row_slice(2, 1, &[0.3, 0.7]);
        for w in [1.0, 2.0] {
            let m2 = model.with_hypers(hypers(1, w)).unwrap();
            let (m, _) = test_prior(&m2, None, &xq).unwrap();
            assert_eq!(m, DVector::zeros(2));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let gps = vec![meta_gp(1, 6, |x| (6.0 * x).sin()), meta_gp(2, 5, |x| x * x - 0.3)];
        let model = MetaModel::new(gps, hypers(2, 1.0)).unwrap();
        let data = DataSet::from_rows(&[vec![0.15], vec![0.5], vec![0.62], vec![0.9]], &[0.7, -0.2, 0.1, 0.4]).unwrap();
        let cache = PosteriorCache::build(model.meta_gps(), data.inputs()).unwrap();
        let h = TestHypers {
            kernel: KernelParams::new(vec![0.25], 0.3).unwrap(),
            noise: NoiseParams::new(2e-3).unwrap(),
            weights: TaskWeights::unchecked(vec![0.6, 1.4]),
        };
        let (_, g) = test_task_log_likelihood_with_gradient(&h, &model, &cache, &data).unwrap();
        let z = hypers_to_log(&h);
        let eps = 1e-5;
        for i in 0..z.len() {
            let mut up = z.clone();
            let mut dn = z.clone();
            up[i] += eps;
            dn[i] -= eps;
            let f = |v: &[f64]| test_task_log_likelihood(&hypers_from_log(v, 1), &model, &cache, &data).unwrap();
            let fd = (f(&up) - f(&dn)) / (2.0 * eps);
            assert!((fd - g[i]).abs() <= 1e-5 * fd.abs().max(1e-6), "component {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn matching_test_data_yields_large_weight() {
        let f = |x: f64| 1.5 * (6.0 * x).sin();
        let gp = meta_gp(4, 20, f);
        let model = MetaModel::new(vec![gp.clone()], hypers(1, 1.0)).unwrap();
        // test data equals the meta-task values at shared inputs
        let idx = [0usize, 3, 7, 11, 15];
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| gp.data().row(i)).collect();
        let y: Vec<f64> = idx.iter().map(|&i| gp.data().outputs()[i]).collect();
        let data = DataSet::from_rows(&rows, &y).unwrap();
        let cache = PosteriorCache::build(model.meta_gps(), data.inputs()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fitted = fit_test_hypers(&model, &cache, &data, &TestPriors::default(), 5, &mut rng).unwrap();
        assert!(fitted.weights.as_slice()[0] >= 0.5, "{:?}", fitted.weights);
    }

    #[test]
    fn unrelated_test_data_yields_small_weight_on_average() {
        let gp = meta_gp(5, 20, |x| 1.5 * (6.0 * x).sin());
        let model = MetaModel::new(vec![gp], hypers(1, 1.0)).unwrap();
        let mut total = 0.0;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let rows: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.random::<f64>()]).collect();
            let y: Vec<f64> = (0..6).map(|_| 0.05 * (rng.random::<f64>() - 0.5)).collect();
            let data = DataSet::from_rows(&rows, &y).unwrap();
            let cache = PosteriorCache::build(model.meta_gps(), data.inputs()).unwrap();
            let fitted = fit_test_hypers(&model, &cache, &data, &TestPriors::default(), 5, &mut rng).unwrap();
            total += fitted.weights.as_slice()[0];
        }
        assert!(total / 10.0 <= 0.5, "mean weight {}", total / 10.0);
    }

    #[test]
    fn deterministic_and_bootstrap() {
        let gp = meta_gp(6, 10, |x| x.sin());
        let model = MetaModel::new(vec![gp], hypers(1, 1.0)).unwrap();
        let data = DataSet::from_rows(&[vec![0.2], vec![0.8]], &[0.1, 0.5]).unwrap();
        let cache = PosteriorCache::build(model.meta_gps(), data.inputs()).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            fit_test_hypers(&model, &cache, &data, &TestPriors::default(), 1, &mut rng).unwrap()
        };
        assert_eq!(run(), run());

        let empty = DataSet::empty(1);
        let empty_cache = PosteriorCache::build(model.meta_gps(), empty.inputs()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let boot = fit_test_hypers(&model, &empty_cache, &empty, &TestPriors::default(), 5, &mut rng).unwrap();
        assert_eq!(boot.weights.as_slice(), &[1.0]);
        assert!((boot.kernel.lengthscales()[0] - 0.5f64.exp()).abs() < 1e-12);
    }
}
