//! Self-checks of the modular computation against brute-force oracles.

use std::fmt;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::gp::linalg::min_eigenvalue;
use crate::gp::{lml_with_gradient, log_marginal_likelihood, DataSet, FittedGP, KernelParams, NoiseParams, PriorMean};
use crate::scaml::{
    coreg_matrix, joint_kernel, joint_mtgp_oracle, test_posterior, test_task_log_likelihood,
    test_task_log_likelihood_with_gradient, MetaModel, PosteriorCache, TaskIndex, TaskWeights, TestHypers,
};
use crate::util::stream_rng;

pub const POSTERIOR_TOLERANCE: f64 = 1e-8;
pub const POSTERIOR_FLOOR: f64 = 1e-10;
pub const LIKELIHOOD_TOLERANCE: f64 = 1e-8;
pub const PSD_TOLERANCE: f64 = -1e-8;
pub const GRADIENT_TOLERANCE: f64 = 1e-5;
pub const SCALING_MAX_RATIO: f64 = 12.0;
pub const SCALING_TASK_COUNTS: [usize; 4] = [4, 8, 16, 32];

const SUITE_SEED: u64 = 20_240_601;
const RANDOM_CONFIGS: usize = 20;
const COREG_DRAWS: usize = 200;
const GRAM_LAYOUTS: usize = 50;
const GRADIENT_INSTANCES: usize = 20;
const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    /// Modular test posterior against the joint multi-task oracle.
    #[value(name = "theorem1")]
    Posterior,
    /// Joint likelihood split into test and meta-task terms.
    #[value(name = "eq9")]
    Likelihood,
    /// Coregionalization and joint Gram matrices are positive semi-definite.
    Psd,
    /// Analytic likelihood gradients against central differences.
    Gradients,
    /// Likelihood evaluation time as the number of meta-tasks grows.
    Scaling,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Posterior, Suite::Likelihood, Suite::Psd, Suite::Gradients, Suite::Scaling];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Posterior => "theorem1",
            Suite::Likelihood => "eq9",
            Suite::Psd => "psd",
            Suite::Gradients => "gradients",
            Suite::Scaling => "scaling",
        }
    }

    pub fn run(self) -> Result<CheckReport> {
        match self {
            Suite::Posterior => check_posterior_equivalence(),
            Suite::Likelihood => check_likelihood_decomposition(),
            Suite::Psd => check_psd(),
            Suite::Gradients => check_gradients(),
            Suite::Scaling => check_scaling(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub suite: Suite,
    /// What `value` measures, e.g. `max_rel_error`.
    pub metric: &'static str,
    /// Worst case over all configurations.
    pub value: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub passed: bool,
    /// Description of the first configuration that failed.
    pub first_failure: Option<String>,
    pub details: Vec<String>,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.details {
            writeln!(f, "  {d}")?;
        }
        write!(
            f,
            "{}: {} {}={:.3e} (tolerance {:.1e}) over {} cases",
            self.suite.name(),
            if self.passed { "PASS" } else { "FAIL" },
            self.metric,
            self.value,
            self.tolerance,
            self.cases
        )?;
        if let Some(fail) = &self.first_failure {
            write!(f, "\n  first failure: {fail}")?;
        }
        Ok(())
    }
}

/// Randomly drawn joint model with data, for oracle comparisons.
#[derive(Debug, Clone)]
pub struct RandomConfig {
    pub seed: u64,
    pub model: MetaModel,
    pub meta_data: Vec<DataSet>,
    pub test_data: DataSet,
    pub queries: DMatrix<f64>,
}

impl RandomConfig {
    pub fn describe(&self) -> String {
        let sizes: Vec<usize> = self.meta_data.iter().map(DataSet::len).collect();
        format!(
            "seed {} dim {} meta sizes {:?} test size {} weights {:?}",
            self.seed,
            self.model.dim(),
            sizes,
            self.test_data.len(),
            self.model.hypers().weights.as_slice()
        )
    }
}

fn random_inputs(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.random::<f64>())
}

fn random_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DataSet {
    let x = random_inputs(rng, n, d);
    let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    DataSet::new(x, y).expect("consistent shapes")
}

fn random_kernel(rng: &mut ChaCha8Rng, d: usize, outputscale: (f64, f64)) -> KernelParams {
    let ls = (0..d).map(|_| rng.random_range(0.2..0.8)).collect();
    KernelParams::new(ls, rng.random_range(outputscale.0..outputscale.1)).expect("in-box draw")
}

fn random_noise(rng: &mut ChaCha8Rng) -> NoiseParams {
    NoiseParams::new(rng.random_range(1e-3..1e-2)).expect("in-box draw")
}

/// Up to 4 meta-tasks with up to 8 points each, up to 5 test points and up
/// to 3 input dimensions, with fixed hyperparameters.
pub fn random_config(seed: u64) -> RandomConfig {
    let mut rng = stream_rng(SUITE_SEED, seed);
    let d = rng.random_range(1..=3);
    let m = rng.random_range(0..=4);
    let mut meta_data = Vec::with_capacity(m);
    let mut gps = Vec::with_capacity(m);
    for _ in 0..m {
        let n = rng.random_range(1..=8);
        let data = random_data(&mut rng, n, d);
        let kernel = random_kernel(&mut rng, d, (0.5, 2.0));
        let noise = random_noise(&mut rng);
        gps.push(FittedGP::new(data.clone(), kernel, noise, PriorMean::Zero).expect("well conditioned"));
        meta_data.push(data);
    }
    let n_t = rng.random_range(0..=5);
    let test_data = random_data(&mut rng, n_t, d);
    let hypers = TestHypers {
        kernel: random_kernel(&mut rng, d, (0.1, 1.0)),
        noise: random_noise(&mut rng),
        weights: TaskWeights::new((0..m).map(|_| rng.random_range(0.2..1.5)).collect()).expect("positive"),
    };
    let queries = random_inputs(&mut rng, 3, d);
    RandomConfig {
        seed,
        model: MetaModel::new(gps, hypers).expect("consistent model"),
        meta_data,
        test_data,
        queries,
    }
}

fn relative(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(POSTERIOR_FLOOR)
}

struct Tracker {
    worst: f64,
    first_failure: Option<String>,
    cases: usize,
}

impl Tracker {
    fn new(start: f64) -> Self {
        Self {
            worst: start,
            first_failure: None,
            cases: 0,
        }
    }

    /// Records a case where larger values are worse.
    fn upper(&mut self, value: f64, tolerance: f64, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if value > self.worst || value.is_nan() {
            self.worst = value;
        }
        if !(value <= tolerance) && self.first_failure.is_none() {
            self.first_failure = Some(format!("{} (value {value:.3e})", describe()));
        }
    }

    /// Records a case where smaller values are worse.
    fn lower(&mut self, value: f64, tolerance: f64, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if value < self.worst || value.is_nan() {
            self.worst = value;
        }
        if !(value >= tolerance) && self.first_failure.is_none() {
            self.first_failure = Some(format!("{} (value {value:.3e})", describe()));
        }
    }

    fn report(self, suite: Suite, metric: &'static str, tolerance: f64, details: Vec<String>) -> CheckReport {
        CheckReport {
            suite,
            metric,
            value: self.worst,
            tolerance,
            cases: self.cases,
            passed: self.first_failure.is_none(),
            first_failure: self.first_failure,
            details,
        }
    }
}

pub fn check_posterior_equivalence() -> Result<CheckReport> {
    let mut t = Tracker::new(0.0);
    for seed in 0..RANDOM_CONFIGS as u64 {
        let cfg = random_config(seed);
        let cache = PosteriorCache::build(cfg.model.meta_gps(), cfg.test_data.inputs())?;
        let (mean, cov) = test_posterior(&cfg.model, &cache, cfg.model.hypers(), &cfg.test_data, &cfg.queries)?;
        let oracle = joint_mtgp_oracle(&cfg.meta_data, &cfg.test_data, &cfg.model, &cfg.queries)?;
        let mean_err = relative(&DMatrix::from_column_slice(mean.len(), 1, mean.as_slice()),
            &DMatrix::from_column_slice(oracle.mean.len(), 1, oracle.mean.as_slice()));
        let err = mean_err.max(relative(&cov, &oracle.cov));
        t.upper(err, POSTERIOR_TOLERANCE, || cfg.describe());
    }
    Ok(t.report(Suite::Posterior, "max_rel_error", POSTERIOR_TOLERANCE, Vec::new()))
}

pub fn check_likelihood_decomposition() -> Result<CheckReport> {
    let mut t = Tracker::new(0.0);
    for seed in 0..RANDOM_CONFIGS as u64 {
        let cfg = random_config(seed);
        let cache = PosteriorCache::build(cfg.model.meta_gps(), cfg.test_data.inputs())?;
        // an empty test set contributes log 1
        let test_term = if cfg.test_data.is_empty() {
            0.0
        } else {
            test_task_log_likelihood(cfg.model.hypers(), &cfg.model, &cache, &cfg.test_data)?
        };
        let meta_terms: f64 = cfg.model.meta_gps().iter().map(FittedGP::log_marginal_likelihood).sum();
        let oracle = joint_mtgp_oracle(&cfg.meta_data, &cfg.test_data, &cfg.model, &cfg.queries)?;
        let err = (oracle.joint_log_lik - (test_term + meta_terms)).abs();
        t.upper(err, LIKELIHOOD_TOLERANCE, || cfg.describe());
    }
    Ok(t.report(Suite::Likelihood, "max_abs_error", LIKELIHOOD_TOLERANCE, Vec::new()))
}

pub fn check_psd() -> Result<CheckReport> {
    let mut t = Tracker::new(f64::INFINITY);
    let mut rng = stream_rng(SUITE_SEED, 1_000);
    for draw in 0..COREG_DRAWS {
        let m = rng.random_range(1..=8);
        let weights: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..=3.0)).collect();
        let mut total = coreg_matrix(TaskIndex::Test, 0.0, m)?;
        let mut worst = min_eigenvalue(&total);
        for (k, &w) in weights.iter().enumerate() {
            let wm = coreg_matrix(TaskIndex::Meta(k), w, m)?;
            worst = worst.min(min_eigenvalue(&wm));
            total += wm;
        }
        worst = worst.min(min_eigenvalue(&total));
        t.lower(worst, PSD_TOLERANCE, || format!("coreg draw {draw}: weights {weights:?}"));
    }
    for layout in 0..GRAM_LAYOUTS {
        let d = rng.random_range(1..=3);
        let m = rng.random_range(1..=4);
        let gps = (0..m)
            .map(|_| {
                let kernel = random_kernel(&mut rng, d, (0.5, 2.0));
                FittedGP::new(DataSet::empty(d), kernel, random_noise(&mut rng), PriorMean::Zero)
            })
            .collect::<Result<Vec<_>>>()?;
        let weights: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..=3.0)).collect();
        let hypers = TestHypers {
            kernel: random_kernel(&mut rng, d, (0.1, 1.0)),
            noise: random_noise(&mut rng),
            weights: TaskWeights::unchecked(weights.clone()),
        };
        let model = MetaModel::new(gps, hypers)?;
        let n = rng.random_range(2..=30);
        let points: Vec<(Vec<f64>, TaskIndex)> = (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                let task = rng.random_range(0..=m);
                (x, if task == m { TaskIndex::Test } else { TaskIndex::Meta(task) })
            })
            .collect();
        let mut gram = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = joint_kernel(&points[i].0, points[i].1, &points[j].0, points[j].1, &model)?;
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        t.lower(min_eigenvalue(&gram), PSD_TOLERANCE, || {
            format!("gram layout {layout}: dim {d}, {m} meta-tasks, {n} points, weights {weights:?}")
        });
    }
    Ok(t.report(Suite::Psd, "min_eigenvalue", PSD_TOLERANCE, Vec::new()))
}

fn gradient_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / scale.max(1e-8)
}

fn central_difference(z: &[f64], f: impl Fn(&[f64]) -> Result<f64>) -> Result<Vec<f64>> {
    (0..z.len())
        .map(|k| {
            let mut plus = z.to_vec();
            let mut minus = z.to_vec();
            plus[k] += FD_STEP;
            minus[k] -= FD_STEP;
            Ok((f(&plus)? - f(&minus)?) / (2.0 * FD_STEP))
        })
        .collect()
}

fn gp_from_log(z: &[f64], d: usize) -> Result<(KernelParams, NoiseParams)> {
    let kernel = KernelParams::new(z[..d].iter().map(|v| v.exp()).collect(), z[d].exp())?;
    Ok((kernel, NoiseParams::new(z[d + 1].exp())?))
}

fn test_hypers_from_log(z: &[f64], d: usize) -> Result<TestHypers> {
    let (kernel, noise) = gp_from_log(z, d)?;
    Ok(TestHypers {
        kernel,
        noise,
        weights: TaskWeights::new(z[d + 2..].iter().map(|v| v.exp()).collect())?,
    })
}

/// Half the instances check the single-task marginal likelihood, half the
/// test-task likelihood including the weight derivatives.
pub fn check_gradients() -> Result<CheckReport> {
    let mut t = Tracker::new(0.0);
    for instance in 0..GRADIENT_INSTANCES as u64 {
        let mut rng = stream_rng(SUITE_SEED, 2_000 + instance);
        let d = rng.random_range(1..=3);
        if instance % 2 == 0 {
            let n = rng.random_range(2..=10);
            let data = random_data(&mut rng, n, d);
            let kernel = random_kernel(&mut rng, d, (0.5, 2.0));
            let noise = random_noise(&mut rng);
            let mean = PriorMean::Constant(rng.random_range(-0.5..0.5));
            let (_, grad) = lml_with_gradient(&kernel, &noise, &data, &mean)?;
            let z: Vec<f64> = kernel
                .lengthscales()
                .iter()
                .map(|l| l.ln())
                .chain([kernel.outputscale().ln(), noise.variance().ln()])
                .collect();
            let fd = central_difference(&z, |z| {
                let (k, s) = gp_from_log(z, d)?;
                log_marginal_likelihood(&k, &s, &data, &mean)
            })?;
            t.upper(gradient_error(&grad, &fd), GRADIENT_TOLERANCE, || {
                format!("single-task instance {instance}: dim {d}, {n} points")
            });
        } else {
            let mut cfg = random_config(10_000 + instance);
            while cfg.test_data.is_empty() {
                cfg = random_config(cfg.seed + 1);
            }
            let d = cfg.model.dim();
            let cache = PosteriorCache::build(cfg.model.meta_gps(), cfg.test_data.inputs())?;
            let h = cfg.model.hypers();
            let (_, grad) = test_task_log_likelihood_with_gradient(h, &cfg.model, &cache, &cfg.test_data)?;
            let z: Vec<f64> = h
                .kernel
                .lengthscales()
                .iter()
                .map(|l| l.ln())
                .chain([h.kernel.outputscale().ln(), h.noise.variance().ln()])
                .chain(h.weights.as_slice().iter().map(|w| w.ln()))
                .collect();
            let fd = central_difference(&z, |z| {
                test_task_log_likelihood(&test_hypers_from_log(z, d)?, &cfg.model, &cache, &cfg.test_data)
            })?;
            t.upper(gradient_error(&grad, &fd), GRADIENT_TOLERANCE, || {
                format!("test-task instance {instance}: {}", cfg.describe())
            });
        }
    }
    Ok(t.report(Suite::Gradients, "max_rel_error", GRADIENT_TOLERANCE, Vec::new()))
}

/// Mean wall time of one cached test-task likelihood evaluation for each
/// meta-task count, in seconds.
pub fn likelihood_timings(task_counts: &[usize], meta_points: usize, test_points: usize) -> Result<Vec<(usize, f64)>> {
    let d = 2;
    let mut rng = stream_rng(SUITE_SEED, 3_000);
    let largest = task_counts.iter().copied().max().unwrap_or(0);
    let gps = (0..largest)
        .map(|_| {
            let data = random_data(&mut rng, meta_points, d);
            FittedGP::new(data, random_kernel(&mut rng, d, (0.5, 2.0)), random_noise(&mut rng), PriorMean::Zero)
        })
        .collect::<Result<Vec<_>>>()?;
    let test = random_data(&mut rng, test_points, d);
    let kernel = random_kernel(&mut rng, d, (0.1, 1.0));
    let noise = random_noise(&mut rng);

    let mut out = Vec::with_capacity(task_counts.len());
    for &m in task_counts {
        let hypers = TestHypers {
            kernel: kernel.clone(),
            noise,
            weights: TaskWeights::new(vec![0.7; m])?,
        };
        let model = MetaModel::new(gps[..m].to_vec(), hypers)?;
        let cache = PosteriorCache::build(model.meta_gps(), test.inputs())?;
        // warm up, then time a fixed budget
        for _ in 0..20 {
            test_task_log_likelihood(model.hypers(), &model, &cache, &test)?;
        }
        let reps = 400;
        let start = Instant::now();
        let mut sink = 0.0;
        for _ in 0..reps {
            sink += test_task_log_likelihood(model.hypers(), &model, &cache, &test)?;
        }
        let mean = start.elapsed().as_secs_f64() / reps as f64;
        assert!(sink.is_finite());
        out.push((m, mean));
    }
    Ok(out)
}

pub fn check_scaling() -> Result<CheckReport> {
    let timings = likelihood_timings(&SCALING_TASK_COUNTS, 32, 16)?;
    let details: Vec<String> = timings.iter().map(|(m, s)| format!("M={m:<3} mean eval {:.2} us", s * 1e6)).collect();
    let ratio = timings[timings.len() - 1].1 / timings[0].1;
    let mut t = Tracker::new(0.0);
    t.upper(ratio, SCALING_MAX_RATIO, || {
        format!("time ratio M={} / M={}", SCALING_TASK_COUNTS[3], SCALING_TASK_COUNTS[0])
    });
    Ok(t.report(Suite::Scaling, "time_ratio", SCALING_MAX_RATIO, details))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_configs_respect_limits() {
        for seed in 0..50 {
            let c = random_config(seed);
            assert!(c.model.dim() <= 3 && c.model.num_meta() <= 4 && c.test_data.len() <= 5);
            assert!(c.meta_data.iter().all(|d| !d.is_empty() && d.len() <= 8));
        }
    }

    #[test]
    fn suites_pass() {
        for suite in [Suite::Posterior, Suite::Likelihood, Suite::Psd, Suite::Gradients] {
            let report = suite.run().unwrap();
            assert!(report.passed, "{report}");
        }
    }
}
