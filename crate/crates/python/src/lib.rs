//! Python bindings for the meta-learning GP library.

use std::str::FromStr;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use scaml_core::benchmarks::{true_maximum, BraninTask, Family, HartmannTask, SyntheticTask};
use scaml_core::gp::{fit_map, DataSet, FittedGP, GpPriors, KernelParams, NoiseParams, PriorMean};
use scaml_core::harness::{run_experiment as run_core, write_results_csv, ExperimentConfig, Suite};
use scaml_core::scaml::{
    bootstrap_test_hypers, fit_meta_tasks, fit_test_hypers, joint_mtgp_oracle, test_task_log_likelihood, MetaModel, PosteriorCache,
    ScamlPosterior, TestPriors,
};
use scaml_core::util::stream_rng;
use scaml_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::InvalidArgument(_) | Error::Config(_) | Error::Parse { .. } | Error::Validation(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: &[Vec<f64>], dim: usize) -> PyResult<DMatrix<f64>> {
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(PyValueError::new_err(format!("expected rows of length {dim}, got {}", bad.len())));
    }
    Ok(DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]))
}

fn dataset(x: &[Vec<f64>], y: &[f64], dim: usize) -> PyResult<DataSet> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err(format!("{} inputs but {} outputs", x.len(), y.len())));
    }
    DataSet::new(matrix(x, dim)?, y.to_vec().into()).map_err(to_py)
}

fn infer_dim(x: &[Vec<f64>]) -> PyResult<usize> {
    x.first()
        .map(Vec::len)
        .filter(|d| *d > 0)
        .ok_or_else(|| PyValueError::new_err("cannot infer the input dimension from empty data"))
}

/// Exact GP with an SE-ARD kernel and zero prior mean.
#[pyclass(name = "GaussianProcess", module = "scaml_gp")]
struct PyGaussianProcess {
    inner: FittedGP,
}

#[pymethods]
impl PyGaussianProcess {
    /// Conditions on `(x, y)` with fixed hyperparameters.
    #[new]
    fn new(x: Vec<Vec<f64>>, y: Vec<f64>, lengthscales: Vec<f64>, outputscale: f64, noise: f64) -> PyResult<Self> {
        let data = dataset(&x, &y, lengthscales.len())?;
        let kernel = KernelParams::new(lengthscales, outputscale).map_err(to_py)?;
        let noise = NoiseParams::new(noise).map_err(to_py)?;
        let inner = FittedGP::new(data, kernel, noise, PriorMean::Zero).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// MAP-fits the hyperparameters with multi-start L-BFGS.
    #[staticmethod]
    #[pyo3(signature = (x, y, restarts = 5, seed = 0))]
    fn fit(py: Python<'_>, x: Vec<Vec<f64>>, y: Vec<f64>, restarts: usize, seed: u64) -> PyResult<Self> {
        let data = dataset(&x, &y, infer_dim(&x)?)?;
        let inner = py
            .detach(|| fit_map(&data, &GpPriors::standard(), &PriorMean::Zero, restarts, &mut stream_rng(seed, 0)))
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Posterior mean and marginal variance at each row of `xq`.
    fn predict(&self, xq: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (m, v) = self.inner.posterior_marginals(&matrix(&xq, self.inner.dim())?).map_err(to_py)?;
        Ok((m.as_slice().to_vec(), v.as_slice().to_vec()))
    }

    fn log_marginal_likelihood(&self) -> f64 {
        self.inner.log_marginal_likelihood()
    }

    #[getter]
    fn lengthscales(&self) -> Vec<f64> {
        self.inner.kernel().lengthscales().to_vec()
    }

    #[getter]
    fn outputscale(&self) -> f64 {
        self.inner.kernel().outputscale()
    }

    #[getter]
    fn noise(&self) -> f64 {
        self.inner.noise().variance()
    }

    fn __repr__(&self) -> String {
        format!(
            "GaussianProcess(n={}, lengthscales={:?}, outputscale={:.4}, noise={:.3e})",
            self.inner.data().len(),
            self.inner.kernel().lengthscales(),
            self.inner.kernel().outputscale(),
            self.inner.noise().variance()
        )
    }
}

/// Meta-learned test-task GP. Outputs are used as given, so pass
/// standardized values.
#[pyclass(name = "ScamlModel", module = "scaml_gp")]
struct PyScamlModel {
    model: MetaModel,
    meta: Vec<DataSet>,
    test: DataSet,
    posterior: ScamlPosterior,
}

#[pymethods]
impl PyScamlModel {
    /// Fits one GP per meta-task, then the weights and residual kernel on
    /// the test data. `meta` is a list of `(x, y)` pairs.
    #[staticmethod]
    #[pyo3(signature = (meta, test_x, test_y, restarts = 5, seed = 0))]
    fn fit(
        py: Python<'_>,
        meta: Vec<(Vec<Vec<f64>>, Vec<f64>)>,
        test_x: Vec<Vec<f64>>,
        test_y: Vec<f64>,
        restarts: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let dim = match meta.first() {
            Some((x, _)) => infer_dim(x)?,
            None => infer_dim(&test_x)?,
        };
        let meta = meta.iter().map(|(x, y)| dataset(x, y, dim)).collect::<PyResult<Vec<_>>>()?;
        let test = dataset(&test_x, &test_y, dim)?;
        py.detach(|| {
            let mut rng = stream_rng(seed, 0);
            let gps = fit_meta_tasks(&meta, &GpPriors::standard(), restarts, &mut rng)?;
            let priors = TestPriors::default();
            let base = MetaModel::new(gps, bootstrap_test_hypers(dim, meta.len(), &priors))?;
            let cache = PosteriorCache::build(base.meta_gps(), test.inputs())?;
            let hypers = fit_test_hypers(&base, &cache, &test, &priors, restarts, &mut rng)?;
            let model = base.with_hypers(hypers.clone())?;
            let posterior = ScamlPosterior::new(&model, &cache, hypers, &test)?;
            Ok(Self {
                model,
                meta,
                test,
                posterior,
            })
        })
        .map_err(to_py)
    }

    /// Posterior mean and marginal variance at each row of `xq`.
    fn predict(&self, xq: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (m, v) = self.posterior.predict_marginals(&matrix(&xq, self.model.dim())?).map_err(to_py)?;
        Ok((m.as_slice().to_vec(), v.as_slice().to_vec()))
    }

    /// Same quantities from brute-force conditioning of the joint model.
    fn joint_oracle(&self, xq: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let r = joint_mtgp_oracle(&self.meta, &self.test, &self.model, &matrix(&xq, self.model.dim())?).map_err(to_py)?;
        Ok((r.mean.as_slice().to_vec(), r.cov.diagonal().as_slice().to_vec()))
    }

    /// Log-likelihood of the test outputs under the meta-informed prior.
    fn test_log_likelihood(&self) -> PyResult<f64> {
        let cache = PosteriorCache::build(self.model.meta_gps(), self.test.inputs()).map_err(to_py)?;
        test_task_log_likelihood(self.model.hypers(), &self.model, &cache, &self.test).map_err(to_py)
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.model.hypers().weights.as_slice().to_vec()
    }

    #[getter]
    fn num_meta(&self) -> usize {
        self.model.num_meta()
    }

    fn __repr__(&self) -> String {
        format!(
            "ScamlModel(meta_tasks={}, test_points={}, weights={:?})",
            self.model.num_meta(),
            self.test.len(),
            self.model.hypers().weights.as_slice()
        )
    }
}

/// One member of a synthetic benchmark family, evaluated in native
/// coordinates (minimization form).
#[pyclass(name = "SyntheticTask", module = "scaml_gp")]
struct PySyntheticTask {
    inner: SyntheticTask,
}

fn family(name: &str) -> PyResult<Family> {
    Family::from_str(name).map_err(to_py)
}

#[pymethods]
impl PySyntheticTask {
    /// The canonical instance of `family` ("branin", "hartmann3", "hartmann6").
    #[staticmethod]
    fn standard(family_name: &str) -> PyResult<Self> {
        let inner = match family(family_name)? {
            Family::Branin => SyntheticTask::Branin(BraninTask::standard()),
            Family::Hartmann3 => SyntheticTask::Hartmann(HartmannTask::standard(3).map_err(to_py)?),
            Family::Hartmann6 => SyntheticTask::Hartmann(HartmannTask::standard(6).map_err(to_py)?),
        };
        Ok(Self { inner })
    }

    /// A random member of `family`.
    #[staticmethod]
    fn sample(family_name: &str, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: family(family_name)?.sample(&mut stream_rng(seed, 0)),
        })
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.eval_native(&x).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// `(lower, upper)` corners of the input box.
    #[getter]
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let b = self.inner.domain();
        (b.lower().to_vec(), b.upper().to_vec())
    }

    /// Maximizer and maximum of the negated task.
    fn true_maximum(&self, py: Python<'_>) -> PyResult<(Vec<f64>, f64)> {
        let task = self.inner;
        py.detach(|| true_maximum(&task)).map_err(to_py)
    }
}

/// Runs an experiment from a JSON config and returns one dict per
/// iteration. The CSV files are written only when `write` is true.
#[pyfunction]
#[pyo3(signature = (config_json, write = false))]
fn run_experiment<'py>(py: Python<'py>, config_json: &str, write: bool) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    let outcome = py.detach(|| run_core(&cfg)).map_err(to_py)?;
    if outcome.runs.is_empty() {
        let first = outcome.failures.first().map_or(String::new(), |f| f.message.clone());
        return Err(PyRuntimeError::new_err(format!("every seed failed: {first}")));
    }
    if write {
        write_results_csv(&outcome.runs, &cfg.output, cfg.timings).map_err(to_py)?;
    }
    let mut rows = Vec::new();
    for run in &outcome.runs {
        for r in &run.records {
            let d = PyDict::new(py);
            d.set_item("seed", run.seed)?;
            d.set_item("iteration", r.iteration)?;
            d.set_item("x", r.x.clone())?;
            d.set_item("y_noisy", r.y)?;
            d.set_item("f_noiseless", r.f)?;
            d.set_item("simple_regret", r.simple_regret)?;
            d.set_item("cumulative_regret", r.cumulative_regret)?;
            rows.push(d);
        }
    }
    Ok(rows)
}

/// Runs the numerical self-checks; `suite` is one of "theorem1", "eq9",
/// "psd", "gradients", "scaling", or None for all.
#[pyfunction]
#[pyo3(signature = (suite = None))]
fn verify<'py>(py: Python<'py>, suite: Option<&str>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let suites: Vec<Suite> = match suite {
        None => Suite::ALL.to_vec(),
        Some(name) => vec![Suite::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| PyValueError::new_err(format!("unknown suite '{name}'")))?],
    };
    let mut out = Vec::new();
    for s in suites {
        let report = py.detach(|| s.run()).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("suite", s.name())?;
        d.set_item("passed", report.passed)?;
        d.set_item("metric", report.metric)?;
        d.set_item("value", report.value)?;
        d.set_item("tolerance", report.tolerance)?;
        d.set_item("cases", report.cases)?;
        out.push(d);
    }
    Ok(out)
}

#[pymodule]
fn scaml_gp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyGaussianProcess>()?;
    m.add_class::<PyScamlModel>()?;
    m.add_class::<PySyntheticTask>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
