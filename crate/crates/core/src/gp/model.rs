use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::kernel::{kernel_diag, kernel_matrix, kernel_matrix_with_log_grads, KernelParams, NoiseParams};
use crate::gp::linalg::{add_diagonal, cholesky_with_jitter, CholeskyFactor};
use crate::gp::prior::GpPriors;

const LN_2PI: f64 = 1.8378770664093453;

/// Inputs (one row per observation) and their outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    inputs: DMatrix<f64>,
    outputs: DVector<f64>,
}

impl DataSet {
    pub fn new(inputs: DMatrix<f64>, outputs: DVector<f64>) -> Result<Self> {
        if inputs.nrows() != outputs.len() {
            return Err(Error::invalid(format!(
                "{} input rows but {} outputs",
                inputs.nrows(),
                outputs.len()
            )));
        }
        Ok(Self { inputs, outputs })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            inputs: DMatrix::zeros(0, dim),
            outputs: DVector::zeros(0),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], outputs: &[f64]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("rows have differing lengths"));
        }
        let inputs = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
        Self::new(inputs, DVector::from_column_slice(outputs))
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn outputs(&self) -> &DVector<f64> {
        &self.outputs
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.inputs.row(i).iter().copied().collect()
    }

    /// Same inputs, replaced outputs.
    pub fn with_outputs(&self, outputs: DVector<f64>) -> Result<Self> {
        Self::new(self.inputs.clone(), outputs)
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point of dimension {} pushed onto dataset of dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let n = self.len();
        let inputs = std::mem::replace(&mut self.inputs, DMatrix::zeros(0, 0));
        self.inputs = inputs.insert_row(n, 0.0);
        for (j, &v) in x.iter().enumerate() {
            self.inputs[(n, j)] = v;
        }
        let outputs = std::mem::replace(&mut self.outputs, DVector::zeros(0));
        self.outputs = outputs.push(y);
        Ok(())
    }
}

pub type MeanFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Prior mean function of a GP.
#[derive(Clone, Default)]
pub enum PriorMean {
    #[default]
    Zero,
    Constant(f64),
    Function(MeanFn),
}

impl fmt::Debug for PriorMean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorMean::Zero => write!(f, "Zero"),
            PriorMean::Constant(c) => write!(f, "Constant({c})"),
            PriorMean::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl PriorMean {
    pub fn eval_rows(&self, x: &DMatrix<f64>) -> DVector<f64> {
        match self {
            PriorMean::Zero => DVector::zeros(x.nrows()),
            PriorMean::Constant(c) => DVector::from_element(x.nrows(), *c),
            PriorMean::Function(func) => DVector::from_fn(x.nrows(), |i, _| {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                func(&row)
            }),
        }
    }
}

/// Gaussian conditioning of a prior on noisy observations:
/// the Cholesky factor of `K + σ²I` and `α = (K + σ²I)⁻¹ r`.
#[derive(Debug, Clone)]
pub(crate) struct Conditioning {
    chol: Option<CholeskyFactor>,
    alpha: DVector<f64>,
}

impl Conditioning {
    pub(crate) fn new(mut prior_cov: DMatrix<f64>, noise_variance: f64, residual: &DVector<f64>) -> Result<Self> {
        if residual.is_empty() {
            return Ok(Self {
                chol: None,
                alpha: DVector::zeros(0),
            });
        }
        add_diagonal(&mut prior_cov, noise_variance);
        let chol = cholesky_with_jitter(&prior_cov)?;
        let alpha = chol.solve(residual);
        Ok(Self {
            chol: Some(chol),
            alpha,
        })
    }

    pub(crate) fn chol(&self) -> Option<&CholeskyFactor> {
        self.chol.as_ref()
    }

    pub(crate) fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Posterior mean given the prior mean at the queries and the
    /// `Q × N` prior cross-covariance to the observations.
    pub(crate) fn mean(&self, prior_mean: DVector<f64>, cross: &DMatrix<f64>) -> DVector<f64> {
        match self.chol {
            None => prior_mean,
            Some(_) => prior_mean + cross * &self.alpha,
        }
    }

    pub(crate) fn cov(&self, mut prior_cov: DMatrix<f64>, cross: &DMatrix<f64>) -> DMatrix<f64> {
        if let Some(chol) = &self.chol {
            let v = chol.solve_lower(&cross.transpose());
            prior_cov -= v.transpose() * v;
        }
        for i in 0..prior_cov.nrows() {
            prior_cov[(i, i)] = prior_cov[(i, i)].max(0.0);
        }
        prior_cov
    }

    pub(crate) fn var(&self, mut prior_var: DVector<f64>, cross: &DMatrix<f64>) -> DVector<f64> {
        if let Some(chol) = &self.chol {
            let v = chol.solve_lower(&cross.transpose());
            for (j, pv) in prior_var.iter_mut().enumerate() {
                *pv -= v.column(j).norm_squared();
            }
        }
        prior_var.map(|v| v.max(0.0))
    }

    /// Gaussian log-density of the residual that built this conditioning.
    pub(crate) fn log_likelihood(&self, residual: &DVector<f64>) -> f64 {
        match &self.chol {
            None => 0.0,
            Some(chol) => {
                -0.5 * residual.dot(&self.alpha)
                    - 0.5 * chol.log_det()
                    - 0.5 * residual.len() as f64 * LN_2PI
            }
        }
    }
}

/// A single-task GP conditioned on its data with fixed hyperparameters.
#[derive(Debug, Clone)]
pub struct FittedGP {
    data: DataSet,
    kernel: KernelParams,
    noise: NoiseParams,
    prior_mean: PriorMean,
    conditioning: Conditioning,
}

impl FittedGP {
    pub fn new(data: DataSet, kernel: KernelParams, noise: NoiseParams, prior_mean: PriorMean) -> Result<Self> {
        if data.dim() != kernel.dim() {
            return Err(Error::invalid(format!(
                "data dimension {} does not match kernel dimension {}",
                data.dim(),
                kernel.dim()
            )));
        }
        let k = kernel_matrix(data.inputs(), data.inputs(), &kernel)?;
        let residual = data.outputs() - prior_mean.eval_rows(data.inputs());
        let conditioning = Conditioning::new(k, noise.variance(), &residual)?;
        Ok(Self {
            data,
            kernel,
            noise,
            prior_mean,
            conditioning,
        })
    }

    pub fn data(&self) -> &DataSet {
        &self.data
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn noise(&self) -> NoiseParams {
        self.noise
    }

    pub fn prior_mean(&self) -> &PriorMean {
        &self.prior_mean
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// Lower Cholesky factor of `K(X,X) + σ²I`; `None` for an empty dataset.
    pub fn chol(&self) -> Option<&CholeskyFactor> {
        self.conditioning.chol()
    }

    /// `(K + σ²I)⁻¹ (y - m(X))`
    pub fn alpha(&self) -> &DVector<f64> {
        self.conditioning.alpha()
    }

    fn check_query(&self, xq: &DMatrix<f64>) -> Result<()> {
        if xq.ncols() == self.dim() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "query dimension {} does not match GP dimension {}",
                xq.ncols(),
                self.dim()
            )))
        }
    }

    pub fn posterior(&self, xq: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check_query(xq)?;
        let cross = kernel_matrix(xq, self.data.inputs(), &self.kernel)?;
        let prior_cov = kernel_matrix(xq, xq, &self.kernel)?;
        let mean = self.conditioning.mean(self.prior_mean.eval_rows(xq), &cross);
        let cov = self.conditioning.cov(prior_cov, &cross);
        Ok((mean, cov))
    }

    /// Posterior mean and marginal variances, without the full covariance.
    pub fn posterior_marginals(&self, xq: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_query(xq)?;
        let cross = kernel_matrix(xq, self.data.inputs(), &self.kernel)?;
        let mean = self.conditioning.mean(self.prior_mean.eval_rows(xq), &cross);
        let var = self.conditioning.var(kernel_diag(xq, &self.kernel), &cross);
        Ok((mean, var))
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let residual = self.data.outputs() - self.prior_mean.eval_rows(self.data.inputs());
        self.conditioning.log_likelihood(&residual)
    }
}

/// Posterior mean and covariance at `xq`.
pub fn gp_posterior(gp: &FittedGP, xq: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    gp.posterior(xq)
}

fn require_data(data: &DataSet, params: &KernelParams) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid("marginal likelihood needs at least one observation"));
    }
    if data.dim() != params.dim() {
        return Err(Error::invalid(format!(
            "data dimension {} does not match kernel dimension {}",
            data.dim(),
            params.dim()
        )));
    }
    Ok(())
}

pub fn log_marginal_likelihood(
    params: &KernelParams,
    noise: &NoiseParams,
    data: &DataSet,
    prior_mean: &PriorMean,
) -> Result<f64> {
    require_data(data, params)?;
    let k = kernel_matrix(data.inputs(), data.inputs(), params)?;
    let residual = data.outputs() - prior_mean.eval_rows(data.inputs());
    Ok(Conditioning::new(k, noise.variance(), &residual)?.log_likelihood(&residual))
}

/// Log marginal likelihood and its gradient with respect to
/// `[log ℓ_1.., log outputscale, log noise_variance]`.
pub fn lml_with_gradient(
    params: &KernelParams,
    noise: &NoiseParams,
    data: &DataSet,
    prior_mean: &PriorMean,
) -> Result<(f64, Vec<f64>)> {
    require_data(data, params)?;
    let (k, dks) = kernel_matrix_with_log_grads(data.inputs(), params)?;
    let residual = data.outputs() - prior_mean.eval_rows(data.inputs());
    let cond = Conditioning::new(k, noise.variance(), &residual)?;
    let value = cond.log_likelihood(&residual);
    let chol = cond.chol().expect("nonempty data");
    let alpha = cond.alpha();
    // W = α αᵀ − C⁻¹ ; dL/dθ = ½ tr(W dC/dθ)
    let w = alpha * alpha.transpose() - chol.inverse();
    let mut grad: Vec<f64> = dks.iter().map(|dk| 0.5 * w.component_mul(dk).sum()).collect();
    grad.push(0.5 * noise.variance() * w.trace());
    Ok((value, grad))
}

pub fn lml_gradient(
    params: &KernelParams,
    noise: &NoiseParams,
    data: &DataSet,
    prior_mean: &PriorMean,
) -> Result<Vec<f64>> {
    lml_with_gradient(params, noise, data, prior_mean).map(|(_, g)| g)
}

fn check_priors(params: &KernelParams, noise: &NoiseParams, priors: &GpPriors) -> Result<()> {
    for &l in params.lengthscales() {
        if !priors.lengthscale.contains(l) {
            return Err(Error::invalid(format!("lengthscale {l} outside its prior box")));
        }
    }
    if !priors.outputscale.contains(params.outputscale()) {
        return Err(Error::invalid(format!(
            "outputscale {} outside its prior box",
            params.outputscale()
        )));
    }
    if !priors.noise.contains(noise.variance()) {
        return Err(Error::invalid(format!(
            "noise variance {} outside its prior box",
            noise.variance()
        )));
    }
    Ok(())
}

/// Sum of hyperprior log-densities and its log-space gradient.
pub(crate) fn log_prior_with_gradient(params: &KernelParams, noise: &NoiseParams, priors: &GpPriors) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(params.dim() + 2);
    for &l in params.lengthscales() {
        value += priors.lengthscale.log_density(l);
        grad.push(priors.lengthscale.log_density_grad_log(l));
    }
    value += priors.outputscale.log_density(params.outputscale());
    grad.push(priors.outputscale.log_density_grad_log(params.outputscale()));
    value += priors.noise.log_density(noise.variance());
    grad.push(priors.noise.log_density_grad_log(noise.variance()));
    (value, grad)
}

/// Log marginal likelihood plus the log hyperprior densities.
pub fn log_map_objective(
    params: &KernelParams,
    noise: &NoiseParams,
    data: &DataSet,
    priors: &GpPriors,
    prior_mean: &PriorMean,
) -> Result<f64> {
    check_priors(params, noise, priors)?;
    let lml = log_marginal_likelihood(params, noise, data, prior_mean)?;
    Ok(lml + log_prior_with_gradient(params, noise, priors).0)
}

pub(crate) fn log_map_with_gradient(
    params: &KernelParams,
    noise: &NoiseParams,
    data: &DataSet,
    priors: &GpPriors,
    prior_mean: &PriorMean,
) -> Result<(f64, Vec<f64>)> {
    let (lml, mut grad) = lml_with_gradient(params, noise, data, prior_mean)?;
    let (lp, gp) = log_prior_with_gradient(params, noise, priors);
    for (g, p) in grad.iter_mut().zip(gp) {
        *g += p;
    }
    Ok((lml + lp, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::prior::{HyperPrior, PriorDist};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DataSet {
        let x = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>());
        let y = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        DataSet::new(x, y).unwrap()
    }

    /// Dense Gaussian conditioning with a generic matrix inverse.
    fn dense_posterior(
        data: &DataSet,
        kp: &KernelParams,
        noise: f64,
        mean: f64,
        xq: &DMatrix<f64>,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let n = data.len();
        let mut c = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                c[(i, j)] = crate::gp::kernel::se_ard(&data.row(i), &data.row(j), kp).unwrap();
            }
            c[(i, i)] += noise;
        }
        let cinv = c.try_inverse().unwrap();
        let q = xq.nrows();
        let row = |m: &DMatrix<f64>, i: usize| -> Vec<f64> { m.row(i).iter().copied().collect() };
        let kq = DMatrix::from_fn(q, n, |i, j| crate::gp::kernel::se_ard(&row(xq, i), &data.row(j), kp).unwrap());
        let kqq = DMatrix::from_fn(q, q, |i, j| crate::gp::kernel::se_ard(&row(xq, i), &row(xq, j), kp).unwrap());
        let r = data.outputs().map(|v| v - mean);
        let mu = DVector::from_element(q, mean) + &kq * &cinv * r;
        let cov = kqq - &kq * &cinv * kq.transpose();
        (mu, cov)
    }

    #[test]
    fn empty_data_gives_prior() {
        let kp = KernelParams::new(vec![0.3, 0.6], 1.4).unwrap();
        let gp = FittedGP::new(DataSet::empty(2), kp.clone(), NoiseParams::new(1e-4).unwrap(), PriorMean::Zero).unwrap();
        let xq = DMatrix::from_row_slice(3, 2, &[0.1, 0.2, 0.5, 0.5, 0.9, 0.0]);
        let (m, c) = gp_posterior(&gp, &xq).unwrap();
        assert_eq!(m, DVector::zeros(3));
        assert_eq!(c, kernel_matrix(&xq, &xq, &kp).unwrap());
    }

    #[test]
    fn near_interpolation_single_point() {
        let kp = KernelParams::new(vec![0.5], 2.0).unwrap();
        let data = DataSet::from_rows(&[vec![0.3]], &[1.7]).unwrap();
        let gp = FittedGP::new(data, kp, NoiseParams::new(1e-8).unwrap(), PriorMean::Zero).unwrap();
        let (m, c) = gp.posterior(&DMatrix::from_row_slice(1, 1, &[0.3])).unwrap();
        assert!((m[0] - 1.7).abs() < 1e-3);
        assert!(c[(0, 0)] <= 1e-3 * 2.0);
    }

    #[test]
    fn posterior_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for with_mean in [0.0, 0.8] {
            let data = random_data(&mut rng, 3, 2);
            let kp = KernelParams::new(vec![0.4, 0.9], 1.3).unwrap();
            let noise = 1e-3;
            let gp = FittedGP::new(data.clone(), kp.clone(), NoiseParams::new(noise).unwrap(), PriorMean::Constant(with_mean)).unwrap();
            let xq = DMatrix::from_fn(4, 2, |_, _| rng.random::<f64>());
            let (m, c) = gp.posterior(&xq).unwrap();
            let (m2, c2) = dense_posterior(&data, &kp, noise, with_mean, &xq);
            assert!((&m - &m2).norm() <= 1e-10 * m2.norm());
            assert!((&c - &c2).norm() <= 1e-10 * c2.norm());
            let (mm, vv) = gp.posterior_marginals(&xq).unwrap();
            assert_abs_diff_eq!(mm, m, epsilon = 1e-14);
            assert_abs_diff_eq!(vv, c.diagonal(), epsilon = 1e-12);
        }
    }

    #[test]
    fn function_prior_mean_is_used() {
        let mean = PriorMean::Function(Arc::new(|x: &[f64]| 3.0 * x[0]));
        let kp = KernelParams::new(vec![0.2], 1.0).unwrap();
        let gp = FittedGP::new(DataSet::empty(1), kp, NoiseParams::new(1e-4).unwrap(), mean).unwrap();
        let (m, _) = gp.posterior(&DMatrix::from_row_slice(2, 1, &[0.5, 1.0])).unwrap();
        assert_eq!(m.as_slice(), &[1.5, 3.0]);
    }

    #[test]
    fn scalar_log_likelihoods() {
        // K + σ² = 1 at y = 0: standard normal density at 0
        let kp = KernelParams::new(vec![1.0], 1.0 - 1e-8).unwrap();
        let noise = NoiseParams::new(1e-8).unwrap();
        let data = DataSet::from_rows(&[vec![0.5]], &[0.0]).unwrap();
        let v = log_marginal_likelihood(&kp, &noise, &data, &PriorMean::Zero).unwrap();
        assert_abs_diff_eq!(v, -0.5 * LN_2PI, epsilon = 1e-12);
        assert_abs_diff_eq!(v, -0.91894, epsilon = 1e-5);

        // K + σ² = 4 at y = 2
        let kp = KernelParams::new(vec![1.0], 4.0 - 1e-8).unwrap();
        let data = DataSet::from_rows(&[vec![0.5]], &[2.0]).unwrap();
        let v = log_marginal_likelihood(&kp, &noise, &data, &PriorMean::Zero).unwrap();
        assert_abs_diff_eq!(v, -0.5 - 0.5 * 4f64.ln() - 0.5 * LN_2PI, epsilon = 1e-9);
        assert_abs_diff_eq!(v, -2.11209, epsilon = 1e-5);
    }

    #[test]
    fn log_likelihood_matches_dense_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = random_data(&mut rng, 3, 2);
        let kp = KernelParams::new(vec![0.3, 0.7], 0.9).unwrap();
        let noise = 5e-3;
        let v = log_marginal_likelihood(&kp, &NoiseParams::new(noise).unwrap(), &data, &PriorMean::Constant(0.2)).unwrap();
        let mut c = kernel_matrix(data.inputs(), data.inputs(), &kp).unwrap();
        add_diagonal(&mut c, noise);
        let r = data.outputs().map(|v| v - 0.2);
        let quad = (r.transpose() * c.clone().try_inverse().unwrap() * &r)[0];
        let dense = -0.5 * quad - 0.5 * c.determinant().ln() - 1.5 * LN_2PI;
        assert_abs_diff_eq!(v, dense, epsilon = 1e-10);
    }

    #[test]
    fn empty_data_likelihood_rejected() {
        let kp = KernelParams::new(vec![1.0], 1.0).unwrap();
        assert!(log_marginal_likelihood(&kp, &NoiseParams::new(1e-4).unwrap(), &DataSet::empty(1), &PriorMean::Zero).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let data = random_data(&mut rng, 5, 2);
        let kp = KernelParams::new(vec![0.35, 0.8], 1.2).unwrap();
        let noise = NoiseParams::new(2e-3).unwrap();
        let g = lml_gradient(&kp, &noise, &data, &PriorMean::Zero).unwrap();
        let mut logs: Vec<f64> = kp.lengthscales().iter().map(|l| l.ln()).collect();
        logs.push(kp.outputscale().ln());
        logs.push(noise.variance().ln());
        let eval = |v: &[f64]| {
            let p = KernelParams::from_log_clamped(&v[..2], v[2]);
            log_marginal_likelihood(&p, &NoiseParams::from_log_clamped(v[3]), &data, &PriorMean::Zero).unwrap()
        };
        let h = 1e-5;
        for i in 0..4 {
            let mut up = logs.clone();
            let mut dn = logs.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (eval(&up) - eval(&dn)) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * fd.abs().max(g[i].abs()).max(1e-8), "component {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn symmetric_data_gives_equal_lengthscale_gradients() {
        // every point (a, b) has its mirror (b, a)
        let rows = vec![vec![0.1, 0.6], vec![0.6, 0.1], vec![0.3, 0.9], vec![0.9, 0.3], vec![0.5, 0.5]];
        let data = DataSet::from_rows(&rows, &[1.0, 1.0, -0.5, -0.5, 0.2]).unwrap();
        let kp = KernelParams::isotropic(2, 0.4, 1.0).unwrap();
        let g = lml_gradient(&kp, &NoiseParams::new(1e-3).unwrap(), &data, &PriorMean::Zero).unwrap();
        assert_abs_diff_eq!(g[0], g[1], epsilon = 1e-10);
    }

    #[test]
    fn map_objective_adds_prior_terms() {
        let data = DataSet::from_rows(&[vec![0.2], vec![0.7]], &[0.5, -0.3]).unwrap();
        let kp = KernelParams::new(vec![0.5], 1.0).unwrap();
        let noise = NoiseParams::new(1e-3).unwrap();
        let lml = log_marginal_likelihood(&kp, &noise, &data, &PriorMean::Zero).unwrap();
        let flat = GpPriors::flat();
        assert_eq!(log_map_objective(&kp, &noise, &data, &flat, &PriorMean::Zero).unwrap(), lml);

        let mut priors = flat;
        priors.lengthscale = HyperPrior::gamma(3.0, 6.0, (1e-4, 1e2));
        let v = log_map_objective(&kp, &noise, &data, &priors, &PriorMean::Zero).unwrap();
        assert_abs_diff_eq!(v - lml, 0.29584, epsilon = 1e-5);

        priors.outputscale = HyperPrior::new(PriorDist::LogNormal { mean: 0.0, stddev: 1.0 }, 1e-4, 1e2).unwrap();
        let v2 = log_map_objective(&kp, &noise, &data, &priors, &PriorMean::Zero).unwrap();
        let expected = lml + priors.lengthscale.log_density(0.5) + priors.outputscale.log_density(1.0);
        assert_abs_diff_eq!(v2, expected, epsilon = 1e-12);
    }

    #[test]
    fn map_objective_rejects_out_of_box() {
        let data = DataSet::from_rows(&[vec![0.2]], &[0.5]).unwrap();
        let kp = KernelParams::new(vec![5.0], 1.0).unwrap();
        let mut priors = GpPriors::flat();
        priors.lengthscale = HyperPrior::flat((1e-2, 1.0));
        assert!(log_map_objective(&kp, &NoiseParams::new(1e-3).unwrap(), &data, &priors, &PriorMean::Zero).is_err());
    }

    #[test]
    fn dataset_shape_checks() {
        assert!(DataSet::new(DMatrix::zeros(2, 1), DVector::zeros(3)).is_err());
        let mut d = DataSet::empty(2);
        d.push(&[0.1, 0.2], 1.0).unwrap();
        d.push(&[0.3, 0.4], 2.0).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.row(1), vec![0.3, 0.4]);
        assert!(d.push(&[0.1], 0.0).is_err());
    }
}
