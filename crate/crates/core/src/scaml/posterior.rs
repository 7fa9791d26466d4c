use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::kernel::{kernel_diag, kernel_matrix};
use crate::gp::model::{Conditioning, DataSet, FittedGP};
use crate::scaml::cache::{whiten, PosteriorCache};
use crate::scaml::likelihood::test_prior_with;
use crate::scaml::model::{MetaModel, TestHypers};

/// Test-task GP: the meta-informed prior conditioned on the test data.
#[derive(Debug, Clone)]
pub struct ScamlPosterior {
    meta_gps: Arc<[FittedGP]>,
    hypers: TestHypers,
    test_inputs: DMatrix<f64>,
    whitened: Vec<DMatrix<f64>>,
    conditioning: Conditioning,
}

/// Prior moments at query points, with the prior cross-covariance to the
/// test inputs.
struct QueryPrior {
    mean: DVector<f64>,
    cross: DMatrix<f64>,
}

impl ScamlPosterior {
    pub fn new(model: &MetaModel, cache: &PosteriorCache, hypers: TestHypers, test_data: &DataSet) -> Result<Self> {
        if hypers.weights.len() != model.num_meta() || hypers.kernel.dim() != model.dim() {
            return Err(Error::invalid("test hyperparameters do not match the model shape"));
        }
        if test_data.dim() != model.dim() {
            return Err(Error::invalid("test data dimension does not match the model"));
        }
        cache.check(test_data.inputs())?;
        let (mean, cov) = test_prior_with(model, &hypers, Some(cache), test_data.inputs())?;
        let residual = test_data.outputs() - mean;
        let conditioning = Conditioning::new(cov, hypers.noise.variance(), &residual)?;
        Ok(Self {
            meta_gps: model.meta_gps_shared(),
            hypers,
            test_inputs: test_data.inputs().clone(),
            whitened: cache.whitened().to_vec(),
            conditioning,
        })
    }

    pub fn hypers(&self) -> &TestHypers {
        &self.hypers
    }

    pub fn dim(&self) -> usize {
        self.hypers.kernel.dim()
    }

    fn check_query(&self, xq: &DMatrix<f64>) -> Result<()> {
        if xq.ncols() == self.dim() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "query dimension {} does not match model dimension {}",
                xq.ncols(),
                self.dim()
            )))
        }
    }

    /// Walks the meta-tasks once, accumulating the prior mean, the cross
    /// covariance to `X_t`, and either the full prior covariance or just its
    /// diagonal.
    fn query_prior(&self, xq: &DMatrix<f64>, full: bool) -> Result<(QueryPrior, DMatrix<f64>, DVector<f64>)> {
        let weights = self.hypers.weights.as_slice();
        let mut mean = DVector::zeros(xq.nrows());
        let mut cross = kernel_matrix(xq, &self.test_inputs, &self.hypers.kernel)?;
        let mut cov = if full {
            kernel_matrix(xq, xq, &self.hypers.kernel)?
        } else {
            DMatrix::zeros(0, 0)
        };
        let mut var = kernel_diag(xq, &self.hypers.kernel);
        for ((gp, &w), white_t) in self.meta_gps.iter().zip(weights).zip(&self.whitened) {
            let w2 = w * w;
            let (cross_m, white_q) = whiten(gp, xq)?;
            if !gp.data().is_empty() {
                mean.axpy(w, &(&cross_m * gp.alpha()), 1.0);
            }
            // Σ_m(xq, X_t) = k_m(xq, X_t) - A_qᵀ A_t
            let mut sigma_qt = kernel_matrix(xq, &self.test_inputs, gp.kernel())?;
            if white_q.nrows() > 0 {
                sigma_qt -= white_q.transpose() * white_t;
            }
            cross.zip_apply(&sigma_qt, |c, s| *c += w2 * s);
            if full {
                let mut sigma_qq = kernel_matrix(xq, xq, gp.kernel())?;
                if white_q.nrows() > 0 {
                    sigma_qq -= white_q.transpose() * &white_q;
                }
                cov.zip_apply(&sigma_qq, |c, s| *c += w2 * s);
            }
            let s = gp.kernel().outputscale();
            for (j, v) in var.iter_mut().enumerate() {
                let reduction = if white_q.nrows() > 0 { white_q.column(j).norm_squared() } else { 0.0 };
                *v += w2 * (s - reduction);
            }
        }
        Ok((QueryPrior { mean, cross }, cov, var))
    }

    pub fn predict(&self, xq: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check_query(xq)?;
        let (prior, cov, _) = self.query_prior(xq, true)?;
        let mean = self.conditioning.mean(prior.mean, &prior.cross);
        let mut cov = self.conditioning.cov(cov, &prior.cross);
        cov = (&cov + cov.transpose()) * 0.5;
        Ok((mean, cov))
    }

    /// Posterior mean and marginal variances.
    pub fn predict_marginals(&self, xq: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_query(xq)?;
        let (prior, _, var) = self.query_prior(xq, false)?;
        let mean = self.conditioning.mean(prior.mean, &prior.cross);
        let var = self.conditioning.var(var, &prior.cross);
        Ok((mean, var))
    }
}

/// Posterior of the test task at `xq` given the meta-data and `test_data`.
pub fn test_posterior(
    model: &MetaModel,
    cache: &PosteriorCache,
    hypers: &TestHypers,
    test_data: &DataSet,
    xq: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    ScamlPosterior::new(model, cache, hypers.clone(), test_data)?.predict(xq)
}
