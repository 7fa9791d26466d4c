use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::kernel::kernel_matrix;
use crate::gp::model::FittedGP;
use crate::util::matrix_hash;

/// Meta-task posteriors evaluated at the current test inputs.
///
/// Keyed by a content hash of the inputs; any change of `X_t` needs a new
/// cache.
#[derive(Debug, Clone)]
pub struct PosteriorCache {
    key: u64,
    rows: usize,
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
    /// `L_m⁻¹ k_m(X_m, X_t)` per meta-task, reused for query cross terms.
    whitened: Vec<DMatrix<f64>>,
}

/// Whitened cross-kernel `L_m⁻¹ k_m(X_m, X)`; empty when the GP has no data.
pub(crate) fn whiten(gp: &FittedGP, x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let cross = kernel_matrix(x, gp.data().inputs(), gp.kernel())?;
    let white = match gp.chol() {
        Some(chol) => chol.solve_lower(&cross.transpose()),
        None => DMatrix::zeros(0, x.nrows()),
    };
    Ok((cross, white))
}

impl PosteriorCache {
    pub fn build(meta_gps: &[FittedGP], x_t: &DMatrix<f64>) -> Result<Self> {
        let mut means = Vec::with_capacity(meta_gps.len());
        let mut covs = Vec::with_capacity(meta_gps.len());
        let mut whitened = Vec::with_capacity(meta_gps.len());
        for gp in meta_gps {
            let (cross, white) = whiten(gp, x_t)?;
            let mean = if gp.data().is_empty() {
                DVector::zeros(x_t.nrows())
            } else {
                &cross * gp.alpha()
            };
            let mut cov = kernel_matrix(x_t, x_t, gp.kernel())?;
            if white.nrows() > 0 {
                cov -= white.transpose() * &white;
                cov = (&cov + cov.transpose()) * 0.5;
            }
            means.push(mean);
            covs.push(cov);
            whitened.push(white);
        }
        Ok(Self {
            key: matrix_hash(x_t),
            rows: x_t.nrows(),
            means,
            covs,
            whitened,
        })
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn num_meta(&self) -> usize {
        self.means.len()
    }

    /// `μ_m(X_t)`
    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    /// `Σ_m(X_t, X_t)`
    pub fn covs(&self) -> &[DMatrix<f64>] {
        &self.covs
    }

    pub(crate) fn whitened(&self) -> &[DMatrix<f64>] {
        &self.whitened
    }

    pub fn is_valid_for(&self, x: &DMatrix<f64>) -> bool {
        x.nrows() == self.rows && matrix_hash(x) == self.key
    }

    pub fn check(&self, x: &DMatrix<f64>) -> Result<()> {
        if self.is_valid_for(x) {
            Ok(())
        } else {
            Err(Error::StaleCache {
                cached: self.rows,
                cached_key: self.key,
                queried: x.nrows(),
                queried_key: matrix_hash(x),
            })
        }
    }
}
