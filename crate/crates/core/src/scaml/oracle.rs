//! Brute-force conditioning of the full joint multi-task GP.
//!
//! Builds the covariance over every meta- and test-task observation from the
//! joint kernel and conditions on all of them at once. Cubic in the total
//! number of points; used to check the modular computation.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::model::DataSet;
use crate::scaml::coreg::TaskIndex;
use crate::scaml::model::{joint_kernel, MetaModel};

pub const ORACLE_MAX_POINTS: usize = 500;

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Test-task posterior mean at the queries.
    pub mean: DVector<f64>,
    /// Test-task posterior covariance at the queries.
    pub cov: DMatrix<f64>,
    /// `log p(y_t, y_1..y_M)` under the joint model.
    pub joint_log_lik: f64,
}

/// Conditions the joint model on `meta_data` (one dataset per meta-task, in
/// model order) and `test_data`, and evaluates the test task at `xq`.
///
/// Kernel and noise hyperparameters come from `model`: each meta GP's
/// kernel and noise, and the model's test hyperparameters.
pub fn joint_mtgp_oracle(
    meta_data: &[DataSet],
    test_data: &DataSet,
    model: &MetaModel,
    xq: &DMatrix<f64>,
) -> Result<OracleResult> {
    if meta_data.len() != model.num_meta() {
        return Err(Error::invalid(format!(
            "{} meta datasets for {} meta-tasks",
            meta_data.len(),
            model.num_meta()
        )));
    }
    let total: usize = meta_data.iter().map(DataSet::len).sum::<usize>() + test_data.len();
    if total > ORACLE_MAX_POINTS {
        return Err(Error::ResourceLimit(format!(
            "joint oracle limited to {ORACLE_MAX_POINTS} observations, got {total}"
        )));
    }

    let mut points: Vec<(Vec<f64>, TaskIndex, f64)> = Vec::with_capacity(total);
    let mut y = Vec::with_capacity(total);
    for (m, data) in meta_data.iter().enumerate() {
        let noise = model.meta_gps()[m].noise().variance();
        for i in 0..data.len() {
            points.push((data.row(i), TaskIndex::Meta(m), noise));
            y.push(data.outputs()[i]);
        }
    }
    let test_noise = model.hypers().noise.variance();
    for i in 0..test_data.len() {
        points.push((test_data.row(i), TaskIndex::Test, test_noise));
        y.push(test_data.outputs()[i]);
    }
    let y = DVector::from_vec(y);
    let queries: Vec<Vec<f64>> = (0..xq.nrows()).map(|i| xq.row(i).iter().copied().collect()).collect();

    let mut k = DMatrix::zeros(total, total);
    for i in 0..total {
        for j in 0..=i {
            let v = joint_kernel(&points[i].0, points[i].1, &points[j].0, points[j].1, model)?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += points[i].2;
    }
    let mut kq = DMatrix::zeros(queries.len(), total);
    for (a, q) in queries.iter().enumerate() {
        for (j, p) in points.iter().enumerate() {
            kq[(a, j)] = joint_kernel(q, TaskIndex::Test, &p.0, p.1, model)?;
        }
    }
    let mut kqq = DMatrix::zeros(queries.len(), queries.len());
    for a in 0..queries.len() {
        for b in 0..queries.len() {
            kqq[(a, b)] = joint_kernel(&queries[a], TaskIndex::Test, &queries[b], TaskIndex::Test, model)?;
        }
    }

    if total == 0 {
        return Ok(OracleResult {
            mean: DVector::zeros(queries.len()),
            cov: kqq,
            joint_log_lik: 0.0,
        });
    }

    let chol = Cholesky::new(k).ok_or(Error::NotPositiveDefinite { jitter: 0.0 })?;
    let alpha = chol.solve(&y);
    let mean = &kq * &alpha;
    let v = chol.solve(&kq.transpose());
    let cov = kqq - &kq * v;
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let joint_log_lik = -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * total as f64 * LN_2PI;
    Ok(OracleResult {
        mean,
        cov,
        joint_log_lik,
    })
}
