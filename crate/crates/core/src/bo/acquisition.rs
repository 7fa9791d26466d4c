use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::FittedGP;
use crate::scaml::ScamlPosterior;

/// Candidate rows are scored in chunks of this size.
const DISCRETE_BATCH: usize = 4096;
const PATTERN_INITIAL_STEP: f64 = 0.1;
const PATTERN_TOLERANCE: f64 = 1e-6;
const PATTERN_MAX_ROUNDS: usize = 2000;

/// Anything that gives posterior means and marginal variances at a batch of
/// normalized query points.
pub trait PosteriorEvaluator {
    fn dim(&self) -> usize;
    fn predict_marginals(&self, xq: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)>;
}

impl PosteriorEvaluator for FittedGP {
    fn dim(&self) -> usize {
        FittedGP::dim(self)
    }

    fn predict_marginals(&self, xq: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        self.posterior_marginals(xq)
    }
}

impl PosteriorEvaluator for ScamlPosterior {
    fn dim(&self) -> usize {
        ScamlPosterior::dim(self)
    }

    fn predict_marginals(&self, xq: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        ScamlPosterior::predict_marginals(self, xq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub beta_sqrt: f64,
    pub continuous_restarts: usize,
    pub candidate_pool: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            beta_sqrt: 3.0,
            continuous_restarts: 8,
            candidate_pool: 1024,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_sqrt.is_finite() && self.beta_sqrt > 0.0) {
            return Err(Error::invalid(format!("beta_sqrt must be positive, got {}", self.beta_sqrt)));
        }
        if self.candidate_pool == 0 || self.continuous_restarts == 0 {
            return Err(Error::invalid("candidate_pool and continuous_restarts must be positive"));
        }
        Ok(())
    }
}

/// `mean + beta_sqrt * sqrt(variance)`. Variances down to `-1e-10` are
/// treated as round-off and clamped to zero.
pub fn ucb(mean: f64, variance: f64, cfg: &AcquisitionConfig) -> Result<f64> {
    if variance < -1e-10 || variance.is_nan() {
        return Err(Error::invalid(format!("negative posterior variance {variance}")));
    }
    Ok(mean + cfg.beta_sqrt * variance.max(0.0).sqrt())
}

fn ucb_batch<E: PosteriorEvaluator + ?Sized>(model: &E, xq: &DMatrix<f64>, cfg: &AcquisitionConfig) -> Result<Vec<f64>> {
    let (mean, var) = model.predict_marginals(xq)?;
    mean.iter().zip(var.iter()).map(|(&m, &v)| ucb(m, v, cfg)).collect()
}

/// Index of the unvisited row with the largest UCB; ties go to the lowest
/// index.
pub fn maximize_acq_discrete<E: PosteriorEvaluator + ?Sized>(
    model: &E,
    candidates: &DMatrix<f64>,
    visited: &BTreeSet<usize>,
    cfg: &AcquisitionConfig,
) -> Result<usize> {
    let open: Vec<usize> = (0..candidates.nrows()).filter(|i| !visited.contains(i)).collect();
    if open.is_empty() {
        return Err(Error::ExhaustedDomain);
    }
    let mut best: Option<(usize, f64)> = None;
    for chunk in open.chunks(DISCRETE_BATCH) {
        let xq = candidates.select_rows(chunk);
        let scores = ucb_batch(model, &xq, cfg)?;
        for (&i, &s) in chunk.iter().zip(&scores) {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    Ok(best.expect("at least one open candidate").0)
}

fn rows_to_matrix(points: &[Vec<f64>], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), dim, |i, j| points[i][j])
}

/// Maximizes UCB over the box `[lower, upper]` in normalized coordinates.
///
/// Draws a uniform pool, keeps the best `continuous_restarts` points and
/// polishes each with a compass search whose step halves from 0.1 down to
/// 1e-6. All starts advance together so each round is one batched
/// posterior call.
pub fn maximize_acq_continuous<E: PosteriorEvaluator + ?Sized, R: Rng + ?Sized>(
    model: &E,
    lower: &[f64],
    upper: &[f64],
    cfg: &AcquisitionConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let dim = lower.len();
    if dim == 0 || upper.len() != dim || lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
        return Err(Error::invalid("acquisition box is degenerate"));
    }
    if model.dim() != dim {
        return Err(Error::invalid("acquisition box dimension does not match the model"));
    }
    cfg.validate()?;

    let pool: Vec<Vec<f64>> = (0..cfg.candidate_pool)
        .map(|_| (0..dim).map(|j| rng.random_range(lower[j]..=upper[j])).collect())
        .collect();
    let scores = ucb_batch(model, &rows_to_matrix(&pool, dim), cfg)?;
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(cfg.continuous_restarts);

    let mut points: Vec<Vec<f64>> = order.iter().map(|&i| pool[i].clone()).collect();
    let mut values: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    let mut steps = vec![PATTERN_INITIAL_STEP; points.len()];

    for _ in 0..PATTERN_MAX_ROUNDS {
        let active: Vec<usize> = (0..points.len()).filter(|&k| steps[k] >= PATTERN_TOLERANCE).collect();
        if active.is_empty() {
            break;
        }
        let mut trial = Vec::with_capacity(active.len() * 2 * dim);
        for &k in &active {
            for j in 0..dim {
                for sign in [1.0, -1.0] {
                    let mut p = points[k].clone();
                    p[j] = (p[j] + sign * steps[k]).clamp(lower[j], upper[j]);
                    trial.push(p);
                }
            }
        }
        let trial_scores = ucb_batch(model, &rows_to_matrix(&trial, dim), cfg)?;
        for (slot, &k) in active.iter().enumerate() {
            let block = &trial_scores[slot * 2 * dim..(slot + 1) * 2 * dim];
            let mut best: Option<(usize, f64)> = None;
            for (t, &s) in block.iter().enumerate() {
                if s > values[k] && best.is_none_or(|(_, b)| s > b) {
                    best = Some((t, s));
                }
            }
            match best {
                Some((t, s)) => {
                    points[k] = trial[slot * 2 * dim + t].clone();
                    values[k] = s;
                }
                None => steps[k] *= 0.5,
            }
        }
    }

    let mut best = 0;
    for k in 1..points.len() {
        if values[k] > values[best] {
            best = k;
        }
    }
    Ok(points.swap_remove(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Synthetic posterior with closed-form moments.
    struct Surface<F: Fn(&[f64]) -> (f64, f64)> {
        dim: usize,
        f: F,
    }

    impl<F: Fn(&[f64]) -> (f64, f64)> PosteriorEvaluator for Surface<F> {
        fn dim(&self) -> usize {
            self.dim
        }

        fn predict_marginals(&self, xq: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
            let mut m = DVector::zeros(xq.nrows());
            let mut v = DVector::zeros(xq.nrows());
            for i in 0..xq.nrows() {
                let row: Vec<f64> = xq.row(i).iter().copied().collect();
                (m[i], v[i]) = (self.f)(&row);
            }
            Ok((m, v))
        }
    }

    #[test]
    fn ucb_values() {
        let cfg = AcquisitionConfig::default();
        assert_eq!(ucb(0.0, 0.0, &cfg).unwrap(), 0.0);
        assert_eq!(ucb(1.0, 4.0, &cfg).unwrap(), 7.0);
        let greedy = AcquisitionConfig { beta_sqrt: 0.0, ..cfg };
        assert_eq!(ucb(2.5, 9.0, &greedy).unwrap(), 2.5);
        assert_eq!(ucb(1.0, -1e-12, &cfg).unwrap(), 1.0);
        assert!(ucb(1.0, -1e-6, &cfg).is_err());
    }

    #[test]
    fn discrete_single_and_decreasing_variance() {
        let cfg = AcquisitionConfig::default();
        let table = DMatrix::from_fn(5, 1, |i, _| i as f64 / 4.0);
        let model = Surface { dim: 1, f: |x: &[f64]| (1.0, 1.0 - x[0] * 0.5) };
        assert_eq!(maximize_acq_discrete(&model, &table, &BTreeSet::new(), &cfg).unwrap(), 0);
        let visited: BTreeSet<usize> = [0, 1, 2, 4].into_iter().collect();
        assert_eq!(maximize_acq_discrete(&model, &table, &visited, &cfg).unwrap(), 3);
        let all: BTreeSet<usize> = (0..5).collect();
        assert!(matches!(maximize_acq_discrete(&model, &table, &all, &cfg), Err(Error::ExhaustedDomain)));
    }

    #[test]
    fn discrete_ties_pick_lowest_index() {
        let cfg = AcquisitionConfig::default();
        let table = DMatrix::from_fn(6, 1, |i, _| i as f64);
        let model = Surface { dim: 1, f: |_: &[f64]| (0.3, 0.2) };
        let visited: BTreeSet<usize> = [0, 1].into_iter().collect();
        assert_eq!(maximize_acq_discrete(&model, &table, &visited, &cfg).unwrap(), 2);
    }

    #[test]
    fn discrete_matches_scalar_loop() {
        let cfg = AcquisitionConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let table = DMatrix::from_fn(20, 2, |_, _| rng.random::<f64>());
        let model = Surface {
            dim: 2,
            f: |x: &[f64]| ((5.0 * x[0]).sin() * x[1], 0.1 + 0.05 * (3.0 * x[1]).cos()),
        };
        let visited: BTreeSet<usize> = [3, 7].into_iter().collect();
        let got = maximize_acq_discrete(&model, &table, &visited, &cfg).unwrap();

        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for i in 0..20 {
            if visited.contains(&i) {
                continue;
            }
            let (m, v) = (model.f)(&[table[(i, 0)], table[(i, 1)]]);
            let s = m + 3.0 * v.sqrt();
            if s > best.1 {
                best = (i, s);
            }
        }
        assert_eq!(got, best.0);
    }

    #[test]
    fn continuous_finds_quadratic_peak() {
        let cfg = AcquisitionConfig::default();
        let model = Surface {
            dim: 2,
            f: |x: &[f64]| (-((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)), 0.0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = maximize_acq_continuous(&model, &[0.0, 0.0], &[1.0, 1.0], &cfg, &mut rng).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-3 && (x[1] - 0.5).abs() < 1e-3, "{x:?}");
    }

    #[test]
    fn continuous_flat_surface_and_determinism() {
        let cfg = AcquisitionConfig::default();
        let model = Surface { dim: 3, f: |_: &[f64]| (1.0, 0.5) };
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            maximize_acq_continuous(&model, &[0.0; 3], &[1.0; 3], &cfg, &mut rng).unwrap()
        };
        let a = run(5);
        assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a, run(5));
    }

    #[test]
    fn continuous_stays_in_box_with_edge_optimum() {
        let cfg = AcquisitionConfig::default();
        let model = Surface { dim: 2, f: |x: &[f64]| (x[0] + 2.0 * x[1], 0.0) };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = maximize_acq_continuous(&model, &[0.0, 0.0], &[1.0, 1.0], &cfg, &mut rng).unwrap();
        assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(x[0] > 1.0 - 1e-5 && x[1] > 1.0 - 1e-5);
    }
}
