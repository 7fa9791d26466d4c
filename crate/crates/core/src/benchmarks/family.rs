use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::benchmarks::branin::{branin_eval, sample_branin_task, BraninTask, BRANIN_LOWER, BRANIN_UPPER};
use crate::benchmarks::hartmann::{hartmann_eval, sample_hartmann_task, HartmannTask};
use crate::bo::ContinuousBox;
use crate::error::{Error, Result};
use crate::gp::DataSet;
use crate::util::stream_rng;

/// Number of refinement starts taken from the scan.
const REFINE_STARTS: usize = 16;
const REFINE_TOLERANCE: f64 = 1e-10;
const SOBOL_POINTS: u32 = 1 << 20;
const SOBOL_BLOCK: u32 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Branin,
    Hartmann3,
    Hartmann6,
}

impl Family {
    pub fn dim(self) -> usize {
        match self {
            Family::Branin => 2,
            Family::Hartmann3 => 3,
            Family::Hartmann6 => 6,
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> SyntheticTask {
        match self {
            Family::Branin => SyntheticTask::Branin(sample_branin_task(rng)),
            Family::Hartmann3 => SyntheticTask::Hartmann(sample_hartmann_task(3, rng).expect("valid dimension")),
            Family::Hartmann6 => SyntheticTask::Hartmann(sample_hartmann_task(6, rng).expect("valid dimension")),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "branin" => Ok(Family::Branin),
            "hartmann3" => Ok(Family::Hartmann3),
            "hartmann6" => Ok(Family::Hartmann6),
            other => Err(Error::Config(format!("unknown benchmark family '{other}'"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Branin => "branin",
            Family::Hartmann3 => "hartmann3",
            Family::Hartmann6 => "hartmann6",
        })
    }
}

/// One member of a synthetic family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticTask {
    Branin(BraninTask),
    Hartmann(HartmannTask),
}

impl SyntheticTask {
    pub fn dim(&self) -> usize {
        match self {
            SyntheticTask::Branin(_) => 2,
            SyntheticTask::Hartmann(t) => t.dim(),
        }
    }

    /// Native input domain.
    pub fn domain(&self) -> ContinuousBox {
        match self {
            SyntheticTask::Branin(_) => ContinuousBox::new(BRANIN_LOWER.to_vec(), BRANIN_UPPER.to_vec()),
            SyntheticTask::Hartmann(t) => Ok(ContinuousBox::unit(t.dim())),
        }
        .expect("static domain is valid")
    }

    /// Raw benchmark value (minimization form) at a native point.
    pub fn eval_native(&self, x: &[f64]) -> Result<f64> {
        match self {
            SyntheticTask::Branin(t) => branin_eval(t, x),
            SyntheticTask::Hartmann(t) => hartmann_eval(t, x),
        }
    }

    /// Negated value at a unit-cube point, the quantity being maximized.
    pub fn objective_unit(&self, u: &[f64]) -> Result<f64> {
        let x = self.domain().to_native(u);
        let x = self.clamp_native(x);
        Ok(-self.eval_native(&x)?)
    }

    /// Absorbs round-off from the unit-to-native map at the box edges.
    fn clamp_native(&self, mut x: Vec<f64>) -> Vec<f64> {
        let dom = self.domain();
        for (v, (lo, hi)) in x.iter_mut().zip(dom.lower().iter().zip(dom.upper())) {
            *v = v.clamp(*lo, *hi);
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaDataSpec {
    pub num_tasks: usize,
    pub points_per_task: usize,
    /// Observation noise standard deviation in output units.
    pub noise_std: f64,
    pub seed: u64,
}

impl MetaDataSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_task == 0 {
            return Err(Error::invalid("points_per_task must be at least 1"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::invalid(format!("noise_std must be nonnegative, got {}", self.noise_std)));
        }
        Ok(())
    }
}

/// Draws `num_tasks` tasks with noisy observations at uniform inputs.
///
/// Inputs are returned in unit-cube coordinates and outputs are negated so
/// every task is a maximization problem. Task `m` uses its own stream of
/// `spec.seed`, so the data does not depend on how many tasks are drawn.
pub fn generate_meta_data(family: Family, spec: &MetaDataSpec) -> Result<(Vec<DataSet>, Vec<SyntheticTask>)> {
    spec.validate()?;
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut datasets = Vec::with_capacity(spec.num_tasks);
    let mut tasks = Vec::with_capacity(spec.num_tasks);
    for m in 0..spec.num_tasks {
        let mut rng = stream_rng(spec.seed, m as u64);
        let task = family.sample(&mut rng);
        let dom = task.domain();
        let d = task.dim();
        let mut x = DMatrix::zeros(spec.points_per_task, d);
        let mut y = DVector::zeros(spec.points_per_task);
        for i in 0..spec.points_per_task {
            let native: Vec<f64> = (0..d).map(|j| rng.random_range(dom.lower()[j]..=dom.upper()[j])).collect();
            let f = task.eval_native(&native)?;
            let eps = if spec.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            y[i] = -(f + eps);
            for (j, u) in dom.to_unit(&native).into_iter().enumerate() {
                x[(i, j)] = u.clamp(0.0, 1.0);
            }
        }
        datasets.push(DataSet::new(x, y)?);
        tasks.push(task);
    }
    Ok((datasets, tasks))
}

/// Global maximizer of the negated task, as `(x* native, f*)`.
pub fn true_maximum(task: &SyntheticTask) -> Result<(Vec<f64>, f64)> {
    true_maximum_with_seed(task, 0)
}

/// As [`true_maximum`], with `seed` shifting the scan grid (or scrambling
/// the Sobol points in six dimensions).
pub fn true_maximum_with_seed(task: &SyntheticTask, seed: u64) -> Result<(Vec<f64>, f64)> {
    let d = task.dim();
    let mut top: Vec<(f64, Vec<f64>)> = Vec::with_capacity(REFINE_STARTS + 1);
    let mut offer = |v: f64, u: &[f64]| {
        if top.len() < REFINE_STARTS || v > top[top.len() - 1].0 {
            let pos = top.partition_point(|(b, _)| *b >= v);
            top.insert(pos, (v, u.to_vec()));
            top.truncate(REFINE_STARTS);
        }
    };

    let spacing = if d <= 3 {
        let n: usize = if d == 1 { 1_000_000 } else if d == 2 { 1000 } else { 100 };
        let mut rng = stream_rng(seed, 0);
        let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let total = n.pow(d as u32);
        let mut u = vec![0.0; d];
        for idx in 0..total {
            let mut rem = idx;
            for j in 0..d {
                u[j] = ((rem % n) as f64 + shift[j]) / n as f64;
                rem /= n;
            }
            offer(task.objective_unit(&u)?, &u);
        }
        1.0 / n as f64
    } else {
        let scramble = (seed as u32) ^ ((seed >> 32) as u32);
        let mut u = vec![0.0; d];
        // The generator supports 2^16 points per sequence, so the scan
        // concatenates independently scrambled blocks.
        for block in 0..SOBOL_POINTS / SOBOL_BLOCK {
            let block_seed = scramble.wrapping_add(block.wrapping_mul(0x9e37_79b9));
            for i in 0..SOBOL_BLOCK {
                for (j, v) in u.iter_mut().enumerate() {
                    *v = sobol_burley::sample(i, j as u32, block_seed) as f64;
                }
                offer(task.objective_unit(&u)?, &u);
            }
        }
        0.05
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    for (v, u) in top {
        let (u, v) = refine(task, u, v, spacing)?;
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((u, v));
        }
    }
    let (u, v) = best.expect("scan produced candidates");
    Ok((task.clamp_native(task.domain().to_native(&u)), v))
}

/// Compass search on the unit cube; never returns a worse point than `u`.
fn refine(task: &SyntheticTask, mut u: Vec<f64>, mut value: f64, initial_step: f64) -> Result<(Vec<f64>, f64)> {
    let mut step = initial_step;
    while step > REFINE_TOLERANCE {
        let mut moved = false;
        for j in 0..u.len() {
            for sign in [1.0, -1.0] {
                let mut trial = u.clone();
                trial[j] = (trial[j] + sign * step).clamp(0.0, 1.0);
                let v = task.objective_unit(&trial)?;
                if v > value {
                    u = trial;
                    value = v;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok((u, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn noiseless_meta_data_matches_function() {
        let spec = MetaDataSpec { num_tasks: 3, points_per_task: 10, noise_std: 0.0, seed: 5 };
        let (data, tasks) = generate_meta_data(Family::Branin, &spec).unwrap();
        assert_eq!(data.len(), 3);
        for (d, t) in data.iter().zip(&tasks) {
            for i in 0..d.len() {
                let expected = t.objective_unit(&d.row(i)).unwrap();
                assert_abs_diff_eq!(d.outputs()[i], expected, epsilon = 1e-9);
            }
            assert!(d.inputs().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn meta_data_shape_and_prefix_stability() {
        let spec = MetaDataSpec { num_tasks: 8, points_per_task: 32, noise_std: 1.0, seed: 1 };
        let (data, _) = generate_meta_data(Family::Branin, &spec).unwrap();
        assert_eq!(data.len(), 8);
        assert!(data.iter().all(|d| d.len() == 32 && d.dim() == 2));
        let fewer = MetaDataSpec { num_tasks: 4, ..spec };
        let (head, _) = generate_meta_data(Family::Branin, &fewer).unwrap();
        assert_eq!(head[..], data[..4]);
    }

    #[test]
    fn standard_branin_maximum() {
        let (x, f) = true_maximum(&SyntheticTask::Branin(BraninTask::standard())).unwrap();
        assert_abs_diff_eq!(f, -0.397887, epsilon = 1e-6);
        let direct = -branin_eval(&BraninTask::standard(), &x).unwrap();
        assert_eq!(direct, f);
    }

    #[test]
    fn hartmann_three_maximum_and_seed_stability() {
        let task = SyntheticTask::Hartmann(HartmannTask::standard(3).unwrap());
        let (_, f0) = true_maximum_with_seed(&task, 0).unwrap();
        let (_, f1) = true_maximum_with_seed(&task, 99).unwrap();
        assert_abs_diff_eq!(f0, 3.86278, epsilon = 1e-5);
        assert!((f0 - f1).abs() <= 1e-6);
        let zero = SyntheticTask::Hartmann(HartmannTask::new(3, [0.0; 4]).unwrap());
        assert_eq!(true_maximum(&zero).unwrap().1, 0.0);
    }

    #[test]
    fn family_names_round_trip() {
        for f in [Family::Branin, Family::Hartmann3, Family::Hartmann6] {
            assert_eq!(f.to_string().parse::<Family>().unwrap(), f);
        }
        assert!("rosenbrock".parse::<Family>().is_err());
    }
}
