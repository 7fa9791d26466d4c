//! Multi-seed experiment orchestration.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::benchmarks::{
    generate_meta_data, load_tabular, subsample_meta_tabular, true_maximum, Family, MetaDataSpec, SyntheticTask,
    TabularTask,
};
use crate::bo::{bo_step, BOState, DiscreteTable, Domain, IterationRecord, Objective, StepOutcome, Surrogate};
use crate::error::{Error, Result};
use crate::gp::{DataSet, GpPriors};
use crate::harness::backend::{GpBackend, ScamlBackend};
use crate::harness::config::{Benchmark, ExperimentConfig, Method};
use crate::scaml::TestPriors;
use crate::util::stream_rng;

/// Per-seed random streams, fixed so every method sees the same meta-data
/// and test task for a given seed.
const STREAM_META: u64 = 0;
const STREAM_TEST: u64 = 1;
const STREAM_FIT: u64 = 2;
const STREAM_BO: u64 = 3;

/// One seed's optimization trace, with `x` in native coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub records: Vec<IterationRecord>,
    pub true_max: f64,
    /// The discrete domain ran out before `iterations` were completed.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedFailure {
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutcome {
    /// Successful runs in seed order.
    pub runs: Vec<RunResult>,
    pub failures: Vec<SeedFailure>,
}

pub type NativeMap = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Everything about one seed's problem that does not depend on the method.
pub struct Problem {
    pub meta_data: Vec<DataSet>,
    pub domain: Domain,
    pub objective: Box<dyn Objective + Send + Sync>,
    pub true_max: f64,
    /// Maps a normalized query back to native coordinates.
    pub to_native: NativeMap,
}

struct SyntheticObjective {
    task: SyntheticTask,
    noise_std: f64,
}

impl Objective for SyntheticObjective {
    fn dim(&self) -> usize {
        self.task.dim()
    }

    fn noiseless(&self, x: &[f64]) -> Result<f64> {
        self.task.objective_unit(x)
    }

    fn noise_std(&self) -> f64 {
        self.noise_std
    }
}

struct TableObjective {
    values: HashMap<Vec<u64>, f64>,
    dim: usize,
    noise_std: f64,
}

impl Objective for TableObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn noiseless(&self, x: &[f64]) -> Result<f64> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        self.values
            .get(&key)
            .copied()
            .ok_or_else(|| Error::invalid(format!("{x:?} is not a row of the lookup table")))
    }

    fn noise_std(&self) -> f64 {
        self.noise_std
    }
}

/// Loaded benchmark shared by all seeds.
pub enum BenchmarkData {
    Synthetic(Family),
    Tabular(Vec<TabularTask>),
}

impl BenchmarkData {
    pub fn load(benchmark: &Benchmark) -> Result<Self> {
        match benchmark {
            Benchmark::Synthetic(f) => Ok(BenchmarkData::Synthetic(*f)),
            Benchmark::Tabular(path) => load_table_set(path).map(BenchmarkData::Tabular),
        }
    }
}

/// A single CSV, or every `*.csv` in a directory sorted by file name.
fn load_table_set(path: &Path) -> Result<Vec<TabularTask>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    let tasks = if meta.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Config(format!("{} contains no .csv tables", path.display())));
        }
        files.iter().map(|p| load_tabular(p)).collect::<Result<Vec<_>>>()?
    } else {
        vec![load_tabular(path)?]
    };
    let columns = tasks[0].columns();
    if tasks.iter().any(|t| t.columns() != columns) {
        return Err(Error::Validation("all tables must share one search space".into()));
    }
    Ok(tasks)
}

/// Builds the problem for `seed`: continuous synthetic tasks, or one table
/// as the test task with meta-tasks drawn from the rest.
pub fn build_problem(data: &BenchmarkData, cfg: &ExperimentConfig, seed: u64) -> Result<Problem> {
    let noise_std = cfg.noise_std();
    match data {
        BenchmarkData::Synthetic(family) => {
            let spec = MetaDataSpec {
                num_tasks: cfg.meta_tasks,
                points_per_task: cfg.points_per_task,
                noise_std,
                seed: stream_rng(seed, STREAM_META).random(),
            };
            let (meta_data, _) = generate_meta_data(*family, &spec)?;
            let task = family.sample(&mut stream_rng(seed, STREAM_TEST));
            let (_, true_max) = true_maximum(&task)?;
            let native = task.domain();
            Ok(Problem {
                meta_data,
                domain: Domain::ContinuousBox(native.clone()),
                objective: Box::new(SyntheticObjective { task, noise_std }),
                true_max,
                to_native: Box::new(move |u| native.to_native(u)),
            })
        }
        BenchmarkData::Tabular(tables) => {
            let mut rng = stream_rng(seed, STREAM_TEST);
            let test_index = rng.random_range(0..tables.len());
            let others: Vec<usize> = (0..tables.len()).filter(|&i| i != test_index).collect();
            let num_meta = if cfg.method == Method::Gpbo { cfg.meta_tasks.min(others.len()) } else { cfg.meta_tasks };
            if num_meta > others.len() {
                return Err(Error::Config(format!(
                    "{num_meta} meta-tasks requested but only {} other tables exist",
                    others.len()
                )));
            }
            let chosen: Vec<TabularTask> = rand::seq::index::sample(&mut rng, others.len(), num_meta)
                .into_iter()
                .map(|k| tables[others[k]].clone())
                .collect();
            let meta_data = subsample_meta_tabular(&chosen, cfg.points_per_task, &mut stream_rng(seed, STREAM_META))?;

            let test = &tables[test_index];
            let encoded = test.encode_unit();
            let values = (0..test.len())
                .map(|i| (encoded.row(i).iter().map(|v| v.to_bits()).collect(), test.values()[i]))
                .collect();
            let raw_rows = test.rows().clone();
            let lookup: HashMap<Vec<u64>, usize> =
                (0..test.len()).map(|i| (encoded.row(i).iter().map(|v| v.to_bits()).collect(), i)).collect();
            Ok(Problem {
                meta_data,
                domain: Domain::DiscreteTable(DiscreteTable::new(encoded)?),
                objective: Box::new(TableObjective {
                    values,
                    dim: test.dim(),
                    noise_std,
                }),
                true_max: test.best().1,
                to_native: Box::new(move |u| {
                    let key: Vec<u64> = u.iter().map(|v| v.to_bits()).collect();
                    match lookup.get(&key) {
                        Some(&i) => raw_rows.row(i).iter().copied().collect(),
                        None => u.to_vec(),
                    }
                }),
            })
        }
    }
}

fn make_backend(cfg: &ExperimentConfig, problem: &Problem, seed: u64) -> Result<Box<dyn Surrogate>> {
    Ok(match cfg.method {
        Method::Gpbo => Box::new(GpBackend::new(GpPriors::standard(), cfg.restarts)),
        Method::Scaml => {
            let mut rng: ChaCha8Rng = stream_rng(seed, STREAM_FIT);
            Box::new(ScamlBackend::new(
                &problem.meta_data,
                problem.domain.dim(),
                &GpPriors::standard(),
                TestPriors::default(),
                cfg.restarts,
                &mut rng,
            )?)
        }
    })
}

pub fn run_seed(data: &BenchmarkData, cfg: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    let problem = build_problem(data, cfg, seed)?;
    let mut backend = make_backend(cfg, &problem, seed)?;
    let mut rng = stream_rng(seed, STREAM_BO);
    let mut state = BOState::new(problem.domain.dim(), problem.true_max);
    for _ in 0..cfg.iterations {
        let outcome = bo_step(
            &mut state,
            backend.as_mut(),
            problem.objective.as_ref(),
            &problem.domain,
            &cfg.acquisition,
            &mut rng,
        )?;
        if outcome == StepOutcome::Exhausted {
            break;
        }
    }
    let records = state
        .trace
        .into_iter()
        .map(|mut r| {
            r.x = (problem.to_native)(&r.x);
            r
        })
        .collect();
    Ok(RunResult {
        seed,
        records,
        true_max: problem.true_max,
        truncated: state.truncated,
    })
}

/// Runs every seed; seeds execute in parallel and results are merged in
/// seed order. A failing seed is recorded and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let data = BenchmarkData::load(&cfg.benchmark)?;
    let seeds = cfg.seeds.resolve();
    let results: Vec<(u64, Result<RunResult>)> =
        seeds.par_iter().map(|&seed| (seed, run_seed(&data, cfg, seed))).collect();
    let mut outcome = ExperimentOutcome::default();
    for (seed, r) in results {
        match r {
            Ok(run) => outcome.runs.push(run),
            Err(e) => outcome.failures.push(SeedFailure {
                seed,
                message: e.to_string(),
            }),
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Seeds;

    fn small(method: Method) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(Benchmark::Synthetic(Family::Branin), method);
        cfg.meta_tasks = 2;
        cfg.points_per_task = 8;
        cfg.iterations = 3;
        cfg.restarts = 2;
        cfg.acquisition.candidate_pool = 64;
        cfg.acquisition.continuous_restarts = 2;
        cfg.seeds = Seeds::List(vec![1, 2]);
        cfg
    }

    #[test]
    fn meta_data_shared_across_methods() {
        let data = BenchmarkData::Synthetic(Family::Branin);
        let a = build_problem(&data, &small(Method::Gpbo), 4).unwrap();
        let b = build_problem(&data, &small(Method::Scaml), 4).unwrap();
        assert_eq!(a.meta_data, b.meta_data);
        assert_eq!(a.true_max, b.true_max);
    }

    #[test]
    fn runs_are_seed_sensitive_and_ordered() {
        for method in [Method::Gpbo, Method::Scaml] {
            let out = run_experiment(&small(method)).unwrap();
            assert!(out.failures.is_empty(), "{:?}", out.failures);
            assert_eq!(out.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![1, 2]);
            assert_eq!(out.runs[0].records.len(), 3);
            assert_ne!(out.runs[0].records, out.runs[1].records);
            for r in &out.runs[0].records {
                assert!((-5.0..=10.0).contains(&r.x[0]) && (0.0..=15.0).contains(&r.x[1]));
            }
        }
    }
}
