//! End-to-end optimization runs through the library API.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use scaml_core::benchmarks::{
    generate_meta_data, load_tabular, true_maximum, write_tabular, Family, HartmannTask, MetaDataSpec, SyntheticTask,
    TabularColumn, TabularTask,
};
use scaml_core::harness::{run_experiment, summarize, Benchmark, ExperimentConfig, Method, Seeds};
use scaml_core::Error;

fn small(benchmark: Benchmark, method: Method) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(benchmark, method);
    cfg.meta_tasks = 3;
    cfg.points_per_task = 12;
    cfg.iterations = 6;
    cfg.seeds = Seeds::List(vec![3, 4]);
    cfg.restarts = 2;
    cfg
}

/// Grid tables whose optimum moves with `shift`.
fn write_tables(dir: &Path, count: usize) {
    let levels = vec![0.0, 1.0, 2.0, 3.0];
    let columns = vec![
        TabularColumn { name: "depth".into(), levels: levels.clone() },
        TabularColumn { name: "width".into(), levels: levels.clone() },
    ];
    for t in 0..count {
        let shift = t as f64 * 0.4;
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for a in &levels {
            for b in &levels {
                rows.extend([*a, *b]);
                values.push(-(a - 1.0 - shift).powi(2) - 0.5 * (b - 2.0).powi(2));
            }
        }
        let task = TabularTask::new(columns.clone(), DMatrix::from_row_slice(16, 2, &rows), DVector::from_vec(values)).unwrap();
        write_tabular(&task, &dir.join(format!("task{t}.csv"))).unwrap();
    }
}

#[test]
fn regret_traces_are_consistent() {
    for method in [Method::Gpbo, Method::Scaml] {
        let outcome = run_experiment(&small(Benchmark::Synthetic(Family::Branin), method)).unwrap();
        assert!(outcome.failures.is_empty());
        assert_eq!(outcome.runs.len(), 2);
        for run in &outcome.runs {
            assert_eq!(run.records.len(), 6);
            let mut best = f64::NEG_INFINITY;
            let mut cumulative = 0.0;
            for (i, r) in run.records.iter().enumerate() {
                assert_eq!(r.iteration, i + 1);
                best = best.max(r.f);
                cumulative += r.simple_regret;
                assert!((r.simple_regret - (run.true_max - best).max(0.0)).abs() < 1e-12);
                assert!((r.cumulative_regret - cumulative).abs() < 1e-9);
                assert!(i == 0 || r.simple_regret <= run.records[i - 1].simple_regret);
                assert!(r.x[0] >= -5.0 && r.x[0] <= 10.0 && r.x[1] >= 0.0 && r.x[1] <= 15.0);
            }
        }
        let summary = summarize(&outcome.runs);
        assert_eq!(summary.len(), 6);
        assert!(summary.iter().all(|s| s.runs == 2));
    }
}

#[test]
fn library_runs_are_deterministic() {
    let cfg = small(Benchmark::Synthetic(Family::Hartmann3), Method::Scaml);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.runs.len(), b.runs.len());
    for (ra, rb) in a.runs.iter().zip(&b.runs) {
        for (x, y) in ra.records.iter().zip(&rb.records) {
            assert_eq!(x.x, y.x);
            assert_eq!(x.y.to_bits(), y.y.to_bits());
        }
    }
}

#[test]
fn tabular_runs_never_repeat_and_truncate() {
    let dir = tempfile::tempdir().unwrap();
    write_tables(dir.path(), 5);
    for method in [Method::Gpbo, Method::Scaml] {
        let mut cfg = small(Benchmark::Tabular(dir.path().to_path_buf()), method);
        cfg.iterations = 20;
        let outcome = run_experiment(&cfg).unwrap();
        assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);
        for run in &outcome.runs {
            assert!(run.truncated);
            assert_eq!(run.records.len(), 16);
            let distinct: HashSet<Vec<u64>> = run.records.iter().map(|r| r.x.iter().map(|v| v.to_bits()).collect()).collect();
            assert_eq!(distinct.len(), 16);
            assert_eq!(run.records.last().unwrap().simple_regret, 0.0);
            // native coordinates are table levels
            assert!(run.records.iter().all(|r| r.x.iter().all(|v| [0.0, 1.0, 2.0, 3.0].contains(v))));
        }
    }
}

#[test]
fn tabular_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_tables(dir.path(), 1);
    let task = load_tabular(&dir.path().join("task0.csv")).unwrap();
    assert_eq!(task.len(), 16);
    assert_eq!(task.dim(), 2);
    let (row, value) = task.best();
    assert_eq!(value, task.values().max());
    assert_eq!(task.rows().row(row).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0]);
}

#[test]
fn malformed_tables_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "param:a,value\n1,2\nnot-a-number,3\n").unwrap();
    assert!(matches!(load_tabular(&path), Err(Error::Parse { .. })));
    std::fs::write(&path, "param:a,value\n1,2\n1,3\n").unwrap();
    assert!(matches!(load_tabular(&path), Err(Error::Validation(_))));
    assert!(matches!(load_tabular(&dir.path().join("missing.csv")), Err(Error::Io { .. })));
}

#[test]
fn meta_data_is_reproducible_and_in_the_unit_cube() {
    let spec = MetaDataSpec { num_tasks: 4, points_per_task: 10, noise_std: 0.1, seed: 17 };
    let (a, tasks) = generate_meta_data(Family::Hartmann6, &spec).unwrap();
    let (b, _) = generate_meta_data(Family::Hartmann6, &spec).unwrap();
    assert_eq!(tasks.len(), 4);
    for (da, db) in a.iter().zip(&b) {
        assert_eq!(da.inputs(), db.inputs());
        assert_eq!(da.outputs(), db.outputs());
        assert!(da.inputs().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn hartmann6_true_maximum_reaches_the_known_optimum() {
    let task = SyntheticTask::Hartmann(HartmannTask::standard(6).unwrap());
    let (_, f) = true_maximum(&task).unwrap();
    assert!((f - 3.32237).abs() < 1e-4, "found {f}");
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = small(Benchmark::Synthetic(Family::Branin), Method::Scaml);
    cfg.iterations = 0;
    assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    assert!(ExperimentConfig::from_json(r#"{"benchmark": "branin", "method": "scaml", "bogus": 1}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"benchmark": "rosenbrock", "method": "scaml"}"#).is_err());
}
