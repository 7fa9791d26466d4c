//! Result and summary CSV files.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::experiment::RunResult;

pub const RESULT_COLUMNS: [&str; 9] = [
    "seed",
    "iteration",
    "x",
    "y_noisy",
    "f_noiseless",
    "simple_regret",
    "cumulative_regret",
    "fit_ms",
    "acq_ms",
];

/// Per-iteration statistics of simple regret across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub iteration: usize,
    /// Seeds that reached this iteration.
    pub runs: usize,
    pub mean_simple_regret: f64,
    /// Sample standard deviation over `sqrt(runs)`; NaN for a single run.
    pub stderr_simple_regret: f64,
    pub mean_cumulative_regret: f64,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// `results.csv` becomes `results.summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.summary.csv"))
}

pub fn summarize(results: &[RunResult]) -> Vec<SummaryRow> {
    let longest = results.iter().map(|r| r.records.len()).max().unwrap_or(0);
    (0..longest)
        .map(|k| {
            let regrets: Vec<f64> = results
                .iter()
                .filter_map(|r| r.records.get(k).map(|rec| rec.simple_regret))
                .collect();
            let cumulative: Vec<f64> = results
                .iter()
                .filter_map(|r| r.records.get(k).map(|rec| rec.cumulative_regret))
                .collect();
            let n = regrets.len() as f64;
            let mean = regrets.iter().sum::<f64>() / n;
            let stderr = if regrets.len() > 1 {
                let var = regrets.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                var.sqrt() / n.sqrt()
            } else {
                f64::NAN
            };
            SummaryRow {
                iteration: k + 1,
                runs: regrets.len(),
                mean_simple_regret: mean,
                stderr_simple_regret: stderr,
                mean_cumulative_regret: cumulative.iter().sum::<f64>() / n,
            }
        })
        .collect()
}

/// Writes one row per `(seed, iteration)` to `path` and the per-iteration
/// summary next to it. Timing columns are zero unless `timings` is set.
pub fn write_results_csv(results: &[RunResult], path: &Path, timings: bool) -> Result<()> {
    if results.is_empty() {
        return Err(Error::invalid("no results to write"));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(RESULT_COLUMNS).map_err(|e| csv_error(path, e))?;
    for run in results {
        for r in &run.records {
            let x = r.x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
            let (fit, acq) = if timings { (r.fit_ms, r.acq_ms) } else { (0.0, 0.0) };
            w.write_record([
                run.seed.to_string(),
                r.iteration.to_string(),
                x,
                r.y.to_string(),
                r.f.to_string(),
                r.simple_regret.to_string(),
                r.cumulative_regret.to_string(),
                fit.to_string(),
                acq.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let spath = summary_path(path);
    let mut w = csv::Writer::from_path(&spath).map_err(|e| csv_error(&spath, e))?;
    w.write_record(["iteration", "runs", "mean_simple_regret", "stderr_simple_regret", "mean_cumulative_regret"])
        .map_err(|e| csv_error(&spath, e))?;
    for s in summarize(results) {
        w.write_record([
            s.iteration.to_string(),
            s.runs.to_string(),
            s.mean_simple_regret.to_string(),
            s.stderr_simple_regret.to_string(),
            s.mean_cumulative_regret.to_string(),
        ])
        .map_err(|e| csv_error(&spath, e))?;
    }
    w.flush().map_err(|e| Error::io(&spath, e))
}
