//! Lookup-table benchmarks stored as CSV.
//!
//! The header is `param:<name>,...,value` and every following line is one
//! configuration. An optional sidecar `<path>.meta.json` lists the ordered
//! levels of each column; without it the levels are the sorted distinct
//! values found in the file.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::DataSet;

const PARAM_PREFIX: &str = "param:";
const VALUE_COLUMN: &str = "value";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularColumn {
    pub name: String,
    /// Ordered levels; a value's rank in this list is its encoding.
    pub levels: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    columns: Vec<TabularColumn>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularTask {
    columns: Vec<TabularColumn>,
    rows: DMatrix<f64>,
    values: DVector<f64>,
}

fn row_key(m: &DMatrix<f64>, i: usize) -> Vec<u64> {
    m.row(i).iter().map(|v| v.to_bits()).collect()
}

impl TabularTask {
    pub fn new(columns: Vec<TabularColumn>, rows: DMatrix<f64>, values: DVector<f64>) -> Result<Self> {
        if rows.ncols() != columns.len() || rows.nrows() != values.len() {
            return Err(Error::Validation(format!(
                "{} columns and {} values for a {}x{} table",
                columns.len(),
                values.len(),
                rows.nrows(),
                rows.ncols()
            )));
        }
        if rows.nrows() == 0 {
            return Err(Error::Validation("table has no rows".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("row {i} has a non-finite value")));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.levels.is_empty() {
                return Err(Error::Validation(format!("column '{}' has no levels", col.name)));
            }
            for i in 0..rows.nrows() {
                if !col.levels.contains(&rows[(i, j)]) {
                    return Err(Error::Validation(format!(
                        "row {i}: {} is not a level of column '{}'",
                        rows[(i, j)],
                        col.name
                    )));
                }
            }
        }
        let mut seen = HashSet::with_capacity(rows.nrows());
        for i in 0..rows.nrows() {
            if !seen.insert(row_key(&rows, i)) {
                return Err(Error::Validation(format!("row {i} duplicates an earlier configuration")));
            }
        }
        Ok(Self { columns, rows, values })
    }

    pub fn columns(&self) -> &[TabularColumn] {
        &self.columns
    }

    /// Raw configuration values, one row per configuration.
    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    /// Row index and value of the best configuration; the first one wins
    /// ties.
    pub fn best(&self) -> (usize, f64) {
        let mut best = 0;
        for i in 1..self.len() {
            if self.values[i] > self.values[best] {
                best = i;
            }
        }
        (best, self.values[best])
    }

    /// Rows with each column mapped to `rank / (levels - 1)` in `[0, 1]`.
    pub fn encode_unit(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.dim(), |i, j| {
            let levels = &self.columns[j].levels;
            let rank = levels.iter().position(|l| *l == self.rows[(i, j)]).expect("validated level");
            if levels.len() == 1 {
                0.0
            } else {
                rank as f64 / (levels.len() - 1) as f64
            }
        })
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn parse_error(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        message: message.into(),
    }
}

pub fn load_tabular(path: &Path) -> Result<TabularTask> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .quoting(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| parse_error(e.position().map_or(1, |p| p.line()), e.to_string()))?,
        None => return Err(parse_error(1, "file is empty")),
    };
    let width = header.len();
    if width < 2 || &header[width - 1] != VALUE_COLUMN {
        return Err(parse_error(1, format!("last header column must be '{VALUE_COLUMN}'")));
    }
    let mut names = Vec::with_capacity(width - 1);
    for field in header.iter().take(width - 1) {
        match field.strip_prefix(PARAM_PREFIX) {
            Some(name) if !name.is_empty() => names.push(name.to_string()),
            _ => return Err(parse_error(1, format!("header column '{field}' must look like '{PARAM_PREFIX}<name>'"))),
        }
    }

    let mut cells = Vec::new();
    let mut values = Vec::new();
    for record in records {
        let record = record.map_err(|e| parse_error(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(parse_error(line, format!("expected {width} fields, found {}", record.len())));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_error(line, format!("field {} ('{field}') is not a number", j + 1)))?;
            if j + 1 == width {
                values.push(v);
            } else {
                cells.push(v);
            }
        }
    }
    let n = values.len();
    let rows = DMatrix::from_row_slice(n, width - 1, &cells);

    let sidecar = sidecar_path(path);
    let columns = if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let meta: Sidecar = serde_json::from_str(&text)
            .map_err(|e| parse_error(e.line() as u64, format!("{}: {e}", sidecar.display())))?;
        let sidecar_names: Vec<&str> = meta.columns.iter().map(|c| c.name.as_str()).collect();
        if sidecar_names != names.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Validation(format!(
                "sidecar columns {sidecar_names:?} do not match the header {names:?}"
            )));
        }
        meta.columns
    } else {
        names
            .into_iter()
            .enumerate()
            .map(|(j, name)| {
                let mut levels: Vec<f64> = rows.column(j).iter().copied().collect();
                levels.sort_by(f64::total_cmp);
                levels.dedup();
                TabularColumn { name, levels }
            })
            .collect()
    };
    TabularTask::new(columns, rows, DVector::from_vec(values))
}

/// Writes the CSV and its level sidecar.
pub fn write_tabular(task: &TabularTask, path: &Path) -> Result<()> {
    let mut out = String::new();
    for c in &task.columns {
        out.push_str(PARAM_PREFIX);
        out.push_str(&c.name);
        out.push(',');
    }
    out.push_str(VALUE_COLUMN);
    out.push('\n');
    for i in 0..task.len() {
        for j in 0..task.dim() {
            out.push_str(&format!("{},", task.rows[(i, j)]));
        }
        out.push_str(&format!("{}\n", task.values[i]));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))?;
    let sidecar = sidecar_path(path);
    let meta = Sidecar {
        columns: task.columns.clone(),
    };
    let json = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
    fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))
}

/// Draws `points_per_task` distinct rows from every task, with inputs in
/// rank-scaled unit coordinates.
pub fn subsample_meta_tabular<R: Rng + ?Sized>(
    tasks: &[TabularTask],
    points_per_task: usize,
    rng: &mut R,
) -> Result<Vec<DataSet>> {
    tasks
        .iter()
        .enumerate()
        .map(|(m, task)| {
            if task.len() < points_per_task {
                return Err(Error::invalid(format!(
                    "meta-task {m} has {} rows, fewer than the {points_per_task} requested",
                    task.len()
                )));
            }
            let picks = rand::seq::index::sample(rng, task.len(), points_per_task).into_vec();
            let encoded = task.encode_unit();
            let x = encoded.select_rows(&picks);
            let y = DVector::from_iterator(picks.len(), picks.iter().map(|&i| task.values[i]));
            DataSet::new(x, y)
        })
        .collect()
}
