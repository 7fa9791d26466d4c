use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::benchmarks::Family;
use crate::bo::AcquisitionConfig;
use crate::error::{Error, Result};
use crate::gp::DEFAULT_RESTARTS;

const TABULAR_PREFIX: &str = "tabular:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Benchmark {
    Synthetic(Family),
    /// A lookup-table CSV, or a directory of them (one per task).
    Tabular(PathBuf),
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix(TABULAR_PREFIX) {
            Some("") => Err(Error::Config("tabular benchmark needs a path".into())),
            Some(path) => Ok(Benchmark::Tabular(PathBuf::from(path))),
            None => s.parse().map(Benchmark::Synthetic),
        }
    }
}

impl TryFrom<String> for Benchmark {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Benchmark> for String {
    fn from(b: Benchmark) -> String {
        b.to_string()
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Benchmark::Synthetic(family) => write!(f, "{family}"),
            Benchmark::Tabular(path) => write!(f, "{TABULAR_PREFIX}{}", path.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Single-task GP, ignores the meta-data.
    Gpbo,
    Scaml,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Gpbo => "gpbo",
            Method::Scaml => "scaml",
        })
    }
}

/// Either an explicit list or a count `n`, meaning seeds `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Seeds {
    pub fn resolve(&self) -> Vec<u64> {
        match self {
            Seeds::Count(n) => (0..*n).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

impl FromStr for Seeds {
    type Err = Error;

    /// `"8"` is a count, `"1,2,5"` a list.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |_| Error::Config(format!("cannot parse seeds '{s}'"));
        if s.contains(',') {
            s.split(',').map(|p| p.trim().parse::<u64>().map_err(bad)).collect::<Result<_>>().map(Seeds::List)
        } else {
            s.trim().parse().map(Seeds::Count).map_err(bad)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    pub method: Method,
    #[serde(default = "default_meta_tasks")]
    pub meta_tasks: usize,
    #[serde(default = "default_points_per_task")]
    pub points_per_task: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Seeds,
    /// Observation noise std in output units. Defaults to 1.0 for Branin,
    /// 0.1 for Hartmann and 0 for tables.
    #[serde(default)]
    pub noise_std: Option<f64>,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Write measured wall times; off by default so reruns are bitwise
    /// identical.
    #[serde(default)]
    pub timings: bool,
}

fn default_meta_tasks() -> usize {
    8
}

fn default_points_per_task() -> usize {
    32
}

fn default_iterations() -> usize {
    30
}

fn default_seeds() -> Seeds {
    Seeds::Count(1)
}

fn default_restarts() -> usize {
    DEFAULT_RESTARTS
}

fn default_output() -> PathBuf {
    PathBuf::from("results.csv")
}

impl ExperimentConfig {
    pub fn new(benchmark: Benchmark, method: Method) -> Self {
        Self {
            benchmark,
            method,
            meta_tasks: default_meta_tasks(),
            points_per_task: default_points_per_task(),
            iterations: default_iterations(),
            seeds: default_seeds(),
            noise_std: None,
            acquisition: AcquisitionConfig::default(),
            restarts: default_restarts(),
            output: default_output(),
            timings: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std.unwrap_or(match &self.benchmark {
            Benchmark::Synthetic(Family::Branin) => 1.0,
            Benchmark::Synthetic(_) => 0.1,
            Benchmark::Tabular(_) => 0.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.iterations == 0 {
            return fail("iterations must be at least 1".into());
        }
        if self.seeds.resolve().is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.points_per_task == 0 {
            return fail("points_per_task must be at least 1".into());
        }
        if self.restarts == 0 {
            return fail("restarts must be at least 1".into());
        }
        let noise = self.noise_std();
        if !(noise.is_finite() && noise >= 0.0) {
            return fail(format!("noise_std must be nonnegative, got {noise}"));
        }
        self.acquisition.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let Benchmark::Tabular(path) = &self.benchmark {
            if path.is_file() && self.method == Method::Scaml && self.meta_tasks > 0 {
                return fail("a single lookup table has no meta-tasks; use a directory of tables or --meta-tasks 0".into());
            }
        }
        Ok(())
    }
}
