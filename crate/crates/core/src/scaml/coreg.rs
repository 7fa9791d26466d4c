use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Index of a task in the joint model: one of the `M` meta-tasks
/// (zero-based) or the test task, which sits at position `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskIndex {
    Meta(usize),
    Test,
}

impl TaskIndex {
    /// From the one-based convention where meta-tasks are `1..=M` and the
    /// test task is `M + 1`.
    pub fn from_one_based(value: usize, num_meta: usize) -> Result<Self> {
        match value {
            0 => Err(Error::invalid("task index 0 is out of range")),
            v if v <= num_meta => Ok(TaskIndex::Meta(v - 1)),
            v if v == num_meta + 1 => Ok(TaskIndex::Test),
            v => Err(Error::invalid(format!(
                "task index {v} out of range for {num_meta} meta-tasks"
            ))),
        }
    }

    pub fn one_based(self, num_meta: usize) -> usize {
        match self {
            TaskIndex::Meta(m) => m + 1,
            TaskIndex::Test => num_meta + 1,
        }
    }

    pub(crate) fn check(self, num_meta: usize) -> Result<()> {
        match self {
            TaskIndex::Meta(m) if m >= num_meta => Err(Error::invalid(format!(
                "meta-task {m} out of range for {num_meta} meta-tasks"
            ))),
            _ => Ok(()),
        }
    }

    /// Coefficient of meta-kernel `m` for this task: `w_m` for the test
    /// task, 1 for meta-task `m` itself, 0 otherwise.
    pub(crate) fn loading(self, m: usize, w_m: f64) -> f64 {
        match self {
            TaskIndex::Test => w_m,
            TaskIndex::Meta(i) if i == m => 1.0,
            TaskIndex::Meta(_) => 0.0,
        }
    }
}

/// Coregionalization matrix of task `task` in a model with `num_meta`
/// meta-tasks. Size is `(M+1) x (M+1)` with the test task last.
pub fn coreg_matrix(task: TaskIndex, w_m: f64, num_meta: usize) -> Result<DMatrix<f64>> {
    task.check(num_meta)?;
    let t = num_meta;
    let mut w = DMatrix::zeros(num_meta + 1, num_meta + 1);
    match task {
        TaskIndex::Meta(m) => {
            w[(m, m)] = 1.0;
            w[(m, t)] = w_m;
            w[(t, m)] = w_m;
            w[(t, t)] = w_m * w_m;
        }
        TaskIndex::Test => w[(t, t)] = 1.0,
    }
    Ok(w)
}
