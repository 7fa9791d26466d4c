//! Output standardization applied before every GP fit.

use crate::error::{Error, Result};

pub const STD_FLOOR: f64 = 1e-12;

/// Affine output map `z = (y - mean) / std`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationState {
    pub mean: f64,
    pub std: f64,
    /// The sample spread was below [`STD_FLOOR`] and the floor was used.
    pub floored: bool,
}

impl NormalizationState {
    pub fn identity() -> Self {
        Self {
            mean: 0.0,
            std: 1.0,
            floored: false,
        }
    }

    /// Population mean and standard deviation of `values`.
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("cannot standardize an empty sample"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        Ok(if std < STD_FLOOR {
            Self {
                mean,
                std: STD_FLOOR,
                floored: true,
            }
        } else {
            Self {
                mean,
                std,
                floored: false,
            }
        })
    }

    pub fn apply(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn invert_variance(&self, v: f64) -> f64 {
        v * self.std * self.std
    }
}

#[derive(Debug, Clone, Copy)]
pub enum NormMode<'a> {
    /// Statistics of the values themselves.
    PerTask,
    /// Statistics of the values pooled with all raw meta-task outputs.
    JointTest { meta_outputs: &'a [f64] },
}

pub fn normalize_outputs(values: &[f64], mode: NormMode<'_>) -> Result<(Vec<f64>, NormalizationState)> {
    let state = match mode {
        NormMode::PerTask => NormalizationState::fit(values)?,
        NormMode::JointTest { meta_outputs } => {
            let pooled: Vec<f64> = values.iter().chain(meta_outputs).copied().collect();
            if pooled.is_empty() {
                NormalizationState::identity()
            } else {
                NormalizationState::fit(&pooled)?
            }
        }
    };
    Ok((values.iter().map(|&v| state.apply(v)).collect(), state))
}
