use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};

pub const BRANIN_LOWER: [f64; 2] = [-5.0, 0.0];
pub const BRANIN_UPPER: [f64; 2] = [10.0, 15.0];

/// Coefficients of `a (x2 - b x1² + c x1 - r)² + s (1 - t) cos(x1) + s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BraninTask {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub r: f64,
    pub s: f64,
    pub t: f64,
}

impl BraninTask {
    /// The textbook Branin-Hoo coefficients.
    pub fn standard() -> Self {
        Self {
            a: 1.0,
            b: 5.1 / (4.0 * PI * PI),
            c: 5.0 / PI,
            r: 6.0,
            s: 10.0,
            t: 1.0 / (8.0 * PI),
        }
    }
}

/// Branin value at a native-domain point. Minimization convention.
pub fn branin_eval(task: &BraninTask, x: &[f64]) -> Result<f64> {
    if x.len() != 2 {
        return Err(Error::invalid(format!("Branin takes 2 inputs, got {}", x.len())));
    }
    for j in 0..2 {
        if !(BRANIN_LOWER[j]..=BRANIN_UPPER[j]).contains(&x[j]) {
            return Err(Error::invalid(format!(
                "x[{j}] = {} outside [{}, {}]",
                x[j], BRANIN_LOWER[j], BRANIN_UPPER[j]
            )));
        }
    }
    let (x1, x2) = (x[0], x[1]);
    let inner = x2 - task.b * x1 * x1 + task.c * x1 - task.r;
    Ok(task.a * inner * inner + task.s * (1.0 - task.t) * x1.cos() + task.s)
}

pub fn sample_branin_task<R: Rng + ?Sized>(rng: &mut R) -> BraninTask {
    BraninTask {
        a: rng.random_range(0.5..=1.5),
        b: rng.random_range(0.1..=0.15),
        c: rng.random_range(1.0..=2.0),
        r: rng.random_range(5.0..=7.0),
        s: rng.random_range(8.0..=12.0),
        t: rng.random_range(0.03..=0.05),
    }
}
