//! Box-constrained limited-memory quasi-Newton minimization.
//!
//! Projected L-BFGS: the search direction comes from the two-loop recursion
//! restricted to the free variables (those not pinned at a bound with the
//! gradient pushing outward), and trial points are projected back onto the
//! box before the Armijo test.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    pub memory: usize,
    /// Stop when the projected gradient's infinity norm drops below this.
    pub pgtol: f64,
    /// Stop when the relative decrease of the objective drops below this.
    pub ftol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            memory: 10,
            pgtol: 1e-6,
            ftol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(lo, hi);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient with components zeroed where a bound is active and the
/// gradient would push past it.
pub fn projected_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| {
            let tol = 1e-12 * (1.0 + xi.abs());
            if (xi <= lo + tol && gi > 0.0) || (xi >= hi - tol && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0`.
///
/// `f` returns the value and gradient. Evaluation errors at trial points are
/// treated as infinite values; an error at the start point is returned.
pub fn minimize_box<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &LbfgsOptions,
) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    if lower.len() != n || upper.len() != n {
        return Err(Error::invalid("bounds length does not match start point"));
    }
    if lower.iter().zip(upper).any(|(lo, hi)| !(lo <= hi)) {
        return Err(Error::invalid("lower bound exceeds upper bound"));
    }

    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite objective at start point: {fx}")));
    }

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        let pg = projected_gradient(&x, &g, lower, upper);
        let pg_norm = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pg_norm < opts.pgtol {
            converged = true;
            break;
        }
        iterations += 1;

        let free: Vec<bool> = pg.iter().zip(&g).map(|(p, gi)| *p != 0.0 || *gi == 0.0).collect();
        let mut dir = two_loop(&pg, &history);
        for (d, &is_free) in dir.iter_mut().zip(&free) {
            if !is_free {
                *d = 0.0;
            }
        }
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            history.clear();
            dir = pg.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
        }

        let mut step = if history.is_empty() {
            (1.0 / pg_norm).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            project(&mut trial, lower, upper);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if moved.iter().all(|v| *v == 0.0) {
                break;
            }
            if let Ok((ft, gt)) = f(&trial) {
                let decrease = dot(&g, &moved);
                if ft.is_finite()
                    && gt.iter().all(|v| v.is_finite())
                    && ft <= fx + 1e-4 * decrease.min(0.0)
                {
                    accepted = Some((trial, ft, gt, moved));
                    break;
                }
            }
            step *= 0.5;
        }

        let Some((trial, ft, gt, s)) = accepted else {
            if history.is_empty() {
                // no progress possible along steepest descent either
                converged = slope.abs() < opts.pgtol;
                break;
            }
            history.clear();
            continue;
        };

        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let rel = (fx - ft) / fx.abs().max(ft.abs()).max(1.0);
        x = trial;
        fx = ft;
        g = gt;
        if rel <= opts.ftol {
            converged = true;
            break;
        }
    }

    Ok(OptimResult {
        x,
        value: fx,
        iterations,
        converged,
    })
}

/// Two-loop recursion: approximates `H * grad` and returns its negation.
fn two_loop(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        Ok((f, g))
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let r = minimize_box(
            rosenbrock,
            &[-1.2, 1.0],
            &[-5.0, -5.0],
            &[5.0, 5.0],
            &LbfgsOptions { max_iters: 500, ..Default::default() },
        )
        .unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn active_bound_is_respected() {
        // minimum of (x-3)^2 + (y+1)^2 over [0,2]x[0,2] is (2, 0)
        let f = |x: &[f64]| Ok(((x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)]));
        let r = minimize_box(f, &[1.0, 1.0], &[0.0, 0.0], &[2.0, 2.0], &LbfgsOptions::default()).unwrap();
        assert_eq!(r.x, vec![2.0, 0.0]);
        assert!(r.converged);
        let pg = projected_gradient(&r.x, &[2.0 * (r.x[0] - 3.0), 2.0 * (r.x[1] + 1.0)], &[0.0, 0.0], &[2.0, 2.0]);
        assert!(pg.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn start_is_projected() {
        let f = |x: &[f64]| Ok((x[0] * x[0], vec![2.0 * x[0]]));
        let r = minimize_box(f, &[10.0], &[1.0], &[4.0], &LbfgsOptions::default()).unwrap();
        assert_eq!(r.x, vec![1.0]);
    }

    #[test]
    fn failing_trials_backtrack() {
        // objective undefined for x > 0.5
        let f = |x: &[f64]| {
            if x[0] > 0.5 {
                Err(Error::NotPositiveDefinite { jitter: 0.0 })
            } else {
                Ok(((x[0] - 1.0).powi(2), vec![2.0 * (x[0] - 1.0)]))
            }
        };
        let r = minimize_box(f, &[0.0], &[-2.0], &[2.0], &LbfgsOptions::default()).unwrap();
        assert!(r.x[0] <= 0.5 && r.x[0] > 0.4);
    }
}
