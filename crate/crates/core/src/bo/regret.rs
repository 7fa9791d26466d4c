use crate::bo::engine::{BOState, IterationRecord};

/// `true_max` minus the best noiseless value queried so far, clamped at
/// zero. Infinite before the first query.
pub fn simple_regret(true_max: f64, state: &BOState) -> f64 {
    if state.noiseless.is_empty() {
        return f64::INFINITY;
    }
    (true_max - state.best_noiseless()).max(0.0)
}

pub fn cumulative_regret(trace: &[IterationRecord]) -> f64 {
    trace.iter().map(|r| r.simple_regret).sum()
}
