use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Axis-aligned box in native coordinates. Optimization always happens in
/// the unit cube; this only maps points back and forth.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ContinuousBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid("box bounds must be nonempty and of equal length"));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!("degenerate box in dimension {i}: [{lo}, {hi}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn to_native(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| lo + v * (hi - lo))
            .collect()
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| (v - lo) / (hi - lo))
            .collect()
    }
}

/// Finite set of candidate configurations, one per row, in normalized
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTable {
    candidates: DMatrix<f64>,
}

impl DiscreteTable {
    pub fn new(candidates: DMatrix<f64>) -> Result<Self> {
        if candidates.nrows() == 0 || candidates.ncols() == 0 {
            return Err(Error::invalid("candidate table is empty"));
        }
        let mut seen = HashSet::with_capacity(candidates.nrows());
        for i in 0..candidates.nrows() {
            let key: Vec<u64> = candidates.row(i).iter().map(|v| v.to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::invalid(format!("candidate row {i} is a duplicate")));
            }
        }
        Ok(Self { candidates })
    }

    pub fn len(&self) -> usize {
        self.candidates.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.candidates.ncols()
    }

    pub fn candidates(&self) -> &DMatrix<f64> {
        &self.candidates
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.candidates.row(i).iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    ContinuousBox(ContinuousBox),
    DiscreteTable(DiscreteTable),
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::ContinuousBox(b) => b.dim(),
            Domain::DiscreteTable(t) => t.dim(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_round_trip() {
        let b = ContinuousBox::new(vec![-5.0, 0.0], vec![10.0, 15.0]).unwrap();
        let x = [2.5, 7.0];
        let back = b.to_native(&b.to_unit(&x));
        assert!((back[0] - x[0]).abs() < 1e-12 && (back[1] - x[1]).abs() < 1e-12);
        assert!(ContinuousBox::new(vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn duplicate_rows_rejected() {
        let m = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 0.5, 0.5, 0.0, 1.0]);
        assert!(DiscreteTable::new(m).is_err());
    }
}
