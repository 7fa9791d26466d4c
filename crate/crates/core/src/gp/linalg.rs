use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Diagonal jitter levels tried in order until a factorization succeeds.
pub const JITTER_LADDER: [f64; 5] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4];

/// Lower Cholesky factor of `A + jitter * I`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

pub fn cholesky_with_jitter(a: &DMatrix<f64>) -> Result<CholeskyFactor> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "cholesky of non-square {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite { jitter: 0.0 });
    }
    for &jitter in &JITTER_LADDER {
        let mut shifted = a.clone();
        if jitter > 0.0 {
            for i in 0..shifted.nrows() {
                shifted[(i, i)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::new(shifted) {
            return Ok(CholeskyFactor { chol, jitter });
        }
    }
    Err(Error::NotPositiveDefinite {
        jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
    })
}

impl CholeskyFactor {
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `(L L^T)^{-1} b`
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// `L^{-1} b`
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = b.clone();
        // Cholesky::new always produces a factor with a nonzero diagonal.
        let ok = self.chol.l_dirty().solve_lower_triangular_mut(&mut out);
        debug_assert!(ok);
        out
    }

    pub fn solve_lower_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut out = b.clone();
        let ok = self.chol.l_dirty().solve_lower_triangular_mut(&mut out);
        debug_assert!(ok);
        out
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// Adds `value` to every diagonal entry in place.
pub(crate) fn add_diagonal(a: &mut DMatrix<f64>, value: f64) {
    for i in 0..a.nrows().min(a.ncols()) {
        a[(i, i)] += value;
    }
}

/// `||a - b||_F / max(||b||_F, floor)`
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>, floor: f64) -> f64 {
    (a - b).norm() / b.norm().max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_needs_no_jitter() {
        let f = cholesky_with_jitter(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(f.jitter(), 0.0);
        assert_eq!(f.l(), DMatrix::identity(3, 3));
    }

    #[test]
    fn hand_computed_factor() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 2.0]);
        let f = cholesky_with_jitter(&a).unwrap();
        assert_eq!(f.jitter(), 0.0);
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]);
        assert_abs_diff_eq!(f.l(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(f.log_det(), 4f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn zero_matrix_escalates_jitter() {
        let f = cholesky_with_jitter(&DMatrix::zeros(2, 2)).unwrap();
        assert!(f.jitter() > 0.0);
        let expected = DMatrix::identity(2, 2) * f.jitter().sqrt();
        assert_abs_diff_eq!(f.l(), expected, epsilon = 1e-18);
    }

    #[test]
    fn indefinite_matrix_fails_with_last_jitter() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        match cholesky_with_jitter(&a) {
            Err(Error::NotPositiveDefinite { jitter }) => assert_eq!(jitter, 1e-4),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn reconstruction_and_solves() {
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.3, 0.0, 2.0, -0.4, 0.5, 0.1, 1.5]);
        let a = &b * b.transpose();
        let f = cholesky_with_jitter(&a).unwrap();
        let l = f.l();
        assert!(relative_frobenius(&(&l * l.transpose()), &a, 1e-300) < 1e-12);
        let rhs = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert_abs_diff_eq!(&a * f.solve(&rhs), rhs, epsilon = 1e-10);
        assert_abs_diff_eq!(&l * f.solve_lower_vec(&rhs), rhs, epsilon = 1e-12);
        assert_abs_diff_eq!(f.inverse() * &a, DMatrix::identity(3, 3), epsilon = 1e-10);
    }
}
