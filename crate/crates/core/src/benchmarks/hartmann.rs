use rand::Rng;

use crate::error::{Error, Result};

const A3: [[f64; 3]; 4] = [
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
];

const P3: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];

const A6: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];

const P6: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

const ALPHA_BOXES: [(f64, f64); 4] = [(1.00, 1.02), (1.18, 1.20), (2.8, 3.0), (3.2, 3.4)];

/// Hartmann function with mixture weights `alpha`, in 3 or 6 dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HartmannTask {
    pub alpha: [f64; 4],
    dim: usize,
}

impl HartmannTask {
    pub fn new(dim: usize, alpha: [f64; 4]) -> Result<Self> {
        if dim != 3 && dim != 6 {
            return Err(Error::invalid(format!("Hartmann is defined for 3 or 6 dimensions, got {dim}")));
        }
        Ok(Self { alpha, dim })
    }

    /// The textbook weights `(1.0, 1.2, 3.0, 3.2)`.
    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(dim, [1.0, 1.2, 3.0, 3.2])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

fn mixture<const D: usize>(alpha: &[f64; 4], a: &[[f64; D]; 4], p: &[[f64; D]; 4], x: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..4 {
        let exponent: f64 = (0..D).map(|j| a[i][j] * (x[j] - p[i][j]).powi(2)).sum();
        total += alpha[i] * (-exponent).exp();
    }
    -total
}

/// Hartmann value on `[0, 1]^d`. Minimization convention.
pub fn hartmann_eval(task: &HartmannTask, x: &[f64]) -> Result<f64> {
    if x.len() != task.dim {
        return Err(Error::invalid(format!(
            "Hartmann {}D takes {} inputs, got {}",
            task.dim,
            task.dim,
            x.len()
        )));
    }
    if let Some((j, v)) = x.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("x[{j}] = {v} outside [0, 1]")));
    }
    Ok(match task.dim {
        3 => mixture(&task.alpha, &A3, &P3, x),
        _ => mixture(&task.alpha, &A6, &P6, x),
    })
}

pub fn sample_hartmann_task<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<HartmannTask> {
    let alpha = ALPHA_BOXES.map(|(lo, hi)| rng.random_range(lo..=hi));
    HartmannTask::new(dim, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Tables retyped from the integer-scaled form to catch transcription
    /// slips in the constants above.
    #[test]
    fn constant_tables_checksum() {
        let p3: [[u32; 3]; 4] = [[3689, 1170, 2673], [4699, 4387, 7470], [1091, 8732, 5547], [381, 5743, 8828]];
        let p6: [[u32; 6]; 4] = [
            [1312, 1696, 5569, 124, 8283, 5886],
            [2329, 4135, 8307, 3736, 1004, 9991],
            [2348, 1451, 3522, 2883, 3047, 6650],
            [4047, 8828, 8732, 5743, 1091, 381],
        ];
        for i in 0..4 {
            for j in 0..3 {
                assert_abs_diff_eq!(P3[i][j], p3[i][j] as f64 * 1e-4, epsilon = 1e-15);
            }
            for j in 0..6 {
                assert_abs_diff_eq!(P6[i][j], p6[i][j] as f64 * 1e-4, epsilon = 1e-15);
            }
        }
        let a3_sum: f64 = A3.iter().flatten().sum();
        let a6_sum: f64 = A6.iter().flatten().sum();
        assert_abs_diff_eq!(a3_sum, 176.2, epsilon = 1e-12);
        assert_abs_diff_eq!(a6_sum, 184.7, epsilon = 1e-12);
    }

    #[test]
    fn zero_alpha_is_zero() {
        let t = HartmannTask::new(3, [0.0; 4]).unwrap();
        assert_eq!(hartmann_eval(&t, &[0.2, 0.5, 0.9]).unwrap(), 0.0);
    }

    #[test]
    fn canonical_six_dim_optimum() {
        let t = HartmannTask::standard(6).unwrap();
        let x = [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573];
        assert_abs_diff_eq!(hartmann_eval(&t, &x).unwrap(), -3.32237, epsilon = 1e-5);
    }

    #[test]
    fn canonical_three_dim_optimum() {
        let t = HartmannTask::standard(3).unwrap();
        let x = [0.114614, 0.555649, 0.852547];
        assert_abs_diff_eq!(hartmann_eval(&t, &x).unwrap(), -3.86278, epsilon = 1e-5);
    }

    #[test]
    fn strictly_negative_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for dim in [3, 6] {
            let t = sample_hartmann_task(dim, &mut rng).unwrap();
            for _ in 0..200 {
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(1e-9..1.0)).collect();
                assert!(hartmann_eval(&t, &x).unwrap() < 0.0);
            }
        }
    }

    #[test]
    fn sampled_alpha_in_boxes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut sum4 = 0.0;
        for _ in 0..10_000 {
            let t = sample_hartmann_task(3, &mut rng).unwrap();
            for (a, (lo, hi)) in t.alpha.iter().zip(ALPHA_BOXES) {
                assert!((lo..=hi).contains(a));
            }
            sum4 += t.alpha[3];
        }
        assert!((sum4 / 10_000.0 - 3.3).abs() < 0.005);
        assert!(sample_hartmann_task(4, &mut rng).is_err());
    }

    #[test]
    fn domain_checked() {
        let t = HartmannTask::standard(3).unwrap();
        assert!(hartmann_eval(&t, &[0.5, 0.5]).is_err());
        assert!(hartmann_eval(&t, &[0.5, 1.5, 0.5]).is_err());
    }
}
