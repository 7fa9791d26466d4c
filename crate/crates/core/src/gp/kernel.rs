//! Squared-exponential kernel with one lengthscale per input dimension.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-4, 1e2);
pub const OUTPUTSCALE_BOUNDS: (f64, f64) = (1e-4, 1e2);
pub const NOISE_BOUNDS: (f64, f64) = (1e-8, 1e-2);

fn check_box(name: &str, value: f64, (lo, hi): (f64, f64)) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} = {value} outside [{lo:e}, {hi:e}]"
        )))
    }
}

/// SE-ARD hyperparameters of a single task kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    lengthscales: Vec<f64>,
    outputscale: f64,
}

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, outputscale: f64) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::invalid("kernel needs at least one lengthscale"));
        }
        for &l in &lengthscales {
            check_box("lengthscale", l, LENGTHSCALE_BOUNDS)?;
        }
        check_box("outputscale", outputscale, OUTPUTSCALE_BOUNDS)?;
        Ok(Self {
            lengthscales,
            outputscale,
        })
    }

    /// Same lengthscale in every dimension.
    pub fn isotropic(dim: usize, lengthscale: f64, outputscale: f64) -> Result<Self> {
        Self::new(vec![lengthscale; dim], outputscale)
    }

    /// Builds parameters from log-values, clamping each into its box.
    pub(crate) fn from_log_clamped(log_lengthscales: &[f64], log_outputscale: f64) -> Self {
        let clamp = |v: f64, (lo, hi): (f64, f64)| v.exp().clamp(lo, hi);
        Self {
            lengthscales: log_lengthscales
                .iter()
                .map(|&v| clamp(v, LENGTHSCALE_BOUNDS))
                .collect(),
            outputscale: clamp(log_outputscale, OUTPUTSCALE_BOUNDS),
        }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn outputscale(&self) -> f64 {
        self.outputscale
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d == self.dim() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "input dimension {d} does not match kernel dimension {}",
                self.dim()
            )))
        }
    }
}

/// Observation noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    variance: f64,
}

impl NoiseParams {
    pub fn new(variance: f64) -> Result<Self> {
        check_box("noise variance", variance, NOISE_BOUNDS)?;
        Ok(Self { variance })
    }

    pub(crate) fn from_log_clamped(log_variance: f64) -> Self {
        Self {
            variance: log_variance.exp().clamp(NOISE_BOUNDS.0, NOISE_BOUNDS.1),
        }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// `outputscale * exp(-0.5 * sum(((x - x2) / l)^2))`
pub fn se_ard(x: &[f64], x2: &[f64], params: &KernelParams) -> Result<f64> {
    params.check_dim(x.len())?;
    params.check_dim(x2.len())?;
    let r2: f64 = x
        .iter()
        .zip(x2)
        .zip(&params.lengthscales)
        .map(|((a, b), l)| {
            let z = (a - b) / l;
            z * z
        })
        .sum();
    Ok(params.outputscale * (-0.5 * r2).exp())
}

/// Squared scaled distances between the rows of `x` and `x2`.
fn scaled_sq_dist(x: &DMatrix<f64>, x2: &DMatrix<f64>, params: &KernelParams) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x2.nrows());
    for (k, &l) in params.lengthscales.iter().enumerate() {
        let inv = 1.0 / l;
        for j in 0..x2.nrows() {
            let b = x2[(j, k)] * inv;
            for i in 0..x.nrows() {
                let z = x[(i, k)] * inv - b;
                out[(i, j)] += z * z;
            }
        }
    }
    out
}

pub fn kernel_matrix(
    x: &DMatrix<f64>,
    x2: &DMatrix<f64>,
    params: &KernelParams,
) -> Result<DMatrix<f64>> {
    params.check_dim(x.ncols())?;
    params.check_dim(x2.ncols())?;
    let s = params.outputscale;
    Ok(scaled_sq_dist(x, x2, params).map(|r2| s * (-0.5 * r2).exp()))
}

/// Diagonal of `kernel_matrix(x, x)`; constant for a stationary kernel.
pub fn kernel_diag(x: &DMatrix<f64>, params: &KernelParams) -> DVector<f64> {
    DVector::from_element(x.nrows(), params.outputscale)
}

/// Kernel matrix on `x` together with its derivatives with respect to
/// `log(lengthscale_k)` for each k and `log(outputscale)`.
pub(crate) fn kernel_matrix_with_log_grads(
    x: &DMatrix<f64>,
    params: &KernelParams,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    params.check_dim(x.ncols())?;
    let k = kernel_matrix(x, x, params)?;
    let mut grads = Vec::with_capacity(params.dim() + 1);
    for (dim, &l) in params.lengthscales.iter().enumerate() {
        let inv2 = 1.0 / (l * l);
        let g = DMatrix::from_fn(x.nrows(), x.nrows(), |i, j| {
            let diff = x[(i, dim)] - x[(j, dim)];
            k[(i, j)] * diff * diff * inv2
        });
        grads.push(g);
    }
    grads.push(k.clone());
    Ok((k, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diagonal_is_outputscale() {
        let p = KernelParams::new(vec![0.3, 2.0], 2.5).unwrap();
        assert_eq!(se_ard(&[0.1, 0.7], &[0.1, 0.7], &p).unwrap(), 2.5);
    }

    #[test]
    fn closed_form_values() {
        let p = KernelParams::new(vec![1.0], 1.0).unwrap();
        assert_abs_diff_eq!(se_ard(&[0.0], &[1.0], &p).unwrap(), (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(se_ard(&[0.0], &[1.0], &p).unwrap(), 0.60653, epsilon = 1e-5);
        let p = KernelParams::new(vec![1.0, 2.0], 1.0).unwrap();
        assert_abs_diff_eq!(se_ard(&[0.0, 0.0], &[1.0, 2.0], &p).unwrap(), 0.36788, epsilon = 1e-5);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = KernelParams::new(vec![1.0, 1.0], 1.0).unwrap();
        assert!(matches!(se_ard(&[0.0], &[0.0], &p), Err(Error::InvalidArgument(_))));
        let x = DMatrix::zeros(2, 3);
        assert!(kernel_matrix(&x, &x, &p).is_err());
    }

    #[test]
    fn box_constraints_enforced() {
        assert!(KernelParams::new(vec![1e-5], 1.0).is_err());
        assert!(KernelParams::new(vec![1.0], 200.0).is_err());
        assert!(KernelParams::new(vec![], 1.0).is_err());
        assert!(NoiseParams::new(0.1).is_err());
        assert!(NoiseParams::new(1e-9).is_err());
        assert!(NoiseParams::new(1e-4).is_ok());
    }

    #[test]
    fn single_row_and_duplicates() {
        let p = KernelParams::new(vec![0.5, 0.5], 1.7).unwrap();
        let x = DMatrix::from_row_slice(1, 2, &[0.2, 0.4]);
        let k = kernel_matrix(&x, &x, &p).unwrap();
        assert_eq!(k.shape(), (1, 1));
        assert_eq!(k[(0, 0)], 1.7);

        let x = DMatrix::from_row_slice(2, 2, &[0.2, 0.4, 0.2, 0.4]);
        let k = kernel_matrix(&x, &x, &p).unwrap();
        assert!(k.iter().all(|&v| v == 1.7));
    }

    #[test]
    fn matrix_matches_elementwise_loop() {
        let p = KernelParams::new(vec![0.7, 0.2], 1.3).unwrap();
        let x = DMatrix::from_row_slice(3, 2, &[0.1, 0.9, 0.4, 0.3, 0.75, 0.05]);
        let x2 = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.0, 1.0]);
        let k = kernel_matrix(&x, &x2, &p).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let a: Vec<f64> = x.row(i).iter().copied().collect();
                let b: Vec<f64> = x2.row(j).iter().copied().collect();
                assert_abs_diff_eq!(k[(i, j)], se_ard(&a, &b, &p).unwrap(), epsilon = 1e-14);
            }
        }
        let kxx = kernel_matrix(&x, &x, &p).unwrap();
        assert_eq!(kxx.clone(), kxx.transpose());
    }

    #[test]
    fn log_grads_match_finite_differences() {
        let p = KernelParams::new(vec![0.4, 1.1], 0.8).unwrap();
        let x = DMatrix::from_row_slice(3, 2, &[0.1, 0.9, 0.4, 0.3, 0.75, 0.05]);
        let (_, grads) = kernel_matrix_with_log_grads(&x, &p).unwrap();
        let h = 1e-6;
        let mut logs: Vec<f64> = p.lengthscales().iter().map(|l| l.ln()).collect();
        logs.push(p.outputscale().ln());
        for (idx, g) in grads.iter().enumerate() {
            let mut up = logs.clone();
            let mut dn = logs.clone();
            up[idx] += h;
            dn[idx] -= h;
            let kp = kernel_matrix(&x, &x, &KernelParams::from_log_clamped(&up[..2], up[2])).unwrap();
            let km = kernel_matrix(&x, &x, &KernelParams::from_log_clamped(&dn[..2], dn[2])).unwrap();
            let fd = (kp - km) / (2.0 * h);
            assert!((fd - g).norm() < 1e-7);
        }
    }
}
