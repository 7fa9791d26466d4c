//! Hyperparameter priors and their box constraints.

use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gp::kernel::{LENGTHSCALE_BOUNDS, NOISE_BOUNDS, OUTPUTSCALE_BOUNDS};

/// Prior density over a positive hyperparameter, expressed in the
/// parameter's own (not log) space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorDist {
    /// Shape-rate parameterization: density `b^a / Γ(a) θ^(a-1) e^(-bθ)`.
    Gamma { shape: f64, rate: f64 },
    /// `log θ ~ N(mean, stddev^2)`.
    LogNormal { mean: f64, stddev: f64 },
    /// Improper unit density.
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperPrior {
    pub dist: PriorDist,
    pub lower: f64,
    pub upper: f64,
}

impl HyperPrior {
    pub fn new(dist: PriorDist, lower: f64, upper: f64) -> Result<Self> {
        match dist {
            PriorDist::Gamma { shape, rate } if !(shape > 0.0 && rate > 0.0) => {
                return Err(Error::invalid(format!(
                    "gamma prior needs positive shape and rate, got ({shape}, {rate})"
                )))
            }
            PriorDist::LogNormal { stddev, .. } if !(stddev > 0.0) => {
                return Err(Error::invalid(format!(
                    "log-normal prior needs positive stddev, got {stddev}"
                )))
            }
            _ => {}
        }
        if !(lower > 0.0 && lower < upper && upper.is_finite()) {
            return Err(Error::invalid(format!(
                "invalid constraint box [{lower}, {upper}]"
            )));
        }
        Ok(Self { dist, lower, upper })
    }

    pub fn gamma(shape: f64, rate: f64, bounds: (f64, f64)) -> Self {
        Self::new(PriorDist::Gamma { shape, rate }, bounds.0, bounds.1)
            .expect("valid gamma prior")
    }

    pub fn log_normal(mean: f64, stddev: f64, bounds: (f64, f64)) -> Self {
        Self::new(PriorDist::LogNormal { mean, stddev }, bounds.0, bounds.1)
            .expect("valid log-normal prior")
    }

    pub fn flat(bounds: (f64, f64)) -> Self {
        Self::new(PriorDist::Flat, bounds.0, bounds.1).expect("valid flat prior")
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower && value <= self.upper
    }

    pub fn clip(&self, value: f64) -> f64 {
        value.clamp(self.lower, self.upper)
    }

    pub fn log_bounds(&self) -> (f64, f64) {
        (self.lower.ln(), self.upper.ln())
    }

    /// Log-density at `value`.
    pub fn log_density(&self, value: f64) -> f64 {
        match self.dist {
            PriorDist::Gamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * value.ln() - rate * value
            }
            PriorDist::LogNormal { mean, stddev } => {
                let z = (value.ln() - mean) / stddev;
                -value.ln() - stddev.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z
            }
            PriorDist::Flat => 0.0,
        }
    }

    /// Derivative of `log_density(value)` with respect to `log(value)`.
    pub fn log_density_grad_log(&self, value: f64) -> f64 {
        match self.dist {
            PriorDist::Gamma { shape, rate } => (shape - 1.0) - rate * value,
            PriorDist::LogNormal { mean, stddev } => {
                -1.0 - (value.ln() - mean) / (stddev * stddev)
            }
            PriorDist::Flat => 0.0,
        }
    }

    /// Draws a value and clips it into the box. Flat priors draw
    /// log-uniformly over the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = match self.dist {
            PriorDist::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate)
                .expect("validated gamma parameters")
                .sample(rng),
            PriorDist::LogNormal { mean, stddev } => LogNormal::new(mean, stddev)
                .expect("validated log-normal parameters")
                .sample(rng),
            PriorDist::Flat => {
                let (lo, hi) = self.log_bounds();
                rng.random_range(lo..=hi).exp()
            }
        };
        self.clip(v)
    }

    /// Median of the prior, clipped to the box.
    pub fn median(&self) -> f64 {
        use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};
        let v = match self.dist {
            PriorDist::Gamma { shape, rate } => GammaDist::new(shape, rate)
                .expect("validated gamma parameters")
                .inverse_cdf(0.5),
            PriorDist::LogNormal { mean, .. } => mean.exp(),
            PriorDist::Flat => (self.lower * self.upper).sqrt(),
        };
        self.clip(v)
    }
}

/// Priors for one SE-ARD GP: every lengthscale shares one prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpPriors {
    pub lengthscale: HyperPrior,
    pub outputscale: HyperPrior,
    pub noise: HyperPrior,
}

impl GpPriors {
    /// Priors for standardized single-task GPs (meta-tasks and plain BO).
    pub fn standard() -> Self {
        Self {
            lengthscale: HyperPrior::gamma(3.0, 6.0, LENGTHSCALE_BOUNDS),
            outputscale: HyperPrior::gamma(2.0, 0.15, OUTPUTSCALE_BOUNDS),
            noise: HyperPrior::log_normal(-8.0, 2.0, NOISE_BOUNDS),
        }
    }

    /// Broader priors for the residual test-task kernel, whose outputs are
    /// normalized jointly with the meta-data and so are not standardized.
    pub fn residual_test() -> Self {
        Self {
            lengthscale: HyperPrior::log_normal(0.5, 1.5, LENGTHSCALE_BOUNDS),
            outputscale: HyperPrior::log_normal(-2.0, 3.0, OUTPUTSCALE_BOUNDS),
            noise: HyperPrior::log_normal(-8.0, 2.0, NOISE_BOUNDS),
        }
    }

    /// Improper flat priors over the default boxes.
    pub fn flat() -> Self {
        Self {
            lengthscale: HyperPrior::flat(LENGTHSCALE_BOUNDS),
            outputscale: HyperPrior::flat(OUTPUTSCALE_BOUNDS),
            noise: HyperPrior::flat(NOISE_BOUNDS),
        }
    }
}

impl Default for GpPriors {
    fn default() -> Self {
        Self::standard()
    }
}

/// Bounds for the meta-task weights; the lower edge stands in for zero.
pub const WEIGHT_BOUNDS: (f64, f64) = (1e-6, 1e2);

pub fn weight_prior() -> HyperPrior {
    HyperPrior::gamma(1.0, 1.0, WEIGHT_BOUNDS)
}
