//! Prior distributions for hazard-model parameters.

use alloc::format;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::special::{ln_beta, normal_log_pdf};

/// A univariate prior. `Normal` is parameterised by mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    /// Improper uniform prior on the real line.
    Flat,
    Normal { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    Beta { a: f64, b: f64 },
}

impl Prior {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = match *self {
            Prior::Flat => true,
            Prior::Normal { mean, sd } => mean.is_finite() && positive(sd),
            Prior::Exponential { rate } => positive(rate),
            Prior::Beta { a, b } => positive(a) && positive(b),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidPrior(format!("{:?}", self)))
        }
    }

    /// `true` when the prior only charges positive values.
    pub fn is_positive(&self) -> bool {
        matches!(self, Prior::Exponential { .. } | Prior::Beta { .. })
    }

    /// Log density at `x`; `-inf` outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NEG_INFINITY;
        }
        match *self {
            Prior::Flat => 0.0,
            Prior::Normal { mean, sd } => normal_log_pdf(x, mean, sd),
            Prior::Exponential { rate } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * x
                }
            }
            Prior::Beta { a, b } => {
                if !(0.0..=1.0).contains(&x) {
                    f64::NEG_INFINITY
                } else {
                    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)
                }
            }
        }
    }

    /// Derivative of [`Prior::log_density`] inside the support.
    pub fn log_density_derivative(&self, x: f64) -> f64 {
        match *self {
            Prior::Flat => 0.0,
            Prior::Normal { mean, sd } => -(x - mean) / (sd * sd),
            Prior::Exponential { rate } => -rate,
            Prior::Beta { a, b } => (a - 1.0) / x - (b - 1.0) / (1.0 - x),
        }
    }
}

/// Prior on the log-hazard levels of a piecewise-constant model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelPrior {
    /// Every level independently.
    Independent(Prior),
    /// First-order random walk: `first` on level 1, successive differences
    /// `Normal(0, tau)`, and the hyperprior `tau_prior` on `tau`.
    RandomWalk { first: Prior, tau_prior: Prior },
}

impl LevelPrior {
    pub fn validate(&self) -> Result<()> {
        match self {
            LevelPrior::Independent(p) => p.validate(),
            LevelPrior::RandomWalk { first, tau_prior } => {
                first.validate()?;
                tau_prior.validate()?;
                if tau_prior.is_positive() {
                    Ok(())
                } else {
                    Err(Error::InvalidPrior("random-walk scale prior must be on (0, inf)".into()))
                }
            }
        }
    }

    pub fn has_scale(&self) -> bool {
        matches!(self, LevelPrior::RandomWalk { .. })
    }

    /// Joint log density of the levels and, for a random walk, of `tau`.
    pub fn log_density(&self, levels: &[f64], tau: Option<f64>) -> f64 {
        match (self, tau) {
            (LevelPrior::Independent(p), _) => levels.iter().map(|&b| p.log_density(b)).sum(),
            (LevelPrior::RandomWalk { first, tau_prior }, Some(tau)) => {
                if !(tau > 0.0) {
                    return f64::NEG_INFINITY;
                }
                let Some(&b1) = levels.first() else {
                    return tau_prior.log_density(tau);
                };
                first.log_density(b1)
                    + levels
                        .windows(2)
                        .map(|w| normal_log_pdf(w[1] - w[0], 0.0, tau))
                        .sum::<f64>()
                    + tau_prior.log_density(tau)
            }
            (LevelPrior::RandomWalk { .. }, None) => f64::NEG_INFINITY,
        }
    }

    /// Gradient of [`LevelPrior::log_density`]: written into `d_levels`, and the
    /// derivative with respect to `tau` returned (0 for independent levels).
    pub fn log_density_gradient(&self, levels: &[f64], tau: Option<f64>, d_levels: &mut [f64]) -> f64 {
        match (self, tau) {
            (LevelPrior::Independent(p), _) => {
                for (d, &b) in d_levels.iter_mut().zip(levels) {
                    *d = p.log_density_derivative(b);
                }
                0.0
            }
            (LevelPrior::RandomWalk { first, tau_prior }, Some(tau)) => {
                d_levels.iter_mut().for_each(|d| *d = 0.0);
                if let Some(&b1) = levels.first() {
                    d_levels[0] = first.log_density_derivative(b1);
                }
                let inv2 = 1.0 / (tau * tau);
                let mut d_tau = tau_prior.log_density_derivative(tau);
                for l in 1..levels.len() {
                    let delta = levels[l] - levels[l - 1];
                    d_levels[l] -= delta * inv2;
                    d_levels[l - 1] += delta * inv2;
                    d_tau += delta * delta * inv2 / tau - 1.0 / tau;
                }
                d_tau
            }
            (LevelPrior::RandomWalk { .. }, None) => {
                d_levels.iter_mut().for_each(|d| *d = 0.0);
                0.0
            }
        }
    }
}
