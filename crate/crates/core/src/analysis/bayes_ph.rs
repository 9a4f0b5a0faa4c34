//! Posterior probability of benefit from a Bayesian Weibull proportional
//! hazards model with the arm as a covariate.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use crate::dataset::{Arm, Cause, Dataset};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::model::{fit_stratum, FamilySpec, StratumSpec};
use crate::prior::Prior;
use crate::sampler::{quantile, Kernel, SamplerConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct BayesPhSpec {
    pub cause: Cause,
    pub covariates: Vec<String>,
    pub coefficient_priors: Vec<Prior>,
    pub arm_prior: Prior,
    pub intercept: Prior,
    pub shape: Prior,
    /// Hazard ratio (arm 1 over arm 0) that the posterior probability exceeds.
    pub h0: f64,
    pub sampler: SamplerConfig,
}

/// Sampler settings of the analysis phase: HMC, 4 chains of 1000 draws
/// (4000 in total) after 500 warmup iterations.
pub fn analysis_sampler() -> SamplerConfig {
    SamplerConfig {
        kernel: Kernel::Hmc { path_length: 1.5 },
        warmup: 500,
        draws: 1000,
        thin: 1,
        ..SamplerConfig::default()
    }
}

impl BayesPhSpec {
    /// Weakly informative defaults: `Normal(0, 20)` intercept, `Exponential(1)`
    /// shape, `Normal(0, √0.5)` for the arm and every covariate, `h₀ = 1`.
    pub fn new(cause: Cause, covariates: Vec<String>) -> Self {
        let coef = Prior::Normal { mean: 0.0, sd: 0.5f64.sqrt() };
        BayesPhSpec {
            cause,
            coefficient_priors: alloc::vec![coef; covariates.len()],
            covariates,
            arm_prior: coef,
            intercept: Prior::Normal { mean: 0.0, sd: 20.0 },
            shape: Prior::Exponential { rate: 1.0 },
            h0: 1.0,
            sampler: analysis_sampler(),
        }
    }

    pub fn stratum(&self) -> StratumSpec {
        StratumSpec {
            cause: self.cause,
            arm: None,
            covariates: self.covariates.clone(),
            coefficient_priors: self.coefficient_priors.clone(),
            arm_prior: Some(self.arm_prior),
            family: FamilySpec::Weibull {
                intercept: self.intercept,
                shape: self.shape,
            },
        }
    }

    pub fn validate(&self, schema: &[String]) -> Result<()> {
        if !(self.h0 > 0.0 && self.h0.is_finite()) {
            return Err(Error::InvalidConfig(format!("null hazard ratio {} must be positive", self.h0)));
        }
        self.sampler.validate()?;
        self.stratum().validate(crate::hazard::ArmMode::Covariate, schema)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraduationResult {
    /// Fraction of draws with `exp(β_arm) > h₀`.
    pub posterior_prob: f64,
    /// Posterior median of `exp(β_arm)`.
    pub hazard_ratio_median: f64,
    pub converged: bool,
    /// Convergence problems; the result should not be used when non-empty.
    pub problems: Vec<String>,
}

impl GraduationResult {
    pub fn success(&self, threshold: f64) -> bool {
        self.converged && self.posterior_prob >= threshold
    }
}

/// Fits the proportional hazards model for `spec.cause` and summarises the
/// arm hazard ratio. Chains use `seed` in place of `spec.sampler.seed`.
pub fn bayes_ph_graduation<E: Executor>(data: &Dataset, spec: &BayesPhSpec, seed: u64, exec: &E) -> Result<GraduationResult> {
    let counts = data.arm_counts();
    if counts.contains(&0) {
        return Err(Error::InvalidDataset(format!(
            "proportional hazards analysis needs both arms, got {} / {}",
            counts[Arm::Control.index()],
            counts[Arm::Treatment.index()]
        )));
    }
    let config = SamplerConfig {
        seed,
        ..spec.sampler.clone()
    };
    let post = fit_stratum(&spec.stratum(), data, &config, exec)?;
    // The arm coefficient is the last coefficient, just before the shape.
    let beta = post.draws.column(post.draws.dim() - 2);
    let log_h0 = spec.h0.ln();
    let above = beta.iter().filter(|&&b| b > log_h0).count();
    let mut hr: Vec<f64> = beta.iter().map(|b| b.exp()).collect();
    hr.sort_by(f64::total_cmp);
    Ok(GraduationResult {
        posterior_prob: above as f64 / beta.len() as f64,
        hazard_ratio_median: quantile(&hr, 0.5),
        converged: post.converged(),
        problems: post.problems,
    })
}
