//! TOML run and synthetic-data configurations.
//!
//! Every section deserializes into plain structs with defaults filled in, so
//! serializing a loaded config gives the full effective configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ppos_core::analysis::{
    analysis_sampler, AnalysisMethod, AnalysisSpec, BayesPhSpec, CifVariance, Criterion, DecisionRule, EvalTime,
};
use ppos_core::dataset::{Arm, Cause, CensoringRule, Horizon};
use ppos_core::hazard::ArmMode;
use ppos_core::model::{FamilySpec, ModelSpec, StratumSpec};
use ppos_core::ppos::{PposConfig, Scenario, ScenarioGrid, ScenarioSeeding};
use ppos_core::rng::{derive_seed, Domain};
use ppos_core::prior::{LevelPrior, Prior};
use ppos_core::sampler::{Kernel, SamplerConfig};
use ppos_core::simulate::{CovariateModel, EnrollmentSpec};
use ppos_core::synthetic::{CovariateGenerator, SyntheticSpec, TruthHazard, TruthStratum};

use crate::error::{AppError, AppResult};
use crate::io::load_horizons;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorConfig {
    Flat,
    Normal { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    Beta { a: f64, b: f64 },
}

impl From<&PriorConfig> for Prior {
    fn from(p: &PriorConfig) -> Prior {
        match *p {
            PriorConfig::Flat => Prior::Flat,
            PriorConfig::Normal { mean, sd } => Prior::Normal { mean, sd },
            PriorConfig::Exponential { rate } => Prior::Exponential { rate },
            PriorConfig::Beta { a, b } => Prior::Beta { a, b },
        }
    }
}

fn normal(mean: f64, sd: f64) -> PriorConfig {
    PriorConfig::Normal { mean, sd }
}

fn cause(code: u8) -> AppResult<Cause> {
    Cause::from_code(code as i64).ok_or_else(|| AppError::Config(format!("cause must be 1 or 2, got {}", code)))
}

fn arm(code: u8) -> AppResult<Arm> {
    Arm::from_code(code as i64).ok_or_else(|| AppError::Config(format!("arm must be 0 or 1, got {}", code)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelConfig {
    RandomWalk,
    Hmc,
}

/// Mean HMC integration time when none is given.
const DEFAULT_PATH_LENGTH: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub kernel: KernelConfig,
    /// HMC only.
    pub path_length: f64,
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub thin: usize,
    pub target_accept: f64,
    pub ess_min: f64,
    pub rhat_max: f64,
    pub stuck_window: usize,
    pub init_jitter: f64,
    pub independence_prob: f64,
}

impl From<SamplerConfig> for SamplerSection {
    fn from(c: SamplerConfig) -> Self {
        let (kernel, path_length) = match c.kernel {
            Kernel::RandomWalk => (KernelConfig::RandomWalk, DEFAULT_PATH_LENGTH),
            Kernel::Hmc { path_length } => (KernelConfig::Hmc, path_length),
        };
        SamplerSection {
            kernel,
            path_length,
            chains: c.chains,
            warmup: c.warmup,
            draws: c.draws,
            thin: c.thin,
            target_accept: c.target_accept,
            ess_min: c.ess_min,
            rhat_max: c.rhat_max,
            stuck_window: c.stuck_window,
            init_jitter: c.init_jitter,
            independence_prob: c.independence_prob,
        }
    }
}

impl SamplerSection {
    pub fn to_core(&self) -> SamplerConfig {
        SamplerConfig {
            kernel: match self.kernel {
                KernelConfig::RandomWalk => Kernel::RandomWalk,
                KernelConfig::Hmc => Kernel::Hmc {
                    path_length: self.path_length,
                },
            },
            chains: self.chains,
            warmup: self.warmup,
            draws: self.draws,
            thin: self.thin,
            seed: 0,
            target_accept: self.target_accept,
            ess_min: self.ess_min,
            rhat_max: self.rhat_max,
            stuck_window: self.stuck_window,
            init_jitter: self.init_jitter,
            independence_prob: self.independence_prob,
        }
    }
}

/// Partial sampler settings; missing keys take the given defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplerOverrides {
    kernel: Option<KernelConfig>,
    path_length: Option<f64>,
    chains: Option<usize>,
    warmup: Option<usize>,
    draws: Option<usize>,
    thin: Option<usize>,
    target_accept: Option<f64>,
    ess_min: Option<f64>,
    rhat_max: Option<f64>,
    stuck_window: Option<usize>,
    init_jitter: Option<f64>,
    independence_prob: Option<f64>,
}

impl SamplerOverrides {
    fn over(self, base: SamplerConfig) -> SamplerSection {
        let b = SamplerSection::from(base);
        SamplerSection {
            kernel: self.kernel.unwrap_or(b.kernel),
            path_length: self.path_length.unwrap_or(b.path_length),
            chains: self.chains.unwrap_or(b.chains),
            warmup: self.warmup.unwrap_or(b.warmup),
            draws: self.draws.unwrap_or(b.draws),
            thin: self.thin.unwrap_or(b.thin),
            target_accept: self.target_accept.unwrap_or(b.target_accept),
            ess_min: self.ess_min.unwrap_or(b.ess_min),
            rhat_max: self.rhat_max.unwrap_or(b.rhat_max),
            stuck_window: self.stuck_window.unwrap_or(b.stuck_window),
            init_jitter: self.init_jitter.unwrap_or(b.init_jitter),
            independence_prob: self.independence_prob.unwrap_or(b.independence_prob),
        }
    }
}

fn prediction_sampler<'de, D: serde::Deserializer<'de>>(d: D) -> Result<SamplerSection, D::Error> {
    Ok(SamplerOverrides::deserialize(d)?.over(SamplerConfig::default()))
}

fn analysis_sampler_section<'de, D: serde::Deserializer<'de>>(d: D) -> Result<SamplerSection, D::Error> {
    Ok(SamplerOverrides::deserialize(d)?.over(analysis_sampler()))
}

fn default_prediction_sampler() -> SamplerSection {
    SamplerConfig::default().into()
}

fn default_analysis_sampler() -> SamplerSection {
    analysis_sampler().into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevelPriorConfig {
    Independent { prior: PriorConfig },
    RandomWalk { first: PriorConfig, tau: PriorConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    Weibull { intercept: PriorConfig, shape: PriorConfig },
    Piecewise { knots: Vec<f64>, levels: LevelPriorConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumConfig {
    pub cause: u8,
    /// Omitted when the arm enters as a covariate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<u8>,
    #[serde(default)]
    pub covariates: Vec<String>,
    /// One prior per covariate.
    #[serde(default)]
    pub coefficient_priors: Vec<PriorConfig>,
    /// Prior on the arm coefficient (arm-as-covariate models only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm_prior: Option<PriorConfig>,
    pub family: FamilyConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmModeConfig {
    Stratified,
    Covariate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub arm_mode: ArmModeConfig,
    pub strata: Vec<StratumConfig>,
}

impl ModelConfig {
    pub fn to_core(&self) -> AppResult<ModelSpec> {
        let strata = self
            .strata
            .iter()
            .map(|s| {
                let family = match &s.family {
                    FamilyConfig::Weibull { intercept, shape } => FamilySpec::Weibull {
                        intercept: intercept.into(),
                        shape: shape.into(),
                    },
                    FamilyConfig::Piecewise { knots, levels } => FamilySpec::Piecewise {
                        knots: knots.clone(),
                        levels: match levels {
                            LevelPriorConfig::Independent { prior } => LevelPrior::Independent(prior.into()),
                            LevelPriorConfig::RandomWalk { first, tau } => LevelPrior::RandomWalk {
                                first: first.into(),
                                tau_prior: tau.into(),
                            },
                        },
                    },
                };
                Ok(StratumSpec {
                    cause: cause(s.cause)?,
                    arm: s.arm.map(arm).transpose()?,
                    covariates: s.covariates.clone(),
                    coefficient_priors: s.coefficient_priors.iter().map(Prior::from).collect(),
                    arm_prior: s.arm_prior.as_ref().map(Prior::from),
                    family,
                })
            })
            .collect::<AppResult<Vec<_>>>()?;
        Ok(ModelSpec {
            arm_mode: match self.arm_mode {
                ArmModeConfig::Stratified => ArmMode::Stratified,
                ArmModeConfig::Covariate => ArmMode::Covariate,
            },
            strata,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnrollmentCovariateConfig {
    pub name: String,
    /// `bernoulli` (Beta prior updated with the interim column) or `constant`.
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnrollmentConfig {
    pub fixed_arm: u8,
    pub n_fixed: u64,
    pub randomization_prob: f64,
    #[serde(default)]
    pub covariates: Vec<EnrollmentCovariateConfig>,
}

impl EnrollmentConfig {
    pub fn to_core(&self) -> AppResult<EnrollmentSpec> {
        let covariates = self
            .covariates
            .iter()
            .map(|c| {
                let model = match (c.model.as_str(), &c.prior, c.value) {
                    ("bernoulli", Some(p), None) => CovariateModel::Bernoulli { prior: p.into() },
                    ("constant", None, Some(v)) => CovariateModel::Constant(v),
                    _ => {
                        return Err(AppError::Config(format!(
                            "enrollment covariate `{}`: use model = \"bernoulli\" with a prior, or model = \"constant\" with a value",
                            c.name
                        )))
                    }
                };
                Ok((c.name.clone(), model))
            })
            .collect::<AppResult<Vec<_>>>()?;
        Ok(EnrollmentSpec {
            fixed_arm: arm(self.fixed_arm)?,
            n_fixed: self.n_fixed,
            randomization_prob: self.randomization_prob,
            covariates,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CensoringConfig {
    #[default]
    None,
    /// Same study-time horizon for everyone.
    Scalar { horizon: f64 },
    /// Calendar cut-off; needs `origin_offset` in the dataset.
    Calendar { cutoff: f64 },
    /// `subject_id,horizon` CSV, relative to the config file.
    PerSubject { file: String },
}

impl CensoringConfig {
    pub fn to_core(&self, base: &Path) -> AppResult<CensoringRule> {
        Ok(match self {
            CensoringConfig::None => CensoringRule::None,
            CensoringConfig::Scalar { horizon } => CensoringRule::Administrative(Horizon::Scalar(*horizon)),
            CensoringConfig::Calendar { cutoff } => CensoringRule::Administrative(Horizon::Calendar(*cutoff)),
            CensoringConfig::PerSubject { file } => {
                CensoringRule::Administrative(Horizon::PerSubject(load_horizons(&base.join(file))?))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EvalTimeConfig {
    At(f64),
    /// Only `"horizon"`.
    Named(String),
}

impl Default for EvalTimeConfig {
    fn default() -> Self {
        EvalTimeConfig::Named("horizon".into())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceConfig {
    #[default]
    Aalen,
    Delta,
}

fn one() -> u8 {
    1
}

fn unit() -> f64 {
    1.0
}

fn default_coefficient_sd() -> PriorConfig {
    normal(0.0, 0.5f64.sqrt())
}

fn default_intercept() -> PriorConfig {
    normal(0.0, 20.0)
}

fn default_shape() -> PriorConfig {
    PriorConfig::Exponential { rate: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    RiskRatio {
        name: String,
        #[serde(default)]
        eval_time: EvalTimeConfig,
        #[serde(default)]
        variance: VarianceConfig,
    },
    BayesPh {
        name: String,
        #[serde(default = "one")]
        cause: u8,
        #[serde(default)]
        covariates: Vec<String>,
        /// One per covariate; defaults to Normal(0, √0.5) each.
        #[serde(default)]
        coefficient_priors: Vec<PriorConfig>,
        #[serde(default = "default_coefficient_sd")]
        arm_prior: PriorConfig,
        #[serde(default = "default_intercept")]
        intercept: PriorConfig,
        #[serde(default = "default_shape")]
        shape: PriorConfig,
        #[serde(default = "unit")]
        h0: f64,
        #[serde(default = "default_analysis_sampler", deserialize_with = "analysis_sampler_section")]
        sampler: SamplerSection,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionConfig {
    pub statistic: String,
    /// Posterior-probability criterion: met when the statistic is at least this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// P-value criterion: met when the statistic is at most this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub methods: Vec<MethodConfig>,
    pub rule: Vec<CriterionConfig>,
}

impl AnalysisConfig {
    pub fn to_core(&self) -> AppResult<AnalysisSpec> {
        let methods = self
            .methods
            .iter()
            .map(|m| {
                Ok(match m {
                    MethodConfig::RiskRatio {
                        name,
                        eval_time,
                        variance,
                    } => AnalysisMethod::RiskRatio {
                        name: name.clone(),
                        eval_time: match eval_time {
                            EvalTimeConfig::At(t) => EvalTime::At(*t),
                            EvalTimeConfig::Named(s) if s == "horizon" => EvalTime::Horizon,
                            EvalTimeConfig::Named(s) => {
                                return Err(AppError::Config(format!(
                                    "eval_time must be a number or \"horizon\", got \"{}\"",
                                    s
                                )))
                            }
                        },
                        variance: match variance {
                            VarianceConfig::Aalen => CifVariance::Aalen,
                            VarianceConfig::Delta => CifVariance::Delta,
                        },
                    },
                    MethodConfig::BayesPh {
                        name,
                        cause: c,
                        covariates,
                        coefficient_priors,
                        arm_prior,
                        intercept,
                        shape,
                        h0,
                        sampler,
                    } => {
                        let mut spec = BayesPhSpec::new(cause(*c)?, covariates.clone());
                        if !coefficient_priors.is_empty() {
                            spec.coefficient_priors = coefficient_priors.iter().map(Prior::from).collect();
                        }
                        spec.arm_prior = arm_prior.into();
                        spec.intercept = intercept.into();
                        spec.shape = shape.into();
                        spec.h0 = *h0;
                        spec.sampler = sampler.to_core();
                        AnalysisMethod::BayesPh {
                            name: name.clone(),
                            spec,
                        }
                    }
                })
            })
            .collect::<AppResult<Vec<_>>>()?;
        let criteria = self
            .rule
            .iter()
            .map(|c| match (c.threshold, c.alpha) {
                (Some(threshold), None) => Ok(Criterion::PosteriorThreshold {
                    statistic: c.statistic.clone(),
                    threshold,
                }),
                (None, Some(alpha)) => Ok(Criterion::PValue {
                    statistic: c.statistic.clone(),
                    alpha,
                }),
                _ => Err(AppError::Config(format!(
                    "rule on `{}` needs exactly one of `threshold` or `alpha`",
                    c.statistic
                ))),
            })
            .collect::<AppResult<Vec<_>>>()?;
        Ok(AnalysisSpec {
            methods,
            rule: DecisionRule { criteria },
        })
    }
}

fn default_max_invalid() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_max_invalid")]
    pub max_invalid_fraction: f64,
    /// Times at which replicate incidence curves are written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_grid: Option<Vec<f64>>,
    /// `fit` also writes every posterior draw.
    #[serde(default)]
    pub write_draws: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            max_invalid_fraction: default_max_invalid(),
            curve_grid: None,
            write_draws: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedingConfig {
    #[default]
    Common,
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioConfig {
    ArmPrior {
        means: Vec<f64>,
        sds: Vec<f64>,
        #[serde(default)]
        seeding: SeedingConfig,
    },
    Horizons {
        horizons: Vec<f64>,
        #[serde(default)]
        seeding: SeedingConfig,
    },
}

impl ScenarioConfig {
    pub fn to_core(&self) -> (ScenarioGrid, ScenarioSeeding) {
        let (grid, seeding) = match self {
            ScenarioConfig::ArmPrior { means, sds, seeding } => (
                ScenarioGrid::ArmPrior {
                    means: means.clone(),
                    sds: sds.clone(),
                },
                seeding,
            ),
            ScenarioConfig::Horizons { horizons, seeding } => (ScenarioGrid::Horizons(horizons.clone()), seeding),
        };
        let seeding = match seeding {
            SeedingConfig::Common => ScenarioSeeding::Common,
            SeedingConfig::Independent => ScenarioSeeding::Independent,
        };
        (grid, seeding)
    }
}

fn default_k() -> usize {
    2500
}

fn default_seed() -> u64 {
    1
}

fn default_time_unit() -> String {
    "days".into()
}

/// A complete run: data, prediction model, enrollment, censoring, analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset CSV, relative to the config file.
    pub dataset: String,
    #[serde(default = "default_time_unit")]
    pub time_unit: String,
    /// Covariate columns to read; all non-reserved columns when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariates: Option<Vec<String>>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default = "default_prediction_sampler", deserialize_with = "prediction_sampler")]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub censoring: CensoringConfig,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enrollment: Option<EnrollmentConfig>,
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<ScenarioConfig>,
}

/// A parsed config together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

pub fn read_text(path: &Path) -> AppResult<String> {
    std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

impl LoadedConfig {
    pub fn load(path: &Path) -> AppResult<Self> {
        let config: RunConfig = toml::from_str(&read_text(path)?).map_err(|e| AppError::parse(path, e))?;
        Ok(LoadedConfig {
            config,
            base_dir: base_dir(path),
        })
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.base_dir.join(&self.config.dataset)
    }

    /// The effective configuration as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(&self.config).expect("run config serializes")
    }

    /// The configuration one scenario of the `[scenarios]` grid runs with.
    pub fn for_scenario(&self, scenario: &Scenario) -> LoadedConfig {
        let mut out = self.clone();
        let c = &mut out.config;
        let value = |name: &str| scenario.axes.iter().find(|(n, _)| n == name).map(|(_, v)| *v);
        let seeding = match &self.config.scenarios {
            Some(ScenarioConfig::ArmPrior { seeding, .. }) => {
                if let Some(s) = c.model.strata.iter_mut().find(|s| s.cause == 1) {
                    s.arm_prior = Some(normal(value("mu").unwrap_or_default(), value("sigma").unwrap_or(1.0)));
                }
                *seeding
            }
            Some(ScenarioConfig::Horizons { seeding, .. }) => {
                let h = value("horizon").unwrap_or_default();
                c.censoring = match c.censoring {
                    CensoringConfig::Calendar { .. } => CensoringConfig::Calendar { cutoff: h },
                    _ => CensoringConfig::Scalar { horizon: h },
                };
                *seeding
            }
            None => SeedingConfig::Common,
        };
        if seeding == SeedingConfig::Independent {
            c.seed = derive_seed(c.seed, Domain::Scenario, scenario.index as u64);
        }
        c.scenarios = None;
        out
    }

    pub fn to_ppos_config(&self) -> AppResult<PposConfig> {
        let c = &self.config;
        let mut p = PposConfig::new(c.model.to_core()?, c.analysis.to_core()?);
        p.k = c.k;
        p.master_seed = c.seed;
        p.sampler = c.sampler.to_core();
        p.enrollment = c.enrollment.as_ref().map(EnrollmentConfig::to_core).transpose()?;
        p.censoring = c.censoring.to_core(&self.base_dir)?;
        p.max_invalid_fraction = c.output.max_invalid_fraction;
        p.curve_grid = c.output.curve_grid.clone();
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum GeneratorConfig {
    Bernoulli { p: f64 },
    UniformInt { lo: i64, hi: i64 },
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCovariate {
    pub name: String,
    #[serde(flatten)]
    pub generator: GeneratorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthHazardConfig {
    Weibull { scale: f64, shape: f64 },
    Piecewise { knots: Vec<f64>, rates: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub cause: u8,
    /// Omitted when both arms share the hazard.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<u8>,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub coefficients: Vec<f64>,
    pub hazard: TruthHazardConfig,
}

/// Synthetic trial specification for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub seed: u64,
    #[serde(default = "default_time_unit")]
    pub time_unit: String,
    /// Subjects in arm 0 and arm 1.
    pub arm_sizes: [usize; 2],
    #[serde(default)]
    pub entry_span: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interim_cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_follow_up: Option<f64>,
    #[serde(default)]
    pub covariates: Vec<SyntheticCovariate>,
    pub truth: Vec<TruthConfig>,
}

impl SyntheticConfig {
    pub fn load(path: &Path) -> AppResult<Self> {
        toml::from_str(&read_text(path)?).map_err(|e| AppError::parse(path, e))
    }

    pub fn to_core(&self) -> AppResult<SyntheticSpec> {
        let covariates = self
            .covariates
            .iter()
            .map(|c| {
                let g = match c.generator {
                    GeneratorConfig::Bernoulli { p } => CovariateGenerator::Bernoulli { p },
                    GeneratorConfig::UniformInt { lo, hi } => CovariateGenerator::UniformInt { lo, hi },
                    GeneratorConfig::Uniform { lo, hi } => CovariateGenerator::Uniform { lo, hi },
                    GeneratorConfig::Normal { mean, sd } => CovariateGenerator::Normal { mean, sd },
                    GeneratorConfig::Constant { value } => CovariateGenerator::Constant(value),
                };
                (c.name.clone(), g)
            })
            .collect();
        let truth = self
            .truth
            .iter()
            .map(|t| {
                Ok(TruthStratum {
                    cause: cause(t.cause)?,
                    arm: t.arm.map(arm).transpose()?,
                    covariates: t.covariates.clone(),
                    coefficients: t.coefficients.clone(),
                    hazard: match &t.hazard {
                        TruthHazardConfig::Weibull { scale, shape } => TruthHazard::Weibull {
                            scale: *scale,
                            shape: *shape,
                        },
                        TruthHazardConfig::Piecewise { knots, rates } => TruthHazard::Piecewise {
                            knots: knots.clone(),
                            rates: rates.clone(),
                        },
                    },
                })
            })
            .collect::<AppResult<Vec<_>>>()?;
        Ok(SyntheticSpec {
            seed: self.seed,
            time_unit: self.time_unit.clone(),
            arm_sizes: self.arm_sizes,
            covariates,
            truth,
            entry_span: self.entry_span,
            interim_cutoff: self.interim_cutoff,
            max_follow_up: self.max_follow_up,
        })
    }
}
