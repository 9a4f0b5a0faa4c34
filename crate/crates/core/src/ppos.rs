//! Predictive probability of success: fit once, then predict and analyse `K`
//! completed trials.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use crate::analysis::{aalen_johansen, analyse, AnalysisSpec, Statistics};
use crate::dataset::{partition_interim, Arm, Cause, CensoringRule, Dataset, Horizon};
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::model::{fit_model, ModelSpec, PosteriorFit};
use crate::hazard::ArmMode;
use crate::prior::Prior;
use crate::rng::{choose_indices, derive_seed, stream, Domain};
use crate::sampler::{ParameterDiagnostics, SamplerConfig};
use crate::simulate::{predict_final_dataset, EnrollmentPlan, EnrollmentSpec};

/// `√(p(1−p)/K)`; NaN for `K = 0`.
pub fn mc_standard_error(ppos: f64, k: usize) -> f64 {
    if k == 0 {
        return f64::NAN;
    }
    (ppos * (1.0 - ppos) / k as f64).max(0.0).sqrt()
}

/// One PPoS computation.
#[derive(Debug, Clone, PartialEq)]
pub struct PposConfig {
    pub k: usize,
    pub master_seed: u64,
    /// Prediction-phase model.
    pub model: ModelSpec,
    /// Prediction-phase sampler; its seed is replaced by one derived from
    /// `master_seed`.
    pub sampler: SamplerConfig,
    pub enrollment: Option<EnrollmentSpec>,
    pub censoring: CensoringRule,
    pub analysis: AnalysisSpec,
    /// Largest tolerated share of invalid replicates.
    pub max_invalid_fraction: f64,
    /// Times at which each replicate's primary-cause incidence curves are kept.
    pub curve_grid: Option<Vec<f64>>,
}

impl PposConfig {
    pub fn new(model: ModelSpec, analysis: AnalysisSpec) -> Self {
        PposConfig {
            k: 2500,
            master_seed: 1,
            model,
            sampler: SamplerConfig::default(),
            enrollment: None,
            censoring: CensoringRule::None,
            analysis,
            max_invalid_fraction: 0.01,
            curve_grid: None,
        }
    }

    pub fn validate(&self, schema: &[String]) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.max_invalid_fraction) {
            return Err(Error::InvalidConfig(format!(
                "invalid-replicate fraction {} outside [0, 1]",
                self.max_invalid_fraction
            )));
        }
        if let Some(grid) = &self.curve_grid {
            if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return Err(Error::InvalidConfig("curve grid times must be finite and nonnegative".into()));
            }
        }
        self.model.validate(schema)?;
        self.sampler.validate()?;
        if let Some(e) = &self.enrollment {
            e.validate()?;
            for (name, _) in &e.covariates {
                if !schema.contains(name) {
                    return Err(Error::InvalidConfig(format!("enrollment covariate `{}` not in the dataset", name)));
                }
            }
            if e.covariates.len() != schema.len() || e.covariates.iter().zip(schema).any(|((n, _), s)| n != s) {
                return Err(Error::InvalidConfig(
                    "enrollment covariates must list the dataset covariates in schema order".into(),
                ));
            }
        }
        self.censoring.validate()?;
        let has_horizon = matches!(self.censoring, CensoringRule::Administrative(_));
        self.analysis.validate(schema, has_horizon)
    }

    /// The most invalid replicates tolerated.
    pub fn invalid_limit(&self) -> usize {
        (self.max_invalid_fraction * self.k as f64 + 1e-9).floor() as usize
    }
}

/// One predicted and analysed trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub index: usize,
    /// Pooled posterior draw used for prediction.
    pub draw: usize,
    /// Seed of this replicate's prediction stream and analysis samplers.
    pub seed: u64,
    pub statistics: Statistics,
    pub success: bool,
    pub valid: bool,
    pub problems: Vec<String>,
    /// Primary-cause incidence per arm (control, treatment) on the curve grid.
    pub curves: Option<[Vec<f64>; 2]>,
}

/// Outcome of [`run_ppos`].
#[derive(Debug, Clone, PartialEq)]
pub struct PposResult {
    pub ppos: f64,
    pub mc_se: f64,
    pub k: usize,
    pub k_effective: usize,
    pub n_invalid: usize,
    /// Posterior draws were reused because fewer than `K` were available.
    pub draws_with_replacement: bool,
    pub replicates: Vec<ReplicateRecord>,
    /// Prediction-phase posterior summaries, labelled by stratum.
    pub diagnostics: Vec<(String, ParameterDiagnostics)>,
}

impl PposResult {
    fn from_replicates(k: usize, replicates: Vec<ReplicateRecord>, fit: &PosteriorFit, reuse: bool) -> Self {
        let valid: Vec<&ReplicateRecord> = replicates.iter().filter(|r| r.valid).collect();
        let k_effective = valid.len();
        let successes = valid.iter().filter(|r| r.success).count();
        let ppos = if k_effective == 0 {
            0.0
        } else {
            successes as f64 / k_effective as f64
        };
        let diagnostics = fit
            .strata
            .iter()
            .flat_map(|s| {
                let label = s.spec.label();
                s.diagnostics.iter().map(move |d| (label.clone(), d.clone()))
            })
            .collect();
        PposResult {
            ppos,
            mc_se: if k_effective == 0 { 0.0 } else { mc_standard_error(ppos, k_effective) },
            k,
            k_effective,
            n_invalid: k - k_effective,
            draws_with_replacement: reuse,
            replicates,
            diagnostics,
        }
    }
}

/// Fits the prediction-phase model with the seed derived from `master_seed`.
/// Non-convergence is an error.
pub fn fit_prediction_model<E: Executor>(interim: &Dataset, config: &PposConfig, exec: &E) -> Result<PosteriorFit> {
    interim.require_nonempty()?;
    let sampler = SamplerConfig {
        seed: derive_seed(config.master_seed, Domain::Fit, 0),
        ..config.sampler.clone()
    };
    let fit = fit_model(&config.model, interim, &sampler, exec)?;
    if !fit.converged() {
        return Err(Error::NonConvergence(fit.problems().join("; ")));
    }
    Ok(fit)
}

/// Pooled draw index of every replicate, and whether draws repeat.
fn select_draws(n_draws: usize, k: usize, seed: u64) -> Result<(Vec<usize>, bool)> {
    if n_draws == 0 {
        return Err(Error::NonConvergence("posterior has no draws".into()));
    }
    let mut rng = stream(seed, Domain::DrawSelection, 0);
    if n_draws >= k {
        Ok((choose_indices(&mut rng, n_draws, k), false))
    } else {
        Ok(((0..k).map(|_| rng.random_range(0..n_draws)).collect(), true))
    }
}

/// Runs all replicates against an existing fit without the invalid-share
/// check, so that a report can still be written when it fails.
pub fn simulate_replicates<E: Executor>(
    interim: &Dataset,
    config: &PposConfig,
    fit: &PosteriorFit,
    exec: &E,
) -> Result<PposResult> {
    config.validate(interim.covariate_names())?;
    let (d_obs, d_cens) = partition_interim(interim);
    let plan: Option<EnrollmentPlan> = config.enrollment.as_ref().map(|e| e.resolve(interim)).transpose()?;
    let (draws, reuse) = select_draws(fit.n_draws(), config.k, config.master_seed)?;

    let outcomes = exec.map(config.k, |k| -> Result<ReplicateRecord> {
        let seed = derive_seed(config.master_seed, Domain::Replicate, k as u64);
        let mut rng = stream(seed, Domain::Replicate, 0);
        let models = fit.models_at(draws[k])?;
        let data = predict_final_dataset(&d_obs, &d_cens, &models, plan.as_ref(), &config.censoring, &mut rng)?;
        let horizon = match &config.censoring {
            CensoringRule::Administrative(h) => Some(h.max_over(data.records())?),
            CensoringRule::None => None,
        };
        let outcome = analyse(&data, &config.analysis, horizon, seed, &Sequential)?;
        let curves = config.curve_grid.as_ref().map(|grid| {
            Arm::BOTH.map(|arm| {
                let est = aalen_johansen(&data, Some(arm));
                grid.iter().map(|&t| est.value_at(Cause::Primary, t)).collect()
            })
        });
        Ok(ReplicateRecord {
            index: k,
            draw: draws[k],
            seed,
            statistics: outcome.statistics,
            success: outcome.success,
            valid: outcome.valid,
            problems: outcome.problems,
            curves,
        })
    });
    let replicates = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PposResult::from_replicates(config.k, replicates, fit, reuse))
}

fn check_invalid(result: &PposResult, config: &PposConfig) -> Result<()> {
    let limit = config.invalid_limit();
    if result.n_invalid > limit {
        return Err(Error::TooManyInvalid {
            invalid: result.n_invalid,
            total: result.k,
            limit,
        });
    }
    Ok(())
}

/// PPoS of `interim` under `config`: fit, then `K` prediction/analysis
/// replicates. The result depends only on the inputs and `master_seed`,
/// not on the executor.
pub fn run_ppos<E: Executor>(interim: &Dataset, config: &PposConfig, exec: &E) -> Result<PposResult> {
    config.validate(interim.covariate_names())?;
    let fit = fit_prediction_model(interim, config, exec)?;
    let result = simulate_replicates(interim, config, &fit, exec)?;
    check_invalid(&result, config)?;
    Ok(result)
}

/// Axes of a sensitivity analysis.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioGrid {
    /// Normal(μ, σ) prior on the primary-cause arm coefficient, every
    /// combination of `means` × `sds`.
    ArmPrior { means: Vec<f64>, sds: Vec<f64> },
    /// Final-analysis horizons replacing the administrative censoring horizon.
    Horizons(Vec<f64>),
}

/// How scenario replicates are seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScenarioSeeding {
    /// Every scenario reuses `master_seed` (common random numbers), so
    /// differences between scenarios reflect the scenario, not Monte Carlo noise.
    #[default]
    Common,
    /// Scenario `i` uses `derive_seed(master_seed, Scenario, i)`.
    Independent,
}

/// One cell of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub index: usize,
    /// Axis names and values, e.g. `[("mu", 0.0), ("sigma", 0.3)]`.
    pub axes: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub scenario: Scenario,
    pub result: Result<PposResult>,
}

impl ScenarioGrid {
    pub fn scenarios(&self) -> Vec<Scenario> {
        let axes: Vec<Vec<(String, f64)>> = match self {
            ScenarioGrid::ArmPrior { means, sds } => means
                .iter()
                .flat_map(|&m| sds.iter().map(move |&s| vec_of(&[("mu", m), ("sigma", s)])))
                .collect(),
            ScenarioGrid::Horizons(hs) => hs.iter().map(|&h| vec_of(&[("horizon", h)])).collect(),
        };
        axes.into_iter().enumerate().map(|(index, axes)| Scenario { index, axes }).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            ScenarioGrid::ArmPrior { means, sds } => {
                !means.is_empty() && !sds.is_empty() && finite(means) && finite(sds) && sds.iter().all(|&s| s > 0.0)
            }
            ScenarioGrid::Horizons(hs) => !hs.is_empty() && finite(hs) && hs.iter().all(|&h| h > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("scenario grid must be nonempty with finite values (positive sds and horizons)".into()))
        }
    }

    /// `base` with the scenario applied.
    pub fn apply(&self, base: &PposConfig, scenario: &Scenario) -> Result<PposConfig> {
        let mut config = base.clone();
        let value = |name: &str| scenario.axes.iter().find(|(n, _)| n == name).map(|(_, v)| *v);
        match self {
            ScenarioGrid::ArmPrior { .. } => {
                if config.model.arm_mode != ArmMode::Covariate {
                    return Err(Error::InvalidConfig(
                        "an arm-prior grid needs proportional hazards across arms (arm as covariate)".into(),
                    ));
                }
                let stratum = config
                    .model
                    .strata
                    .iter_mut()
                    .find(|s| s.cause == Cause::Primary)
                    .ok_or_else(|| Error::InvalidConfig("no primary-cause stratum".into()))?;
                stratum.arm_prior = Some(Prior::Normal {
                    mean: value("mu").unwrap_or_default(),
                    sd: value("sigma").unwrap_or(1.0),
                });
            }
            ScenarioGrid::Horizons(_) => {
                let h = value("horizon").unwrap_or_default();
                config.censoring = match &base.censoring {
                    CensoringRule::Administrative(Horizon::Calendar(_)) => CensoringRule::Administrative(Horizon::Calendar(h)),
                    CensoringRule::Administrative(Horizon::Scalar(_)) | CensoringRule::None => {
                        CensoringRule::Administrative(Horizon::Scalar(h))
                    }
                    CensoringRule::Administrative(Horizon::PerSubject(_)) => {
                        return Err(Error::InvalidConfig("a horizon grid cannot replace per-subject horizons".into()))
                    }
                };
            }
        }
        Ok(config)
    }

    fn changes_model(&self) -> bool {
        matches!(self, ScenarioGrid::ArmPrior { .. })
    }
}

fn vec_of(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
    pairs.iter().map(|(n, v)| (n.to_string(), *v)).collect()
}

/// PPoS for every scenario of `grid`. A failing scenario is reported in its
/// outcome and does not stop the others. Prior grids refit the prediction
/// model per scenario; horizon grids share one fit.
pub fn run_scenarios<E: Executor>(
    interim: &Dataset,
    base: &PposConfig,
    grid: &ScenarioGrid,
    seeding: ScenarioSeeding,
    exec: &E,
) -> Result<Vec<ScenarioOutcome>> {
    grid.validate()?;
    let mut shared: Option<Result<PosteriorFit>> = None;
    let mut out = Vec::new();
    for scenario in grid.scenarios() {
        let result = (|| {
            let mut config = grid.apply(base, &scenario)?;
            if seeding == ScenarioSeeding::Independent {
                config.master_seed = derive_seed(base.master_seed, Domain::Scenario, scenario.index as u64);
            }
            config.validate(interim.covariate_names())?;
            let own;
            let fit = if grid.changes_model() || seeding == ScenarioSeeding::Independent {
                own = fit_prediction_model(interim, &config, exec)?;
                &own
            } else {
                match shared.get_or_insert_with(|| fit_prediction_model(interim, &config, exec)) {
                    Ok(f) => f,
                    Err(e) => return Err(e.clone()),
                }
            };
            let result = simulate_replicates(interim, &config, fit, exec)?;
            check_invalid(&result, &config)?;
            Ok(result)
        })();
        out.push(ScenarioOutcome { scenario, result });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{AnalysisMethod, Criterion, DecisionRule, EvalTime};
    use crate::dataset::{Event, SubjectRecord};
    use crate::model::{FamilySpec, StratumSpec};
    use crate::analysis::CifVariance;
    use alloc::vec;

    #[test]
    fn mc_error_examples() {
        assert_eq!(mc_standard_error(0.5, 2500), 0.01);
        assert_eq!(mc_standard_error(0.0, 2500), 0.0);
        assert!((mc_standard_error(0.061, 2500) - 0.00479).abs() < 5e-6);
        assert!((mc_standard_error(0.75, 2500) - 0.00866).abs() < 5e-6);
        assert!(mc_standard_error(0.3, 0).is_nan());
    }

    fn weibull_stratum(cause: Cause, arm: Option<Arm>) -> StratumSpec {
        StratumSpec {
            cause,
            arm,
            covariates: vec![],
            coefficient_priors: vec![],
            arm_prior: arm.is_none().then_some(Prior::Normal { mean: 0.0, sd: 0.5f64.sqrt() }),
            family: FamilySpec::Weibull {
                intercept: Prior::Normal { mean: 0.0, sd: 20.0 },
                shape: Prior::Exponential { rate: 1.0 },
            },
        }
    }

    fn rr_config(model: ModelSpec, alpha: f64) -> PposConfig {
        let analysis = AnalysisSpec {
            methods: vec![AnalysisMethod::RiskRatio {
                name: "rr".into(),
                eval_time: EvalTime::Horizon,
                variance: CifVariance::Aalen,
            }],
            rule: DecisionRule::single(Criterion::PValue {
                statistic: "rr.p_value".into(),
                alpha,
            }),
        };
        let mut c = PposConfig::new(model, analysis);
        c.k = 40;
        c.censoring = CensoringRule::Administrative(Horizon::Scalar(3.0));
        c
    }

    fn toy(n: usize, censor_every: usize) -> Dataset {
        let records = (0..n)
            .map(|i| {
                let arm = if i % 2 == 0 { Arm::Control } else { Arm::Treatment };
                let base = 0.05 + (i as f64 * 0.6180339887).fract() * 2.5;
                let t = if arm == Arm::Treatment { base * 2.0 } else { base };
                let event = if censor_every > 0 && i % censor_every == 0 {
                    Event::Censored
                } else if i % 5 == 0 {
                    Event::Failure(Cause::Competing)
                } else {
                    Event::Failure(Cause::Primary)
                };
                SubjectRecord::new(&format!("s{}", i), t.min(2.9), event, arm, vec![])
            })
            .collect();
        Dataset::new(vec![], "years", records).unwrap()
    }

    fn model() -> ModelSpec {
        ModelSpec {
            arm_mode: ArmMode::Covariate,
            strata: vec![weibull_stratum(Cause::Primary, None), weibull_stratum(Cause::Competing, None)],
        }
    }

    #[test]
    fn degenerate_prediction_reproduces_the_interim_decision() {
        let data = toy(120, 0);
        for alpha in [0.5, 1e-12] {
            let config = rr_config(model(), alpha);
            let r = run_ppos(&data, &config, &Sequential).unwrap();
            let direct = analyse(&data, &config.analysis, Some(3.0), 0, &Sequential).unwrap().success;
            assert_eq!(r.ppos, if direct { 1.0 } else { 0.0 });
            assert!(r.replicates.iter().all(|x| x.statistics == r.replicates[0].statistics));
        }
    }

    #[test]
    fn runs_are_reproducible_and_bounded() {
        let data = toy(120, 3);
        let mut config = rr_config(model(), 0.2);
        config.curve_grid = Some(vec![0.5, 1.0, 2.0]);
        let a = run_ppos(&data, &config, &Sequential).unwrap();
        let b = run_ppos(&data, &config, &Sequential).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.ppos));
        assert!(a.mc_se <= 0.5 / (a.k_effective as f64).sqrt());
        assert_eq!(a.replicates.len(), 40);
        assert!(!a.draws_with_replacement);
        let distinct: alloc::collections::BTreeSet<usize> = a.replicates.iter().map(|r| r.draw).collect();
        assert_eq!(distinct.len(), 40);
        assert_eq!(a.replicates[0].curves.as_ref().unwrap()[1].len(), 3);
        config.master_seed = 2;
        assert_ne!(run_ppos(&data, &config, &Sequential).unwrap().replicates, a.replicates);
    }

    #[test]
    fn few_draws_are_reused() {
        let (draws, reuse) = select_draws(10, 25, 3).unwrap();
        assert!(reuse);
        assert!(draws.iter().all(|&d| d < 10));
        let (draws, reuse) = select_draws(25, 25, 3).unwrap();
        assert!(!reuse);
        let mut sorted = draws.clone();
        sorted.sort();
        assert_eq!(sorted, (0..25).collect::<Vec<_>>());
    }

    #[test]
    fn single_cell_grid_matches_run_ppos() {
        let data = toy(120, 3);
        let mut config = rr_config(model(), 0.2);
        config.k = 20;
        let direct = run_ppos(&data, &config, &Sequential).unwrap();
        let grid = ScenarioGrid::Horizons(vec![3.0]);
        let out = run_scenarios(&data, &config, &grid, ScenarioSeeding::Common, &Sequential).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].result.as_ref().unwrap(), &direct);
        let grid = ScenarioGrid::ArmPrior {
            means: vec![0.0],
            sds: vec![0.5f64.sqrt()],
        };
        let out = run_scenarios(&data, &config, &grid, ScenarioSeeding::Common, &Sequential).unwrap();
        assert_eq!(out[0].result.as_ref().unwrap(), &direct);
    }

    #[test]
    fn grids_enumerate_cells_and_flag_failures() {
        let grid = ScenarioGrid::ArmPrior {
            means: vec![0.0, 0.2, 0.7, 1.1, 1.4],
            sds: vec![0.1f64.sqrt(), 0.2f64.sqrt(), 0.5f64.sqrt()],
        };
        assert_eq!(grid.scenarios().len(), 15);
        assert!(ScenarioGrid::Horizons(vec![]).validate().is_err());
        let data = toy(60, 3);
        let mut config = rr_config(
            ModelSpec {
                arm_mode: ArmMode::Stratified,
                strata: Cause::BOTH
                    .iter()
                    .flat_map(|&c| Arm::BOTH.map(|a| weibull_stratum(c, Some(a))))
                    .collect(),
            },
            0.2,
        );
        config.k = 5;
        let out = run_scenarios(&data, &config, &grid, ScenarioSeeding::Common, &Sequential).unwrap();
        assert_eq!(out.len(), 15);
        assert!(out.iter().all(|o| o.result.is_err()));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let data = toy(40, 3);
        let mut config = rr_config(model(), 0.2);
        config.k = 0;
        assert!(matches!(run_ppos(&data, &config, &Sequential), Err(Error::InvalidConfig(_))));
        let mut config = rr_config(model(), 0.2);
        config.censoring = CensoringRule::None;
        assert!(run_ppos(&data, &config, &Sequential).is_err());
    }

    #[test]
    fn nonconvergence_aborts() {
        let data = toy(40, 3);
        let mut config = rr_config(model(), 0.2);
        config.sampler.warmup = 1;
        config.sampler.draws = 2;
        assert!(matches!(run_ppos(&data, &config, &Sequential), Err(Error::NonConvergence(_))));
    }
}
