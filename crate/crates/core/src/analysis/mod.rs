//! Final-analysis methods and the decision rule.

pub mod aalen_johansen;
pub mod bayes_ph;
pub mod risk_ratio;
pub mod rule;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use aalen_johansen::{aalen_johansen, aalen_johansen_with, CifEstimate, CifVariance};
pub use bayes_ph::{analysis_sampler, bayes_ph_graduation, BayesPhSpec, GraduationResult};
pub use risk_ratio::{risk_ratio_test, RiskRatioResult};
pub use rule::{evaluate_rule, Criterion, DecisionRule, Statistics};

use crate::dataset::{Arm, Dataset};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::rng::{derive_seed, Domain};

/// Time at which incidences are compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalTime {
    At(f64),
    /// The final-analysis horizon of the run (or scenario).
    Horizon,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisMethod {
    /// Aalen-Johansen risk ratio of arm 1 over arm 0 for the primary cause.
    /// Statistics: `rr`, `log_rr`, `ase_log_rr`, `p_value`, `degenerate`.
    RiskRatio {
        name: String,
        eval_time: EvalTime,
        variance: CifVariance,
    },
    /// Statistics: `posterior_prob`, `hr_median`.
    BayesPh { name: String, spec: BayesPhSpec },
}

impl AnalysisMethod {
    pub fn name(&self) -> &str {
        match self {
            AnalysisMethod::RiskRatio { name, .. } | AnalysisMethod::BayesPh { name, .. } => name,
        }
    }

    fn statistic_names(&self) -> &'static [&'static str] {
        match self {
            AnalysisMethod::RiskRatio { .. } => &["rr", "log_rr", "ase_log_rr", "p_value", "degenerate"],
            AnalysisMethod::BayesPh { .. } => &["posterior_prob", "hr_median"],
        }
    }
}

/// Analysis methods and the rule applied to their statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSpec {
    pub methods: Vec<AnalysisMethod>,
    pub rule: DecisionRule,
}

impl AnalysisSpec {
    pub fn validate(&self, schema: &[String], has_horizon: bool) -> Result<()> {
        self.rule.validate()?;
        let mut names = BTreeSet::new();
        let mut produced = BTreeSet::new();
        for m in &self.methods {
            if !names.insert(m.name()) {
                return Err(Error::InvalidConfig(format!("analysis `{}` defined twice", m.name())));
            }
            for s in m.statistic_names() {
                produced.insert(format!("{}.{}", m.name(), s));
            }
            match m {
                AnalysisMethod::RiskRatio { eval_time, .. } => match eval_time {
                    EvalTime::At(t) if !(*t > 0.0 && t.is_finite()) => {
                        return Err(Error::InvalidConfig(format!("evaluation time {} must be positive", t)))
                    }
                    EvalTime::Horizon if !has_horizon => {
                        return Err(Error::InvalidConfig(format!(
                            "analysis `{}` evaluates at the horizon but the run has none",
                            m.name()
                        )))
                    }
                    _ => {}
                },
                AnalysisMethod::BayesPh { spec, .. } => spec.validate(schema)?,
            }
        }
        for c in &self.rule.criteria {
            if !produced.contains(c.statistic()) {
                return Err(Error::InvalidRule(format!("no analysis produces `{}`", c.statistic())));
            }
        }
        Ok(())
    }
}

/// Statistics and success indicator of one analysed dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOutcome {
    pub statistics: Statistics,
    pub success: bool,
    /// `false` when an analysis-phase sampler failed its diagnostics.
    pub valid: bool,
    pub problems: Vec<String>,
}

/// Runs every method on `data` and evaluates the rule. The `i`-th Bayesian
/// analysis samples with `derive_seed(seed, Stratum, i)`.
pub fn analyse<E: Executor>(
    data: &Dataset,
    spec: &AnalysisSpec,
    horizon: Option<f64>,
    seed: u64,
    exec: &E,
) -> Result<AnalysisOutcome> {
    let mut statistics = Statistics::new();
    let mut problems = Vec::new();
    for (i, m) in spec.methods.iter().enumerate() {
        let key = |s: &str| format!("{}.{}", m.name(), s);
        match m {
            AnalysisMethod::RiskRatio {
                eval_time, variance, ..
            } => {
                let t = match eval_time {
                    EvalTime::At(t) => *t,
                    EvalTime::Horizon => horizon.ok_or_else(|| Error::InvalidConfig("no horizon to evaluate at".into()))?,
                };
                let exposed = aalen_johansen_with(data, Some(Arm::Treatment), *variance);
                let referent = aalen_johansen_with(data, Some(Arm::Control), *variance);
                let r = risk_ratio_test(&exposed, &referent, t, 0.0);
                statistics.insert(key("rr"), r.rr);
                statistics.insert(key("log_rr"), r.log_rr);
                statistics.insert(key("ase_log_rr"), r.ase_log_rr);
                statistics.insert(key("p_value"), r.p_value);
                statistics.insert(key("degenerate"), r.degenerate as u8 as f64);
            }
            AnalysisMethod::BayesPh { spec: ph, .. } => {
                let s = derive_seed(seed, Domain::Stratum, i as u64);
                match bayes_ph_graduation(data, ph, s, exec) {
                    Ok(g) => {
                        statistics.insert(key("posterior_prob"), g.posterior_prob);
                        statistics.insert(key("hr_median"), g.hazard_ratio_median);
                        problems.extend(g.problems.into_iter().map(|p| format!("{}: {}", m.name(), p)));
                    }
                    Err(e @ (Error::SamplerStuck { .. } | Error::NonFiniteInit)) => {
                        statistics.insert(key("posterior_prob"), f64::NAN);
                        statistics.insert(key("hr_median"), f64::NAN);
                        problems.push(format!("{}: {}", m.name(), e));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    let valid = problems.is_empty();
    let success = valid && evaluate_rule(&statistics, &spec.rule)?;
    Ok(AnalysisOutcome {
        statistics,
        success,
        valid,
        problems,
    })
}
