//! Decision rules: conjunctions of threshold criteria on named statistics.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Statistics of one analysed dataset, keyed `<method>.<statistic>`.
pub type Statistics = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq)]
pub enum Criterion {
    /// Met when the statistic is at least `threshold`.
    PosteriorThreshold { statistic: String, threshold: f64 },
    /// Met when the statistic is at most `alpha`.
    PValue { statistic: String, alpha: f64 },
}

impl Criterion {
    pub fn statistic(&self) -> &str {
        match self {
            Criterion::PosteriorThreshold { statistic, .. } | Criterion::PValue { statistic, .. } => statistic,
        }
    }

    fn bound(&self) -> f64 {
        match self {
            Criterion::PosteriorThreshold { threshold, .. } => *threshold,
            Criterion::PValue { alpha, .. } => *alpha,
        }
    }

    pub fn is_met(&self, value: f64) -> bool {
        match self {
            Criterion::PosteriorThreshold { threshold, .. } => value >= *threshold,
            Criterion::PValue { alpha, .. } => value <= *alpha,
        }
    }
}

/// Success requires every criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRule {
    pub criteria: Vec<Criterion>,
}

impl DecisionRule {
    pub fn single(criterion: Criterion) -> Self {
        DecisionRule { criteria: alloc::vec![criterion] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.criteria.is_empty() || self.criteria.len() > 2 {
            return Err(Error::InvalidRule(format!(
                "a rule combines one or two criteria, not {}",
                self.criteria.len()
            )));
        }
        for c in &self.criteria {
            let b = c.bound();
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidRule(format!("threshold {} of `{}` outside (0, 1)", b, c.statistic())));
            }
        }
        Ok(())
    }
}

/// Success indicator `G`: all criteria met, thresholds inclusive.
pub fn evaluate_rule(stats: &Statistics, rule: &DecisionRule) -> Result<bool> {
    let mut ok = true;
    for c in &rule.criteria {
        let value = *stats
            .get(c.statistic())
            .ok_or_else(|| Error::MissingStatistic(c.statistic().into()))?;
        ok &= c.is_met(value);
    }
    Ok(ok)
}
