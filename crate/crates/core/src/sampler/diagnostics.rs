//! Split R-hat and multi-chain effective sample size.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};

/// Fewer draws per chain than this make the diagnostics unreliable.
pub const MIN_DRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDiagnostics {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    /// Bulk effective sample size over all chains; NaN when degenerate.
    pub ess: f64,
    /// Split R-hat; NaN when degenerate.
    pub rhat: f64,
    /// Every draw has the same value, so ESS and R-hat are undefined.
    pub degenerate: bool,
}

impl ParameterDiagnostics {
    /// Reasons this parameter fails the thresholds, if any.
    pub fn problem(&self, ess_min: f64, rhat_max: f64) -> Option<String> {
        if self.degenerate {
            Some(format!("{}: degenerate (constant) chains", self.name))
        } else if !(self.rhat <= rhat_max) {
            Some(format!("{}: R-hat {:.4} > {}", self.name, self.rhat, rhat_max))
        } else if !(self.ess >= ess_min) {
            Some(format!("{}: ESS {:.1} < {}", self.name, self.ess, ess_min))
        } else {
            None
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Quantile with linear interpolation between order statistics of `sorted`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Splits every chain into two halves (dropping a middle draw when odd).
fn split<'a>(chains: &[&'a [f64]]) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(&c[..half]);
        out.push(&c[c.len() - half..]);
    }
    out
}

fn between_within(chains: &[&[f64]]) -> (f64, f64, Vec<f64>) {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, m)| sample_variance(c, *m))
        .sum::<f64>()
        / chains.len() as f64;
    let grand = mean(&means);
    let b_over_n = sample_variance(&means, grand);
    let var_plus = (n - 1.0) / n * w + b_over_n;
    (w, var_plus, means)
}

/// Split R-hat: `sqrt(var⁺ / W)` over half-chains.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let halves = split(chains);
    let (w, var_plus, _) = between_within(&halves);
    (var_plus / w).sqrt()
}

/// Multi-chain ESS on split chains with Geyer's initial monotone sequence.
pub fn effective_sample_size(chains: &[&[f64]]) -> f64 {
    let halves = split(chains);
    let m = halves.len();
    let n = halves[0].len();
    let (w, var_plus, means) = between_within(&halves);
    if !(w > 0.0) {
        return f64::NAN;
    }
    let total = (m * n) as f64;
    let autocov = |lag: usize| -> f64 {
        halves
            .iter()
            .zip(&means)
            .map(|(c, mu)| {
                (0..n - lag).map(|i| (c[i] - mu) * (c[i + lag] - mu)).sum::<f64>() / n as f64
            })
            .sum::<f64>()
            / m as f64
    };
    let rho = |lag: usize| 1.0 - (w - autocov(lag)) / var_plus;
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = if lag == 0 { 1.0 + rho(1) } else { rho(lag) + rho(lag + 1) };
        if !(pair > 0.0) {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        lag += 2;
    }
    let tau = (-1.0 + 2.0 * sum).max(1.0 / total.log10());
    total / tau
}

/// Summary and convergence diagnostics of one parameter given its per-chain draws.
pub fn diagnose_parameter(name: &str, chains: &[&[f64]]) -> Result<ParameterDiagnostics> {
    if chains.len() < 2 {
        return Err(Error::TooFewChains(chains.len()));
    }
    let mut all: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    let mu = mean(&all);
    let sd = if all.len() > 1 { sample_variance(&all, mu).sqrt() } else { f64::NAN };
    all.sort_by(f64::total_cmp);
    let degenerate = all.first() == all.last();
    let usable = chains[0].len() >= 4;
    let (ess, rhat) = if degenerate || !usable {
        (f64::NAN, f64::NAN)
    } else {
        (effective_sample_size(chains), split_rhat(chains))
    };
    Ok(ParameterDiagnostics {
        name: name.into(),
        mean: mu,
        sd,
        q05: quantile(&all, 0.05),
        q50: quantile(&all, 0.5),
        q95: quantile(&all, 0.95),
        ess,
        rhat,
        degenerate,
    })
}
