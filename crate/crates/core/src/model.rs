//! Model specifications and posterior fitting for the modelling phase.
//!
//! The cause-specific likelihood factorises over strata (cause × arm, or
//! cause alone when the arm is a covariate), so every stratum is fitted on
//! its own. Its posterior is sampled on an unconstrained scale:
//!
//! - `log ν` and `log τ` replace the positive shape and random-walk scale,
//!   with the Jacobian added to the log density;
//! - the intercept (Weibull) or the levels (PCH) are shifted by `γᵀz̄`, the
//!   linear predictor at the mean design row, which removes most of their
//!   correlation with the covariate coefficients. The shift has unit Jacobian;
//! - random-walk levels of strata with few events per level are
//!   non-centred (the first level and the increments divided by `τ`), which
//!   removes the funnel between `τ` and weakly identified levels. Strata
//!   with more data keep the levels themselves, which mixes better there.
//!
//! Priors are always evaluated on the natural scale, and draws are reported
//! on it. The likelihood is computed from sufficient statistics grouped by
//! distinct design rows.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::dataset::{Arm, Cause, Dataset, Event, SubjectRecord};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::hazard::{
    stratum_lookup, validate_knots, ArmMode, CauseHazard, CauseModelSet, Design, PiecewiseHazard, StratumModel,
    WeibullHazard,
};
use crate::prior::{LevelPrior, Prior};
use crate::rng::{derive_seed, Domain};
use crate::sampler::{find_mode, sample_posterior, ChainStart, LogDensity, ParameterDiagnostics, PosteriorDraws, SamplerConfig};

/// Baseline hazard family of a stratum with the priors of its own parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    Weibull { intercept: Prior, shape: Prior },
    Piecewise { knots: Vec<f64>, levels: LevelPrior },
}

/// Model of one cause in one stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumSpec {
    pub cause: Cause,
    /// `None` when the arm enters as a covariate.
    pub arm: Option<Arm>,
    pub covariates: Vec<String>,
    /// One prior per entry of `covariates`.
    pub coefficient_priors: Vec<Prior>,
    /// Prior on the arm coefficient; required exactly when arms are pooled.
    pub arm_prior: Option<Prior>,
    pub family: FamilySpec,
}

impl StratumSpec {
    /// `cause1.arm0`, or `cause1` when arms are pooled.
    pub fn label(&self) -> String {
        match self.arm {
            Some(a) => format!("cause{}.arm{}", self.cause.code(), a.code()),
            None => format!("cause{}", self.cause.code()),
        }
    }

    /// Coefficient priors including the arm coefficient, in design order.
    pub fn all_coefficient_priors(&self) -> Vec<Prior> {
        let mut p = self.coefficient_priors.clone();
        p.extend(self.arm_prior);
        p
    }

    fn n_levels(&self) -> usize {
        match &self.family {
            FamilySpec::Weibull { .. } => 0,
            FamilySpec::Piecewise { knots, .. } => knots.len() + 1,
        }
    }

    /// Natural-scale parameter names, prefixed with the stratum label.
    ///
    /// Weibull: `alpha, gamma[..], nu`; PCH: `beta[1..L], gamma[..], tau`
    /// (`tau` only for random-walk level priors). The arm coefficient is `gamma[arm]`.
    pub fn parameter_names(&self) -> Vec<String> {
        let label = self.label();
        let mut coefs: Vec<String> = self
            .covariates
            .iter()
            .map(|c| format!("{}.gamma[{}]", label, c))
            .collect();
        if self.arm_prior.is_some() {
            coefs.push(format!("{}.gamma[arm]", label));
        }
        match &self.family {
            FamilySpec::Weibull { .. } => {
                let mut n = vec![format!("{}.alpha", label)];
                n.extend(coefs);
                n.push(format!("{}.nu", label));
                n
            }
            FamilySpec::Piecewise { levels, .. } => {
                let mut n: Vec<String> = (1..=self.n_levels()).map(|l| format!("{}.beta[{}]", label, l)).collect();
                n.extend(coefs);
                if levels.has_scale() {
                    n.push(format!("{}.tau", label));
                }
                n
            }
        }
    }

    pub fn validate(&self, arm_mode: ArmMode, schema: &[String]) -> Result<()> {
        let label = self.label();
        let bad = |m: String| Err(Error::InvalidModel(format!("{}: {}", label, m)));
        if self.coefficient_priors.len() != self.covariates.len() {
            return bad(format!(
                "{} covariates but {} coefficient priors",
                self.covariates.len(),
                self.coefficient_priors.len()
            ));
        }
        match (arm_mode, self.arm_prior.is_some()) {
            (ArmMode::Covariate, false) => return bad("pooled arms need a prior on the arm coefficient".into()),
            (ArmMode::Stratified, true) => return bad("stratified models take no arm coefficient".into()),
            _ => {}
        }
        for p in self.all_coefficient_priors() {
            p.validate()?;
        }
        match &self.family {
            FamilySpec::Weibull { intercept, shape } => {
                intercept.validate()?;
                shape.validate()?;
                if !shape.is_positive() {
                    return bad("the shape prior must be supported on (0, inf)".into());
                }
            }
            FamilySpec::Piecewise { knots, levels } => {
                validate_knots(knots)?;
                levels.validate()?;
            }
        }
        Design::resolve(&self.covariates, schema, self.arm_prior.is_some())?;
        Ok(())
    }

    /// Log prior density at natural-scale parameters `theta`.
    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        let coefs = self.all_coefficient_priors();
        let p = coefs.len();
        match &self.family {
            FamilySpec::Weibull { intercept, shape } => {
                intercept.log_density(theta[0])
                    + coefs.iter().zip(&theta[1..1 + p]).map(|(pr, g)| pr.log_density(*g)).sum::<f64>()
                    + shape.log_density(theta[1 + p])
            }
            FamilySpec::Piecewise { levels, .. } => {
                let nl = self.n_levels();
                let tau = levels.has_scale().then(|| theta[nl + p]);
                levels.log_density(&theta[..nl], tau)
                    + coefs.iter().zip(&theta[nl..nl + p]).map(|(pr, g)| pr.log_density(*g)).sum::<f64>()
            }
        }
    }

    /// The hazard model at natural-scale parameters `theta`.
    pub fn hazard(&self, theta: &[f64]) -> Result<CauseHazard> {
        let p = self.covariates.len() + self.arm_prior.is_some() as usize;
        match &self.family {
            FamilySpec::Weibull { .. } => Ok(CauseHazard::Weibull(WeibullHazard::new(
                theta[0],
                theta[1..1 + p].to_vec(),
                theta[1 + p],
            )?)),
            FamilySpec::Piecewise { knots, .. } => {
                let nl = knots.len() + 1;
                Ok(CauseHazard::Piecewise(PiecewiseHazard::new(
                    knots.clone(),
                    theta[..nl].to_vec(),
                    theta[nl..nl + p].to_vec(),
                )?))
            }
        }
    }
}

/// Cause-specific models for both causes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub arm_mode: ArmMode,
    pub strata: Vec<StratumSpec>,
}

impl ModelSpec {
    pub fn validate(&self, schema: &[String]) -> Result<()> {
        stratum_lookup(self.arm_mode, self.strata.iter().map(|s| (s.cause, s.arm)))?;
        for s in &self.strata {
            s.validate(self.arm_mode, schema)?;
        }
        Ok(())
    }
}

/// Records of `data` that inform a stratum.
fn stratum_records<'a>(spec: &'a StratumSpec, data: &'a Dataset) -> impl Iterator<Item = &'a SubjectRecord> + 'a {
    data.records().iter().filter(move |r| spec.arm.is_none_or(|a| r.arm == a))
}

struct WeibullGroup {
    z: Vec<f64>,
    events: f64,
    log_times: Vec<f64>,
}

struct PchGroup {
    z: Vec<f64>,
    events: Vec<f64>,
    exposure: Vec<f64>,
}

enum Groups {
    Weibull {
        groups: Vec<WeibullGroup>,
        events: f64,
        sum_log_event_times: f64,
    },
    Piecewise {
        groups: Vec<PchGroup>,
    },
}

/// Random-walk strata with fewer events per level than this are sampled
/// non-centred.
pub const NON_CENTERED_EVENTS_PER_LEVEL: f64 = 10.0;

/// Unconstrained log posterior of one stratum.
pub struct StratumTarget {
    spec: StratumSpec,
    coef_priors: Vec<Prior>,
    center: Vec<f64>,
    groups: Groups,
    non_centered: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl StratumTarget {
    pub fn new(spec: &StratumSpec, data: &Dataset) -> Result<Self> {
        let design = Design::resolve(&spec.covariates, data.covariate_names(), spec.arm_prior.is_some())?;
        let p = design.len();
        let records: Vec<&SubjectRecord> = stratum_records(spec, data).collect();
        let mut center = vec![0.0; p];
        for r in &records {
            for (j, c) in center.iter_mut().enumerate() {
                *c += design.value(j, r);
            }
        }
        if !records.is_empty() {
            center.iter_mut().for_each(|c| *c /= records.len() as f64);
        }
        // Group subjects by design row, in order of first appearance.
        let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut members: Vec<Vec<&SubjectRecord>> = Vec::new();
        for r in &records {
            let row = design.row(r);
            let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            let g = *index.entry(key).or_insert_with(|| {
                rows.push(row.clone());
                members.push(Vec::new());
                rows.len() - 1
            });
            members[g].push(r);
        }
        let centered = |row: &[f64]| -> Vec<f64> { row.iter().zip(&center).map(|(v, m)| v - m).collect() };
        let is_event = |r: &SubjectRecord| r.event == Event::Failure(spec.cause);
        let groups = match &spec.family {
            FamilySpec::Weibull { .. } => {
                let mut total = 0.0;
                let mut sum_log = 0.0;
                let mut groups = Vec::with_capacity(rows.len());
                for (row, mem) in rows.iter().zip(&members) {
                    let mut events = 0.0;
                    let mut log_times = Vec::with_capacity(mem.len());
                    for r in mem {
                        if is_event(r) {
                            if !(r.time > 0.0) {
                                return Err(Error::NonFiniteLikelihood(r.id.as_ref().into()));
                            }
                            events += 1.0;
                            sum_log += r.time.ln();
                        }
                        if r.time > 0.0 {
                            log_times.push(r.time.ln());
                        }
                    }
                    total += events;
                    groups.push(WeibullGroup {
                        z: centered(row),
                        events,
                        log_times,
                    });
                }
                Groups::Weibull {
                    groups,
                    events: total,
                    sum_log_event_times: sum_log,
                }
            }
            FamilySpec::Piecewise { knots, .. } => {
                let shape = PiecewiseHazard::new(knots.clone(), vec![0.0; knots.len() + 1], vec![])?;
                let nl = knots.len() + 1;
                let groups = rows
                    .iter()
                    .zip(&members)
                    .map(|(row, mem)| {
                        let mut events = vec![0.0; nl];
                        let mut exposure = vec![0.0; nl];
                        for r in mem {
                            for (l, e) in exposure.iter_mut().enumerate() {
                                let (lo, hi) = shape.interval_bounds(l);
                                if lo >= r.time {
                                    break;
                                }
                                *e += hi.min(r.time) - lo;
                            }
                            if is_event(r) {
                                events[shape.interval_of(r.time)] += 1.0;
                            }
                        }
                        PchGroup {
                            z: centered(row),
                            events,
                            exposure,
                        }
                    })
                    .collect();
                Groups::Piecewise { groups }
            }
        };
        let non_centered = match (&spec.family, &groups) {
            (FamilySpec::Piecewise { levels, .. }, Groups::Piecewise { groups }) if levels.has_scale() => {
                let events: f64 = groups.iter().flat_map(|g| g.events.iter()).sum();
                events / (spec.n_levels() as f64) < NON_CENTERED_EVENTS_PER_LEVEL
            }
            _ => false,
        };
        Ok(StratumTarget {
            spec: spec.clone(),
            coef_priors: spec.all_coefficient_priors(),
            center,
            groups,
            non_centered,
        })
    }

    fn n_coef(&self) -> usize {
        self.coef_priors.len()
    }

    fn has_scale(&self) -> bool {
        matches!(&self.spec.family, FamilySpec::Piecewise { levels, .. } if levels.has_scale())
    }

    /// Whether random-walk levels are sampled non-centred.
    pub fn is_non_centered(&self) -> bool {
        self.non_centered
    }

    /// Overrides the automatic choice of parameterisation (random-walk
    /// levels only).
    pub fn with_non_centered(mut self, on: bool) -> Self {
        self.non_centered = on && self.has_scale();
        self
    }

    /// Non-centred random-walk levels: `x` holds the first level and
    /// standardised increments `e`, with `b[l] = b[l-1] + tau e[l]`. This is
    /// the centred vector with the levels `b`.
    fn to_centered(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        if self.non_centered {
            let nl = self.spec.n_levels();
            let tau = x[self.dim() - 1].exp();
            for l in 1..nl {
                y[l] = y[l - 1] + tau * x[l];
            }
        }
        y
    }

    fn from_centered(&self, y: &[f64]) -> Vec<f64> {
        let mut x = y.to_vec();
        if self.non_centered {
            let nl = self.spec.n_levels();
            let tau = y[self.dim() - 1].exp();
            for l in 1..nl {
                x[l] = (y[l] - y[l - 1]) / tau;
            }
        }
        x
    }

    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        if !self.non_centered {
            return self.evaluate_centered(x, grad);
        }
        let nl = self.spec.n_levels();
        let last = self.dim() - 1;
        let y = self.to_centered(x);
        // log |d y / d x| = (L - 1) log tau.
        let jacobian = (nl - 1) as f64 * x[last];
        match grad {
            None => self.evaluate_centered(&y, None) + jacobian,
            Some(g) => {
                let lp = self.evaluate_centered(&y, Some(&mut *g));
                if !lp.is_finite() {
                    return lp;
                }
                let tau = x[last].exp();
                // Chain rule through the cumulative sums, last level first.
                let mut tail = 0.0;
                let mut d_log_tau = 0.0;
                for l in (1..nl).rev() {
                    tail += g[l];
                    d_log_tau += tail * tau * x[l];
                    g[l] = tail * tau;
                }
                g[0] += tail;
                g[last] += d_log_tau + (nl - 1) as f64;
                lp + jacobian
            }
        }
    }

    /// Unconstrained point to natural parameters.
    pub fn to_natural(&self, x: &[f64]) -> Vec<f64> {
        let x = &self.to_centered(x)[..];
        let p = self.n_coef();
        let mut theta = x.to_vec();
        match &self.groups {
            Groups::Weibull { .. } => {
                theta[0] = x[0] - dot(&x[1..1 + p], &self.center);
                theta[1 + p] = x[1 + p].exp();
            }
            Groups::Piecewise { .. } => {
                let nl = self.spec.n_levels();
                let shift = dot(&x[nl..nl + p], &self.center);
                theta[..nl].iter_mut().for_each(|b| *b -= shift);
                if self.has_scale() {
                    theta[nl + p] = x[nl + p].exp();
                }
            }
        }
        theta
    }

    /// A crude starting point from event rates, with coefficients at zero.
    pub fn initial_point(&self) -> Vec<f64> {
        let p = self.n_coef();
        match &self.groups {
            Groups::Weibull { groups, events, .. } => {
                let exposure: f64 = groups.iter().flat_map(|g| g.log_times.iter()).map(|lt| lt.exp()).sum();
                let rate = if exposure > 0.0 { (events + 0.5) / exposure } else { 1.0 };
                let mut x = vec![0.0; p + 2];
                x[0] = rate.ln();
                x
            }
            Groups::Piecewise { groups } => {
                let nl = self.spec.n_levels();
                let mut x = vec![0.0; nl + p + self.has_scale() as usize];
                let mut fallback = None;
                for l in 0..nl {
                    let d: f64 = groups.iter().map(|g| g.events[l]).sum();
                    let e: f64 = groups.iter().map(|g| g.exposure[l]).sum();
                    x[l] = if e > 0.0 {
                        let v = ((d + 0.5) / e).ln();
                        fallback.get_or_insert(v);
                        v
                    } else {
                        f64::NAN
                    };
                }
                // Intervals without exposure copy their nearest left neighbour.
                let first = fallback.unwrap_or(0.0);
                let mut prev = first;
                for v in x[..nl].iter_mut() {
                    if v.is_nan() {
                        *v = prev;
                    }
                    prev = *v;
                }
                if self.has_scale() {
                    let sd = if nl > 1 {
                        let diffs: Vec<f64> = x[..nl].windows(2).map(|w| w[1] - w[0]).collect();
                        (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt()
                    } else {
                        0.0
                    };
                    x[nl + p] = sd.max(0.1).ln();
                }
                self.from_centered(&x)
            }
        }
    }

    /// Coordinates optimised when locating the mode. A centred random-walk
    /// scale is held, since the joint mode in it is degenerate.
    pub fn mode_free(&self) -> Vec<bool> {
        let mut free = vec![true; self.dim()];
        if self.has_scale() && !self.non_centered {
            free[self.dim() - 1] = false;
        }
        free
    }

    fn evaluate_centered(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let p = self.n_coef();
        let (ll, lp) = match &self.groups {
            Groups::Weibull {
                groups,
                events,
                sum_log_event_times,
            } => {
                let u = x[0];
                let gamma = &x[1..1 + p];
                let log_nu = x[1 + p];
                let nu = log_nu.exp();
                let mut ll = events * log_nu + (nu - 1.0) * sum_log_event_times;
                let mut d_nu = events / nu + sum_log_event_times;
                for grp in groups {
                    let eta = u + dot(gamma, &grp.z);
                    let e = eta.exp();
                    let mut t_nu = 0.0;
                    let mut t_nu_log = 0.0;
                    if grad.is_some() {
                        for &lt in &grp.log_times {
                            let w = (nu * lt).exp();
                            t_nu += w;
                            t_nu_log += w * lt;
                        }
                    } else {
                        t_nu = grp.log_times.iter().map(|&lt| (nu * lt).exp()).sum();
                    }
                    ll += grp.events * eta - e * t_nu;
                    if let Some(g) = grad.as_deref_mut() {
                        let r = grp.events - e * t_nu;
                        g[0] += r;
                        for j in 0..p {
                            g[1 + j] += grp.z[j] * r;
                        }
                        d_nu -= e * t_nu_log;
                    }
                }
                let FamilySpec::Weibull { intercept, shape } = &self.spec.family else { unreachable!() };
                let alpha = u - dot(gamma, &self.center);
                let lp = intercept.log_density(alpha)
                    + self.coef_priors.iter().zip(gamma).map(|(pr, g)| pr.log_density(*g)).sum::<f64>()
                    + shape.log_density(nu)
                    + log_nu;
                if let Some(g) = grad.as_deref_mut() {
                    let d_alpha = intercept.log_density_derivative(alpha);
                    g[0] += d_alpha;
                    for j in 0..p {
                        g[1 + j] += self.coef_priors[j].log_density_derivative(gamma[j]) - self.center[j] * d_alpha;
                    }
                    g[1 + p] = nu * (d_nu + shape.log_density_derivative(nu)) + 1.0;
                }
                (ll, lp)
            }
            Groups::Piecewise { groups } => {
                let nl = self.spec.n_levels();
                let b = &x[..nl];
                let gamma = &x[nl..nl + p];
                let eb: Vec<f64> = b.iter().map(|v| v.exp()).collect();
                let mut ll = 0.0;
                for grp in groups {
                    let lin = dot(gamma, &grp.z);
                    let ez = lin.exp();
                    let mut rsum = 0.0;
                    for l in 0..nl {
                        let mu = eb[l] * ez * grp.exposure[l];
                        if grp.events[l] > 0.0 {
                            ll += grp.events[l] * (b[l] + lin);
                        }
                        ll -= mu;
                        if let Some(g) = grad.as_deref_mut() {
                            let r = grp.events[l] - mu;
                            g[l] += r;
                            rsum += r;
                        }
                    }
                    if let Some(g) = grad.as_deref_mut() {
                        for j in 0..p {
                            g[nl + j] += grp.z[j] * rsum;
                        }
                    }
                }
                let FamilySpec::Piecewise { levels, .. } = &self.spec.family else { unreachable!() };
                let shift = dot(gamma, &self.center);
                let beta: Vec<f64> = b.iter().map(|v| v - shift).collect();
                let tau = self.has_scale().then(|| x[nl + p].exp());
                let mut lp = levels.log_density(&beta, tau)
                    + self.coef_priors.iter().zip(gamma).map(|(pr, g)| pr.log_density(*g)).sum::<f64>();
                if self.has_scale() {
                    lp += x[nl + p];
                }
                if let Some(g) = grad.as_deref_mut() {
                    let mut d_beta = vec![0.0; nl];
                    let d_tau = levels.log_density_gradient(&beta, tau, &mut d_beta);
                    let total: f64 = d_beta.iter().sum();
                    for l in 0..nl {
                        g[l] += d_beta[l];
                    }
                    for j in 0..p {
                        g[nl + j] += self.coef_priors[j].log_density_derivative(gamma[j]) - self.center[j] * total;
                    }
                    if let Some(tau) = tau {
                        g[nl + p] = tau * d_tau + 1.0;
                    }
                }
                (ll, lp)
            }
        };
        let total = ll + lp;
        if total.is_nan() {
            f64::NEG_INFINITY
        } else {
            total
        }
    }
}

impl LogDensity for StratumTarget {
    fn dim(&self) -> usize {
        let p = self.n_coef();
        match &self.groups {
            Groups::Weibull { .. } => p + 2,
            Groups::Piecewise { .. } => self.spec.n_levels() + p + self.has_scale() as usize,
        }
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.evaluate(x, None)
    }

    fn log_density_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.evaluate(x, Some(grad))
    }
}

/// Posterior draws of one stratum, on the natural scale.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumPosterior {
    pub spec: StratumSpec,
    pub design: Design,
    pub draws: PosteriorDraws,
    pub diagnostics: Vec<ParameterDiagnostics>,
    /// Threshold violations; empty when converged.
    pub problems: Vec<String>,
}

impl StratumPosterior {
    pub fn converged(&self) -> bool {
        self.problems.is_empty()
    }

    pub fn model_at(&self, draw: usize) -> Result<StratumModel> {
        let hazard = self.spec.hazard(self.draws.row(draw))?;
        StratumModel::new(self.spec.cause, self.spec.arm, self.design.clone(), hazard)
    }
}

/// Fits one stratum: mode search, Laplace-started chains, diagnostics.
pub fn fit_stratum<E: Executor>(
    spec: &StratumSpec,
    data: &Dataset,
    config: &SamplerConfig,
    exec: &E,
) -> Result<StratumPosterior> {
    let design = Design::resolve(&spec.covariates, data.covariate_names(), spec.arm_prior.is_some())?;
    let target = StratumTarget::new(spec, data)?;
    let init = target.initial_point();
    let mode = find_mode(&target, &init, &target.mode_free(), 0.25);
    let start = ChainStart {
        point: mode.point,
        covariance: mode.covariance,
    };
    let raw = sample_posterior(&target, &start, config, exec)?;
    let draws = raw.map_rows(spec.parameter_names(), |x| target.to_natural(x));
    let diagnostics = draws.diagnostics().unwrap_or_default();
    let problems = draws.convergence_problems(config);
    Ok(StratumPosterior {
        spec: spec.clone(),
        design,
        draws,
        diagnostics,
        problems,
    })
}

/// Posterior of all strata; draw `k` of every stratum forms one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorFit {
    pub arm_mode: ArmMode,
    pub strata: Vec<StratumPosterior>,
}

impl PosteriorFit {
    /// Pooled draws per stratum (all strata have the same count).
    pub fn n_draws(&self) -> usize {
        self.strata.first().map_or(0, |s| s.draws.len())
    }

    pub fn converged(&self) -> bool {
        self.strata.iter().all(StratumPosterior::converged)
    }

    pub fn problems(&self) -> Vec<String> {
        self.strata.iter().flat_map(|s| s.problems.iter().cloned()).collect()
    }

    pub fn diagnostics(&self) -> impl Iterator<Item = &ParameterDiagnostics> {
        self.strata.iter().flat_map(|s| s.diagnostics.iter())
    }

    /// The cause-specific models at pooled draw `draw`.
    pub fn models_at(&self, draw: usize) -> Result<CauseModelSet> {
        let strata = self.strata.iter().map(|s| s.model_at(draw)).collect::<Result<Vec<_>>>()?;
        CauseModelSet::new(self.arm_mode, strata)
    }
}

/// Fits every stratum of `spec` to `data`. Stratum `i` samples with the seed
/// `derive_seed(config.seed, Stratum, i)`.
pub fn fit_model<E: Executor>(spec: &ModelSpec, data: &Dataset, config: &SamplerConfig, exec: &E) -> Result<PosteriorFit> {
    spec.validate(data.covariate_names())?;
    config.validate()?;
    let strata = spec
        .strata
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let cfg = SamplerConfig {
                seed: derive_seed(config.seed, Domain::Stratum, i as u64),
                ..config.clone()
            };
            fit_stratum(s, data, &cfg, exec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorFit {
        arm_mode: spec.arm_mode,
        strata,
    })
}
