//! Cause-specific hazard models.
//!
//! Two families are supported, each with a log-linear covariate effect
//! `γᵀz`:
//!
//! - Weibull: `λ(t | z) = u(z) ν t^(ν-1)` with `log u(z) = α + γᵀz`, so
//!   `Λ(t | z) = u(z) t^ν`;
//! - piecewise-constant (PCH): `log λ(t | z) = β_l + γᵀz` on the `l`-th
//!   interval `(q_{l-1}, q_l]`, with boundary knots `0` and `+inf`.
//!
//! A log scale (or level) of `-inf` encodes a hazard that is identically
//! zero on its domain; simulation specs use that for absent causes.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::dataset::{Arm, Cause, Dataset, Event, SubjectRecord};
use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// Absolute accuracy requested from CIF quadrature.
pub const CIF_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct WeibullHazard {
    /// `α`, the log scale at `z = 0`.
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// `ν > 0`.
    pub shape: f64,
}

impl WeibullHazard {
    pub fn new(intercept: f64, coefficients: Vec<f64>, shape: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::InvalidModel(format!("Weibull shape must be positive, got {}", shape)));
        }
        if intercept.is_nan() || intercept == f64::INFINITY {
            return Err(Error::InvalidModel(format!("Weibull intercept {} is not allowed", intercept)));
        }
        check_coefficients(&coefficients)?;
        Ok(WeibullHazard {
            intercept,
            coefficients,
            shape,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseHazard {
    /// Internal knots, strictly increasing and positive.
    pub knots: Vec<f64>,
    /// Log-hazard per interval, `knots.len() + 1` of them.
    pub levels: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl PiecewiseHazard {
    pub fn new(knots: Vec<f64>, levels: Vec<f64>, coefficients: Vec<f64>) -> Result<Self> {
        validate_knots(&knots)?;
        if levels.len() != knots.len() + 1 {
            return Err(Error::InvalidModel(format!(
                "{} knots need {} levels, got {}",
                knots.len(),
                knots.len() + 1,
                levels.len()
            )));
        }
        if levels.iter().any(|b| b.is_nan() || *b == f64::INFINITY) {
            return Err(Error::InvalidModel("log-hazard levels must be finite or -inf".into()));
        }
        check_coefficients(&coefficients)?;
        Ok(PiecewiseHazard {
            knots,
            levels,
            coefficients,
        })
    }

    /// Index `l` of the interval `(q_{l-1}, q_l]` containing `t`.
    pub fn interval_of(&self, t: f64) -> usize {
        self.knots.partition_point(|&q| q < t)
    }

    /// Lower and upper bound of interval `l`.
    pub fn interval_bounds(&self, l: usize) -> (f64, f64) {
        let lo = if l == 0 { 0.0 } else { self.knots[l - 1] };
        let hi = self.knots.get(l).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }
}

pub fn validate_knots(knots: &[f64]) -> Result<()> {
    if knots.iter().any(|q| !(q.is_finite() && *q > 0.0)) {
        return Err(Error::InvalidModel("knots must be finite and positive".into()));
    }
    if knots.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidModel("knots must be strictly increasing".into()));
    }
    Ok(())
}

fn check_coefficients(c: &[f64]) -> Result<()> {
    if c.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidModel("covariate coefficients must be finite".into()))
    }
}

/// Hazard model of one cause in one stratum.
#[derive(Debug, Clone, PartialEq)]
pub enum CauseHazard {
    Weibull(WeibullHazard),
    Piecewise(PiecewiseHazard),
}

impl CauseHazard {
    pub fn coefficients(&self) -> &[f64] {
        match self {
            CauseHazard::Weibull(w) => &w.coefficients,
            CauseHazard::Piecewise(p) => &p.coefficients,
        }
    }

    /// Internal knots; empty for Weibull models.
    pub fn knots(&self) -> &[f64] {
        match self {
            CauseHazard::Weibull(_) => &[],
            CauseHazard::Piecewise(p) => &p.knots,
        }
    }

    /// `γᵀz`.
    pub fn linear_predictor(&self, z: &[f64]) -> f64 {
        self.coefficients().iter().zip(z).map(|(g, x)| g * x).sum()
    }

    /// `log λ(t | z)` for `t > 0`.
    pub fn log_hazard(&self, t: f64, z: &[f64]) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        Ok(self.log_hazard_lp(t, self.linear_predictor(z)))
    }

    /// `Λ(t | z) = ∫₀ᵗ λ(u | z) du`.
    pub fn cum_hazard(&self, t: f64, z: &[f64]) -> f64 {
        self.cum_hazard_lp(t, self.linear_predictor(z))
    }

    /// Log hazard given the linear predictor `lp = γᵀz`.
    pub fn log_hazard_lp(&self, t: f64, lp: f64) -> f64 {
        match self {
            CauseHazard::Weibull(w) => w.intercept + lp + w.shape.ln() + (w.shape - 1.0) * t.ln(),
            CauseHazard::Piecewise(p) => p.levels[p.interval_of(t)] + lp,
        }
    }

    pub fn hazard_lp(&self, t: f64, lp: f64) -> f64 {
        match self {
            CauseHazard::Weibull(w) if w.intercept == f64::NEG_INFINITY => 0.0,
            CauseHazard::Weibull(w) if w.shape == 1.0 => (w.intercept + lp).exp(),
            _ => self.log_hazard_lp(t, lp).exp(),
        }
    }

    pub fn cum_hazard_lp(&self, t: f64, lp: f64) -> f64 {
        if !(t > 0.0) {
            return 0.0;
        }
        match self {
            CauseHazard::Weibull(w) => (w.intercept + lp + w.shape * t.ln()).exp(),
            CauseHazard::Piecewise(p) => {
                let mut total = 0.0;
                for (l, &level) in p.levels.iter().enumerate() {
                    let (lo, hi) = p.interval_bounds(l);
                    if lo >= t {
                        break;
                    }
                    if level > f64::NEG_INFINITY {
                        total += (level + lp).exp() * (hi.min(t) - lo);
                    }
                }
                total
            }
        }
    }

    /// `true` when `Λ(t)` stays bounded as `t → ∞`.
    pub fn is_bounded(&self) -> bool {
        match self {
            CauseHazard::Weibull(w) => w.intercept == f64::NEG_INFINITY,
            CauseHazard::Piecewise(p) => p.levels.last() == Some(&f64::NEG_INFINITY),
        }
    }
}

/// Which columns of a subject record enter a model's linear predictor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Design {
    columns: Vec<DesignColumn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignColumn {
    /// Position in the dataset's covariate schema.
    Covariate(usize),
    /// The arm indicator (0/1), for models pooling both arms.
    Arm,
}

impl Design {
    /// Resolves covariate names against `schema`; the arm column, if any, comes last.
    pub fn resolve<S: AsRef<str>>(names: &[S], schema: &[alloc::string::String], include_arm: bool) -> Result<Self> {
        let mut columns = names
            .iter()
            .map(|n| {
                schema
                    .iter()
                    .position(|c| c == n.as_ref())
                    .map(DesignColumn::Covariate)
                    .ok_or_else(|| Error::InvalidModel(format!("unknown covariate `{}`", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        if include_arm {
            columns.push(DesignColumn::Arm);
        }
        Ok(Design { columns })
    }

    pub fn empty() -> Self {
        Design { columns: Vec::new() }
    }

    pub fn columns(&self) -> &[DesignColumn] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn includes_arm(&self) -> bool {
        self.columns.contains(&DesignColumn::Arm)
    }

    pub fn value(&self, column: usize, record: &SubjectRecord) -> f64 {
        match self.columns[column] {
            DesignColumn::Covariate(i) => record.covariates[i],
            DesignColumn::Arm => record.arm.code() as f64,
        }
    }

    pub fn row(&self, record: &SubjectRecord) -> Vec<f64> {
        (0..self.columns.len()).map(|j| self.value(j, record)).collect()
    }

    pub fn linear_predictor(&self, coefficients: &[f64], record: &SubjectRecord) -> f64 {
        coefficients
            .iter()
            .enumerate()
            .map(|(j, g)| g * self.value(j, record))
            .sum()
    }
}

/// How the randomisation arm enters the cause-specific models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmMode {
    /// Separate parameters per arm.
    Stratified,
    /// One model per cause with an arm coefficient (proportional hazards across arms).
    Covariate,
}

/// A hazard model bound to a stratum and a design.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumModel {
    pub cause: Cause,
    /// `None` when both arms share the model.
    pub arm: Option<Arm>,
    pub design: Design,
    pub hazard: CauseHazard,
}

impl StratumModel {
    pub fn new(cause: Cause, arm: Option<Arm>, design: Design, hazard: CauseHazard) -> Result<Self> {
        if design.len() != hazard.coefficients().len() {
            return Err(Error::InvalidModel(format!(
                "design has {} columns but the model has {} coefficients",
                design.len(),
                hazard.coefficients().len()
            )));
        }
        Ok(StratumModel {
            cause,
            arm,
            design,
            hazard,
        })
    }

    pub fn linear_predictor(&self, record: &SubjectRecord) -> f64 {
        self.design.linear_predictor(self.hazard.coefficients(), record)
    }
}

/// One model per cause and arm (or per cause when arms are pooled).
#[derive(Debug, Clone, PartialEq)]
pub struct CauseModelSet {
    arm_mode: ArmMode,
    strata: Vec<StratumModel>,
    // lookup[cause][arm] -> index into strata
    lookup: [[usize; 2]; 2],
}

impl CauseModelSet {
    pub fn new(arm_mode: ArmMode, strata: Vec<StratumModel>) -> Result<Self> {
        let lookup = stratum_lookup(arm_mode, strata.iter().map(|s| (s.cause, s.arm)))?;
        for s in &strata {
            if arm_mode == ArmMode::Stratified && s.design.includes_arm() {
                return Err(Error::InvalidModel("stratified models cannot use the arm as covariate".into()));
            }
        }
        Ok(CauseModelSet {
            arm_mode,
            strata,
            lookup,
        })
    }

    pub fn arm_mode(&self) -> ArmMode {
        self.arm_mode
    }

    pub fn strata(&self) -> &[StratumModel] {
        &self.strata
    }

    pub fn stratum(&self, cause: Cause, arm: Arm) -> &StratumModel {
        &self.strata[self.lookup[cause.index()][arm.index()]]
    }

    /// Both cause-specific hazards evaluated for one subject.
    pub fn pair(&self, record: &SubjectRecord) -> CausePair<'_> {
        let s1 = self.stratum(Cause::Primary, record.arm);
        let s2 = self.stratum(Cause::Competing, record.arm);
        CausePair {
            hazards: [&s1.hazard, &s2.hazard],
            lps: [s1.linear_predictor(record), s2.linear_predictor(record)],
        }
    }
}

/// Checks that `(cause, arm)` keys cover the model structure exactly once and
/// returns the `[cause][arm]` index table.
pub(crate) fn stratum_lookup<I>(arm_mode: ArmMode, keys: I) -> Result<[[usize; 2]; 2]>
where
    I: Iterator<Item = (Cause, Option<Arm>)>,
{
    let mut lookup = [[usize::MAX; 2]; 2];
    let mut n = 0;
    for (i, (cause, arm)) in keys.enumerate() {
        n += 1;
        let single;
        let arms: &[Arm] = match (arm_mode, arm) {
            (ArmMode::Stratified, Some(a)) => {
                single = [a];
                &single
            }
            (ArmMode::Covariate, None) => &Arm::BOTH,
            _ => {
                return Err(Error::InvalidModel(format!(
                    "stratum (cause {}, arm {:?}) does not match {:?} arm mode",
                    cause.code(),
                    arm.map(Arm::code),
                    arm_mode
                )))
            }
        };
        for a in arms {
            let slot = &mut lookup[cause.index()][a.index()];
            if *slot != usize::MAX {
                return Err(Error::InvalidModel(format!(
                    "duplicate model for cause {} arm {}",
                    cause.code(),
                    a.code()
                )));
            }
            *slot = i;
        }
    }
    let expected = match arm_mode {
        ArmMode::Stratified => 4,
        ArmMode::Covariate => 2,
    };
    if n != expected || lookup.iter().flatten().any(|&i| i == usize::MAX) {
        return Err(Error::InvalidModel(format!(
            "{:?} arm mode needs {} strata covering both causes",
            arm_mode, expected
        )));
    }
    Ok(lookup)
}

/// The two cause-specific hazards of one subject.
#[derive(Debug, Clone, Copy)]
pub struct CausePair<'a> {
    pub hazards: [&'a CauseHazard; 2],
    /// Linear predictors `γᵀz` per cause.
    pub lps: [f64; 2],
}

impl<'a> CausePair<'a> {
    pub fn new(primary: &'a CauseHazard, primary_z: &[f64], competing: &'a CauseHazard, competing_z: &[f64]) -> Self {
        CausePair {
            hazards: [primary, competing],
            lps: [primary.linear_predictor(primary_z), competing.linear_predictor(competing_z)],
        }
    }

    pub fn hazard(&self, cause: Cause, t: f64) -> f64 {
        let i = cause.index();
        self.hazards[i].hazard_lp(t, self.lps[i])
    }

    pub fn cum_hazard_of(&self, cause: Cause, t: f64) -> f64 {
        let i = cause.index();
        self.hazards[i].cum_hazard_lp(t, self.lps[i])
    }

    /// All-cause hazard.
    pub fn total_hazard(&self, t: f64) -> f64 {
        self.hazard(Cause::Primary, t) + self.hazard(Cause::Competing, t)
    }

    /// All-cause cumulative hazard `Λ.(t)`.
    pub fn cum_hazard(&self, t: f64) -> f64 {
        self.cum_hazard_of(Cause::Primary, t) + self.cum_hazard_of(Cause::Competing, t)
    }

    /// Event-free survival `S(t) = exp(-Λ.(t))`.
    pub fn survival(&self, t: f64) -> f64 {
        (-self.cum_hazard(t)).exp()
    }

    pub fn is_bounded(&self) -> bool {
        self.hazards.iter().all(|h| h.is_bounded())
    }

    pub fn both_piecewise(&self) -> bool {
        self.hazards.iter().all(|h| matches!(h, CauseHazard::Piecewise(_)))
    }

    /// Sorted union of both models' knots.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.hazards.iter().flat_map(|h| h.knots().iter().copied()).collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// `Pr(X = 1 | T = t) = λ₁(t) / (λ₁(t) + λ₂(t))`.
    pub fn cause_probability(&self, t: f64) -> Result<f64> {
        let h1 = self.hazard(Cause::Primary, t);
        let h2 = self.hazard(Cause::Competing, t);
        let total = h1 + h2;
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::ZeroHazards(t));
        }
        Ok(h1 / total)
    }

    /// Crude cumulative incidence `F_i(t) = ∫₀ᵗ λ_i(u) S(u) du`.
    pub fn cif(&self, t: f64, cause: Cause) -> Result<f64> {
        if !(t > 0.0) {
            return Ok(0.0);
        }
        let mut edges = alloc::vec![0.0];
        edges.extend(self.breakpoints().into_iter().filter(|&b| b < t));
        edges.push(t);
        if self.both_piecewise() {
            let mut total = 0.0;
            for w in edges.windows(2) {
                let (a, b) = (w[0], w[1]);
                let mid = 0.5 * (a + b);
                let hi = self.hazard(cause, mid);
                let h = self.total_hazard(mid);
                if hi > 0.0 {
                    // ∫ₐᵇ hᵢ e^{-Λ(a) - h(u-a)} du
                    total += hi / h * self.survival(a) * -(-h * (b - a)).exp_m1();
                }
            }
            return Ok(total);
        }
        let tol = CIF_TOLERANCE / (edges.len() - 1) as f64;
        let mut total = 0.0;
        for w in edges.windows(2) {
            total += integrate(|u| self.hazard(cause, u) * self.survival(u), w[0], w[1], tol)?;
        }
        Ok(total)
    }
}

/// Cause-specific log-likelihood of `data`:
/// `Σ_s [Σ_i 1(δ_s = i) log λ_i(y_s | z_s) - Σ_i Λ_i(y_s | z_s)]`.
pub fn log_likelihood(models: &CauseModelSet, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for r in data.records() {
        let pair = models.pair(r);
        let mut ll = -pair.cum_hazard(r.time);
        if let Event::Failure(cause) = r.event {
            let i = cause.index();
            ll += pair.hazards[i].log_hazard_lp(r.time, pair.lps[i]);
        }
        if !ll.is_finite() {
            return Err(Error::NonFiniteLikelihood(r.id.as_ref().into()));
        }
        total += ll;
    }
    Ok(total)
}
