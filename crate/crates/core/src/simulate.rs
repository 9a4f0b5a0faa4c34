//! Prediction phase: event-time and event-type simulation, future enrollment,
//! and assembly of the completed final-analysis dataset.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Geometric};

use crate::dataset::{censor_record, Arm, Cause, CensoringRule, Dataset, Event, SubjectRecord};
use crate::error::{Error, Result};
use crate::hazard::{CauseModelSet, CausePair, CauseHazard};
use crate::prior::Prior;

const MAX_ITER: usize = 200;

/// Solves `Λ.(t) = target` for the all-cause cumulative hazard of `pair`.
///
/// Piecewise-constant pairs are inverted exactly piece by piece. Other pairs
/// are bracketed by doubling and solved by Newton steps kept inside the
/// bracket (bisection when a step leaves it), to `1e-10` absolute in Λ-space
/// or the float resolution of `target`, whichever is larger.
pub fn invert_cum_hazard(pair: &CausePair, target: f64) -> Result<f64> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::InvalidTarget(target));
    }
    if pair.both_piecewise() {
        return invert_piecewise(pair, target);
    }
    let last_knot = pair.breakpoints().last().copied().unwrap_or(0.0);
    if pair.is_bounded() && target > pair.cum_hazard(last_knot) {
        return Err(Error::ImmortalTail { target });
    }
    let tol = 1e-10f64.max(8.0 * f64::EPSILON * target);
    let mut lo = 0.0;
    let mut hi = initial_guess(pair, target).max(last_knot.min(1.0));
    let mut f = pair.cum_hazard(hi) - target;
    while f < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::ImmortalTail { target });
        }
        f = pair.cum_hazard(hi) - target;
    }
    let mut t = hi;
    for _ in 0..MAX_ITER {
        if f.abs() <= tol {
            return Ok(t);
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let mut next = t - f / pair.total_hazard(t);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == t || next <= lo || next >= hi {
            break;
        }
        t = next;
        f = pair.cum_hazard(t) - target;
    }
    Ok(t)
}

/// A first bracket end: the smallest single-cause Weibull inverse (each
/// bounds the all-cause root from above), or 1.
fn initial_guess(pair: &CausePair, target: f64) -> f64 {
    let mut guess = f64::INFINITY;
    for (h, lp) in pair.hazards.iter().zip(pair.lps) {
        if let CauseHazard::Weibull(w) = h {
            // Λ_i(t) = exp(α + lp) t^ν
            let t = ((target.ln() - w.intercept - lp) / w.shape).exp();
            if t > 0.0 && t < guess {
                guess = t;
            }
        }
    }
    if guess.is_finite() {
        guess
    } else {
        1.0
    }
}

fn invert_piecewise(pair: &CausePair, target: f64) -> Result<f64> {
    let mut start = 0.0;
    let mut cum = 0.0;
    let knots = pair.breakpoints();
    for end in knots.iter().copied().chain(core::iter::once(f64::INFINITY)) {
        let probe = if end.is_finite() { 0.5 * (start + end) } else { start + 1.0 };
        let rate = pair.total_hazard(probe);
        if rate > 0.0 {
            let t = start + (target - cum) / rate;
            if t <= end {
                return Ok(t.max(start));
            }
            cum += rate * (end - start);
        }
        start = end;
    }
    Err(Error::ImmortalTail { target })
}

/// Event time beyond the truncation time `c`: solves `Λ.(t) = Λ.(c) + E` with
/// `E ~ Exp(1)`. One exponential deviate is consumed.
pub fn draw_event_time<R: Rng + ?Sized>(pair: &CausePair, c: f64, rng: &mut R) -> Result<f64> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidTarget(c));
    }
    let e: f64 = Exp1.sample(rng);
    let t = invert_cum_hazard(pair, pair.cum_hazard(c) + e)?;
    Ok(if t > c { t } else { c.next_up() })
}

/// Event type at time `t` by a Bernoulli draw on the cause-specific hazards.
/// One uniform deviate is consumed.
pub fn draw_event_type<R: Rng + ?Sized>(pair: &CausePair, t: f64, rng: &mut R) -> Result<Cause> {
    let p = pair.cause_probability(t)?;
    let u: f64 = rng.random();
    Ok(if u < p { Cause::Primary } else { Cause::Competing })
}

/// Generating model of one covariate for new enrollees.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateModel {
    /// Binary covariate with a Beta prior on its probability, updated with the
    /// interim data of the same column.
    Bernoulli { prior: Prior },
    Constant(f64),
}

/// Future enrollment: `n_fixed` subjects in `fixed_arm`, and a negative
/// binomial number in the other arm.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrollmentSpec {
    pub fixed_arm: Arm,
    pub n_fixed: u64,
    /// Randomisation probability of the fixed arm.
    pub randomization_prob: f64,
    /// One model per dataset covariate.
    pub covariates: Vec<(String, CovariateModel)>,
}

/// Enrollment resolved against the interim data: one column model per
/// dataset covariate, in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrollmentPlan {
    pub fixed_arm: Arm,
    pub n_fixed: u64,
    pub randomization_prob: f64,
    /// `Some(Beta posterior)` for Bernoulli columns, constant value otherwise.
    pub columns: Vec<ColumnPlan>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnPlan {
    Bernoulli(Prior),
    Constant(f64),
}

impl EnrollmentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.randomization_prob > 0.0 && self.randomization_prob <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "randomisation probability {} outside (0, 1]",
                self.randomization_prob
            )));
        }
        for (name, m) in &self.covariates {
            match m {
                CovariateModel::Bernoulli { prior: p @ Prior::Beta { .. } } => p.validate()?,
                CovariateModel::Bernoulli { .. } => {
                    return Err(Error::InvalidConfig(format!("covariate `{}`: Bernoulli needs a Beta prior", name)))
                }
                CovariateModel::Constant(v) if !v.is_finite() => {
                    return Err(Error::InvalidConfig(format!("covariate `{}`: non-finite constant", name)))
                }
                CovariateModel::Constant(_) => {}
            }
        }
        Ok(())
    }

    /// Matches covariate models to the dataset schema and applies the
    /// conjugate Beta update to Bernoulli columns.
    pub fn resolve(&self, interim: &Dataset) -> Result<EnrollmentPlan> {
        self.validate()?;
        let schema = interim.covariate_names();
        for (name, _) in &self.covariates {
            if !schema.contains(name) {
                return Err(Error::InvalidConfig(format!("enrollment covariate `{}` is not in the dataset", name)));
            }
        }
        let mut columns = Vec::with_capacity(schema.len());
        for (j, name) in schema.iter().enumerate() {
            let mut models = self.covariates.iter().filter(|(n, _)| n == name);
            let model = match (models.next(), models.next()) {
                (Some((_, m)), None) => m,
                (None, _) => {
                    return Err(Error::InvalidConfig(format!("no enrollment model for covariate `{}`", name)))
                }
                _ => return Err(Error::InvalidConfig(format!("covariate `{}` listed twice", name))),
            };
            columns.push(match model {
                CovariateModel::Constant(v) => ColumnPlan::Constant(*v),
                CovariateModel::Bernoulli { prior } => {
                    let mut ones = 0u64;
                    for r in interim.records() {
                        match r.covariates[j] {
                            v if v == 0.0 => {}
                            v if v == 1.0 => ones += 1,
                            v => {
                                return Err(Error::InvalidConfig(format!(
                                    "covariate `{}` is modelled as binary but subject `{}` has {}",
                                    name, r.id, v
                                )))
                            }
                        }
                    }
                    ColumnPlan::Bernoulli(crate::sampler::beta_conjugate_update(
                        *prior,
                        ones,
                        interim.len() as u64,
                    )?)
                }
            });
        }
        Ok(EnrollmentPlan {
            fixed_arm: self.fixed_arm,
            n_fixed: self.n_fixed,
            randomization_prob: self.randomization_prob,
            columns,
        })
    }
}

impl EnrollmentPlan {
    /// One posterior draw of every Bernoulli probability (NaN for constant columns).
    pub fn draw_eta<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| match c {
                ColumnPlan::Bernoulli(Prior::Beta { a, b }) => Beta::new(*a, *b).map_or(f64::NAN, |d| d.sample(rng)),
                _ => f64::NAN,
            })
            .collect()
    }
}

/// New enrollees as `(arm, covariate row)`: first the fixed arm, then the other
/// arm whose size is the number of failures before the `n_fixed`-th success
/// with success probability `randomization_prob`.
pub fn simulate_enrollment<R: Rng + ?Sized>(plan: &EnrollmentPlan, eta: &[f64], rng: &mut R) -> Vec<(Arm, Vec<f64>)> {
    let other = match Geometric::new(plan.randomization_prob) {
        Ok(g) => (0..plan.n_fixed).map(|_| g.sample(rng)).sum(),
        Err(_) => 0,
    };
    let arms = core::iter::repeat_n(plan.fixed_arm, plan.n_fixed as usize)
        .chain(core::iter::repeat_n(plan.fixed_arm.other(), other as usize));
    arms.map(|arm| {
        let row = plan
            .columns
            .iter()
            .zip(eta)
            .map(|(c, &p)| match c {
                ColumnPlan::Constant(v) => *v,
                ColumnPlan::Bernoulli(_) => (rng.random::<f64>() < p) as u8 as f64,
            })
            .collect();
        (arm, row)
    })
    .collect()
}

/// Predicted outcome of one subject still at risk at time `c` (`0` for a new
/// enrollee), with the censoring rule applied. A cumulative hazard that never
/// reaches the drawn level is an error unless a horizon censors the subject.
fn predict_outcome<R: Rng + ?Sized>(
    models: &CauseModelSet,
    record: &SubjectRecord,
    c: f64,
    censoring: &CensoringRule,
    rng: &mut R,
) -> Result<SubjectRecord> {
    let pair = models.pair(record);
    let horizon = match censoring {
        CensoringRule::None => None,
        CensoringRule::Administrative(h) => Some(h.for_subject(record)?),
    };
    let predicted = match draw_event_time(&pair, c, rng) {
        Ok(t) => {
            let cause = draw_event_type(&pair, t, rng)?;
            record.with_outcome(t, Event::Failure(cause))
        }
        Err(Error::ImmortalTail { .. }) if horizon.is_some() => {
            record.with_outcome(f64::INFINITY, Event::Censored)
        }
        Err(e) => return Err(e),
    };
    Ok(match horizon {
        Some(h) => censor_record(&predicted, h),
        None => predicted,
    })
}

/// Completed dataset `d_obs ∪ D̃_cens ∪ D̃_new` for one posterior draw.
///
/// Consumes `rng` in a fixed order: enrollment probabilities, the other-arm
/// count and covariates, then one exponential and one uniform deviate per
/// censored subject, then per new subject. The censoring rule applies to
/// predicted rows only; observed rows are kept verbatim.
pub fn predict_final_dataset<R: Rng + ?Sized>(
    d_obs: &Dataset,
    d_cens: &Dataset,
    models: &CauseModelSet,
    enrollment: Option<&EnrollmentPlan>,
    censoring: &CensoringRule,
    rng: &mut R,
) -> Result<Dataset> {
    let new_rows = match enrollment {
        Some(plan) => {
            let eta = plan.draw_eta(rng);
            simulate_enrollment(plan, &eta, rng)
        }
        None => Vec::new(),
    };
    let mut records = Vec::with_capacity(d_obs.len() + d_cens.len() + new_rows.len());
    records.extend(d_obs.records().iter().cloned());
    for r in d_cens.records() {
        records.push(predict_outcome(models, r, r.time, censoring, rng)?);
    }
    for (k, (arm, row)) in new_rows.into_iter().enumerate() {
        let fresh = SubjectRecord::new(&format!("new{}", k + 1), 0.0, Event::Censored, arm, row);
        records.push(predict_outcome(models, &fresh, 0.0, censoring, rng)?);
    }
    let schema = if d_obs.is_empty() { d_cens } else { d_obs };
    if enrollment.is_some() {
        Dataset::new(schema.covariate_names().to_vec(), schema.time_unit(), records)
    } else {
        // Ids and schema are those of the (valid) interim partitions.
        Ok(Dataset::from_parts(schema, records))
    }
}
