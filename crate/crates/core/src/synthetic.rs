//! Synthetic competing-event trials drawn from known cause-specific hazards.
//!
//! Subjects enter uniformly over `[0, entry_span)` in calendar time. Follow-up
//! ends at the earliest of the event, the follow-up cap and the interim
//! cut-off, so the generated data look like an interim snapshot.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{Arm, Cause, Dataset, Event, SubjectRecord};
use crate::error::{Error, Result};
use crate::hazard::{ArmMode, CauseHazard, CauseModelSet, Design, PiecewiseHazard, StratumModel, WeibullHazard};
use crate::rng::{stream, Domain};
use crate::simulate::{draw_event_time, draw_event_type};

/// Distribution of one baseline covariate.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateGenerator {
    Bernoulli { p: f64 },
    /// Integer uniform on `lo..=hi`.
    UniformInt { lo: i64, hi: i64 },
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    Constant(f64),
}

impl CovariateGenerator {
    fn validate(&self) -> core::result::Result<(), String> {
        let ok = match *self {
            CovariateGenerator::Bernoulli { p } => (0.0..=1.0).contains(&p),
            CovariateGenerator::UniformInt { lo, hi } => lo <= hi,
            CovariateGenerator::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            CovariateGenerator::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
            CovariateGenerator::Constant(v) => v.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid covariate generator {:?}", self))
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CovariateGenerator::Bernoulli { p } => (rng.random::<f64>() < p) as u8 as f64,
            CovariateGenerator::UniformInt { lo, hi } => rng.random_range(lo..=hi) as f64,
            CovariateGenerator::Uniform { lo, hi } => rng.random_range(lo..hi),
            CovariateGenerator::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            CovariateGenerator::Constant(v) => v,
        }
    }
}

/// Baseline hazard of a true cause-specific model, on the natural scale.
#[derive(Debug, Clone, PartialEq)]
pub enum TruthHazard {
    /// `λ(t) = u ν t^(ν-1)`; `u = 0` switches the cause off.
    Weibull { scale: f64, shape: f64 },
    /// Rate `rates[l]` on the `l`-th interval of `knots`.
    Piecewise { knots: Vec<f64>, rates: Vec<f64> },
}

/// True model of one cause; `arm: None` applies it to both arms.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthStratum {
    pub cause: Cause,
    pub arm: Option<Arm>,
    pub covariates: Vec<String>,
    pub coefficients: Vec<f64>,
    pub hazard: TruthHazard,
}

impl TruthStratum {
    fn to_hazard(&self) -> Result<CauseHazard> {
        let log = |v: f64| {
            if v > 0.0 {
                Ok(v.ln())
            } else if v == 0.0 {
                Ok(f64::NEG_INFINITY)
            } else {
                Err(Error::InvalidModel(format!("negative hazard parameter {}", v)))
            }
        };
        match &self.hazard {
            TruthHazard::Weibull { scale, shape } => {
                if !scale.is_finite() {
                    return Err(Error::InvalidModel(format!("Weibull scale {} is not finite", scale)));
                }
                Ok(CauseHazard::Weibull(WeibullHazard::new(
                    log(*scale)?,
                    self.coefficients.clone(),
                    *shape,
                )?))
            }
            TruthHazard::Piecewise { knots, rates } => {
                if let Some(r) = rates.iter().find(|r| !r.is_finite()) {
                    return Err(Error::InvalidModel(format!("rate {} is not finite", r)));
                }
                let levels = rates.iter().map(|&r| log(r)).collect::<Result<Vec<_>>>()?;
                Ok(CauseHazard::Piecewise(PiecewiseHazard::new(
                    knots.clone(),
                    levels,
                    self.coefficients.clone(),
                )?))
            }
        }
    }
}

/// Everything needed to generate one synthetic trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub time_unit: String,
    /// Subjects per arm, indexed by arm code.
    pub arm_sizes: [usize; 2],
    pub covariates: Vec<(String, CovariateGenerator)>,
    pub truth: Vec<TruthStratum>,
    /// Calendar length of the enrollment period; 0 enrolls everyone at once.
    pub entry_span: f64,
    /// Calendar time of the data snapshot.
    pub interim_cutoff: Option<f64>,
    /// Per-subject follow-up cap.
    pub max_follow_up: Option<f64>,
}

impl SyntheticSpec {
    pub fn covariate_names(&self) -> Vec<String> {
        self.covariates.iter().map(|(n, _)| n.clone()).collect()
    }

    /// True models for every (cause, arm).
    pub fn true_models(&self) -> Result<CauseModelSet> {
        let schema = self.covariate_names();
        let mut strata = Vec::new();
        for t in &self.truth {
            if t.covariates.len() != t.coefficients.len() {
                return Err(Error::InvalidModel(format!(
                    "{} covariates but {} coefficients",
                    t.covariates.len(),
                    t.coefficients.len()
                )));
            }
            let design = Design::resolve(&t.covariates, &schema, false)?;
            let hazard = t.to_hazard()?;
            let arms: &[Arm] = match t.arm {
                Some(ref a) => core::slice::from_ref(a),
                None => &Arm::BOTH,
            };
            for &a in arms {
                strata.push(StratumModel::new(t.cause, Some(a), design.clone(), hazard.clone())?);
            }
        }
        CauseModelSet::new(ArmMode::Stratified, strata)
    }

    pub fn validate(&self) -> Result<()> {
        if self.arm_sizes[0] + self.arm_sizes[1] == 0 {
            return Err(Error::InvalidConfig("synthetic trial has no subjects".into()));
        }
        for (i, (name, g)) in self.covariates.iter().enumerate() {
            if self.covariates[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::InvalidConfig(format!("duplicate covariate `{}`", name)));
            }
            g.validate().map_err(Error::InvalidConfig)?;
        }
        if !(self.entry_span.is_finite() && self.entry_span >= 0.0) {
            return Err(Error::InvalidConfig(format!("entry span {} is invalid", self.entry_span)));
        }
        if let Some(c) = self.interim_cutoff {
            if !(c.is_finite() && c >= self.entry_span && c > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "interim cut-off {} must be positive and not precede the end of enrollment",
                    c
                )));
            }
        }
        if let Some(m) = self.max_follow_up {
            if !(m > 0.0) {
                return Err(Error::InvalidConfig(format!("follow-up cap {} must be positive", m)));
            }
        }
        self.true_models().map(|_| ())
    }
}

/// Draws a synthetic trial. Subject ids follow enrollment order.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let models = spec.true_models()?;
    let mut rng = stream(spec.seed, Domain::Synthetic, 0);
    let n = spec.arm_sizes[0] + spec.arm_sizes[1];

    let mut arms: Vec<Arm> = Arm::BOTH
        .iter()
        .flat_map(|&a| core::iter::repeat(a).take(spec.arm_sizes[a.index()]))
        .collect();
    arms.shuffle(&mut rng);
    let mut entries: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * spec.entry_span).collect();
    entries.sort_by(f64::total_cmp);

    let width = n.to_string().len().max(4);
    let mut records = Vec::with_capacity(n);
    for (i, (&arm, &entry)) in arms.iter().zip(&entries).enumerate() {
        let z: Vec<f64> = spec.covariates.iter().map(|(_, g)| g.draw(&mut rng)).collect();
        let id = format!("S{:0width$}", i + 1, width = width);
        let mut record = SubjectRecord::new(&id, 0.0, Event::Censored, arm, z);
        if spec.entry_span > 0.0 {
            record = record.with_origin_offset(entry);
        }
        let limit = match (spec.max_follow_up, spec.interim_cutoff) {
            (Some(m), Some(c)) => m.min(c - entry),
            (Some(m), None) => m,
            (None, Some(c)) => c - entry,
            (None, None) => f64::INFINITY,
        };
        let pair = models.pair(&record);
        let t = match draw_event_time(&pair, 0.0, &mut rng) {
            Ok(t) => t,
            Err(Error::ImmortalTail { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        if t.min(limit) == f64::INFINITY {
            return Err(Error::InvalidModel(format!(
                "subject {} never has an event and is never censored",
                id
            )));
        }
        let (time, event) = if t > limit {
            (limit, Event::Censored)
        } else {
            let cause = draw_event_type(&pair, t, &mut rng)?;
            (t, Event::Failure(cause))
        };
        records.push(record.with_outcome(time, event));
    }
    Dataset::new(spec.covariate_names(), &spec.time_unit, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::aalen_johansen;
    use alloc::vec;

    fn weibull(cause: Cause, scale: f64, shape: f64) -> TruthStratum {
        TruthStratum {
            cause,
            arm: None,
            covariates: vec![],
            coefficients: vec![],
            hazard: TruthHazard::Weibull { scale, shape },
        }
    }

    fn spec(n: usize, s1: f64, n1: f64, s2: f64, n2: f64) -> SyntheticSpec {
        SyntheticSpec {
            seed: 11,
            time_unit: "years".into(),
            arm_sizes: [n / 2, n - n / 2],
            covariates: vec![],
            truth: vec![weibull(Cause::Primary, s1, n1), weibull(Cause::Competing, s2, n2)],
            entry_span: 0.0,
            interim_cutoff: None,
            max_follow_up: None,
        }
    }

    #[test]
    fn zero_hazard_cause_never_occurs() {
        let d = generate_synthetic(&spec(2000, 0.5, 1.0, 0.0, 1.0)).unwrap();
        assert_eq!(d.event_counts().iter().map(|c| c[2]).sum::<usize>(), 0);
        assert_eq!(d.event_counts().iter().map(|c| c[1]).sum::<usize>(), 2000);
    }

    #[test]
    fn same_seed_same_data() {
        let mut s = spec(300, 0.5, 1.2, 0.2, 0.8);
        s.covariates = vec![
            ("w".into(), CovariateGenerator::Bernoulli { p: 0.4 }),
            ("age".into(), CovariateGenerator::UniformInt { lo: 50, hi: 69 }),
        ];
        s.entry_span = 2.0;
        s.interim_cutoff = Some(3.0);
        let a = generate_synthetic(&s).unwrap();
        assert_eq!(a, generate_synthetic(&s).unwrap());
        s.seed += 1;
        assert_ne!(a, generate_synthetic(&s).unwrap());
    }

    #[test]
    fn equal_exponential_hazards_split_evenly() {
        let n = 10_000;
        let d = generate_synthetic(&spec(n, 0.7, 1.0, 0.7, 1.0)).unwrap();
        let ones = d.event_counts().iter().map(|c| c[1]).sum::<usize>() as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((ones / n as f64 - 0.5).abs() < 3.0 * se, "{}", ones);
    }

    #[test]
    fn interim_snapshot_censors_late_entrants() {
        let mut s = spec(500, 0.05, 1.0, 0.02, 1.0);
        s.entry_span = 100.0;
        s.interim_cutoff = Some(100.0);
        s.max_follow_up = Some(60.0);
        let d = generate_synthetic(&s).unwrap();
        for r in d.records() {
            let entry = r.origin_offset.unwrap();
            let limit = (100.0 - entry).min(60.0);
            assert!(r.time <= limit);
            if r.event.is_censored() {
                assert_eq!(r.time, limit);
            }
        }
        assert_eq!(d.arm_counts(), [250, 250]);
    }

    #[test]
    fn covariate_effects_shift_event_rates() {
        let mut s = spec(20_000, 0.0, 1.0, 0.3, 1.0);
        s.covariates = vec![("w".into(), CovariateGenerator::Bernoulli { p: 0.5 })];
        s.truth[0] = TruthStratum {
            cause: Cause::Primary,
            arm: None,
            covariates: vec!["w".into()],
            coefficients: vec![2.0f64.ln()],
            hazard: TruthHazard::Piecewise { knots: vec![1.0], rates: vec![0.3, 0.6] },
        };
        let d = generate_synthetic(&s).unwrap();
        let frac = |w: f64| {
            let rs: Vec<_> = d.records().iter().filter(|r| r.covariates[0] == w).collect();
            rs.iter().filter(|r| r.event == Event::Failure(Cause::Primary)).count() as f64 / rs.len() as f64
        };
        assert!(frac(1.0) > frac(0.0) + 0.1);
    }

    #[test]
    fn aalen_johansen_matches_analytic_cif() {
        let s = spec(50_000, 0.3, 1.2, 0.1, 0.8);
        let d = generate_synthetic(&s).unwrap();
        let est = aalen_johansen(&d, None);
        let models = s.true_models().unwrap();
        let pair = models.pair(&d.records()[0]);
        for t in [0.5, 1.0, 2.0] {
            for cause in [Cause::Primary, Cause::Competing] {
                let f = pair.cif(t, cause).unwrap();
                assert!((est.value_at(cause, t) - f).abs() < 0.01, "t={} cause={:?}", t, cause);
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = spec(10, 0.3, 1.2, 0.1, 0.8);
        s.truth.pop();
        assert!(generate_synthetic(&s).is_err());
        let mut s = spec(10, -0.3, 1.2, 0.1, 0.8);
        assert!(generate_synthetic(&s).is_err());
        s = spec(10, 0.3, 1.2, 0.1, 0.8);
        s.entry_span = 5.0;
        s.interim_cutoff = Some(2.0);
        assert!(generate_synthetic(&s).is_err());
        s = spec(10, 0.0, 1.0, 0.0, 1.0);
        let r = generate_synthetic(&s);
        assert!(matches!(r, Err(Error::InvalidModel(_))), "{:?}", r);
    }
}
