//! Right-censored competing-event trial data.
//!
//! A [`Dataset`] is an immutable list of [`SubjectRecord`]s sharing one
//! covariate schema. Records hold their id and covariates behind `Arc` so
//! that predicted datasets can reuse interim rows without copying.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Randomisation arm, coded 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arm {
    /// Arm 0: control / referent group.
    Control,
    /// Arm 1: investigational / exposed group.
    Treatment,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Treatment];

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            0 => Some(Arm::Control),
            1 => Some(Arm::Treatment),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Treatment => 1,
        }
    }

    pub fn index(self) -> usize {
        self.code() as usize
    }

    pub fn other(self) -> Self {
        match self {
            Arm::Control => Arm::Treatment,
            Arm::Treatment => Arm::Control,
        }
    }
}

/// Event type: 1 is the event of interest, 2 the competing event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cause {
    Primary,
    Competing,
}

impl Cause {
    pub const BOTH: [Cause; 2] = [Cause::Primary, Cause::Competing];

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(Cause::Primary),
            2 => Some(Cause::Competing),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Cause::Primary => 1,
            Cause::Competing => 2,
        }
    }

    pub fn index(self) -> usize {
        self.code() as usize - 1
    }
}

/// Observed event indicator: 0 censored, 1 or 2 the observed cause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Event {
    Censored,
    Failure(Cause),
}

impl Event {
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            0 => Some(Event::Censored),
            c => Cause::from_code(c).map(Event::Failure),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Event::Censored => 0,
            Event::Failure(c) => c.code(),
        }
    }

    pub fn is_censored(self) -> bool {
        self == Event::Censored
    }

    pub fn cause(self) -> Option<Cause> {
        match self {
            Event::Censored => None,
            Event::Failure(c) => Some(c),
        }
    }
}

/// One subject: follow-up time, event indicator, arm and baseline covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: Arc<str>,
    pub time: f64,
    pub event: Event,
    pub arm: Arm,
    /// Values in the order of the dataset's covariate schema.
    pub covariates: Arc<[f64]>,
    /// Calendar offset of this subject's time 0, used by calendar censoring.
    pub origin_offset: Option<f64>,
}

impl SubjectRecord {
    pub fn new(id: &str, time: f64, event: Event, arm: Arm, covariates: Vec<f64>) -> Self {
        SubjectRecord {
            id: Arc::from(id),
            time,
            event,
            arm,
            covariates: Arc::from(covariates),
            origin_offset: None,
        }
    }

    pub fn with_origin_offset(mut self, offset: f64) -> Self {
        self.origin_offset = Some(offset);
        self
    }

    /// Same subject with a new outcome.
    pub fn with_outcome(&self, time: f64, event: Event) -> Self {
        SubjectRecord {
            time,
            event,
            ..self.clone()
        }
    }

    fn check(&self, n_covariates: usize) -> core::result::Result<(), String> {
        if !(self.time.is_finite() && self.time >= 0.0) {
            return Err(format!("time must be finite and nonnegative, got {}", self.time));
        }
        if self.covariates.len() != n_covariates {
            return Err(format!(
                "expected {} covariate values, got {}",
                n_covariates,
                self.covariates.len()
            ));
        }
        if let Some(v) = self.covariates.iter().find(|v| !v.is_finite()) {
            return Err(format!("covariate value {} is not finite", v));
        }
        if let Some(o) = self.origin_offset {
            if !(o.is_finite() && o >= 0.0) {
                return Err(format!("origin offset must be finite and nonnegative, got {}", o));
            }
        }
        Ok(())
    }
}

/// A validated collection of subjects sharing one covariate schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariates: Arc<[String]>,
    time_unit: String,
    records: Vec<SubjectRecord>,
}

impl Dataset {
    /// Validates every record; errors carry the 1-based record position.
    pub fn new(covariates: Vec<String>, time_unit: &str, records: Vec<SubjectRecord>) -> Result<Self> {
        let names: BTreeSet<&str> = covariates.iter().map(String::as_str).collect();
        if names.len() != covariates.len() {
            return Err(Error::InvalidDataset("duplicate covariate name".into()));
        }
        let mut seen = BTreeSet::new();
        for (i, r) in records.iter().enumerate() {
            r.check(covariates.len())
                .map_err(|message| Error::InvalidRecord { row: i + 1, message })?;
            if !seen.insert(r.id.clone()) {
                return Err(Error::DuplicateSubject(r.id.to_string()));
            }
        }
        Ok(Dataset {
            covariates: Arc::from(covariates),
            time_unit: time_unit.into(),
            records,
        })
    }

    /// Builds a dataset from records already known to be valid for `template`'s schema.
    pub(crate) fn from_parts(template: &Dataset, records: Vec<SubjectRecord>) -> Self {
        Dataset {
            covariates: template.covariates.clone(),
            time_unit: template.time_unit.clone(),
            records,
        }
    }

    pub fn records(&self) -> &[SubjectRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariates
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariates.iter().position(|c| c == name)
    }

    pub fn time_unit(&self) -> &str {
        &self.time_unit
    }

    /// `true` when every record carries an origin offset.
    pub fn has_origin_offsets(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.origin_offset.is_some())
    }

    /// Subjects per arm, indexed by [`Arm::index`].
    pub fn arm_counts(&self) -> [usize; 2] {
        let mut n = [0; 2];
        for r in &self.records {
            n[r.arm.index()] += 1;
        }
        n
    }

    /// Events per arm: `[arm][0 censored, 1 cause 1, 2 cause 2]`.
    pub fn event_counts(&self) -> [[usize; 3]; 2] {
        let mut n = [[0; 3]; 2];
        for r in &self.records {
            n[r.arm.index()][r.event.code() as usize] += 1;
        }
        n
    }

    pub fn filter_arm(&self, arm: Arm) -> Dataset {
        let records = self.records.iter().filter(|r| r.arm == arm).cloned().collect();
        Dataset::from_parts(self, records)
    }

    /// Concatenates datasets with identical schemas; subject ids must stay unique.
    pub fn stack(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidDataset("nothing to stack".into()))?;
        if parts.iter().any(|p| p.covariates != first.covariates) {
            return Err(Error::InvalidDataset("covariate schemas differ".into()));
        }
        let records = parts.iter().flat_map(|p| p.records.iter().cloned()).collect();
        Dataset::new(first.covariates.to_vec(), &first.time_unit, records)
    }

    /// Rejects empty datasets, for operations that fit models.
    pub fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::InvalidDataset("dataset is empty".into()))
        } else {
            Ok(())
        }
    }
}

/// Splits interim data into fully observed records and records still at risk.
///
/// The result is a partition: censored records (event 0) go to the second
/// dataset, all others to the first, each in input order.
pub fn partition_interim(dataset: &Dataset) -> (Dataset, Dataset) {
    let (censored, observed): (Vec<_>, Vec<_>) = dataset
        .records
        .iter()
        .cloned()
        .partition(|r| r.event.is_censored());
    (
        Dataset::from_parts(dataset, observed),
        Dataset::from_parts(dataset, censored),
    )
}

/// End of follow-up imposed by the design.
#[derive(Debug, Clone, PartialEq)]
pub enum Horizon {
    /// Same horizon for every subject, in study time.
    Scalar(f64),
    /// Study-time horizon per subject id.
    PerSubject(BTreeMap<String, f64>),
    /// Calendar cut-off; the horizon of a subject is `cutoff - origin_offset`.
    Calendar(f64),
}

impl Horizon {
    pub fn validate(&self) -> Result<()> {
        let bad = |v: f64| !(v.is_finite() && v > 0.0);
        match self {
            Horizon::Scalar(h) | Horizon::Calendar(h) if bad(*h) => {
                Err(Error::InvalidHorizon(format!("{} is not a positive time", h)))
            }
            Horizon::PerSubject(map) => match map.iter().find(|(_, h)| bad(**h)) {
                Some((id, h)) => Err(Error::InvalidHorizon(format!("{} for subject `{}`", h, id))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Study-time horizon of one subject.
    pub fn for_subject(&self, record: &SubjectRecord) -> Result<f64> {
        match self {
            Horizon::Scalar(h) => Ok(*h),
            Horizon::PerSubject(map) => map
                .get(&*record.id)
                .copied()
                .ok_or_else(|| Error::MissingHorizon(record.id.to_string())),
            Horizon::Calendar(cutoff) => {
                let offset = record
                    .origin_offset
                    .ok_or_else(|| Error::MissingHorizon(record.id.to_string()))?;
                let h = cutoff - offset;
                if h > 0.0 {
                    Ok(h)
                } else {
                    Err(Error::InvalidHorizon(format!(
                        "calendar cut-off {} precedes the origin of subject `{}`",
                        cutoff, record.id
                    )))
                }
            }
        }
    }

    /// The largest study-time horizon over `records`.
    pub fn max_over(&self, records: &[SubjectRecord]) -> Result<f64> {
        let mut max = f64::NEG_INFINITY;
        for r in records {
            max = max.max(self.for_subject(r)?);
        }
        Ok(max)
    }
}

/// How predicted follow-up ends.
#[derive(Debug, Clone, PartialEq)]
pub enum CensoringRule {
    None,
    Administrative(Horizon),
}

impl CensoringRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            CensoringRule::None => Ok(()),
            CensoringRule::Administrative(h) => h.validate(),
        }
    }
}

/// Censors one record at `horizon`: a time strictly beyond the horizon becomes
/// `(horizon, censored)`; a time equal to it keeps its event.
pub fn censor_record(record: &SubjectRecord, horizon: f64) -> SubjectRecord {
    if record.time > horizon {
        record.with_outcome(horizon, Event::Censored)
    } else {
        record.clone()
    }
}

/// Applies administrative censoring to every record.
pub fn administrative_censor(dataset: &Dataset, horizon: &Horizon) -> Result<Dataset> {
    horizon.validate()?;
    let records = dataset
        .records
        .iter()
        .map(|r| Ok(censor_record(r, horizon.for_subject(r)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::from_parts(dataset, records))
}
