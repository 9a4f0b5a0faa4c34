//! JSON reports and CSV tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use ppos_core::model::PosteriorFit;
use ppos_core::ppos::{PposResult, ReplicateRecord, ScenarioOutcome};
use ppos_core::sampler::ParameterDiagnostics;

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateEntry {
    pub index: usize,
    pub seed: u64,
    pub draw: usize,
    pub valid: bool,
    pub success: bool,
    /// Statistic values; `null` when not computed.
    pub statistics: BTreeMap<String, Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub problems: Vec<String>,
}

impl From<&ReplicateRecord> for ReplicateEntry {
    fn from(r: &ReplicateRecord) -> Self {
        ReplicateEntry {
            index: r.index,
            seed: r.seed,
            draw: r.draw,
            valid: r.valid,
            success: r.success,
            statistics: r
                .statistics
                .iter()
                .map(|(k, v)| (k.clone(), v.is_finite().then_some(*v)))
                .collect(),
            problems: r.problems.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticEntry {
    pub stratum: String,
    pub parameter: String,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub q05: Option<f64>,
    pub q50: Option<f64>,
    pub q95: Option<f64>,
    pub ess: Option<f64>,
    pub rhat: Option<f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl DiagnosticEntry {
    fn new(stratum: &str, d: &ParameterDiagnostics) -> Self {
        DiagnosticEntry {
            stratum: stratum.to_string(),
            parameter: d.name.clone(),
            mean: finite(d.mean),
            sd: finite(d.sd),
            q05: finite(d.q05),
            q50: finite(d.q50),
            q95: finite(d.q95),
            ess: finite(d.ess),
            rhat: finite(d.rhat),
        }
    }
}

/// The `report.json` of a PPoS run. Contains nothing that depends on the
/// machine, the worker count or the wall clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub ppos: f64,
    pub mc_se: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "K_effective")]
    pub k_effective: usize,
    pub n_invalid: usize,
    pub seed: u64,
    pub draws_with_replacement: bool,
    /// Statistics the decision rule looks at.
    pub rule_statistics: Vec<String>,
    pub diagnostics: Vec<DiagnosticEntry>,
    pub per_replicate: Vec<ReplicateEntry>,
    pub config_echo: String,
}

impl Report {
    pub fn new(result: &PposResult, seed: u64, rule_statistics: Vec<String>, config_echo: String) -> Self {
        Report {
            ppos: result.ppos,
            mc_se: result.mc_se,
            k: result.k,
            k_effective: result.k_effective,
            n_invalid: result.n_invalid,
            seed,
            draws_with_replacement: result.draws_with_replacement,
            rule_statistics,
            diagnostics: result.diagnostics.iter().map(|(s, d)| DiagnosticEntry::new(s, d)).collect(),
            per_replicate: result.replicates.iter().map(ReplicateEntry::from).collect(),
            config_echo,
        }
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let file = File::open(path).map_err(|e| AppError::io(path, e))?;
        serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| AppError::parse(path, e))
    }

    pub fn save(&self, path: &Path) -> AppResult<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| AppError::parse(path, e))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| AppError::io(path, e))
    }
}

fn csv_writer(path: &Path) -> AppResult<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| AppError::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn finish<W: Write>(path: &Path, mut w: csv::Writer<W>) -> AppResult<()> {
    w.flush().map_err(|e| AppError::io(path, e))
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into())
}

/// One row per replicate: `replicate,seed,draw,valid,success,<statistics...>`.
pub fn write_replicates(path: &Path, result: &PposResult) -> AppResult<()> {
    let names: BTreeSet<&String> = result.replicates.iter().flat_map(|r| r.statistics.keys()).collect();
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| AppError::parse(path, e);
    let mut header: Vec<String> = ["replicate", "seed", "draw", "valid", "success"].map(String::from).to_vec();
    header.extend(names.iter().map(|n| n.to_string()));
    w.write_record(&header).map_err(err)?;
    for r in &result.replicates {
        let mut row = vec![
            r.index.to_string(),
            r.seed.to_string(),
            r.draw.to_string(),
            (r.valid as u8).to_string(),
            (r.success as u8).to_string(),
        ];
        row.extend(names.iter().map(|n| fmt(r.statistics.get(*n).copied().and_then(finite))));
        w.write_record(&row).map_err(err)?;
    }
    finish(path, w)
}

/// Long format `replicate,arm,time,cif` of the primary-cause incidence curves.
pub fn write_curves(path: &Path, result: &PposResult, grid: &[f64]) -> AppResult<()> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| AppError::parse(path, e);
    w.write_record(["replicate", "arm", "time", "cif"]).map_err(err)?;
    for r in &result.replicates {
        if let Some(curves) = &r.curves {
            for (arm, curve) in curves.iter().enumerate() {
                for (t, f) in grid.iter().zip(curve) {
                    w.write_record([r.index.to_string(), arm.to_string(), t.to_string(), f.to_string()])
                        .map_err(err)?;
                }
            }
        }
    }
    finish(path, w)
}

/// Posterior summaries with ESS and R-hat, one row per parameter.
pub fn write_fit_summary(path: &Path, fit: &PosteriorFit) -> AppResult<()> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| AppError::parse(path, e);
    w.write_record(["stratum", "parameter", "mean", "sd", "q05", "q50", "q95", "ess", "rhat"])
        .map_err(err)?;
    for s in &fit.strata {
        for d in &s.diagnostics {
            let e = DiagnosticEntry::new(&s.spec.label(), d);
            w.write_record([
                e.stratum,
                e.parameter,
                fmt(e.mean),
                fmt(e.sd),
                fmt(e.q05),
                fmt(e.q50),
                fmt(e.q95),
                fmt(e.ess),
                fmt(e.rhat),
            ])
            .map_err(err)?;
        }
    }
    finish(path, w)
}

/// Every posterior draw of one stratum: `chain,draw,<parameters...>`.
pub fn write_draws(path: &Path, fit: &PosteriorFit, stratum: usize) -> AppResult<()> {
    let draws = &fit.strata[stratum].draws;
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| AppError::parse(path, e);
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(draws.names.iter().cloned());
    w.write_record(&header).map_err(err)?;
    for k in 0..draws.len() {
        let mut row = vec![(k / draws.n_draws).to_string(), (k % draws.n_draws).to_string()];
        row.extend(draws.row(k).iter().map(f64::to_string));
        w.write_record(&row).map_err(err)?;
    }
    finish(path, w)
}

/// `scenario,<axes...>,ppos,mc_se,K,K_effective,status,message`.
pub fn write_scenario_table(path: &Path, outcomes: &[ScenarioOutcome]) -> AppResult<()> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| AppError::parse(path, e);
    let axes: Vec<&str> = outcomes
        .first()
        .map(|o| o.scenario.axes.iter().map(|(n, _)| n.as_str()).collect())
        .unwrap_or_default();
    let mut header = vec!["scenario"];
    header.extend(&axes);
    header.extend(["ppos", "mc_se", "K", "K_effective", "status", "message"]);
    w.write_record(&header).map_err(err)?;
    for o in outcomes {
        let mut row = vec![o.scenario.index.to_string()];
        row.extend(o.scenario.axes.iter().map(|(_, v)| v.to_string()));
        match &o.result {
            Ok(r) => row.extend([
                r.ppos.to_string(),
                r.mc_se.to_string(),
                r.k.to_string(),
                r.k_effective.to_string(),
                "ok".into(),
                String::new(),
            ]),
            Err(e) => row.extend(["NA", "NA", "NA", "NA", "failed"].map(String::from).into_iter().chain([e.to_string()])),
        }
        w.write_record(&row).map_err(err)?;
    }
    finish(path, w)
}
