//! Plot-ready data: statistic histograms and samples of replicate curves.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::Path;

use ppos_core::rng::{choose_indices, stream, Domain};

use crate::error::{AppError, AppResult};
use crate::report::Report;

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Replicates in the bin that met the decision rule.
    pub successes: usize,
}

/// Histogram of `statistic` over the valid replicates of `report`, with
/// `bins` equal-width bins over `range` (the data range when `None`, or
/// `[0, 1]` when every value lies there).
pub fn histogram(report: &Report, statistic: &str, bins: usize, range: Option<(f64, f64)>) -> AppResult<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(AppError::Config("need at least one bin".into()));
    }
    let values: Vec<(f64, bool)> = report
        .per_replicate
        .iter()
        .filter(|r| r.valid)
        .filter_map(|r| r.statistics.get(statistic).copied().flatten().map(|v| (v, r.success)))
        .collect();
    if values.is_empty() {
        return Err(AppError::Config(format!("report has no values of `{}`", statistic)));
    }
    let (lo, hi) = range.unwrap_or_else(|| {
        let min = values.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
        let max = values.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
        if min >= 0.0 && max <= 1.0 {
            (0.0, 1.0)
        } else if min == max {
            (min - 0.5, max + 0.5)
        } else {
            (min, max)
        }
    });
    if !(lo < hi) {
        return Err(AppError::Config(format!("empty histogram range [{}, {}]", lo, hi)));
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lower: lo + b as f64 * width,
            upper: if b + 1 == bins { hi } else { lo + (b + 1) as f64 * width },
            count: 0,
            successes: 0,
        })
        .collect();
    for (v, success) in values {
        let b = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        out[b].count += 1;
        out[b].successes += success as usize;
    }
    Ok(out)
}

pub fn write_histogram(path: &Path, bins: &[HistogramBin]) -> AppResult<()> {
    let file = File::create(path).map_err(|e| AppError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let err = |e: csv::Error| AppError::parse(path, e);
    w.write_record(["bin_lower", "bin_upper", "count", "successes"]).map_err(err)?;
    for b in bins {
        w.write_record([b.lower.to_string(), b.upper.to_string(), b.count.to_string(), b.successes.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// Copies the rows of `size` randomly chosen replicates (all when fewer)
/// from a `replicate,arm,time,cif` file. Returns the chosen replicate ids.
pub fn sample_curves(curves: &Path, out: &Path, size: usize, seed: u64) -> AppResult<Vec<usize>> {
    let file = File::open(curves).map_err(|e| AppError::io(curves, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(|e| AppError::parse(curves, e))?.clone();
    let rows: Vec<csv::StringRecord> = reader
        .records()
        .collect::<Result<_, _>>()
        .map_err(|e| AppError::parse(curves, e))?;
    let ids: Vec<usize> = rows
        .iter()
        .map(|r| r.get(0).unwrap_or("").parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| AppError::parse(curves, format!("bad replicate id: {}", e)))?;
    let distinct: Vec<usize> = ids.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if distinct.is_empty() {
        return Err(AppError::parse(curves, "no curves"));
    }
    let mut rng = stream(seed, Domain::DrawSelection, 1);
    let chosen: BTreeSet<usize> = choose_indices(&mut rng, distinct.len(), size)
        .into_iter()
        .map(|i| distinct[i])
        .collect();
    let file = File::create(out).map_err(|e| AppError::io(out, e))?;
    let mut w = csv::Writer::from_writer(file);
    let err = |e: csv::Error| AppError::parse(out, e);
    w.write_record(&header).map_err(err)?;
    for (row, id) in rows.iter().zip(&ids) {
        if chosen.contains(id) {
            w.write_record(row).map_err(err)?;
        }
    }
    w.flush().map_err(|e| AppError::io(out, e))?;
    Ok(chosen.into_iter().collect())
}
