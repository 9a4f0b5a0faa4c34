//! Dataset CSV format: `subject_id,time,event,arm,<covariate...>[,origin_offset]`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ppos_core::dataset::{Arm, Dataset, Event, SubjectRecord};
use ppos_core::Error;

use crate::error::{AppError, AppResult};

const ID: &str = "subject_id";
const TIME: &str = "time";
const EVENT: &str = "event";
const ARM: &str = "arm";
const OFFSET: &str = "origin_offset";

fn row_error(row: usize, message: String) -> Error {
    Error::InvalidRecord { row, message }
}

fn parse_f64(row: usize, column: &str, cell: &str) -> Result<f64, Error> {
    cell.trim()
        .parse::<f64>()
        .map_err(|_| row_error(row, format!("column `{}`: cannot parse `{}` as a number", column, cell)))
}

fn parse_code(row: usize, column: &str, cell: &str) -> Result<i64, Error> {
    cell.trim()
        .parse::<i64>()
        .map_err(|_| row_error(row, format!("column `{}`: cannot parse `{}` as an integer", column, cell)))
}

/// Reads a dataset. Rows are numbered from 1 (the first line after the
/// header). With `schema`, the covariate columns must be exactly those names;
/// the dataset then follows the schema order.
pub fn read_dataset<R: Read>(reader: R, schema: Option<&[String]>, time_unit: &str) -> Result<Dataset, Error> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = csv
        .headers()
        .map_err(|e| Error::InvalidDataset(format!("unreadable header: {}", e)))?
        .iter()
        .map(str::to_string)
        .collect();
    let position = |name: &str| header.iter().position(|h| h == name);
    let mut fixed = [0usize; 4];
    for (slot, name) in fixed.iter_mut().zip([ID, TIME, EVENT, ARM]) {
        *slot = position(name).ok_or_else(|| Error::InvalidDataset(format!("missing column `{}`", name)))?;
    }
    let offset = position(OFFSET);
    let file_covariates: Vec<(String, usize)> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| ![ID, TIME, EVENT, ARM, OFFSET].contains(&h.as_str()))
        .map(|(i, h)| (h.clone(), i))
        .collect();
    let covariates: Vec<(String, usize)> = match schema {
        None => file_covariates,
        Some(names) => {
            let by_name: BTreeMap<&str, usize> = file_covariates.iter().map(|(n, i)| (n.as_str(), *i)).collect();
            let mut out = Vec::with_capacity(names.len());
            for n in names {
                let i = by_name
                    .get(n.as_str())
                    .ok_or_else(|| Error::InvalidDataset(format!("missing column `{}`", n)))?;
                out.push((n.clone(), *i));
            }
            if let Some((extra, _)) = file_covariates.iter().find(|(n, _)| !names.contains(n)) {
                return Err(Error::InvalidDataset(format!("unexpected column `{}`", extra)));
            }
            out
        }
    };

    let mut records = Vec::new();
    for (i, row) in csv.records().enumerate() {
        let n = i + 1;
        let row = row.map_err(|e| row_error(n, e.to_string()))?;
        let cell = |j: usize| row.get(j).unwrap_or("");
        let id = cell(fixed[0]);
        if id.is_empty() {
            return Err(row_error(n, "empty subject_id".into()));
        }
        let time = parse_f64(n, TIME, cell(fixed[1]))?;
        if !(time >= 0.0) {
            return Err(row_error(n, format!("negative time {}", time)));
        }
        let event = Event::from_code(parse_code(n, EVENT, cell(fixed[2]))?)
            .ok_or_else(|| row_error(n, format!("event `{}` outside {{0,1,2}}", cell(fixed[2]))))?;
        let arm = Arm::from_code(parse_code(n, ARM, cell(fixed[3]))?)
            .ok_or_else(|| row_error(n, format!("arm `{}` outside {{0,1}}", cell(fixed[3]))))?;
        let z = covariates
            .iter()
            .map(|(name, j)| {
                let c = cell(*j);
                if c.is_empty() {
                    Err(row_error(n, format!("missing value for covariate `{}`", name)))
                } else {
                    parse_f64(n, name, c)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut record = SubjectRecord::new(id, time, event, arm, z);
        if let Some(j) = offset {
            let c = cell(j);
            if !c.is_empty() {
                record = record.with_origin_offset(parse_f64(n, OFFSET, c)?);
            }
        }
        records.push(record);
    }
    Dataset::new(covariates.into_iter().map(|(n, _)| n).collect(), time_unit, records)
}

pub fn load_dataset(path: &Path, schema: Option<&[String]>, time_unit: &str) -> AppResult<Dataset> {
    let file = File::open(path).map_err(|e| AppError::io(path, e))?;
    read_dataset(file, schema, time_unit).map_err(|e| match e {
        e @ (Error::InvalidRecord { .. } | Error::InvalidDataset(_) | Error::DuplicateSubject(_)) => {
            AppError::parse(path, e)
        }
        e => AppError::Engine(e),
    })
}

/// Writes `data` in the format [`read_dataset`] accepts. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> csv::Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let with_offset = data.records().iter().any(|r| r.origin_offset.is_some());
    let mut header: Vec<&str> = vec![ID, TIME, EVENT, ARM];
    header.extend(data.covariate_names().iter().map(String::as_str));
    if with_offset {
        header.push(OFFSET);
    }
    csv.write_record(&header)?;
    for r in data.records() {
        let mut row = vec![
            r.id.to_string(),
            r.time.to_string(),
            r.event.code().to_string(),
            r.arm.code().to_string(),
        ];
        row.extend(r.covariates.iter().map(f64::to_string));
        if with_offset {
            row.push(r.origin_offset.map(|o| o.to_string()).unwrap_or_default());
        }
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn save_dataset(path: &Path, data: &Dataset) -> AppResult<()> {
    let file = File::create(path).map_err(|e| AppError::io(path, e))?;
    write_dataset(file, data).map_err(|e| AppError::parse(path, e))
}

/// Per-subject horizons from a `subject_id,horizon` CSV.
pub fn load_horizons(path: &Path) -> AppResult<BTreeMap<String, f64>> {
    let file = File::open(path).map_err(|e| AppError::io(path, e))?;
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = csv.headers().map_err(|e| AppError::parse(path, e))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AppError::parse(path, format!("missing column `{}`", name)))
    };
    let (id, h) = (col(ID)?, col("horizon")?);
    let mut out = BTreeMap::new();
    for (i, row) in csv.records().enumerate() {
        let row = row.map_err(|e| AppError::parse(path, format!("row {}: {}", i + 1, e)))?;
        let value = parse_f64(i + 1, "horizon", row.get(h).unwrap_or("")).map_err(|e| AppError::parse(path, e))?;
        out.insert(row.get(id).unwrap_or("").to_string(), value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_format() {
        let text = "subject_id,time,event,arm,w\na,1.5,1,0,1\nb,2,2,1,0\nc,3,0,1,1\nd,0.5,1,0,0\n";
        let d = read_dataset(text.as_bytes(), None, "days").unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.records().iter().filter(|r| r.event.is_censored()).count(), 1);
        assert_eq!(d.covariate_names(), ["w".to_string()]);
    }

    #[test]
    fn row_errors_name_the_row() {
        let text = "subject_id,time,event,arm\na,1,1,0\nb,2,1,1\nc,-1,1,0\n";
        let e = read_dataset(text.as_bytes(), None, "days").unwrap_err();
        assert!(matches!(e, Error::InvalidRecord { row: 3, .. }), "{:?}", e);
        let text = "subject_id,time,event,arm\na,1,3,0\n";
        assert!(matches!(read_dataset(text.as_bytes(), None, "d"), Err(Error::InvalidRecord { row: 1, .. })));
        let text = "subject_id,time,event,arm\na,x,1,0\n";
        assert!(matches!(read_dataset(text.as_bytes(), None, "d"), Err(Error::InvalidRecord { row: 1, .. })));
        let text = "subject_id,time,arm\na,1,0\n";
        assert!(matches!(read_dataset(text.as_bytes(), None, "d"), Err(Error::InvalidDataset(_))));
        let text = "subject_id,time,event,arm,w\na,1,1,0,\n";
        assert!(matches!(read_dataset(text.as_bytes(), None, "d"), Err(Error::InvalidRecord { row: 1, .. })));
    }

    #[test]
    fn schema_selects_and_orders_columns() {
        let text = "subject_id,time,event,arm,b,a\ns,1,1,0,2,3\n";
        let schema = vec!["a".to_string(), "b".to_string()];
        let d = read_dataset(text.as_bytes(), Some(&schema), "d").unwrap();
        assert_eq!(&d.records()[0].covariates[..], &[3.0, 2.0]);
        let short = vec!["a".to_string()];
        assert!(read_dataset(text.as_bytes(), Some(&short), "d").is_err());
        let long = vec!["a".to_string(), "c".to_string()];
        assert!(read_dataset(text.as_bytes(), Some(&long), "d").is_err());
    }
}
