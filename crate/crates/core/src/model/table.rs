//! Prediction table CSV: `lat,lon,week,occurrence,abundance,n_contributing`.
//! Absent predictions leave occurrence and abundance empty.

use std::io::{Read, Write};

use thiserror::Error;

use super::ensemble::{EnsemblePrediction, PredictionRow};
use crate::domain::{GeoPoint, WeekIndex};

pub const PREDICTION_HEADER: [&str; 6] = ["lat", "lon", "week", "occurrence", "abundance", "n_contributing"];

#[derive(Debug, Error)]
pub enum TableError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_predictions<W: Write>(rows: &[PredictionRow], out: W) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PREDICTION_HEADER)?;
    for r in rows {
        w.write_record([
            r.point.lat.to_string(),
            r.point.lon.to_string(),
            r.week.to_string(),
            opt(r.prediction.occurrence),
            opt(r.prediction.abundance),
            r.prediction.n_contributing.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions<R: Read>(input: R) -> Result<Vec<PredictionRow>, TableError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(PREDICTION_HEADER) {
        return Err(TableError::Header {
            expected: PREDICTION_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let err = |message: String| TableError::Row { line, message };
        let real = |i: usize| -> Result<f64, TableError> {
            rec[i].parse::<f64>().map_err(|_| err(format!("bad {} value {:?}", PREDICTION_HEADER[i], &rec[i])))
        };
        let optional = |i: usize| -> Result<Option<f64>, TableError> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                real(i).map(Some)
            }
        };
        let week: i64 = rec[2].parse().map_err(|_| err(format!("bad week {:?}", &rec[2])))?;
        let week = WeekIndex::new(week).map_err(|e| err(e.to_string()))?;
        let n_contributing: usize = rec[5].parse().map_err(|_| err(format!("bad n_contributing {:?}", &rec[5])))?;
        let occurrence = optional(3)?;
        let abundance = optional(4)?;
        if (n_contributing == 0) != occurrence.is_none() || occurrence.is_none() != abundance.is_none() {
            return Err(err("absent prediction must leave occurrence and abundance empty".into()));
        }
        rows.push(PredictionRow {
            point: GeoPoint { lat: real(0)?, lon: real(1)? },
            week,
            prediction: EnsemblePrediction { occurrence, abundance, n_contributing },
        });
    }
    Ok(rows)
}
