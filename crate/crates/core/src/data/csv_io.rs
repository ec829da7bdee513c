//! CSV ingestion and export for trajectory datasets.
//!
//! The base schema is a fixed nine-column header; the annotated variant
//! appends four prediction columns (empty field = no prediction).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{DataError, Dataset, DatasetSource, TrajectoryRecord};

pub const TRAJECTORY_CSV_HEADER: [&str; 9] = [
    "vehicle_id",
    "timestamp",
    "speed_kmh",
    "distance_m",
    "stay_duration_s",
    "lat",
    "lon",
    "next_lat",
    "next_lon",
];

pub const ANNOTATED_CSV_HEADER: [&str; 13] = [
    "vehicle_id",
    "timestamp",
    "speed_kmh",
    "distance_m",
    "stay_duration_s",
    "lat",
    "lon",
    "next_lat",
    "next_lon",
    "pred_svr_lat",
    "pred_svr_lon",
    "pred_dnn_lat",
    "pred_dnn_lon",
];

/// Trajectory record plus optional model predictions of the next location,
/// in degrees. This is the row shape consumed by stream replay.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedRecord {
    pub record: TrajectoryRecord,
    pub pred_svr: Option<(f64, f64)>,
    pub pred_dnn: Option<(f64, f64)>,
}

/// Parses the nine-column trajectory CSV, validating every row and
/// per-vehicle timestamp ordering.
pub fn parse_trajectory_csv(path: &Path) -> Result<Dataset, DataError> {
    let mut reader = open_with_header(path, &TRAJECTORY_CSV_HEADER)?;
    let mut records = Vec::new();
    let mut last_ts: HashMap<String, f64> = HashMap::new();

    for (row_idx, row) in reader.records().enumerate() {
        let line = row_idx as u64 + 2; // header is line 1
        let row = row.map_err(|e| DataError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if row.len() != TRAJECTORY_CSV_HEADER.len() {
            return Err(DataError::MalformedRow {
                line,
                reason: format!(
                    "expected {} fields, got {}",
                    TRAJECTORY_CSV_HEADER.len(),
                    row.len()
                ),
            });
        }
        let record = TrajectoryRecord {
            vehicle_id: row[0].to_string(),
            timestamp: parse_field(&row[1], "timestamp", line)?,
            speed_kmh: parse_field(&row[2], "speed_kmh", line)?,
            distance_m: parse_field(&row[3], "distance_m", line)?,
            stay_duration_s: parse_field(&row[4], "stay_duration_s", line)?,
            lat: parse_field(&row[5], "lat", line)?,
            lon: parse_field(&row[6], "lon", line)?,
            next_lat: parse_field(&row[7], "next_lat", line)?,
            next_lon: parse_field(&row[8], "next_lon", line)?,
        };
        if record.vehicle_id.is_empty() {
            return Err(DataError::MalformedRow {
                line,
                reason: "empty vehicle_id".into(),
            });
        }
        record
            .validate()
            .map_err(|field| DataError::OutOfRange { line, field })?;
        if let Some(&prev) = last_ts.get(&record.vehicle_id) {
            if record.timestamp <= prev {
                return Err(DataError::NonMonotonicTimestamp {
                    vehicle_id: record.vehicle_id,
                    line,
                });
            }
        }
        last_ts.insert(record.vehicle_id.clone(), record.timestamp);
        records.push(record);
    }

    Ok(Dataset {
        records,
        source: DatasetSource::File,
    })
}

/// Parses the thirteen-column annotated CSV. Prediction fields may be empty,
/// but lat/lon of one model must be empty or present together.
pub fn parse_annotated_csv(path: &Path) -> Result<Vec<AnnotatedRecord>, DataError> {
    let mut reader = open_with_header(path, &ANNOTATED_CSV_HEADER)?;
    let mut out = Vec::new();
    let mut last_ts: HashMap<String, f64> = HashMap::new();

    for (row_idx, row) in reader.records().enumerate() {
        let line = row_idx as u64 + 2;
        let row = row.map_err(|e| DataError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if row.len() != ANNOTATED_CSV_HEADER.len() {
            return Err(DataError::MalformedRow {
                line,
                reason: format!(
                    "expected {} fields, got {}",
                    ANNOTATED_CSV_HEADER.len(),
                    row.len()
                ),
            });
        }
        let record = TrajectoryRecord {
            vehicle_id: row[0].to_string(),
            timestamp: parse_field(&row[1], "timestamp", line)?,
            speed_kmh: parse_field(&row[2], "speed_kmh", line)?,
            distance_m: parse_field(&row[3], "distance_m", line)?,
            stay_duration_s: parse_field(&row[4], "stay_duration_s", line)?,
            lat: parse_field(&row[5], "lat", line)?,
            lon: parse_field(&row[6], "lon", line)?,
            next_lat: parse_field(&row[7], "next_lat", line)?,
            next_lon: parse_field(&row[8], "next_lon", line)?,
        };
        record
            .validate()
            .map_err(|field| DataError::OutOfRange { line, field })?;
        if let Some(&prev) = last_ts.get(&record.vehicle_id) {
            if record.timestamp <= prev {
                return Err(DataError::NonMonotonicTimestamp {
                    vehicle_id: record.vehicle_id,
                    line,
                });
            }
        }
        last_ts.insert(record.vehicle_id.clone(), record.timestamp);

        let pred_svr = parse_pred_pair(&row[9], &row[10], "pred_svr", line)?;
        let pred_dnn = parse_pred_pair(&row[11], &row[12], "pred_dnn", line)?;
        out.push(AnnotatedRecord {
            record,
            pred_svr,
            pred_dnn,
        });
    }
    Ok(out)
}

pub fn write_trajectory_csv(data: &Dataset, path: &Path) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", TRAJECTORY_CSV_HEADER.join(","))?;
    for r in &data.records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.vehicle_id,
            r.timestamp,
            r.speed_kmh,
            r.distance_m,
            r.stay_duration_s,
            r.lat,
            r.lon,
            r.next_lat,
            r.next_lon
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_annotated_csv(rows: &[AnnotatedRecord], path: &Path) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", ANNOTATED_CSV_HEADER.join(","))?;
    for a in rows {
        let r = &a.record;
        let pred = |p: Option<(f64, f64)>| match p {
            Some((lat, lon)) => format!("{lat},{lon}"),
            None => ",".to_string(),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.vehicle_id,
            r.timestamp,
            r.speed_kmh,
            r.distance_m,
            r.stay_duration_s,
            r.lat,
            r.lon,
            r.next_lat,
            r.next_lon,
            pred(a.pred_svr),
            pred(a.pred_dnn)
        )?;
    }
    w.flush()?;
    Ok(())
}

fn open_with_header(path: &Path, expected: &[&str]) -> Result<csv::Reader<File>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => DataError::Io(io),
            other => DataError::MalformedRow {
                line: 1,
                reason: format!("{other:?}"),
            },
        })?;
    let header = reader.headers().map_err(|e| DataError::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        // Prefer the precise "missing column" diagnosis when one applies.
        for name in expected {
            if !got.contains(name) {
                return Err(DataError::MissingColumn((*name).to_string()));
            }
        }
        return Err(DataError::MalformedRow {
            line: 1,
            reason: format!("header mismatch: expected {expected:?}, got {got:?}"),
        });
    }
    Ok(reader)
}

fn parse_field(raw: &str, field: &'static str, line: u64) -> Result<f64, DataError> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| DataError::MalformedRow {
            line,
            reason: format!("field '{field}' is not a number: '{raw}'"),
        })
}

fn parse_pred_pair(
    lat_raw: &str,
    lon_raw: &str,
    which: &str,
    line: u64,
) -> Result<Option<(f64, f64)>, DataError> {
    match (lat_raw.trim().is_empty(), lon_raw.trim().is_empty()) {
        (true, true) => Ok(None),
        (false, false) => {
            let lat = lat_raw
                .trim()
                .parse::<f64>()
                .map_err(|_| DataError::MalformedRow {
                    line,
                    reason: format!("field '{which}_lat' is not a number: '{lat_raw}'"),
                })?;
            let lon = lon_raw
                .trim()
                .parse::<f64>()
                .map_err(|_| DataError::MalformedRow {
                    line,
                    reason: format!("field '{which}_lon' is not a number: '{lon_raw}'"),
                })?;
            Ok(Some((lat, lon)))
        }
        _ => Err(DataError::MalformedRow {
            line,
            reason: format!("{which} lat/lon must both be present or both empty"),
        }),
    }
}
