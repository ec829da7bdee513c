//! Turns a collected message run into plot-ready track tables.
//!
//! The actual track has one row per message; prediction tracks only cover
//! the messages that carried that model's prediction, so they may be
//! shorter. The geomap table keeps everything merged row-per-message with
//! blanks for absent predictions.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{StreamError, StreamMessage};

/// One merged geomap row: position plus whichever predictions were present.
#[derive(Debug, Clone, PartialEq)]
pub struct GeomapPoint {
    pub ts: f64,
    pub vehicle_id: String,
    pub lat: f64,
    pub lon: f64,
    pub pred_svr: Option<(f64, f64)>,
    pub pred_dnn: Option<(f64, f64)>,
}

/// Plot-ready series extracted from one replay run.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelExport {
    /// `(ts, lat, lon)` of every message.
    pub actual_track: Vec<(f64, f64, f64)>,
    /// `(ts, pred_lat, pred_lon)` for messages carrying an SVR prediction.
    pub svr_track: Vec<(f64, f64, f64)>,
    /// `(ts, pred_lat, pred_lon)` for messages carrying a DNN prediction.
    pub dnn_track: Vec<(f64, f64, f64)>,
    /// Merged per-message rows for map rendering.
    pub geomap_points: Vec<GeomapPoint>,
    /// Every message timestamp, in arrival order.
    pub timestamp_series: Vec<f64>,
}

pub fn build_panel_export(messages: &[StreamMessage]) -> Result<PanelExport, StreamError> {
    if messages.is_empty() {
        return Err(StreamError::EmptyInput);
    }
    let mut export = PanelExport {
        actual_track: Vec::with_capacity(messages.len()),
        svr_track: Vec::new(),
        dnn_track: Vec::new(),
        geomap_points: Vec::with_capacity(messages.len()),
        timestamp_series: Vec::with_capacity(messages.len()),
    };
    for msg in messages {
        export.actual_track.push((msg.ts, msg.lat, msg.lon));
        export.timestamp_series.push(msg.ts);
        let pred_svr = match (msg.pred_svr_lat, msg.pred_svr_lon) {
            (Some(lat), Some(lon)) => {
                export.svr_track.push((msg.ts, lat, lon));
                Some((lat, lon))
            }
            _ => None,
        };
        let pred_dnn = match (msg.pred_dnn_lat, msg.pred_dnn_lon) {
            (Some(lat), Some(lon)) => {
                export.dnn_track.push((msg.ts, lat, lon));
                Some((lat, lon))
            }
            _ => None,
        };
        export.geomap_points.push(GeomapPoint {
            ts: msg.ts,
            vehicle_id: msg.vehicle_id.clone(),
            lat: msg.lat,
            lon: msg.lon,
            pred_svr,
            pred_dnn,
        });
    }
    Ok(export)
}

fn write_track(path: &Path, track: &[(f64, f64, f64)]) -> Result<(), StreamError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "ts,lat,lon")?;
    for (ts, lat, lon) in track {
        writeln!(out, "{ts},{lat},{lon}")?;
    }
    out.flush()?;
    Ok(())
}

fn opt_pair(pair: Option<(f64, f64)>) -> (String, String) {
    match pair {
        Some((a, b)) => (a.to_string(), b.to_string()),
        None => (String::new(), String::new()),
    }
}

impl PanelExport {
    /// Writes the five panel CSVs (`panel_actual`, `panel_svr`, `panel_dnn`,
    /// `panel_geomap`, `panel_timestamps`) into `dir`.
    pub fn save_csv_set(&self, dir: &Path) -> Result<(), StreamError> {
        write_track(&dir.join("panel_actual.csv"), &self.actual_track)?;
        write_track(&dir.join("panel_svr.csv"), &self.svr_track)?;
        write_track(&dir.join("panel_dnn.csv"), &self.dnn_track)?;

        let mut geo = BufWriter::new(File::create(dir.join("panel_geomap.csv"))?);
        writeln!(
            geo,
            "ts,vehicle_id,lat,lon,pred_svr_lat,pred_svr_lon,pred_dnn_lat,pred_dnn_lon"
        )?;
        for p in &self.geomap_points {
            let (sa, sb) = opt_pair(p.pred_svr);
            let (da, db) = opt_pair(p.pred_dnn);
            writeln!(
                geo,
                "{},{},{},{},{},{},{},{}",
                p.ts, p.vehicle_id, p.lat, p.lon, sa, sb, da, db
            )?;
        }
        geo.flush()?;

        let mut ts_out = BufWriter::new(File::create(dir.join("panel_timestamps.csv"))?);
        writeln!(ts_out, "ts")?;
        for ts in &self.timestamp_series {
            writeln!(ts_out, "{ts}")?;
        }
        ts_out.flush()?;
        Ok(())
    }
}
