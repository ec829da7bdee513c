//! Trajectory datasets: ingestion, synthesis, standardization, splitting.

mod csv_io;
mod standardize;
mod synthetic;

pub use csv_io::{
    parse_annotated_csv, parse_trajectory_csv, write_annotated_csv, write_trajectory_csv,
    AnnotatedRecord, ANNOTATED_CSV_HEADER, TRAJECTORY_CSV_HEADER,
};
pub use standardize::Standardizer;
pub use synthetic::{generate_synthetic_trajectories, BoundingBox, SyntheticConfig};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::{real, Real};

/// Input feature columns, in the order they are fed to the models.
pub const FEATURE_NAMES: [&str; 6] = [
    "timestamp",
    "speed_kmh",
    "distance_m",
    "stay_duration_s",
    "lat",
    "lon",
];

/// Prediction target columns.
pub const TARGET_NAMES: [&str; 2] = ["next_lat", "next_lon"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column '{0}' in CSV header")]
    MissingColumn(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("value out of range at line {line}, field '{field}'")]
    OutOfRange { line: u64, field: &'static str },
    #[error("non-monotonic timestamp for vehicle '{vehicle_id}' at line {line}")]
    NonMonotonicTimestamp { vehicle_id: String, line: u64 },
    #[error("feature column '{0}' is constant; cannot standardize")]
    ConstantColumn(String),
    #[error("too few records: need at least {needed}, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("split ratio {0} is outside (0, 1)")]
    InvalidRatio(f64),
    #[error("invalid count: {0}")]
    InvalidCount(String),
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One timestamped GPS sample: six input features plus the next-location target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub vehicle_id: String,
    /// Seconds since epoch; may carry sub-second precision.
    pub timestamp: f64,
    /// km/h, non-negative.
    pub speed_kmh: f64,
    /// Meters traveled since the previous sample, non-negative.
    pub distance_m: f64,
    /// Seconds spent at the current location, non-negative.
    pub stay_duration_s: f64,
    pub lat: f64,
    pub lon: f64,
    pub next_lat: f64,
    pub next_lon: f64,
}

impl TrajectoryRecord {
    /// Checks geographic bounds and non-negativity; returns the first
    /// offending field name.
    pub fn validate(&self) -> Result<(), &'static str> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        let lat_ok = |v: f64| v.is_finite() && (-90.0..=90.0).contains(&v);
        let lon_ok = |v: f64| v.is_finite() && (-180.0..=180.0).contains(&v);
        if !self.timestamp.is_finite() {
            return Err("timestamp");
        }
        if !finite_nonneg(self.speed_kmh) {
            return Err("speed_kmh");
        }
        if !finite_nonneg(self.distance_m) {
            return Err("distance_m");
        }
        if !finite_nonneg(self.stay_duration_s) {
            return Err("stay_duration_s");
        }
        if !lat_ok(self.lat) {
            return Err("lat");
        }
        if !lon_ok(self.lon) {
            return Err("lon");
        }
        if !lat_ok(self.next_lat) {
            return Err("next_lat");
        }
        if !lon_ok(self.next_lon) {
            return Err("next_lon");
        }
        Ok(())
    }

    fn features<T: Real>(&self) -> [T; 6] {
        [
            real(self.timestamp),
            real(self.speed_kmh),
            real(self.distance_m),
            real(self.stay_duration_s),
            real(self.lat),
            real(self.lon),
        ]
    }

    fn targets<T: Real>(&self) -> [T; 2] {
        [real(self.next_lat), real(self.next_lon)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    File,
    Synthetic,
}

/// Ordered collection of trajectory records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<TrajectoryRecord>,
    pub source: DatasetSource,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// N x 6 feature matrix in [`FEATURE_NAMES`] order.
    pub fn feature_matrix<T: Real>(&self) -> Matrix<T> {
        let rows: Vec<Vec<T>> = self.records.iter().map(|r| r.features().to_vec()).collect();
        Matrix::from_rows(&rows)
    }

    /// N x 2 target matrix `[next_lat, next_lon]`.
    pub fn target_matrix<T: Real>(&self) -> Matrix<T> {
        let rows: Vec<Vec<T>> = self.records.iter().map(|r| r.targets().to_vec()).collect();
        Matrix::from_rows(&rows)
    }
}

/// Train/validation partition of a dataset.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub validation: Dataset,
    pub ratio: f64,
    pub seed: u64,
}

/// Deterministic shuffled split. Membership is drawn by shuffling record
/// indices; each side keeps the original record order, so per-vehicle
/// timestamp ordering survives the split.
pub fn split_dataset(data: &Dataset, ratio: f64, seed: u64) -> Result<SplitPair, DataError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DataError::InvalidRatio(ratio));
    }
    let n = data.len();
    if n < 2 {
        return Err(DataError::TooFewRecords { needed: 2, got: n });
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);

    let train_size = (ratio * n as f64).round() as usize;
    let mut in_train = vec![false; n];
    for &i in &indices[..train_size] {
        in_train[i] = true;
    }

    let mut train = Vec::with_capacity(train_size);
    let mut validation = Vec::with_capacity(n - train_size);
    for (i, rec) in data.records.iter().enumerate() {
        if in_train[i] {
            train.push(rec.clone());
        } else {
            validation.push(rec.clone());
        }
    }

    Ok(SplitPair {
        train: Dataset {
            records: train,
            source: data.source,
        },
        validation: Dataset {
            records: validation,
            source: data.source,
        },
        ratio,
        seed,
    })
}
