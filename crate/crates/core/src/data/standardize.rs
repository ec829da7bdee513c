//! Column standardization (zero mean, unit variance) for features and targets.

use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, FEATURE_NAMES, TARGET_NAMES};
use crate::linalg::Matrix;
use crate::scalar::{real, Real};

/// Per-column affine transform fitted on training data: x' = (x - mean) / std.
///
/// Standard deviations are population ones (divisor N). Targets get their own
/// transform so predictions can be mapped back to degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    pub means: Vec<T>,
    pub stds: Vec<T>,
    pub target_means: Vec<T>,
    pub target_stds: Vec<T>,
}

impl<T: Real> Standardizer<T> {
    /// Fits column statistics on the dataset. A column whose values are all
    /// identical carries no information and is rejected by name.
    pub fn fit(data: &Dataset) -> Result<Self, DataError> {
        if data.len() < 2 {
            return Err(DataError::TooFewRecords {
                needed: 2,
                got: data.len(),
            });
        }
        let features: Matrix<T> = data.feature_matrix();
        let targets: Matrix<T> = data.target_matrix();
        let (means, stds) = column_stats(&features, &FEATURE_NAMES)?;
        let (target_means, target_stds) = column_stats(&targets, &TARGET_NAMES)?;
        Ok(Self {
            means,
            stds,
            target_means,
            target_stds,
        })
    }

    /// Standardizes all rows, returning (features, targets).
    pub fn transform(&self, data: &Dataset) -> Result<(Matrix<T>, Matrix<T>), DataError> {
        let features: Matrix<T> = data.feature_matrix();
        let targets: Matrix<T> = data.target_matrix();
        Ok((
            self.apply(&features, &self.means, &self.stds)?,
            self.apply(&targets, &self.target_means, &self.target_stds)?,
        ))
    }

    /// Standardizes a single feature row.
    pub fn transform_features(&self, row: &[T]) -> Result<Vec<T>, DataError> {
        if row.len() != self.means.len() {
            return Err(DataError::DimensionMismatch {
                expected: self.means.len(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect())
    }

    /// Maps a standardized target row back to original units.
    pub fn inverse_transform_targets(&self, row: &[T]) -> Result<Vec<T>, DataError> {
        if row.len() != self.target_means.len() {
            return Err(DataError::DimensionMismatch {
                expected: self.target_means.len(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.target_means.iter().zip(&self.target_stds))
            .map(|(&x, (&m, &s))| x * s + m)
            .collect())
    }

    fn apply(&self, m: &Matrix<T>, means: &[T], stds: &[T]) -> Result<Matrix<T>, DataError> {
        if m.cols() != means.len() {
            return Err(DataError::DimensionMismatch {
                expected: means.len(),
                got: m.cols(),
            });
        }
        let mut out = m.clone();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                out.set(i, j, (m.get(i, j) - means[j]) / stds[j]);
            }
        }
        Ok(out)
    }
}

impl Standardizer<f64> {
    pub fn save_json(&self, path: &std::path::Path) -> Result<(), DataError> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self, DataError> {
        let file = std::fs::File::open(path)?;
        let me = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(me)
    }
}

fn column_stats<T: Real>(
    m: &Matrix<T>,
    names: &[&'static str],
) -> Result<(Vec<T>, Vec<T>), DataError> {
    let n = real::<T>(m.rows() as f64);
    let mut means = Vec::with_capacity(m.cols());
    let mut stds = Vec::with_capacity(m.cols());
    for j in 0..m.cols() {
        let mut min = m.get(0, j);
        let mut max = min;
        let mut sum = T::zero();
        for i in 0..m.rows() {
            let v = m.get(i, j);
            sum += v;
            if v < min {
                min = v;
            }
            if v > max {
                max = v;
            }
        }
        if min == max {
            return Err(DataError::ConstantColumn(names[j].to_string()));
        }
        let mean = sum / n;
        let mut ss = T::zero();
        for i in 0..m.rows() {
            let d = m.get(i, j) - mean;
            ss += d * d;
        }
        means.push(mean);
        stds.push((ss / n).sqrt());
    }
    Ok((means, stds))
}
