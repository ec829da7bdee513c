//! Combined-coordinate regression metrics for (lat, lon) predictions: MAE
//! and MSE sum both coordinate errors per instance before averaging, and
//! R-squared pools the squared errors across both coordinates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::{real, Real};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no rows to evaluate")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("actual targets are constant; explained variance is undefined")]
    ZeroVariance,
}

/// Validated (actual, predicted) coordinate matrices with equal shape,
/// two columns, at least one row, and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatePairs<T> {
    actual: Matrix<T>,
    predicted: Matrix<T>,
}

impl<T: Real> CoordinatePairs<T> {
    pub fn new(actual: Matrix<T>, predicted: Matrix<T>) -> Result<Self, MetricsError> {
        if actual.rows() == 0 {
            return Err(MetricsError::EmptyInput);
        }
        if actual.cols() != 2 || predicted.cols() != 2 {
            return Err(MetricsError::DimensionMismatch {
                expected: 2,
                got: actual.cols().max(predicted.cols()),
            });
        }
        if predicted.rows() != actual.rows() {
            return Err(MetricsError::DimensionMismatch {
                expected: actual.rows(),
                got: predicted.rows(),
            });
        }
        if !actual.is_finite() || !predicted.is_finite() {
            return Err(MetricsError::NonFiniteInput);
        }
        Ok(Self { actual, predicted })
    }

    pub fn len(&self) -> usize {
        self.actual.rows()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least one row
    }
}

/// `(1/N) * sum(|dlat_i| + |dlon_i|)`.
pub fn mae<T: Real>(pairs: &CoordinatePairs<T>) -> T {
    let n = pairs.len();
    let mut acc = T::zero();
    for i in 0..n {
        let a = pairs.actual.row(i);
        let p = pairs.predicted.row(i);
        acc += (a[0] - p[0]).abs() + (a[1] - p[1]).abs();
    }
    acc / real::<T>(n as f64)
}

/// `(1/N) * sum(dlat_i^2 + dlon_i^2)`.
pub fn mse<T: Real>(pairs: &CoordinatePairs<T>) -> T {
    let n = pairs.len();
    let mut acc = T::zero();
    for i in 0..n {
        let a = pairs.actual.row(i);
        let p = pairs.predicted.row(i);
        let dlat = a[0] - p[0];
        let dlon = a[1] - p[1];
        acc += dlat * dlat + dlon * dlon;
    }
    acc / real::<T>(n as f64)
}

/// `1 - SSE/SST` with both sums pooled across the two coordinates; SST
/// measures deviations of the actual targets from their per-coordinate
/// means. Exactly-constant targets have no variance to explain.
pub fn r_squared<T: Real>(pairs: &CoordinatePairs<T>) -> Result<T, MetricsError> {
    let n = pairs.len();
    let first = pairs.actual.row(0);
    let constant = (1..n).all(|i| {
        let r = pairs.actual.row(i);
        r[0] == first[0] && r[1] == first[1]
    });
    if constant {
        return Err(MetricsError::ZeroVariance);
    }

    let nf = real::<T>(n as f64);
    let mut mean_lat = T::zero();
    let mut mean_lon = T::zero();
    for i in 0..n {
        let a = pairs.actual.row(i);
        mean_lat += a[0];
        mean_lon += a[1];
    }
    mean_lat /= nf;
    mean_lon /= nf;

    let mut sse = T::zero();
    let mut sst = T::zero();
    for i in 0..n {
        let a = pairs.actual.row(i);
        let p = pairs.predicted.row(i);
        let e_lat = a[0] - p[0];
        let e_lon = a[1] - p[1];
        sse += e_lat * e_lat + e_lon * e_lon;
        let d_lat = a[0] - mean_lat;
        let d_lon = a[1] - mean_lon;
        sst += d_lat * d_lat + d_lon * d_lon;
    }
    if !(sst > T::zero()) {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(T::one() - sse / sst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport<T> {
    pub mae: T,
    pub mse: T,
    #[serde(rename = "r2")]
    pub r_squared: T,
    pub n: usize,
}

/// Bundles all three metrics over the two coordinate matrices.
pub fn evaluate<T: Real>(
    actual: Matrix<T>,
    predicted: Matrix<T>,
) -> Result<MetricsReport<T>, MetricsError> {
    let pairs = CoordinatePairs::new(actual, predicted)?;
    Ok(MetricsReport {
        mae: mae(&pairs),
        mse: mse(&pairs),
        r_squared: r_squared(&pairs)?,
        n: pairs.len(),
    })
}

impl MetricsReport<f64> {
    pub fn save_json(&self, path: &std::path::Path) -> Result<(), std::io::Error> {
        let out = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(out), self)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self, std::io::Error> {
        let file = std::fs::File::open(path)?;
        serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn to_csv_line(&self) -> String {
        format!("{},{},{},{}", self.mae, self.mse, self.r_squared, self.n)
    }

    /// Header plus the single data row.
    pub fn save_csv(&self, path: &std::path::Path) -> Result<(), std::io::Error> {
        std::fs::write(path, format!("mae,mse,r2,n\n{}\n", self.to_csv_line()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(actual: Vec<[f64; 2]>, predicted: Vec<[f64; 2]>) -> CoordinatePairs<f64> {
        let n = actual.len();
        CoordinatePairs::new(
            Matrix::from_vec(n, 2, actual.into_iter().flatten().collect()),
            Matrix::from_vec(n, 2, predicted.into_iter().flatten().collect()),
        )
        .unwrap()
    }

    #[test]
    fn identity_predictions_are_perfect() {
        let a = vec![[41.0, 29.0], [41.1, 29.2], [40.9, 28.8]];
        let p = pairs(a.clone(), a);
        assert_eq!(mae(&p), 0.0);
        assert_eq!(mse(&p), 0.0);
        assert_eq!(r_squared(&p).unwrap(), 1.0);
    }

    #[test]
    fn two_point_hand_example() {
        let p = pairs(vec![[0.0, 0.0], [2.0, 2.0]], vec![[1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(mae(&p), 2.0);
        assert_eq!(mse(&p), 2.0);
        // Predicting the column means exactly: SSE = SST.
        assert_eq!(r_squared(&p).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_bundles_the_three_metrics() {
        let a = Matrix::from_vec(2, 2, vec![0.0, 0.0, 2.0, 2.0]);
        let p = Matrix::from_vec(2, 2, vec![1.0, 1.0, 1.0, 1.0]);
        let report = evaluate(a.clone(), p.clone()).unwrap();
        assert_eq!(report.mae, 2.0);
        assert_eq!(report.mse, 2.0);
        assert_eq!(report.r_squared, 0.0);
        assert_eq!(report.n, 2);
        let cp = CoordinatePairs::new(a, p).unwrap();
        assert_eq!(report.mae, mae(&cp));
        assert_eq!(report.mse, mse(&cp));
        assert_eq!(report.r_squared, r_squared(&cp).unwrap());
    }

    #[test]
    fn mae_is_symmetric_in_actual_and_predicted() {
        let a = vec![[1.0, 2.0], [3.0, -4.0]];
        let b = vec![[0.5, 2.5], [2.0, -3.0]];
        assert_eq!(mae(&pairs(a.clone(), b.clone())), mae(&pairs(b, a)));
    }

    #[test]
    fn mse_scales_quadratically() {
        let a = vec![[0.0, 0.0], [1.0, 1.0]];
        let p1 = vec![[0.1, 0.2], [0.9, 1.3]];
        let p3: Vec<[f64; 2]> = a
            .iter()
            .zip(&p1)
            .map(|(av, pv)| [av[0] + 3.0 * (pv[0] - av[0]), av[1] + 3.0 * (pv[1] - av[1])])
            .collect();
        let m1 = mse(&pairs(a.clone(), p1));
        let m3 = mse(&pairs(a, p3));
        assert!((m3 - 9.0 * m1).abs() < 1e-12);
    }

    #[test]
    fn constant_targets_have_no_variance() {
        let p = pairs(vec![[5.0, 7.0], [5.0, 7.0]], vec![[5.0, 7.0], [4.0, 7.0]]);
        assert_eq!(r_squared(&p), Err(MetricsError::ZeroVariance));
    }

    #[test]
    fn construction_rejects_bad_shapes() {
        assert_eq!(
            CoordinatePairs::<f64>::new(Matrix::zeros(0, 2), Matrix::zeros(0, 2)),
            Err(MetricsError::EmptyInput)
        );
        assert_eq!(
            CoordinatePairs::<f64>::new(Matrix::zeros(2, 2), Matrix::zeros(3, 2)),
            Err(MetricsError::DimensionMismatch {
                expected: 2,
                got: 3
            })
        );
        assert_eq!(
            CoordinatePairs::<f64>::new(Matrix::zeros(2, 3), Matrix::zeros(2, 2)),
            Err(MetricsError::DimensionMismatch {
                expected: 2,
                got: 3
            })
        );
        let mut bad = Matrix::zeros(1, 2);
        bad.set(0, 1, f64::NAN);
        assert_eq!(
            CoordinatePairs::new(Matrix::zeros(1, 2), bad),
            Err(MetricsError::NonFiniteInput)
        );
    }

    #[test]
    fn report_json_round_trip_and_csv_shape() {
        let report = MetricsReport {
            mae: 0.125,
            mse: 0.5,
            r_squared: 0.75,
            n: 42,
        };
        let f = tempfile::NamedTempFile::new().unwrap();
        report.save_json(f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert!(text.contains("\"r2\""));
        let loaded = MetricsReport::<f64>::load_json(f.path()).unwrap();
        assert_eq!(report, loaded);
        assert_eq!(report.to_csv_line(), "0.125,0.5,0.75,42");
    }

    proptest! {
        #[test]
        fn mae_bounded_by_twice_root_mse(
            rows in proptest::collection::vec(
                (-90.0f64..90.0, -180.0f64..180.0, -1.0f64..1.0, -1.0f64..1.0),
                1..40,
            )
        ) {
            let actual: Vec<[f64; 2]> = rows.iter().map(|r| [r.0, r.1]).collect();
            let predicted: Vec<[f64; 2]> =
                rows.iter().map(|r| [r.0 + r.2, r.1 + r.3]).collect();
            let p = pairs(actual, predicted);
            prop_assert!(mae(&p) <= 2.0 * mse(&p).sqrt() + 1e-12);
        }

        #[test]
        fn metrics_are_permutation_invariant(
            rows in proptest::collection::vec(
                (-10.0f64..10.0, -10.0f64..10.0, -1.0f64..1.0, -1.0f64..1.0),
                2..30,
            ),
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            use rand_chacha::rand_core::SeedableRng;
            let actual: Vec<[f64; 2]> = rows.iter().map(|r| [r.0, r.1]).collect();
            let predicted: Vec<[f64; 2]> =
                rows.iter().map(|r| [r.0 + r.2, r.1 + r.3]).collect();
            let p1 = pairs(actual.clone(), predicted.clone());

            let mut order: Vec<usize> = (0..rows.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a2: Vec<[f64; 2]> = order.iter().map(|&i| actual[i]).collect();
            let pr2: Vec<[f64; 2]> = order.iter().map(|&i| predicted[i]).collect();
            let p2 = pairs(a2, pr2);

            prop_assert!((mae(&p1) - mae(&p2)).abs() <= 1e-12 * mae(&p1).abs().max(1.0));
            prop_assert!((mse(&p1) - mse(&p2)).abs() <= 1e-12 * mse(&p1).abs().max(1.0));
            match (r_squared(&p1), r_squared(&p2)) {
                (Ok(r1), Ok(r2)) => {
                    prop_assert!((r1 - r2).abs() <= 1e-9 * r1.abs().max(1.0));
                }
                (Err(e1), Err(e2)) => prop_assert_eq!(e1, e2),
                other => prop_assert!(false, "inconsistent results: {:?}", other),
            }
        }

        #[test]
        fn r_squared_shift_invariant(
            rows in proptest::collection::vec(
                (-5.0f64..5.0, -5.0f64..5.0, -1.0f64..1.0, -1.0f64..1.0),
                2..25,
            ),
            shift_lat in -100.0f64..100.0,
            shift_lon in -100.0f64..100.0,
        ) {
            let actual: Vec<[f64; 2]> = rows.iter().map(|r| [r.0, r.1]).collect();
            let predicted: Vec<[f64; 2]> =
                rows.iter().map(|r| [r.0 + r.2, r.1 + r.3]).collect();
            let p1 = pairs(actual.clone(), predicted.clone());
            let a2: Vec<[f64; 2]> = actual
                .iter()
                .map(|r| [r[0] + shift_lat, r[1] + shift_lon])
                .collect();
            let pr2: Vec<[f64; 2]> = predicted
                .iter()
                .map(|r| [r[0] + shift_lat, r[1] + shift_lon])
                .collect();
            let p2 = pairs(a2, pr2);
            if let (Ok(r1), Ok(r2)) = (r_squared(&p1), r_squared(&p2)) {
                prop_assert!((r1 - r2).abs() <= 1e-6 * r1.abs().max(1.0),
                    "r1 {} vs r2 {}", r1, r2);
            }
        }
    }
}
