//! Witnessed synchronization delay between the physical fleet and its
//! digital twin, as a function of vehicle count, with and without
//! next-location prediction.
//!
//! The delays follow an exact linear law in the vehicle count n: without
//! prediction the delay is `a*n`; with prediction it is `b*n + c`. The
//! default coefficients are least-squares fits of the bundled reference
//! measurements, which the fit reproduces with residuals below a
//! microsecond.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{real, Real};

/// Reference measurements: (vehicle count, delay without prediction in
/// seconds, delay with prediction in seconds, improvement percent).
pub const REFERENCE_DELAY_TABLE: [(usize, f64, f64, f64); 9] = [
    (2, 1.657793333, 0.196686667, 88.13),
    (5, 4.144483333, 0.347716667, 91.61),
    (10, 8.288966667, 0.599433333, 92.76),
    (15, 12.43345, 0.85115, 93.15),
    (20, 16.57793333, 1.102866667, 93.34),
    (25, 20.72241667, 1.354583333, 93.46),
    (30, 24.8669, 1.6063, 93.54),
    (35, 29.01138333, 1.858016667, 93.59),
    (40, 33.15586667, 2.109733333, 93.63),
];

#[derive(Debug, Error, PartialEq)]
pub enum DelayError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("vehicle count must be at least 1")]
    InvalidCount,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Linear delay law: `no_dt(n) = no_dt_slope * n` and
/// `dt(n) = dt_slope * n + dt_intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayCoefficients<T> {
    pub no_dt_slope: T,
    pub dt_slope: T,
    pub dt_intercept: T,
}

impl<T: Real> DelayCoefficients<T> {
    /// Coefficients fitted from [`REFERENCE_DELAY_TABLE`].
    pub fn reference() -> Self {
        let rows: Vec<(usize, T, T)> = REFERENCE_DELAY_TABLE
            .iter()
            .map(|&(n, no_dt, dt, _)| (n, real(no_dt), real(dt)))
            .collect();
        fit_delay_coefficients(&rows).expect("reference table is well-conditioned")
    }
}

impl<T: Real> Default for DelayCoefficients<T> {
    fn default() -> Self {
        Self::reference()
    }
}

/// Deployment parameters carried into reports as provenance metadata; they
/// do not enter the delay computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub rsu_coverage_km: f64,
    pub v2i_rate_mbps: f64,
    pub v2v_rate_mbps: f64,
    pub cch_duration_ms: f64,
    pub payload_bytes: u32,
    pub beacon_interval_ms: f64,
    pub app_processing_ms: f64,
    pub svr_predict_delay_s: f64,
    pub dnn_predict_delay_s: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            rsu_coverage_km: 1.0,
            v2i_rate_mbps: 100.0,
            v2v_rate_mbps: 6.0,
            cch_duration_ms: 46.0,
            payload_bytes: 310,
            beacon_interval_ms: 100.0,
            app_processing_ms: 2.23,
            svr_predict_delay_s: 0.0037,
            dnn_predict_delay_s: 0.0883,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayRow<T> {
    pub n: usize,
    pub no_dt_s: T,
    pub dt_s: T,
    pub improvement_pct: T,
    /// True when n is not one of the bundled reference counts, i.e. the row
    /// is interpolated/extrapolated from the linear law.
    pub model_derived: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport<T> {
    pub params: PhysicalParams,
    pub rows: Vec<DelayRow<T>>,
}

/// Least-squares fit of the two delay laws over (n, no_dt, dt) rows: the
/// no-prediction delay is a pure slope through the origin, the predicted
/// one an affine line.
pub fn fit_delay_coefficients<T: Real>(
    rows: &[(usize, T, T)],
) -> Result<DelayCoefficients<T>, DelayError> {
    let distinct = {
        let mut ns: Vec<usize> = rows.iter().map(|r| r.0).collect();
        ns.sort_unstable();
        ns.dedup();
        ns.len()
    };
    if distinct < 2 {
        return Err(DelayError::DegenerateInput(
            "need at least 2 distinct vehicle counts".to_string(),
        ));
    }
    if rows
        .iter()
        .any(|&(_, a, b)| !a.is_finite() || !b.is_finite())
    {
        return Err(DelayError::DegenerateInput(
            "delays must be finite".to_string(),
        ));
    }

    let m = real::<T>(rows.len() as f64);
    let mut sn = T::zero(); // sum n
    let mut snn = T::zero(); // sum n^2
    let mut sny = T::zero(); // sum n * no_dt
    let mut sd = T::zero(); // sum dt
    let mut snd = T::zero(); // sum n * dt
    for &(n, no_dt, dt) in rows {
        let nf = real::<T>(n as f64);
        sn += nf;
        snn += nf * nf;
        sny += nf * no_dt;
        sd += dt;
        snd += nf * dt;
    }

    let no_dt_slope = sny / snn;
    let denom = m * snn - sn * sn;
    if denom == T::zero() {
        return Err(DelayError::DegenerateInput(
            "vehicle counts are collinear".to_string(),
        ));
    }
    let dt_slope = (m * snd - sn * sd) / denom;
    let dt_intercept = (sd - dt_slope * sn) / m;

    let coeff = DelayCoefficients {
        no_dt_slope,
        dt_slope,
        dt_intercept,
    };
    if !(coeff.no_dt_slope >= T::zero())
        || !(coeff.dt_slope >= T::zero())
        || !(coeff.dt_intercept >= T::zero())
    {
        return Err(DelayError::DegenerateInput(
            "fitted coefficients are negative".to_string(),
        ));
    }
    if !(coeff.no_dt_slope > coeff.dt_slope) {
        return Err(DelayError::DegenerateInput(
            "prediction does not reduce the per-vehicle delay".to_string(),
        ));
    }
    Ok(coeff)
}

/// Delay without prediction: every vehicle's full state must round-trip.
pub fn no_dt_delay<T: Real>(n: usize, coeff: &DelayCoefficients<T>) -> Result<T, DelayError> {
    if n < 1 {
        return Err(DelayError::InvalidCount);
    }
    Ok(coeff.no_dt_slope * real(n as f64))
}

/// Delay with prediction running in the twin.
pub fn dt_delay<T: Real>(n: usize, coeff: &DelayCoefficients<T>) -> Result<T, DelayError> {
    if n < 1 {
        return Err(DelayError::InvalidCount);
    }
    Ok(coeff.dt_slope * real(n as f64) + coeff.dt_intercept)
}

/// `100 * (no_dt - dt) / no_dt`.
pub fn improvement_percent<T: Real>(no_dt: T, dt: T) -> Result<T, DelayError> {
    if !(no_dt > T::zero()) || !no_dt.is_finite() {
        return Err(DelayError::InvalidInput(
            "baseline delay must be strictly positive".to_string(),
        ));
    }
    if !(dt >= T::zero()) || !dt.is_finite() {
        return Err(DelayError::InvalidInput(
            "predicted delay must be non-negative".to_string(),
        ));
    }
    Ok(real::<T>(100.0) * (no_dt - dt) / no_dt)
}

/// One row per requested vehicle count, with the physical parameters
/// embedded for provenance.
pub fn delay_report<T: Real>(
    n_values: &[usize],
    coeff: &DelayCoefficients<T>,
    params: &PhysicalParams,
) -> Result<DelayReport<T>, DelayError> {
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let no_dt_s = no_dt_delay(n, coeff)?;
        let dt_s = dt_delay(n, coeff)?;
        rows.push(DelayRow {
            n,
            no_dt_s,
            dt_s,
            improvement_pct: improvement_percent(no_dt_s, dt_s)?,
            model_derived: !REFERENCE_DELAY_TABLE.iter().any(|r| r.0 == n),
        });
    }
    Ok(DelayReport {
        params: params.clone(),
        rows,
    })
}

impl DelayReport<f64> {
    /// CSV in the reference table's column order.
    pub fn save_csv(&self, path: &std::path::Path) -> Result<(), std::io::Error> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "n,no_dt_s,dt_s,improvement_pct")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.n, r.no_dt_s, r.dt_s, r.improvement_pct)?;
        }
        w.flush()
    }

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
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_fit_matches_expected_coefficients() {
        let c: DelayCoefficients<f64> = DelayCoefficients::reference();
        assert!(
            (c.no_dt_slope - 0.828896667).abs() < 1e-9,
            "{}",
            c.no_dt_slope
        );
        assert!((c.dt_slope - 0.050343333).abs() < 1e-9, "{}", c.dt_slope);
        assert!((c.dt_intercept - 0.096).abs() < 1e-6, "{}", c.dt_intercept);
    }

    #[test]
    fn reference_table_is_linear_to_a_microsecond() {
        let c: DelayCoefficients<f64> = DelayCoefficients::reference();
        for &(n, no_dt, dt, _) in &REFERENCE_DELAY_TABLE {
            let fit_no = no_dt_delay(n, &c).unwrap();
            let fit_dt = dt_delay(n, &c).unwrap();
            assert!((fit_no - no_dt).abs() <= 1e-6, "n={n}: {fit_no} vs {no_dt}");
            assert!((fit_dt - dt).abs() <= 1e-6, "n={n}: {fit_dt} vs {dt}");
        }
    }

    #[test]
    fn two_point_fit_is_exact() {
        let rows = [(1usize, 2.0_f64, 1.0), (2usize, 4.0, 1.5)];
        let c = fit_delay_coefficients(&rows).unwrap();
        assert!((c.no_dt_slope - 2.0).abs() < 1e-12);
        assert!((c.dt_slope - 0.5).abs() < 1e-12);
        assert!((c.dt_intercept - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_distinct_count_is_degenerate() {
        assert!(matches!(
            fit_delay_coefficients(&[(3usize, 1.0, 0.5)]),
            Err(DelayError::DegenerateInput(_))
        ));
        assert!(matches!(
            fit_delay_coefficients(&[(3usize, 1.0, 0.5), (3, 1.1, 0.6)]),
            Err(DelayError::DegenerateInput(_))
        ));
    }

    #[test]
    fn least_squares_residuals_are_orthogonal() {
        // Independent characterization of the optimum: residuals of the
        // affine fit are orthogonal to both the constant and n regressors;
        // residuals of the through-origin fit are orthogonal to n.
        let rows: Vec<(usize, f64, f64)> = vec![
            (1, 1.1, 0.55),
            (3, 2.8, 0.95),
            (5, 4.4, 1.62),
            (8, 7.1, 2.21),
            (13, 11.3, 3.4),
        ];
        let c = fit_delay_coefficients(&rows).unwrap();
        let mut dot_n_no = 0.0;
        let mut sum_dt = 0.0;
        let mut dot_n_dt = 0.0;
        for &(n, no_dt, dt) in &rows {
            let nf = n as f64;
            dot_n_no += nf * (no_dt - c.no_dt_slope * nf);
            let r = dt - (c.dt_slope * nf + c.dt_intercept);
            sum_dt += r;
            dot_n_dt += nf * r;
        }
        assert!(dot_n_no.abs() < 1e-9, "{dot_n_no}");
        assert!(sum_dt.abs() < 1e-9, "{sum_dt}");
        assert!(dot_n_dt.abs() < 1e-9, "{dot_n_dt}");
    }

    #[test]
    fn tabulated_evaluations_match_reference_cells() {
        let c: DelayCoefficients<f64> = DelayCoefficients::reference();
        assert!((no_dt_delay(2, &c).unwrap() - 1.657793333).abs() <= 1e-6);
        assert!((dt_delay(40, &c).unwrap() - 2.109733333).abs() <= 1e-6);
        assert!((no_dt_delay(15, &c).unwrap() - 12.43345).abs() <= 1e-6);
        assert!((dt_delay(15, &c).unwrap() - 0.85115).abs() <= 1e-6);
    }

    #[test]
    fn improvement_examples() {
        let p = improvement_percent(1.657793333_f64, 0.196686667).unwrap();
        assert!((p - 88.13).abs() <= 0.01, "{p}");
        assert_eq!(improvement_percent(3.0, 0.0).unwrap(), 100.0);
        assert_eq!(improvement_percent(3.0, 3.0).unwrap(), 0.0);
        assert!(matches!(
            improvement_percent(0.0, 1.0),
            Err(DelayError::InvalidInput(_))
        ));
        assert!(matches!(
            improvement_percent(1.0, -0.5),
            Err(DelayError::InvalidInput(_))
        ));
    }

    #[test]
    fn full_report_reproduces_every_reference_cell() {
        let c: DelayCoefficients<f64> = DelayCoefficients::reference();
        let ns: Vec<usize> = REFERENCE_DELAY_TABLE.iter().map(|r| r.0).collect();
        let report = delay_report(&ns, &c, &PhysicalParams::default()).unwrap();
        assert_eq!(report.rows.len(), 9);
        for (row, &(n, no_dt, dt, pct)) in report.rows.iter().zip(&REFERENCE_DELAY_TABLE) {
            assert_eq!(row.n, n);
            assert!((row.no_dt_s - no_dt).abs() <= 1e-6);
            assert!((row.dt_s - dt).abs() <= 1e-6);
            assert!((row.improvement_pct - pct).abs() <= 0.01);
            assert!(!row.model_derived);
            // Stored improvement is exactly the recomputation from the
            // stored delays.
            assert_eq!(
                row.improvement_pct,
                improvement_percent(row.no_dt_s, row.dt_s).unwrap()
            );
        }
    }

    #[test]
    fn improvement_grows_with_vehicle_count() {
        let c: DelayCoefficients<f64> = DelayCoefficients::reference();
        let ns: Vec<usize> = (1..=60).collect();
        let report = delay_report(&ns, &c, &PhysicalParams::default()).unwrap();
        for w in report.rows.windows(2) {
            assert!(w[1].improvement_pct > w[0].improvement_pct);
        }
        // Counts absent from the reference table are flagged.
        assert!(report.rows.iter().find(|r| r.n == 7).unwrap().model_derived);
        assert!(
            !report
                .rows
                .iter()
                .find(|r| r.n == 20)
                .unwrap()
                .model_derived
        );
    }

    #[test]
    fn report_round_trips_through_json_and_csv() {
        let c: DelayCoefficients<f64> = DelayCoefficients::reference();
        let report = delay_report(&[2, 7, 40], &c, &PhysicalParams::default()).unwrap();
        let jf = tempfile::NamedTempFile::new().unwrap();
        report.save_json(jf.path()).unwrap();
        assert_eq!(DelayReport::<f64>::load_json(jf.path()).unwrap(), report);

        let cf = tempfile::NamedTempFile::new().unwrap();
        report.save_csv(cf.path()).unwrap();
        let text = std::fs::read_to_string(cf.path()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,no_dt_s,dt_s,improvement_pct");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("2,"));
    }

    #[test]
    fn zero_vehicles_is_rejected() {
        let c: DelayCoefficients<f64> = DelayCoefficients::reference();
        assert_eq!(no_dt_delay(0, &c), Err(DelayError::InvalidCount));
        assert_eq!(dt_delay(0, &c), Err(DelayError::InvalidCount));
    }
}
