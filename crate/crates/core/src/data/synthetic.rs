//! Deterministic synthetic trajectory generator.
//!
//! Vehicles follow constant-speed segments with bounded random heading
//! changes inside a bounding box, so the next position is a smooth function
//! of the current state and the learning stack can be validated end to end.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, Dataset, DatasetSource, TrajectoryRecord};

const METERS_PER_DEGREE_LAT: f64 = 111_320.0;

/// Axis-aligned lat/lon region the generated paths stay inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }

    fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.lat_min + self.lat_max),
            0.5 * (self.lon_min + self.lon_max),
        )
    }
}

impl Default for BoundingBox {
    fn default() -> Self {
        Self {
            lat_min: 40.95,
            lat_max: 41.05,
            lon_min: 28.85,
            lon_max: 29.05,
        }
    }
}

/// Knobs for the generator; `Default` gives a city-scale box, urban speeds,
/// and one sample per second.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_vehicles: usize,
    pub samples_per_vehicle: usize,
    pub seed: u64,
    pub bbox: BoundingBox,
    /// Unix seconds of the first sample of the first vehicle.
    pub start_timestamp: f64,
    /// Nominal gap between consecutive samples of one vehicle.
    pub sample_interval_s: f64,
    pub speed_min_kmh: f64,
    pub speed_max_kmh: f64,
    /// Largest single-step heading change, radians.
    pub max_turn_rad: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_vehicles: 1,
            samples_per_vehicle: 100,
            seed: 0,
            bbox: BoundingBox::default(),
            start_timestamp: 1_546_300_800.0, // 2019-01-01T00:00:00Z
            sample_interval_s: 1.0,
            speed_min_kmh: 20.0,
            speed_max_kmh: 60.0,
            max_turn_rad: 0.15,
        }
    }
}

/// Generates `n_vehicles * samples_per_vehicle` records with default
/// geometry. Identical arguments produce bit-identical datasets.
pub fn generate_synthetic_trajectories(
    n_vehicles: usize,
    samples_per_vehicle: usize,
    seed: u64,
) -> Result<Dataset, DataError> {
    generate_with_config(&SyntheticConfig {
        n_vehicles,
        samples_per_vehicle,
        seed,
        ..SyntheticConfig::default()
    })
}

pub fn generate_with_config(cfg: &SyntheticConfig) -> Result<Dataset, DataError> {
    if cfg.n_vehicles < 1 {
        return Err(DataError::InvalidCount(
            "n_vehicles must be at least 1".into(),
        ));
    }
    if cfg.samples_per_vehicle < 2 {
        return Err(DataError::InvalidCount(
            "samples_per_vehicle must be at least 2".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.n_vehicles * cfg.samples_per_vehicle);

    for v in 0..cfg.n_vehicles {
        let vehicle_id = format!("SYN{:03}", v + 1);
        // Start away from the walls so early steps rarely hit them.
        let lat_span = cfg.bbox.lat_max - cfg.bbox.lat_min;
        let lon_span = cfg.bbox.lon_max - cfg.bbox.lon_min;
        let mut lat =
            rng.random_range(cfg.bbox.lat_min + 0.2 * lat_span..cfg.bbox.lat_max - 0.2 * lat_span);
        let mut lon =
            rng.random_range(cfg.bbox.lon_min + 0.2 * lon_span..cfg.bbox.lon_max - 0.2 * lon_span);
        let mut heading = rng.random_range(0.0..std::f64::consts::TAU);
        let mut speed = rng.random_range(cfg.speed_min_kmh..cfg.speed_max_kmh);
        // Stagger vehicles in time so the timestamp column varies across the
        // whole dataset, not just within one path.
        let mut timestamp = cfg.start_timestamp + v as f64 * 7.0;
        let mut distance_m = 0.0;

        // One extra position so the last record still has a real successor.
        let mut trail: Vec<(f64, f64, f64, f64, f64, f64)> =
            Vec::with_capacity(cfg.samples_per_vehicle + 1);
        for _ in 0..=cfg.samples_per_vehicle {
            let stay = if rng.random_range(0.0..1.0) < 0.15 {
                rng.random_range(0.5..5.0)
            } else {
                rng.random_range(0.0..0.2)
            };
            trail.push((timestamp, speed, distance_m, stay, lat, lon));

            // Advance the state one step.
            heading += rng.random_range(-cfg.max_turn_rad..cfg.max_turn_rad);
            speed =
                (speed + rng.random_range(-2.0..2.0)).clamp(cfg.speed_min_kmh, cfg.speed_max_kmh);
            let step_m = speed / 3.6 * cfg.sample_interval_s;
            let (mut next_lat, mut next_lon) = step(lat, lon, heading, step_m);
            if !cfg.bbox.contains(next_lat, next_lon) {
                // Turn toward the center of the box and retry once; the
                // step length is tiny relative to the box, so this always
                // lands inside.
                let (clat, clon) = cfg.bbox.center();
                heading = ((clat - lat) * METERS_PER_DEGREE_LAT)
                    .atan2((clon - lon) * METERS_PER_DEGREE_LAT * lat.to_radians().cos())
                    .rem_euclid(std::f64::consts::TAU);
                // `heading` here measures from east toward north; convert to
                // the generator's north-referenced angle.
                heading = std::f64::consts::FRAC_PI_2 - heading;
                let retry = step(lat, lon, heading, step_m);
                next_lat = retry.0;
                next_lon = retry.1;
            }
            distance_m = step_m;
            lat = next_lat;
            lon = next_lon;
            timestamp += cfg.sample_interval_s + stay;
        }

        for k in 0..cfg.samples_per_vehicle {
            let (ts, spd, dist, stay, la, lo) = trail[k];
            let (_, _, _, _, nla, nlo) = trail[k + 1];
            records.push(TrajectoryRecord {
                vehicle_id: vehicle_id.clone(),
                timestamp: ts,
                speed_kmh: spd,
                distance_m: dist,
                stay_duration_s: stay,
                lat: la,
                lon: lo,
                next_lat: nla,
                next_lon: nlo,
            });
        }
    }

    Ok(Dataset {
        records,
        source: DatasetSource::Synthetic,
    })
}

/// Moves `meters` from (lat, lon) along `heading` (radians, 0 = north),
/// using a local equirectangular approximation.
fn step(lat: f64, lon: f64, heading: f64, meters: f64) -> (f64, f64) {
    let dnorth = meters * heading.cos();
    let deast = meters * heading.sin();
    (
        lat + dnorth / METERS_PER_DEGREE_LAT,
        lon + deast / (METERS_PER_DEGREE_LAT * lat.to_radians().cos()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Standardizer;
    use std::collections::HashSet;

    #[test]
    fn identical_seeds_are_bit_identical() {
        let a = generate_synthetic_trajectories(1, 5, 7).unwrap();
        let b = generate_synthetic_trajectories(1, 5, 7).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn cardinality_and_vehicle_ids() {
        let ds = generate_synthetic_trajectories(3, 100, 1).unwrap();
        assert_eq!(ds.len(), 300);
        let ids: HashSet<_> = ds.records.iter().map(|r| r.vehicle_id.as_str()).collect();
        assert_eq!(ids.len(), 3);
        assert_eq!(ds.source, DatasetSource::Synthetic);
    }

    #[test]
    fn next_position_is_following_sample() {
        let ds = generate_synthetic_trajectories(2, 50, 3).unwrap();
        for w in ds.records.windows(2) {
            if w[0].vehicle_id == w[1].vehicle_id {
                assert_eq!(w[0].next_lat, w[1].lat);
                assert_eq!(w[0].next_lon, w[1].lon);
            }
        }
    }

    #[test]
    fn paths_stay_in_the_box_and_validate() {
        let cfg = SyntheticConfig {
            n_vehicles: 4,
            samples_per_vehicle: 400,
            seed: 11,
            ..SyntheticConfig::default()
        };
        let ds = generate_with_config(&cfg).unwrap();
        for r in &ds.records {
            r.validate().unwrap();
            assert!(cfg.bbox.contains(r.lat, r.lon), "{},{}", r.lat, r.lon);
            assert!(cfg.bbox.contains(r.next_lat, r.next_lon));
        }
    }

    #[test]
    fn timestamps_strictly_increase_per_vehicle() {
        let ds = generate_synthetic_trajectories(3, 200, 9).unwrap();
        let mut last = std::collections::HashMap::new();
        for r in &ds.records {
            if let Some(prev) = last.insert(r.vehicle_id.clone(), r.timestamp) {
                assert!(r.timestamp > prev);
            }
        }
    }

    #[test]
    fn no_feature_column_is_constant() {
        let ds = generate_synthetic_trajectories(1, 50, 2).unwrap();
        Standardizer::<f64>::fit(&ds).unwrap();
    }

    #[test]
    fn rejects_bad_counts() {
        assert!(matches!(
            generate_synthetic_trajectories(0, 10, 1),
            Err(DataError::InvalidCount(_))
        ));
        assert!(matches!(
            generate_synthetic_trajectories(1, 1, 1),
            Err(DataError::InvalidCount(_))
        ));
    }

    #[test]
    fn step_moves_north_lat_only() {
        let (lat, lon) = step(41.0, 29.0, 0.0, 111.32);
        assert!((lat - 41.001).abs() < 1e-9);
        assert!((lon - 29.0).abs() < 1e-12);
    }
}
