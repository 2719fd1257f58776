//! Per-vehicle features and their dataset-level aggregation.
//!
//! Parked vehicles (mean speed below the parked threshold) contribute no
//! features; the dataset aggregate is the unweighted mean over the remaining
//! vehicles.

use crate::config::Thresholds;
use crate::error::{Error, Result};
use crate::kinematics::{speed_series, SpeedSeries};
use crate::pedfeat::{mean_speed, stop_fraction, variability};
use crate::trajstore::Track;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleFeatures {
    /// Mean speed (m/s).
    pub veh_mean_speed: f64,
    /// Fraction of speed samples below the vehicle stop threshold.
    pub veh_stop_fraction: f64,
    /// Population variance of the speed series ((m/s)^2).
    pub veh_variability: f64,
}

/// Outcome of feature extraction for one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VehicleStatus {
    /// Mean speed below the parked threshold; excluded from aggregation.
    Parked,
    Moving(VehicleFeatures),
}

/// Features for one vehicle track, or `Parked` when it never really moves.
pub fn vehicle_features(track: &Track, thresholds: &Thresholds) -> Result<VehicleStatus> {
    let series = speed_series(track)?;
    vehicle_features_from_series(&series, thresholds)
}

pub fn vehicle_features_from_series(
    series: &SpeedSeries,
    thresholds: &Thresholds,
) -> Result<VehicleStatus> {
    let mean = mean_speed(series)?;
    if mean < thresholds.parked_mean_speed_ms {
        return Ok(VehicleStatus::Parked);
    }
    Ok(VehicleStatus::Moving(VehicleFeatures {
        veh_mean_speed: mean,
        veh_stop_fraction: stop_fraction(series, thresholds.veh_stop_speed_ms)?,
        veh_variability: variability(series)?,
    }))
}

/// Unweighted means over the non-parked vehicles of a dataset. Errors when
/// the dataset has none (such a dataset cannot enter the feature matrix).
pub fn dataset_vehicle_means(features: &[VehicleFeatures]) -> Result<(f64, f64, f64)> {
    if features.is_empty() {
        return Err(Error::Invalid(
            "no non-parked vehicles: exclude this dataset from clustering".into(),
        ));
    }
    let n = features.len() as f64;
    Ok((
        features.iter().map(|f| f.veh_mean_speed).sum::<f64>() / n,
        features.iter().map(|f| f.veh_stop_fraction).sum::<f64>() / n,
        features.iter().map(|f| f.veh_variability).sum::<f64>() / n,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajstore::{AgentKind, TrackPoint};

    fn vehicle_with_speeds(speeds: &[f64]) -> Track {
        let mut x = 0.0;
        let mut points = vec![TrackPoint { frame: 0, time_s: 0.0, x, y: 0.0 }];
        for (i, v) in speeds.iter().enumerate() {
            x += v;
            points.push(TrackPoint { frame: i as u64 + 1, time_s: i as f64 + 1.0, x, y: 0.0 });
        }
        Track {
            dataset_id: "d".into(),
            scene_id: "s".into(),
            agent_id: "v".into(),
            kind: AgentKind::Vehicle,
            points,
        }
    }

    #[test]
    fn creeping_vehicle_is_parked() {
        let track = vehicle_with_speeds(&[0.4, 0.3, 0.2]);
        let status = vehicle_features(&track, &Thresholds::default()).unwrap();
        assert_eq!(status, VehicleStatus::Parked);
    }

    #[test]
    fn stop_threshold_is_one_meter_per_second() {
        // Dyadic speeds so the forward differences are exact; 1.0 sits on the
        // boundary and must not count as a stop.
        let track = vehicle_with_speeds(&[0.75, 1.0, 1.25, 9.0]);
        let status = vehicle_features(&track, &Thresholds::default()).unwrap();
        let VehicleStatus::Moving(f) = status else { panic!("expected moving") };
        assert_eq!(f.veh_stop_fraction, 0.25);
        assert!((f.veh_mean_speed - 3.0).abs() < 1e-15);
    }

    #[test]
    fn parked_boundary_is_strict() {
        // Mean speed exactly at the threshold stays in the aggregate.
        let track = vehicle_with_speeds(&[0.5, 0.5]);
        let status = vehicle_features(&track, &Thresholds::default()).unwrap();
        assert!(matches!(status, VehicleStatus::Moving(_)));
    }

    #[test]
    fn dataset_means_are_unweighted() {
        let a = VehicleFeatures { veh_mean_speed: 2.0, veh_stop_fraction: 0.0, veh_variability: 1.0 };
        let b = VehicleFeatures { veh_mean_speed: 6.0, veh_stop_fraction: 0.5, veh_variability: 3.0 };
        let (m, s, v) = dataset_vehicle_means(&[a, b]).unwrap();
        assert_eq!((m, s, v), (4.0, 0.25, 2.0));
    }

    #[test]
    fn empty_dataset_means_error_mentions_exclusion() {
        let err = dataset_vehicle_means(&[]).unwrap_err();
        assert!(err.to_string().contains("exclude"));
    }
}
