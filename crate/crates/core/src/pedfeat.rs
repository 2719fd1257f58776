//! Per-pedestrian features: speed statistics, path efficiency, orientation
//! distribution and local density exposure.
//!
//! Stationary pedestrians (stop fraction above the configured threshold) get
//! no feature row but still occupy space: they are counted by the density
//! features of everyone else.

use std::collections::HashMap;

use crate::config::Thresholds;
use crate::error::{Error, Result};
use crate::kinematics::{
    endpoint_distance, heading_angle, path_length, split_trajlets, SpeedSeries, Trajlet,
};
use crate::stats;
use crate::trajstore::{AgentKind, SceneMeta, Track};

/// Number of orientation histogram bins (10 degrees each over [-180, 180)).
pub const ORIENTATION_BINS: usize = 36;

/// Feature row for one non-stationary pedestrian.
#[derive(Debug, Clone, PartialEq)]
pub struct PedestrianFeatures {
    pub dataset_id: String,
    pub scene_id: String,
    pub agent_id: String,
    /// Mean speed (m/s).
    pub mean_speed: f64,
    /// Fraction of speed samples below the stop threshold.
    pub stop_fraction: f64,
    /// Population variance of the speed series ((m/s)^2).
    pub variability: f64,
    /// Summed trajlet endpoint distances over summed trajlet path lengths.
    pub path_efficiency: f64,
    /// Mean pedestrians per square meter over the frames the subject is present.
    pub avg_density: f64,
    /// Same, counting only pedestrians standing at that frame.
    pub avg_standing_density: f64,
}

/// Mean of the speed samples.
pub fn mean_speed(series: &SpeedSeries) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Invalid("mean_speed of an empty speed series".into()));
    }
    let speeds: Vec<f64> = series.speeds().collect();
    Ok(stats::mean(&speeds))
}

/// Fraction of samples strictly below `threshold`.
pub fn stop_fraction(series: &SpeedSeries, threshold: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Invalid("stop_fraction of an empty speed series".into()));
    }
    let stopped = series.speeds().filter(|&v| v < threshold).count();
    Ok(stopped as f64 / series.len() as f64)
}

/// Population variance of the speed samples: (1/n) * sum((v - mean)^2).
pub fn variability(series: &SpeedSeries) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Invalid("variability of an empty speed series".into()));
    }
    let speeds: Vec<f64> = series.speeds().collect();
    let m = stats::mean(&speeds);
    Ok(speeds.iter().map(|v| (v - m).powi(2)).sum::<f64>() / speeds.len() as f64)
}

/// A pedestrian is stationary when its stop fraction exceeds the threshold
/// (strictly).
pub fn is_stationary(series: &SpeedSeries, thresholds: &Thresholds) -> Result<bool> {
    Ok(stop_fraction(series, thresholds.ped_stop_speed_ms)? > thresholds.stationary_stop_fraction)
}

/// Ratio of summed trajlet endpoint distances to summed trajlet path lengths.
/// A track that covers no distance at all gets efficiency 1 by convention.
pub fn path_efficiency(track: &Track, window_s: f64) -> Result<f64> {
    let trajlets = split_trajlets(&track.points, window_s)?;
    let mut endpoint_sum = 0.0;
    let mut path_sum = 0.0;
    for t in &trajlets {
        endpoint_sum += endpoint_distance(t.points);
        path_sum += path_length(t.points);
    }
    if path_sum == 0.0 {
        return Ok(1.0);
    }
    Ok(endpoint_sum / path_sum)
}

/// Histogram of trajlet headings over 36 ten-degree bins spanning [-180, 180).
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationDistribution {
    pub counts: [u64; ORIENTATION_BINS],
    /// Trajlets whose displacement was exactly zero (heading undefined).
    pub undefined: u64,
}

impl Default for OrientationDistribution {
    fn default() -> Self {
        OrientationDistribution { counts: [0; ORIENTATION_BINS], undefined: 0 }
    }
}

impl OrientationDistribution {
    pub fn bin_of(heading_rad: f64) -> usize {
        let deg = heading_rad.to_degrees();
        let idx = ((deg + 180.0) / 10.0).floor() as isize;
        idx.clamp(0, ORIENTATION_BINS as isize - 1) as usize
    }

    pub fn add_trajlet(&mut self, trajlet: &Trajlet<'_>) {
        match heading_angle(trajlet.points) {
            Some(h) => self.counts[Self::bin_of(h)] += 1,
            None => self.undefined += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Shannon entropy in nats; empty bins are ignored.
    pub fn entropy_nats(&self) -> Result<f64> {
        if self.total() == 0 {
            return Err(Error::Invalid(
                "orientation entropy needs at least one trajlet with a defined heading".into(),
            ));
        }
        Ok(stats::shannon_entropy(&self.counts))
    }
}

/// Entropy of the heading distribution of a set of trajlets (normally: all
/// trajlets of a dataset's non-stationary pedestrians).
pub fn orientation_entropy(trajlets: &[Trajlet<'_>]) -> Result<f64> {
    let mut dist = OrientationDistribution::default();
    for t in trajlets {
        dist.add_trajlet(t);
    }
    dist.entropy_nats()
}

/// Per-frame pedestrian counts for one scene, used for density features.
#[derive(Debug, Clone)]
pub struct SceneFrameIndex {
    area_m2: f64,
    ped_count: HashMap<u64, u32>,
    standing_count: HashMap<u64, u32>,
}

impl SceneFrameIndex {
    /// Count all pedestrians (stationary included) per frame. A pedestrian is
    /// standing at a frame when its instantaneous speed there is below the
    /// pedestrian stop threshold; the final point of a track carries the last
    /// speed sample.
    pub fn build(tracks: &[&Track], meta: &SceneMeta, ped_stop_speed_ms: f64) -> SceneFrameIndex {
        let mut ped_count: HashMap<u64, u32> = HashMap::new();
        let mut standing_count: HashMap<u64, u32> = HashMap::new();
        for track in tracks {
            if track.kind != AgentKind::Pedestrian || track.points.len() < 2 {
                continue;
            }
            let n = track.points.len();
            for (i, point) in track.points.iter().enumerate() {
                *ped_count.entry(point.frame).or_default() += 1;
                let (a, b) = if i + 1 < n {
                    (&track.points[i], &track.points[i + 1])
                } else {
                    (&track.points[n - 2], &track.points[n - 1])
                };
                let speed = a.distance(b) / (b.time_s - a.time_s);
                if speed < ped_stop_speed_ms {
                    *standing_count.entry(point.frame).or_default() += 1;
                }
            }
        }
        SceneFrameIndex { area_m2: meta.area_m2, ped_count, standing_count }
    }

    pub fn pedestrians_at(&self, frame: u64) -> u32 {
        self.ped_count.get(&frame).copied().unwrap_or(0)
    }

    pub fn standing_at(&self, frame: u64) -> u32 {
        self.standing_count.get(&frame).copied().unwrap_or(0)
    }
}

/// Average pedestrian density and standing-pedestrian density around the
/// frames where `track` is present. The subject itself is included in the
/// counts.
pub fn density_features(track: &Track, index: &SceneFrameIndex) -> Result<(f64, f64)> {
    if track.points.is_empty() {
        return Err(Error::Invalid("density features of an empty track".into()));
    }
    let mut dens_sum = 0.0;
    let mut standing_sum = 0.0;
    for p in &track.points {
        dens_sum += index.pedestrians_at(p.frame) as f64 / index.area_m2;
        standing_sum += index.standing_at(p.frame) as f64 / index.area_m2;
    }
    let n = track.points.len() as f64;
    Ok((dens_sum / n, standing_sum / n))
}
