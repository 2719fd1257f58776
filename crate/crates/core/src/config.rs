//! Run configuration: analysis thresholds and input descriptions.
//!
//! A [`RunConfig`] is normally deserialized from the JSON file passed to the
//! CLI via `--config`; every threshold has a default so a minimal config only
//! needs to list inputs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed/distance/time thresholds used across the feature pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// A pedestrian speed sample below this is a stop (m/s).
    pub ped_stop_speed_ms: f64,
    /// A vehicle speed sample below this is a stop (m/s).
    pub veh_stop_speed_ms: f64,
    /// Vehicles whose mean speed is below this are parked and excluded (m/s).
    pub parked_mean_speed_ms: f64,
    /// Pedestrians with stop fraction above this are stationary (excluded
    /// from per-pedestrian features, still counted in densities).
    pub stationary_stop_fraction: f64,
    /// Pedestrian-vehicle distance below which an interaction is active (m).
    pub interaction_distance_m: f64,
    /// Trajlet window duration (s).
    pub trajlet_window_s: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            ped_stop_speed_ms: 0.5,
            veh_stop_speed_ms: 1.0,
            parked_mean_speed_ms: 0.5,
            stationary_stop_fraction: 0.9,
            interaction_distance_m: 4.0,
            trajlet_window_s: 4.8,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ped_stop_speed_ms", self.ped_stop_speed_ms),
            ("veh_stop_speed_ms", self.veh_stop_speed_ms),
            ("parked_mean_speed_ms", self.parked_mean_speed_ms),
            ("interaction_distance_m", self.interaction_distance_m),
            ("trajlet_window_s", self.trajlet_window_s),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.stationary_stop_fraction.is_finite()
            || !(0.0..=1.0).contains(&self.stationary_stop_fraction)
        {
            return Err(Error::Config(format!(
                "stationary_stop_fraction must lie in [0, 1], got {}",
                self.stationary_stop_fraction
            )));
        }
        Ok(())
    }
}

/// How an input file should be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// Normalized trajectory CSV (see `trajstore::load_normalized`).
    Normalized,
    /// Campus-drone annotation file with bounding boxes and a homography.
    Sdd,
    /// Arbitrary per-row CSV described by a column map.
    Generic,
}

/// Column mapping for the generic adapter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    pub agent_id: String,
    pub frame: String,
    pub x: String,
    pub y: String,
    /// Optional source column holding the agent kind.
    #[serde(default)]
    pub kind: Option<String>,
    /// Kind assumed when no kind column is mapped (default: pedestrian).
    #[serde(default = "default_kind")]
    pub default_kind: crate::trajstore::AgentKind,
}

fn default_kind() -> crate::trajstore::AgentKind {
    crate::trajstore::AgentKind::Pedestrian
}

/// One input file plus the scene metadata needed to interpret it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    /// Adapter to use; a missing value falls back to the CLI `--adapter`
    /// flag, then to `normalized`.
    #[serde(default)]
    pub kind: Option<InputKind>,
    /// Trajectory file (CSV, or annotation text for the sdd adapter).
    pub path: PathBuf,
    /// Scene metadata JSON files. The normalized adapter accepts several;
    /// sdd and generic inputs describe exactly one scene.
    pub scenes: Vec<PathBuf>,
    /// Row-major 3x3 image-to-world homography (sdd adapter only).
    #[serde(default)]
    pub transform: Option<[f64; 9]>,
    /// Column mapping (generic adapter only).
    #[serde(default)]
    pub columns: Option<ColumnMap>,
}

/// Full run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub inputs: Vec<InputSpec>,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Seed for every randomized step (clustering restarts).
    #[serde(default)]
    pub seed: u64,
    /// k-means restarts.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Compute outlier fences per dataset instead of over the combined matrix.
    #[serde(default)]
    pub per_dataset_iqr: bool,
}

fn default_restarts() -> usize {
    50
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Vec::new(),
            thresholds: Thresholds::default(),
            seed: 0,
            restarts: default_restarts(),
            per_dataset_iqr: false,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.thresholds.validate()?;
        if cfg.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_thresholds() {
        let t = Thresholds::default();
        assert_eq!(t.ped_stop_speed_ms, 0.5);
        assert_eq!(t.veh_stop_speed_ms, 1.0);
        assert_eq!(t.parked_mean_speed_ms, 0.5);
        assert_eq!(t.stationary_stop_fraction, 0.9);
        assert_eq!(t.interaction_distance_m, 4.0);
        assert_eq!(t.trajlet_window_s, 4.8);
    }

    #[test]
    fn partial_threshold_json_fills_defaults() {
        let t: Thresholds = serde_json::from_str(r#"{"interaction_distance_m": 3.0}"#).unwrap();
        assert_eq!(t.interaction_distance_m, 3.0);
        assert_eq!(t.ped_stop_speed_ms, 0.5);
    }

    #[test]
    fn bad_threshold_rejected() {
        let t = Thresholds { trajlet_window_s: -1.0, ..Thresholds::default() };
        assert!(t.validate().is_err());
    }
}
