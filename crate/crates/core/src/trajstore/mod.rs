//! Trajectory data model, ingestion and validation.
//!
//! All downstream analysis works on a [`DatasetBundle`]: scene metadata plus
//! per-agent tracks in world coordinates (meters). Bundles are built through
//! [`load_normalized`] or one of the adapters in [`adapters`], all of which
//! funnel through the same validation (canonical ordering, duplicate-frame
//! rejection, short-track dropping).

mod csv_io;

pub mod adapters;

pub use csv_io::{load_normalized, write_normalized};

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Agent classification used throughout the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Pedestrian,
    Vehicle,
    Other,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Pedestrian => "pedestrian",
            AgentKind::Vehicle => "vehicle",
            AgentKind::Other => "other",
        }
    }

    /// Strict parser for the normalized CSV schema.
    pub fn from_normalized(s: &str) -> Option<AgentKind> {
        match s {
            "pedestrian" => Some(AgentKind::Pedestrian),
            "vehicle" => Some(AgentKind::Vehicle),
            "other" => Some(AgentKind::Other),
            _ => None,
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One observation of an agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub frame: u64,
    /// Seconds since frame 0 of the scene (`frame / frame_rate_hz`).
    pub time_s: f64,
    /// World x in meters.
    pub x: f64,
    /// World y in meters.
    pub y: f64,
}

impl TrackPoint {
    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn distance(&self, other: &TrackPoint) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// A single agent's trajectory within one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub dataset_id: String,
    pub scene_id: String,
    pub agent_id: String,
    pub kind: AgentKind,
    /// At least two points, strictly increasing in time.
    pub points: Vec<TrackPoint>,
}

impl Track {
    pub fn first_frame(&self) -> u64 {
        self.points.first().map(|p| p.frame).unwrap_or(0)
    }

    pub fn last_frame(&self) -> u64 {
        self.points.last().map(|p| p.frame).unwrap_or(0)
    }
}

/// Recording metadata for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneMeta {
    pub scene_id: String,
    pub dataset_id: String,
    pub frame_rate_hz: f64,
    pub area_m2: f64,
}

impl SceneMeta {
    pub fn from_file(path: &Path) -> Result<SceneMeta> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let meta: SceneMeta = serde_json::from_str(&text)
            .map_err(|e| Error::Parse { path: path.into(), line: 1, msg: e.to_string() })?;
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scene_id.is_empty() || self.dataset_id.is_empty() {
            return Err(Error::Invalid("scene_id and dataset_id must be non-empty".into()));
        }
        if !self.frame_rate_hz.is_finite() || self.frame_rate_hz <= 0.0 {
            return Err(Error::Invalid(format!(
                "scene {}: frame_rate_hz must be positive, got {}",
                self.scene_id, self.frame_rate_hz
            )));
        }
        if !self.area_m2.is_finite() || self.area_m2 <= 0.0 {
            return Err(Error::Invalid(format!(
                "scene {}: area_m2 must be positive, got {}",
                self.scene_id, self.area_m2
            )));
        }
        Ok(())
    }
}

/// Scenes plus tracks; the unit every pipeline stage consumes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetBundle {
    /// Sorted by (dataset_id, scene_id).
    pub scenes: Vec<SceneMeta>,
    /// Sorted by (dataset_id, scene_id, agent_id).
    pub tracks: Vec<Track>,
}

/// Ingestion side notes: anything dropped or coerced on the way in.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub warnings: Vec<String>,
    /// Tracks discarded for having fewer than two points.
    pub short_tracks_dropped: usize,
    /// Rows whose agent label was not recognized and became `other`.
    pub unknown_labels: usize,
    /// Rows dropped because the source flagged them as lost.
    pub lost_rows_dropped: usize,
}

impl DatasetBundle {
    pub fn scene(&self, scene_id: &str) -> Option<&SceneMeta> {
        self.scenes.iter().find(|s| s.scene_id == scene_id)
    }

    pub fn dataset_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.scenes.iter().map(|s| s.dataset_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Check every structural invariant; used after programmatic construction.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for meta in &self.scenes {
            meta.validate()?;
            if !seen.insert(meta.scene_id.clone()) {
                return Err(Error::Invalid(format!("duplicate scene_id {}", meta.scene_id)));
            }
        }
        for track in &self.tracks {
            let meta = self.scene(&track.scene_id).ok_or_else(|| {
                Error::Reference(format!(
                    "track {}/{} references unknown scene {}",
                    track.dataset_id, track.agent_id, track.scene_id
                ))
            })?;
            if meta.dataset_id != track.dataset_id {
                return Err(Error::Reference(format!(
                    "track {} in scene {} carries dataset {} but the scene belongs to {}",
                    track.agent_id, track.scene_id, track.dataset_id, meta.dataset_id
                )));
            }
            if track.points.len() < 2 {
                return Err(Error::Invalid(format!(
                    "track {}/{} has fewer than two points",
                    track.scene_id, track.agent_id
                )));
            }
            for pair in track.points.windows(2) {
                if pair[1].time_s <= pair[0].time_s {
                    return Err(Error::Invalid(format!(
                        "track {}/{} has non-increasing timestamps at frame {}",
                        track.scene_id, track.agent_id, pair[1].frame
                    )));
                }
            }
            if track.points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
                return Err(Error::Invalid(format!(
                    "track {}/{} has a non-finite position",
                    track.scene_id, track.agent_id
                )));
            }
        }
        Ok(())
    }

    /// Combine several bundles; scene ids and (scene, agent) pairs must stay unique.
    pub fn merge(bundles: Vec<DatasetBundle>) -> Result<DatasetBundle> {
        let mut scenes = Vec::new();
        let mut tracks = Vec::new();
        let mut scene_ids = std::collections::HashSet::new();
        for bundle in bundles {
            for meta in bundle.scenes {
                if !scene_ids.insert(meta.scene_id.clone()) {
                    return Err(Error::Config(format!(
                        "scene {} appears in more than one input",
                        meta.scene_id
                    )));
                }
                scenes.push(meta);
            }
            tracks.extend(bundle.tracks);
        }
        scenes.sort_by(|a, b| (&a.dataset_id, &a.scene_id).cmp(&(&b.dataset_id, &b.scene_id)));
        tracks.sort_by(|a, b| {
            (&a.dataset_id, &a.scene_id, &a.agent_id).cmp(&(&b.dataset_id, &b.scene_id, &b.agent_id))
        });
        let bundle = DatasetBundle { scenes, tracks };
        bundle.validate()?;
        Ok(bundle)
    }
}

/// One parsed source row, before grouping into tracks.
#[derive(Debug, Clone)]
pub(crate) struct RawRow {
    pub line: u64,
    pub dataset_id: String,
    pub scene_id: String,
    pub agent_id: String,
    pub kind: AgentKind,
    pub frame: u64,
    pub x: f64,
    pub y: f64,
}

/// Shared tail of every loader: resolve scenes, sort, reject duplicates,
/// derive timestamps, drop single-point tracks.
pub(crate) fn build_bundle(
    mut rows: Vec<RawRow>,
    scenes: Vec<SceneMeta>,
    source: &Path,
    report: &mut LoadReport,
) -> Result<DatasetBundle> {
    let mut by_id: HashMap<&str, &SceneMeta> = HashMap::new();
    for meta in &scenes {
        meta.validate()?;
        if by_id.insert(meta.scene_id.as_str(), meta).is_some() {
            return Err(Error::Config(format!(
                "scene metadata for {} supplied more than once",
                meta.scene_id
            )));
        }
    }

    for row in &rows {
        let meta = by_id.get(row.scene_id.as_str()).ok_or_else(|| {
            Error::Reference(format!(
                "{}:{}: scene {} has no scene metadata",
                source.display(),
                row.line,
                row.scene_id
            ))
        })?;
        if meta.dataset_id != row.dataset_id {
            return Err(Error::Reference(format!(
                "{}:{}: scene {} belongs to dataset {}, row says {}",
                source.display(),
                row.line,
                row.scene_id,
                meta.dataset_id,
                row.dataset_id
            )));
        }
        if !row.x.is_finite() || !row.y.is_finite() {
            return Err(Error::parse(source, row.line, "non-finite position"));
        }
    }

    rows.sort_by(|a, b| {
        (&a.dataset_id, &a.scene_id, &a.agent_id, a.frame, a.line)
            .cmp(&(&b.dataset_id, &b.scene_id, &b.agent_id, b.frame, b.line))
    });

    let mut tracks: Vec<Track> = Vec::new();
    let mut current: Option<Track> = None;
    for row in rows {
        let rate = by_id[row.scene_id.as_str()].frame_rate_hz;
        let point = TrackPoint {
            frame: row.frame,
            time_s: row.frame as f64 / rate,
            x: row.x,
            y: row.y,
        };
        let same_track = current.as_ref().is_some_and(|t| {
            t.scene_id == row.scene_id && t.agent_id == row.agent_id
        });
        if same_track {
            let track = current.as_mut().unwrap();
            if track.points.last().is_some_and(|p| p.frame == row.frame) {
                return Err(Error::parse(
                    source,
                    row.line,
                    format!("duplicate frame {} for agent {}", row.frame, row.agent_id),
                ));
            }
            if track.kind != row.kind {
                return Err(Error::parse(
                    source,
                    row.line,
                    format!(
                        "agent {} changes kind from {} to {}",
                        row.agent_id, track.kind, row.kind
                    ),
                ));
            }
            track.points.push(point);
        } else {
            if let Some(done) = current.take() {
                push_track(done, &mut tracks, report);
            }
            current = Some(Track {
                dataset_id: row.dataset_id,
                scene_id: row.scene_id,
                agent_id: row.agent_id,
                kind: row.kind,
                points: vec![point],
            });
        }
    }
    if let Some(done) = current.take() {
        push_track(done, &mut tracks, report);
    }

    let mut scenes = scenes;
    scenes.sort_by(|a, b| (&a.dataset_id, &a.scene_id).cmp(&(&b.dataset_id, &b.scene_id)));
    let bundle = DatasetBundle { scenes, tracks };
    bundle.validate()?;
    Ok(bundle)
}

fn push_track(track: Track, tracks: &mut Vec<Track>, report: &mut LoadReport) {
    if track.points.len() < 2 {
        report.short_tracks_dropped += 1;
        report.warnings.push(format!(
            "dropped single-point track {} in scene {}",
            track.agent_id, track.scene_id
        ));
    } else {
        tracks.push(track);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn meta(scene: &str, dataset: &str) -> SceneMeta {
        SceneMeta {
            scene_id: scene.into(),
            dataset_id: dataset.into(),
            frame_rate_hz: 10.0,
            area_m2: 100.0,
        }
    }

    fn row(agent: &str, frame: u64, x: f64) -> RawRow {
        RawRow {
            line: frame + 2,
            dataset_id: "d".into(),
            scene_id: "s".into(),
            agent_id: agent.into(),
            kind: AgentKind::Pedestrian,
            frame,
            x,
            y: 0.0,
        }
    }

    #[test]
    fn groups_rows_into_sorted_tracks() {
        let rows = vec![row("b", 1, 1.0), row("a", 0, 0.0), row("a", 1, 0.5), row("b", 0, 0.9)];
        let mut report = LoadReport::default();
        let bundle =
            build_bundle(rows, vec![meta("s", "d")], Path::new("mem"), &mut report).unwrap();
        assert_eq!(bundle.tracks.len(), 2);
        assert_eq!(bundle.tracks[0].agent_id, "a");
        assert_eq!(bundle.tracks[0].points[1].time_s, 0.1);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn duplicate_frame_names_line() {
        let mut dup = row("a", 1, 2.0);
        dup.line = 9;
        let rows = vec![row("a", 0, 0.0), row("a", 1, 1.0), dup];
        let mut report = LoadReport::default();
        let err = build_bundle(rows, vec![meta("s", "d")], Path::new("mem"), &mut report)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mem:9"), "{msg}");
        assert!(msg.contains("duplicate frame 1"), "{msg}");
    }

    #[test]
    fn missing_scene_metadata_is_reference_error() {
        let rows = vec![row("a", 0, 0.0), row("a", 1, 1.0)];
        let mut report = LoadReport::default();
        let err = build_bundle(rows, vec![meta("other", "d")], Path::new("mem"), &mut report)
            .unwrap_err();
        assert!(matches!(err, Error::Reference(_)));
    }

    #[test]
    fn single_point_track_dropped_with_warning() {
        let rows = vec![row("a", 0, 0.0), row("a", 1, 1.0), row("lone", 5, 3.0)];
        let mut report = LoadReport::default();
        let bundle =
            build_bundle(rows, vec![meta("s", "d")], Path::new("mem"), &mut report).unwrap();
        assert_eq!(bundle.tracks.len(), 1);
        assert_eq!(report.short_tracks_dropped, 1);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn merge_rejects_scene_collision() {
        let mk = |scene: &str| DatasetBundle {
            scenes: vec![meta(scene, "d")],
            tracks: Vec::new(),
        };
        assert!(DatasetBundle::merge(vec![mk("s"), mk("s")]).is_err());
        assert!(DatasetBundle::merge(vec![mk("s"), mk("t")]).is_ok());
    }
}
