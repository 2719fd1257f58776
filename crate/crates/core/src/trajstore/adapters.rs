//! Adapters turning external trajectory formats into a [`DatasetBundle`].
//!
//! Two adapters cover the recording styles we ingest:
//! - [`adapt_sdd`]: campus-drone annotation files (`track_id xmin ymin xmax
//!   ymax frame lost occluded generated "label"`), bounding-box centers mapped
//!   to world meters through a 3x3 homography, `lost == 1` rows dropped.
//! - [`adapt_generic`]: arbitrary per-row CSVs (road/shared-space exports)
//!   described by a [`ColumnMap`]; positions must already be world meters.

use std::path::Path;

use crate::config::ColumnMap;
use crate::error::{Error, Result};

use super::{build_bundle, AgentKind, DatasetBundle, LoadReport, RawRow, SceneMeta};

/// Map a bbox-center label from an annotation file onto an agent kind.
/// Only pedestrians, cars and carts are mapped; everything else counts as
/// unrecognized and becomes `other`.
fn sdd_kind(label: &str) -> Option<AgentKind> {
    match label.to_ascii_lowercase().as_str() {
        "pedestrian" => Some(AgentKind::Pedestrian),
        "car" | "cart" => Some(AgentKind::Vehicle),
        _ => None,
    }
}

/// Lenient kind parser for generic CSV columns.
fn generic_kind(value: &str) -> Option<AgentKind> {
    match value.to_ascii_lowercase().as_str() {
        "pedestrian" | "ped" | "person" => Some(AgentKind::Pedestrian),
        "vehicle" | "car" | "cart" | "truck" | "bus" | "van" => Some(AgentKind::Vehicle),
        _ => None,
    }
}

/// Apply a row-major 3x3 homography to an image point.
fn apply_homography(m: &[f64; 9], x: f64, y: f64) -> Option<(f64, f64)> {
    let w = m[6] * x + m[7] * y + m[8];
    if w.abs() < 1e-12 {
        return None;
    }
    Some(((m[0] * x + m[1] * y + m[2]) / w, (m[3] * x + m[4] * y + m[5]) / w))
}

/// Read a campus-drone annotation file into a single-scene bundle.
pub fn adapt_sdd(
    path: &Path,
    meta: &SceneMeta,
    transform: &[f64; 9],
) -> Result<(DatasetBundle, LoadReport)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut report = LoadReport::default();
    let mut rows = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx as u64 + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = raw_line.split_whitespace().collect();
        if tokens.len() < 10 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 10 fields (track bbox frame flags label), got {}", tokens.len()),
            ));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            tokens[i]
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line, format!("bad {name} {:?}", tokens[i])))
        };
        let lost = tokens[6];
        if lost == "1" {
            report.lost_rows_dropped += 1;
            continue;
        }
        let frame: u64 = tokens[5]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad frame {:?}", tokens[5])))?;
        let cx = (num(1, "xmin")? + num(3, "xmax")?) / 2.0;
        let cy = (num(2, "ymin")? + num(4, "ymax")?) / 2.0;
        let (x, y) = apply_homography(transform, cx, cy).ok_or_else(|| {
            Error::parse(path, line, "homography maps bbox center to infinity")
        })?;
        let label = tokens[9..].join(" ");
        let label = label.trim_matches('"');
        let kind = match sdd_kind(label) {
            Some(kind) => kind,
            None => {
                report.unknown_labels += 1;
                AgentKind::Other
            }
        };
        rows.push(RawRow {
            line,
            dataset_id: meta.dataset_id.clone(),
            scene_id: meta.scene_id.clone(),
            agent_id: tokens[0].to_string(),
            kind,
            frame,
            x,
            y,
        });
    }

    if report.unknown_labels > 0 {
        report.warnings.push(format!(
            "{}: {} rows with unrecognized labels recorded as kind=other",
            path.display(),
            report.unknown_labels
        ));
    }
    let bundle = build_bundle(rows, vec![meta.clone()], path, &mut report)?;
    Ok((bundle, report))
}

/// Read an arbitrary header-ed CSV into a single-scene bundle using a column map.
pub fn adapt_generic(
    path: &Path,
    map: &ColumnMap,
    meta: &SceneMeta,
) -> Result<(DatasetBundle, LoadReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;

    let headers = reader.headers().map_err(|e| Error::parse(path, 1, e.to_string()))?;
    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Config(format!(
                "{}: column map names {:?} but the file has columns {:?}",
                path.display(),
                name,
                headers.iter().collect::<Vec<_>>().join(",")
            ))
        })
    };
    let id_col = find(&map.agent_id)?;
    let frame_col = find(&map.frame)?;
    let x_col = find(&map.x)?;
    let y_col = find(&map.y)?;
    let kind_col = match &map.kind {
        Some(name) => Some(find(name)?),
        None => None,
    };

    let mut report = LoadReport::default();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let frame: u64 = field(frame_col)
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad frame {:?}", field(frame_col))))?;
        let x: f64 = field(x_col)
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad x {:?}", field(x_col))))?;
        let y: f64 = field(y_col)
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad y {:?}", field(y_col))))?;
        let kind = match kind_col {
            Some(col) => match generic_kind(field(col)) {
                Some(kind) => kind,
                None => {
                    report.unknown_labels += 1;
                    AgentKind::Other
                }
            },
            None => map.default_kind,
        };
        rows.push(RawRow {
            line,
            dataset_id: meta.dataset_id.clone(),
            scene_id: meta.scene_id.clone(),
            agent_id: field(id_col).to_string(),
            kind,
            frame,
            x,
            y,
        });
    }

    if report.unknown_labels > 0 {
        report.warnings.push(format!(
            "{}: {} rows with unrecognized kind values recorded as kind=other",
            path.display(),
            report.unknown_labels
        ));
    }
    let bundle = build_bundle(rows, vec![meta.clone()], path, &mut report)?;
    Ok((bundle, report))
}
