//! Normalized trajectory CSV: `dataset_id,scene_id,agent_id,kind,frame,x_m,y_m`.
//!
//! Floats are written with the shortest representation that parses back to
//! the same bits, so a write/load round trip preserves positions exactly.

use std::path::Path;

use crate::error::{Error, Result};

use super::{build_bundle, AgentKind, DatasetBundle, LoadReport, RawRow, SceneMeta};

pub const NORMALIZED_HEADER: [&str; 7] =
    ["dataset_id", "scene_id", "agent_id", "kind", "frame", "x_m", "y_m"];

/// Load a normalized CSV. Scene metadata for every referenced scene must be
/// supplied alongside (it carries the frame rate that turns frame indices
/// into timestamps).
pub fn load_normalized(
    path: &Path,
    scenes: Vec<SceneMeta>,
) -> Result<(DatasetBundle, LoadReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;

    let headers = reader.headers().map_err(|e| Error::parse(path, 1, e.to_string()))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != NORMALIZED_HEADER {
        return Err(Error::parse(
            path,
            1,
            format!("expected header {:?}, got {:?}", NORMALIZED_HEADER.join(","), got.join(",")),
        ));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != NORMALIZED_HEADER.len() {
            return Err(Error::parse(path, line, format!("expected 7 fields, got {}", record.len())));
        }
        let field = |i: usize| record.get(i).unwrap_or("");
        let kind = AgentKind::from_normalized(field(3)).ok_or_else(|| {
            Error::parse(
                path,
                line,
                format!("kind must be pedestrian, vehicle or other, got {:?}", field(3)),
            )
        })?;
        let frame: u64 = field(4)
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad frame {:?}", field(4))))?;
        let x: f64 = field(5)
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad x_m {:?}", field(5))))?;
        let y: f64 = field(6)
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad y_m {:?}", field(6))))?;
        rows.push(RawRow {
            line,
            dataset_id: field(0).to_string(),
            scene_id: field(1).to_string(),
            agent_id: field(2).to_string(),
            kind,
            frame,
            x,
            y,
        });
    }

    let mut report = LoadReport::default();
    let bundle = build_bundle(rows, scenes, path, &mut report)?;
    Ok((bundle, report))
}

/// Write a bundle in the normalized schema, tracks in canonical order.
pub fn write_normalized(bundle: &DatasetBundle, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
    writer
        .write_record(NORMALIZED_HEADER)
        .map_err(|e| Error::Config(format!("write {}: {e}", path.display())))?;
    for track in &bundle.tracks {
        for p in &track.points {
            writer
                .write_record([
                    track.dataset_id.as_str(),
                    track.scene_id.as_str(),
                    track.agent_id.as_str(),
                    track.kind.as_str(),
                    &p.frame.to_string(),
                    &p.x.to_string(),
                    &p.y.to_string(),
                ])
                .map_err(|e| Error::Config(format!("write {}: {e}", path.display())))?;
        }
    }
    writer
        .flush()
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}
