//! Pedestrian-vehicle interaction events and the dataset-level features
//! derived from them.
//!
//! An event is a maximal run of commonly-observed frames on which a
//! pedestrian and a vehicle are closer than the interaction threshold; runs
//! are split only by an observed frame at or above the threshold, never by
//! missing frames. Candidate pairs per frame are pruned with a uniform grid
//! whose cell size equals the threshold, which cannot change the result: two
//! points in non-adjacent cells are at least one cell size apart.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::stats;
use crate::trajstore::{AgentKind, DatasetBundle, Track, TrackPoint};

/// Number of approach-angle histogram bins (10 degrees each over [0, 180]).
pub const APPROACH_BINS: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    PedestrianFirst,
    VehicleFirst,
}

impl Winner {
    pub fn as_str(self) -> &'static str {
        match self {
            Winner::PedestrianFirst => "pedestrian",
            Winner::VehicleFirst => "vehicle",
        }
    }
}

/// Where and when the two within-event polylines intersect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub point: [f64; 2],
    pub ped_time_s: f64,
    pub veh_time_s: f64,
    pub winner: Winner,
}

/// One maximal below-threshold episode between a pedestrian and a vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionEvent {
    pub dataset_id: String,
    pub scene_id: String,
    pub ped_id: String,
    pub veh_id: String,
    pub first_frame: u64,
    pub last_frame: u64,
    /// Unsigned angle between the two endpoint displacement vectors over the
    /// event span, in [0, 180] degrees; `None` when either agent does not
    /// move within the span.
    pub approach_angle_deg: Option<f64>,
    /// Present when the within-span polylines intersect.
    pub crossing: Option<Crossing>,
}

/// Detect all interaction events in a bundle, sorted by
/// (dataset, scene, ped, veh, first_frame).
pub fn find_interactions(bundle: &DatasetBundle, threshold_m: f64) -> Result<Vec<InteractionEvent>> {
    if !threshold_m.is_finite() || threshold_m <= 0.0 {
        return Err(Error::Invalid(format!(
            "interaction threshold must be positive, got {threshold_m}"
        )));
    }
    let mut events = Vec::new();
    let mut scene_ids: Vec<&str> = bundle.scenes.iter().map(|s| s.scene_id.as_str()).collect();
    scene_ids.sort_unstable();
    for scene_id in scene_ids {
        scene_interactions(bundle, scene_id, threshold_m, &mut events)?;
    }
    events.sort_by(|a, b| {
        (&a.dataset_id, &a.scene_id, &a.ped_id, &a.veh_id, a.first_frame)
            .cmp(&(&b.dataset_id, &b.scene_id, &b.ped_id, &b.veh_id, b.first_frame))
    });
    Ok(events)
}

fn scene_interactions(
    bundle: &DatasetBundle,
    scene_id: &str,
    threshold_m: f64,
    out: &mut Vec<InteractionEvent>,
) -> Result<()> {
    let peds: Vec<&Track> = bundle
        .tracks
        .iter()
        .filter(|t| t.scene_id == scene_id && t.kind == AgentKind::Pedestrian)
        .collect();
    let vehs: Vec<&Track> = bundle
        .tracks
        .iter()
        .filter(|t| t.scene_id == scene_id && t.kind == AgentKind::Vehicle)
        .collect();
    if peds.is_empty() || vehs.is_empty() {
        return Ok(());
    }

    // Per-frame occupancy, frames sorted for deterministic sweep order.
    let mut ped_at: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut veh_at: HashMap<u64, Vec<(usize, usize)>> = HashMap::new(); // (veh, point idx)
    let mut ped_point: HashMap<(usize, u64), usize> = HashMap::new();
    for (i, t) in peds.iter().enumerate() {
        for (k, p) in t.points.iter().enumerate() {
            ped_at.entry(p.frame).or_default().push(i);
            ped_point.insert((i, p.frame), k);
        }
    }
    for (j, t) in vehs.iter().enumerate() {
        for (k, p) in t.points.iter().enumerate() {
            veh_at.entry(p.frame).or_default().push((j, k));
        }
    }
    let mut frames: Vec<u64> = ped_at.keys().copied().collect();
    frames.sort_unstable();

    // Sweep frames, grid-hash vehicles, test pedestrians against the 3x3
    // neighborhood. Close frames per pair come out in increasing frame order.
    let mut close: HashMap<(usize, usize), Vec<u64>> = HashMap::new();
    let cell = threshold_m;
    let mut grid: HashMap<(i64, i64), Vec<(usize, usize)>> = HashMap::new();
    for &frame in &frames {
        let Some(vehicles) = veh_at.get(&frame) else { continue };
        grid.clear();
        for &(j, k) in vehicles {
            let p = &vehs[j].points[k];
            let key = ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
            grid.entry(key).or_default().push((j, k));
        }
        for &i in &ped_at[&frame] {
            let pi = &peds[i].points[ped_point[&(i, frame)]];
            let (cx, cy) = ((pi.x / cell).floor() as i64, (pi.y / cell).floor() as i64);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let Some(cands) = grid.get(&(cx + dx, cy + dy)) else { continue };
                    for &(j, k) in cands {
                        if pi.distance(&vehs[j].points[k]) < threshold_m {
                            close.entry((i, j)).or_default().push(frame);
                        }
                    }
                }
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = close.keys().copied().collect();
    pairs.sort_unstable();
    for (i, j) in pairs {
        let close_frames = &close[&(i, j)];
        let spans = split_spans(peds[i], vehs[j], close_frames);
        for (first, last) in spans {
            out.push(build_event(peds[i], vehs[j], first, last));
        }
    }
    Ok(())
}

/// Split a pair's below-threshold frames into maximal runs: a run ends only
/// at a commonly-observed frame that is not below threshold.
fn split_spans(ped: &Track, veh: &Track, close_frames: &[u64]) -> Vec<(u64, u64)> {
    let common = common_frames(ped, veh);
    let close: std::collections::HashSet<u64> = close_frames.iter().copied().collect();
    let mut spans = Vec::new();
    let mut run: Option<(u64, u64)> = None;
    for f in common {
        if close.contains(&f) {
            run = match run {
                Some((first, _)) => Some((first, f)),
                None => Some((f, f)),
            };
        } else if let Some(span) = run.take() {
            spans.push(span);
        }
    }
    if let Some(span) = run {
        spans.push(span);
    }
    spans
}

fn common_frames(a: &Track, b: &Track) -> Vec<u64> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.points.len() && j < b.points.len() {
        let (fa, fb) = (a.points[i].frame, b.points[j].frame);
        match fa.cmp(&fb) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(fa);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn span_points(track: &Track, first: u64, last: u64) -> &[TrackPoint] {
    let lo = track.points.partition_point(|p| p.frame < first);
    let hi = track.points.partition_point(|p| p.frame <= last);
    &track.points[lo..hi]
}

fn build_event(ped: &Track, veh: &Track, first: u64, last: u64) -> InteractionEvent {
    let ped_span = span_points(ped, first, last);
    let veh_span = span_points(veh, first, last);
    InteractionEvent {
        dataset_id: ped.dataset_id.clone(),
        scene_id: ped.scene_id.clone(),
        ped_id: ped.agent_id.clone(),
        veh_id: veh.agent_id.clone(),
        first_frame: first,
        last_frame: last,
        approach_angle_deg: approach_angle_deg(ped_span, veh_span),
        crossing: crossing_priority(ped_span, veh_span),
    }
}

/// Unsigned angle in [0, 180] degrees between the endpoint displacement
/// vectors of the two within-span polylines. `None` if either is zero.
pub fn approach_angle_deg(ped_span: &[TrackPoint], veh_span: &[TrackPoint]) -> Option<f64> {
    let disp = |pts: &[TrackPoint]| -> Option<(f64, f64)> {
        let (a, b) = (pts.first()?, pts.last()?);
        let d = (b.x - a.x, b.y - a.y);
        if d.0 == 0.0 && d.1 == 0.0 {
            None
        } else {
            Some(d)
        }
    };
    let (px, py) = disp(ped_span)?;
    let (vx, vy) = disp(veh_span)?;
    let dot = px * vx + py * vy;
    let norms = (px * px + py * py).sqrt() * (vx * vx + vy * vy).sqrt();
    let cos = (dot / norms).clamp(-1.0, 1.0);
    Some(cos.acos().to_degrees())
}

/// Intersect the two within-span polylines. With several intersections the
/// one the pedestrian reaches earliest wins; arrival times interpolate
/// linearly along the segment containing the intersection. Equal arrival
/// times go to the vehicle.
pub fn crossing_priority(ped_span: &[TrackPoint], veh_span: &[TrackPoint]) -> Option<Crossing> {
    let mut best: Option<Crossing> = None;
    for pw in ped_span.windows(2) {
        for vw in veh_span.windows(2) {
            let Some((t, u)) = segment_params(&pw[0], &pw[1], &vw[0], &vw[1]) else {
                continue;
            };
            let point = [
                pw[0].x + t * (pw[1].x - pw[0].x),
                pw[0].y + t * (pw[1].y - pw[0].y),
            ];
            let ped_time = pw[0].time_s + t * (pw[1].time_s - pw[0].time_s);
            let veh_time = vw[0].time_s + u * (vw[1].time_s - vw[0].time_s);
            let winner = if ped_time < veh_time {
                Winner::PedestrianFirst
            } else {
                Winner::VehicleFirst
            };
            if best.as_ref().map_or(true, |b| ped_time < b.ped_time_s) {
                best = Some(Crossing { point, ped_time_s: ped_time, veh_time_s: veh_time, winner });
            }
        }
    }
    best
}

/// Intersection parameters (t along p, u along q) of two segments, if they
/// intersect. Parallel and degenerate segments yield no intersection.
fn segment_params(
    p0: &TrackPoint,
    p1: &TrackPoint,
    q0: &TrackPoint,
    q1: &TrackPoint,
) -> Option<(f64, f64)> {
    let r = (p1.x - p0.x, p1.y - p0.y);
    let s = (q1.x - q0.x, q1.y - q0.y);
    let denom = r.0 * s.1 - r.1 * s.0;
    if denom == 0.0 {
        return None;
    }
    let d = (q0.x - p0.x, q0.y - p0.y);
    let t = (d.0 * s.1 - d.1 * s.0) / denom;
    let u = (d.0 * r.1 - d.1 * r.0) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u))
    } else {
        None
    }
}

/// Entropy in nats of the approach-angle histogram (18 ten-degree bins over
/// [0, 180]); events without a defined angle are skipped.
pub fn approach_entropy(events: &[InteractionEvent]) -> Result<f64> {
    let mut counts = [0u64; APPROACH_BINS];
    for e in events {
        if let Some(angle) = e.approach_angle_deg {
            counts[approach_bin(angle)] += 1;
        }
    }
    if counts.iter().sum::<u64>() == 0 {
        return Err(Error::Invalid(
            "approach entropy needs at least one event with a defined angle".into(),
        ));
    }
    Ok(stats::shannon_entropy(&counts))
}

pub fn approach_bin(angle_deg: f64) -> usize {
    let idx = (angle_deg / 10.0).floor() as isize;
    idx.clamp(0, APPROACH_BINS as isize - 1) as usize
}

/// Fraction of crossings the pedestrian made first; `None` without crossings.
pub fn priority_ratio(events: &[InteractionEvent]) -> Option<f64> {
    let crossings: Vec<&Crossing> = events.iter().filter_map(|e| e.crossing.as_ref()).collect();
    if crossings.is_empty() {
        return None;
    }
    let ped_first =
        crossings.iter().filter(|c| c.winner == Winner::PedestrianFirst).count();
    Some(ped_first as f64 / crossings.len() as f64)
}

/// Write events as CSV:
/// `scene_id,ped_id,veh_id,first_frame,last_frame,approach_angle_deg,crossing,winner`.
/// The angle field is empty when undefined; `winner` is empty without a
/// crossing.
pub fn write_events_csv(events: &[InteractionEvent], path: &std::path::Path) -> Result<()> {
    use std::io::Write as _;
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(
        file,
        "scene_id,ped_id,veh_id,first_frame,last_frame,approach_angle_deg,crossing,winner"
    )
    .map_err(|e| Error::io(path, e))?;
    for e in events {
        let angle = e.approach_angle_deg.map(|a| a.to_string()).unwrap_or_default();
        let (crossing, winner) = match &e.crossing {
            Some(c) => ("true", c.winner.as_str()),
            None => ("false", ""),
        };
        writeln!(
            file,
            "{},{},{},{},{},{},{},{}",
            e.scene_id, e.ped_id, e.veh_id, e.first_frame, e.last_frame, angle, crossing, winner
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Mean over frames (with at least one pedestrian) of the vehicle-to-
/// pedestrian count ratio, across all scenes of `dataset_id`.
pub fn v2p_ratio(bundle: &DatasetBundle, dataset_id: &str) -> Result<f64> {
    let mut sum = 0.0;
    let mut n_frames = 0u64;
    for meta in bundle.scenes.iter().filter(|s| s.dataset_id == dataset_id) {
        // Frame order must be fixed: float summation is order-sensitive, and
        // a hash map would make the last digit vary from run to run.
        let mut peds: BTreeMap<u64, u64> = BTreeMap::new();
        let mut vehs: BTreeMap<u64, u64> = BTreeMap::new();
        for track in bundle.tracks.iter().filter(|t| t.scene_id == meta.scene_id) {
            let counter = match track.kind {
                AgentKind::Pedestrian => &mut peds,
                AgentKind::Vehicle => &mut vehs,
                AgentKind::Other => continue,
            };
            for p in &track.points {
                *counter.entry(p.frame).or_default() += 1;
            }
        }
        for (frame, &ped_count) in &peds {
            if ped_count > 0 {
                let veh_count = vehs.get(frame).copied().unwrap_or(0);
                sum += veh_count as f64 / ped_count as f64;
                n_frames += 1;
            }
        }
    }
    if n_frames == 0 {
        return Err(Error::Invalid(format!(
            "dataset {dataset_id}: no frame contains a pedestrian"
        )));
    }
    Ok(sum / n_frames as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajstore::SceneMeta;

    fn track(kind: AgentKind, id: &str, pts: &[(u64, f64, f64)]) -> Track {
        Track {
            dataset_id: "d".into(),
            scene_id: "s".into(),
            agent_id: id.into(),
            kind,
            points: pts
                .iter()
                .map(|&(f, x, y)| TrackPoint { frame: f, time_s: f as f64, x, y })
                .collect(),
        }
    }

    fn bundle(tracks: Vec<Track>) -> DatasetBundle {
        DatasetBundle {
            scenes: vec![SceneMeta {
                scene_id: "s".into(),
                dataset_id: "d".into(),
                frame_rate_hz: 1.0,
                area_m2: 1000.0,
            }],
            tracks,
        }
    }

    #[test]
    fn head_on_pass_is_one_event() {
        // Pedestrian walks east, vehicle west along a parallel line 1 m away;
        // they pass each other around frame 10.
        let ped = track(
            AgentKind::Pedestrian,
            "p",
            &(0..=20).map(|f| (f, f as f64, 0.0)).collect::<Vec<_>>(),
        );
        let veh = track(
            AgentKind::Vehicle,
            "v",
            &(0..=20).map(|f| (f, 20.0 - f as f64, 1.0)).collect::<Vec<_>>(),
        );
        let events = find_interactions(&bundle(vec![ped, veh]), 4.0).unwrap();
        assert_eq!(events.len(), 1);
        let e = &events[0];
        // |dx| = |20 - 2f|, distance < 4 iff |dx| < sqrt(15) ~ 3.87: frames 9..11.
        assert_eq!((e.first_frame, e.last_frame), (9, 11));
        assert!((e.approach_angle_deg.unwrap() - 180.0).abs() < 1e-12);
        assert!(e.crossing.is_none());
    }

    #[test]
    fn above_threshold_frame_splits_events() {
        // Close at frames 0-1, far at frame 2, close again at 3-4.
        let ped = track(
            AgentKind::Pedestrian,
            "p",
            &[(0, 0.0, 0.0), (1, 0.0, 0.0), (2, 0.0, 50.0), (3, 0.0, 0.0), (4, 0.0, 0.0)],
        );
        let veh = track(
            AgentKind::Vehicle,
            "v",
            &[(0, 1.0, 0.0), (1, 1.0, 0.0), (2, 1.0, 0.0), (3, 1.0, 0.0), (4, 1.0, 0.0)],
        );
        let events = find_interactions(&bundle(vec![ped, veh]), 4.0).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!((events[0].first_frame, events[0].last_frame), (0, 1));
        assert_eq!((events[1].first_frame, events[1].last_frame), (3, 4));
    }

    #[test]
    fn missing_frames_do_not_split_events() {
        // The vehicle is unobserved at frame 2 but close on both sides.
        let ped = track(
            AgentKind::Pedestrian,
            "p",
            &[(0, 0.0, 0.0), (1, 0.0, 0.0), (2, 0.0, 0.0), (3, 0.0, 0.0)],
        );
        let veh = track(
            AgentKind::Vehicle,
            "v",
            &[(0, 1.0, 0.0), (1, 1.0, 0.0), (3, 1.0, 0.0)],
        );
        let events = find_interactions(&bundle(vec![ped, veh]), 4.0).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!((events[0].first_frame, events[0].last_frame), (0, 3));
    }

    #[test]
    fn perpendicular_crossing_times_and_winner() {
        // Pedestrian reaches the origin at t = 2, vehicle at t = 3.
        let ped = track(
            AgentKind::Pedestrian,
            "p",
            &[(0, 0.0, -2.0), (1, 0.0, -1.0), (2, 0.0, 0.0), (3, 0.0, 1.0)],
        );
        let veh = track(
            AgentKind::Vehicle,
            "v",
            &[(0, -3.0, 0.0), (1, -2.0, 0.0), (2, -1.0, 0.0), (3, 0.0, 0.0)],
        );
        let events = find_interactions(&bundle(vec![ped, veh]), 4.0).unwrap();
        assert_eq!(events.len(), 1);
        let c = events[0].crossing.expect("paths cross");
        assert_eq!(c.winner, Winner::PedestrianFirst);
        assert!((c.ped_time_s - 2.0).abs() < 1e-12);
        assert!((c.veh_time_s - 3.0).abs() < 1e-12);
        assert_eq!(c.point, [0.0, 0.0]);
        assert!((events[0].approach_angle_deg.unwrap() - 90.0).abs() < 1e-12);
    }

    #[test]
    fn interpolated_arrival_and_vehicle_tie_break() {
        // Both reach (0.5, 0) exactly at t = 0.5: vehicle wins ties.
        let ped = track(AgentKind::Pedestrian, "p", &[(0, 0.5, -0.5), (1, 0.5, 0.5)]);
        let veh = track(AgentKind::Vehicle, "v", &[(0, 0.0, 0.0), (1, 1.0, 0.0)]);
        let c = crossing_priority(&ped.points, &veh.points).expect("crossing");
        assert_eq!(c.winner, Winner::VehicleFirst);
        assert!((c.ped_time_s - 0.5).abs() < 1e-12);
        assert!((c.veh_time_s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn earliest_pedestrian_arrival_wins_among_multiple_intersections() {
        // The vehicle polyline zig-zags across the pedestrian's straight path
        // twice; the earlier pedestrian arrival decides.
        let ped = track(
            AgentKind::Pedestrian,
            "p",
            &[(0, 0.0, 0.0), (4, 4.0, 0.0)],
        );
        let veh = track(
            AgentKind::Vehicle,
            "v",
            &[(0, 1.0, -1.0), (1, 1.0, 1.0), (2, 3.0, 1.0), (3, 3.0, -1.0)],
        );
        let c = crossing_priority(&ped.points, &veh.points).expect("crossing");
        assert!((c.point[0] - 1.0).abs() < 1e-12);
        assert!((c.ped_time_s - 1.0).abs() < 1e-12);
        assert!((c.veh_time_s - 0.5).abs() < 1e-12);
        assert_eq!(c.winner, Winner::VehicleFirst);
    }

    #[test]
    fn stationary_pedestrian_interacts_but_never_crosses() {
        let ped = track(
            AgentKind::Pedestrian,
            "p",
            &(0..=10).map(|f| (f, 0.0, 0.0)).collect::<Vec<_>>(),
        );
        let veh = track(
            AgentKind::Vehicle,
            "v",
            &(0..=10).map(|f| (f, f as f64 - 5.0, 1.0)).collect::<Vec<_>>(),
        );
        let events = find_interactions(&bundle(vec![ped, veh]), 4.0).unwrap();
        assert_eq!(events.len(), 1);
        assert!(events[0].crossing.is_none());
        assert!(events[0].approach_angle_deg.is_none());
    }

    #[test]
    fn opposing_displacements_are_180_degrees() {
        let ped = track(AgentKind::Pedestrian, "p", &[(0, 0.0, 0.0), (1, -1.0, 0.0)]);
        let veh = track(AgentKind::Vehicle, "v", &[(0, 0.0, 1.0), (1, 1.0, 1.0)]);
        let angle = approach_angle_deg(&ped.points, &veh.points).unwrap();
        assert!((angle - 180.0).abs() < 1e-12);
    }

    #[test]
    fn approach_bin_clamps_180_into_last_bin() {
        assert_eq!(approach_bin(0.0), 0);
        assert_eq!(approach_bin(179.999), 17);
        assert_eq!(approach_bin(180.0), 17);
    }

    #[test]
    fn priority_ratio_counts_pedestrian_firsts() {
        let mk = |winner| InteractionEvent {
            dataset_id: "d".into(),
            scene_id: "s".into(),
            ped_id: "p".into(),
            veh_id: "v".into(),
            first_frame: 0,
            last_frame: 1,
            approach_angle_deg: None,
            crossing: Some(Crossing {
                point: [0.0, 0.0],
                ped_time_s: 0.0,
                veh_time_s: 0.0,
                winner,
            }),
        };
        let mut events = vec![mk(Winner::PedestrianFirst), mk(Winner::VehicleFirst)];
        assert_eq!(priority_ratio(&events), Some(0.5));
        events[0].crossing = None;
        assert_eq!(priority_ratio(&events), Some(0.0));
        events[1].crossing = None;
        assert_eq!(priority_ratio(&events), None);
    }

    #[test]
    fn v2p_counts_only_pedestrian_frames() {
        // Frames 0-4: 1 ped. Vehicle present frames 0-2 => ratios 1,1,1,0,0.
        let ped = track(
            AgentKind::Pedestrian,
            "p",
            &(0..=4).map(|f| (f, 0.0, 0.0)).collect::<Vec<_>>(),
        );
        let veh = track(
            AgentKind::Vehicle,
            "v",
            &(0..=2).map(|f| (f, 10.0, 10.0)).collect::<Vec<_>>(),
        );
        let r = v2p_ratio(&bundle(vec![ped, veh]), "d").unwrap();
        assert!((r - 0.6).abs() < 1e-15);
    }

    #[test]
    fn v2p_without_pedestrians_is_error() {
        let veh = track(AgentKind::Vehicle, "v", &[(0, 0.0, 0.0), (1, 1.0, 0.0)]);
        assert!(v2p_ratio(&bundle(vec![veh]), "d").is_err());
    }
}
