//! Per-track kinematics: forward-difference speeds, trajlet segmentation,
//! path geometry and headings.

use crate::error::{Error, Result};
use crate::trajstore::{Track, TrackPoint};

/// Forward-difference speed samples; sample `i` covers the step from point
/// `i` to point `i+1` and carries the leading point's timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedSeries {
    samples: Vec<(f64, f64)>,
}

impl SpeedSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn speeds(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|&(_, v)| v)
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }
}

/// A contiguous run of a track's points covering at most the trajlet window.
///
/// Consecutive trajlets share their boundary point: each trajlet after the
/// first starts at the previous one's last point, so summed trajlet path
/// lengths equal the parent track's path length.
#[derive(Debug, Clone, Copy)]
pub struct Trajlet<'a> {
    pub points: &'a [TrackPoint],
}

impl Trajlet<'_> {
    pub fn duration_s(&self) -> f64 {
        self.points.last().unwrap().time_s - self.points.first().unwrap().time_s
    }
}

/// Speeds from consecutive point pairs: |p[i+1] - p[i]| / (t[i+1] - t[i]).
pub fn speed_series(track: &Track) -> Result<SpeedSeries> {
    if track.points.len() < 2 {
        return Err(Error::Invalid(format!(
            "track {}/{}: speed series needs at least two points",
            track.scene_id, track.agent_id
        )));
    }
    let mut samples = Vec::with_capacity(track.points.len() - 1);
    for pair in track.points.windows(2) {
        let dt = pair[1].time_s - pair[0].time_s;
        if dt <= 0.0 {
            return Err(Error::Invalid(format!(
                "track {}/{}: non-increasing timestamps at frame {}",
                track.scene_id, track.agent_id, pair[1].frame
            )));
        }
        samples.push((pair[0].time_s, pair[0].distance(&pair[1]) / dt));
    }
    Ok(SpeedSeries { samples })
}

/// Greedy left-to-right segmentation into maximal windows of duration at most
/// `window_s`. Every trajlet has at least two points; a single inter-sample
/// gap longer than the window yields a two-point trajlet spanning that gap.
pub fn split_trajlets(points: &[TrackPoint], window_s: f64) -> Result<Vec<Trajlet<'_>>> {
    if points.len() < 2 {
        return Err(Error::Invalid("trajlet segmentation needs at least two points".into()));
    }
    if !window_s.is_finite() || window_s <= 0.0 {
        return Err(Error::Invalid(format!("trajlet window must be positive, got {window_s}")));
    }
    let mut trajlets = Vec::new();
    let mut start = 0;
    while start < points.len() - 1 {
        let limit = points[start].time_s + window_s;
        let mut end = start + 1;
        while end + 1 < points.len() && points[end + 1].time_s <= limit {
            end += 1;
        }
        trajlets.push(Trajlet { points: &points[start..=end] });
        start = end;
    }
    Ok(trajlets)
}

/// Sum of consecutive point distances.
pub fn path_length(points: &[TrackPoint]) -> f64 {
    points.windows(2).map(|pair| pair[0].distance(&pair[1])).sum()
}

/// Straight-line distance between the first and last point.
pub fn endpoint_distance(points: &[TrackPoint]) -> f64 {
    match (points.first(), points.last()) {
        (Some(a), Some(b)) if points.len() >= 2 => a.distance(b),
        _ => 0.0,
    }
}

/// Direction of the first-to-last displacement, in radians within
/// [-pi, pi). `None` when the displacement is exactly zero.
pub fn heading_angle(points: &[TrackPoint]) -> Option<f64> {
    let (first, last) = (points.first()?, points.last()?);
    let (dx, dy) = (last.x - first.x, last.y - first.y);
    if dx == 0.0 && dy == 0.0 {
        return None;
    }
    let mut angle = dy.atan2(dx);
    if angle >= std::f64::consts::PI {
        angle = -std::f64::consts::PI;
    }
    Some(angle)
}
