//! Deterministic synthetic scene generator.
//!
//! Produces bundles with a known ground-truth regime so the whole pipeline
//! can be exercised end to end. Two shipped presets contrast a "road"
//! regime (straight crossings and sidewalk walks, fast vehicles that rarely
//! yield) with a "campus" regime (roaming walks with frequent stops, slow
//! carts that usually yield).
//!
//! Positions are piecewise-linear schedules whose knots sit exactly on the
//! frame grid, so every frame-to-frame speed equals one leg's speed: stops
//! are exactly zero speed and walking legs never dip below their target.
//! Pedestrian–vehicle encounters are scheduled: each vehicle carries
//! conflict slots where a pedestrian is timed to cross just before (vehicle
//! yields and crawls) or just after (vehicle passes warily) the vehicle, so
//! crossing events land inside the proximity window with a known winner.
//!
//! The generator deliberately shares no speed or heading computation with
//! the measurement pipeline; it reasons only in schedules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajstore::{AgentKind, DatasetBundle, SceneMeta, Track, TrackPoint};

/// Crawl speed of a yielding vehicle approaching its conflict point.
const CRAWL_SPEED: f64 = 0.8;
/// Speed factor of a non-yielding vehicle passing a conflict point.
const WARY_FACTOR: f64 = 0.35;
/// Conflict slots per vehicle, as fractions of its route.
const SLOT_FRACTIONS: [f64; 2] = [0.35, 0.65];

pub const ROAD_PRESET_JSON: &str = include_str!("../presets/road.json");
pub const CAMPUS_PRESET_JSON: &str = include_str!("../presets/campus.json");

/// Allowed walking directions: a finite set of angles in degrees, or free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Headings {
    /// The literal string "free".
    Free(FreeTag),
    Set(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreeTag {
    Free,
}

impl Headings {
    pub fn free() -> Self {
        Headings::Free(FreeTag::Free)
    }

    pub fn is_free(&self) -> bool {
        matches!(self, Headings::Free(_))
    }
}

/// Everything that shapes one synthetic regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeParams {
    /// Base for dataset and scene ids.
    pub name: String,
    pub ped_speed_mean: f64,
    /// Expected stops per minute of walking.
    pub stop_rate: f64,
    pub stop_duration_s: f64,
    /// Uniform jitter (degrees) around each allowed direction; ignored when
    /// directions are free.
    pub heading_dispersion: f64,
    pub allowed_directions: Headings,
    pub veh_speed_mean: f64,
    /// Probability that the pedestrian gets priority at a scheduled
    /// encounter (the vehicle yields).
    pub yield_prob: f64,
    /// Moving pedestrians.
    pub ped_count: usize,
    pub veh_count: usize,
    /// Additional pedestrians who stand still for the whole scene.
    pub standing_ped_count: usize,
    pub area_m2: f64,
    pub frame_rate_hz: f64,
    pub duration_s: f64,
    pub seed: u64,
}

impl RegimeParams {
    pub fn road() -> Self {
        serde_json::from_str(ROAD_PRESET_JSON).expect("road preset parses")
    }

    pub fn campus() -> Self {
        serde_json::from_str(CAMPUS_PRESET_JSON).expect("campus preset parses")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let params: Self =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("regime params: {e}")))?;
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("regime params: {msg}")));
        if self.name.is_empty() {
            return bad("name must be non-empty");
        }
        if !(self.ped_speed_mean > 0.0) || !(self.veh_speed_mean > 0.0) {
            return bad("speed means must be positive");
        }
        if !(self.stop_rate >= 0.0) || !(self.stop_duration_s >= 0.0) {
            return bad("stop rate and duration must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.yield_prob) {
            return bad("yield_prob must be in [0, 1]");
        }
        if self.ped_count == 0 {
            return bad("ped_count must be at least 1");
        }
        if !(self.area_m2 >= 400.0) {
            return bad("area_m2 must be at least 400 (a 20 m square)");
        }
        if !(self.frame_rate_hz > 0.0) {
            return bad("frame_rate_hz must be positive");
        }
        if !(self.duration_s >= 20.0) {
            return bad("duration_s must be at least 20");
        }
        if !(self.heading_dispersion >= 0.0) {
            return bad("heading_dispersion must be non-negative");
        }
        if let Headings::Set(dirs) = &self.allowed_directions {
            if dirs.is_empty() {
                return bad("allowed_directions set must be non-empty");
            }
            if dirs.iter().any(|d| !d.is_finite()) {
                return bad("allowed_directions must be finite angles");
            }
        }
        Ok(())
    }
}

/// A piecewise-linear position schedule with frame-aligned knot times.
struct Schedule {
    knots: Vec<(f64, [f64; 2])>,
}

impl Schedule {
    fn position(&self, t: f64) -> [f64; 2] {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        if t >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        let i = k.partition_point(|&(kt, _)| kt <= t);
        let (t0, p0) = k[i - 1];
        let (t1, p1) = k[i];
        let f = (t - t0) / (t1 - t0);
        [p0[0] + f * (p1[0] - p0[0]), p0[1] + f * (p1[1] - p0[1])]
    }

    fn start(&self) -> f64 {
        self.knots[0].0
    }

    fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    /// Shift every knot by a whole-frame amount.
    fn shift(&mut self, dt: f64) {
        for (t, _) in &mut self.knots {
            *t += dt;
        }
    }
}

struct ScheduleBuilder {
    rate: f64,
    t: f64,
    pos: [f64; 2],
    knots: Vec<(f64, [f64; 2])>,
}

impl ScheduleBuilder {
    /// `t0` must already be frame-aligned.
    fn new(rate: f64, t0: f64, pos: [f64; 2]) -> Self {
        Self { rate, t: t0, pos, knots: vec![(t0, pos)] }
    }

    /// Walk to `target` at roughly `speed`, with the leg duration rounded to
    /// a whole number of frames (at least one).
    fn walk_to(&mut self, target: [f64; 2], speed: f64) -> &mut Self {
        let dist = ((target[0] - self.pos[0]).powi(2) + (target[1] - self.pos[1]).powi(2)).sqrt();
        let frames = ((dist / speed) * self.rate).round().max(1.0);
        self.t += frames / self.rate;
        self.pos = target;
        self.knots.push((self.t, target));
        self
    }

    /// Stand still for roughly `duration_s` (at least one frame).
    fn hold(&mut self, duration_s: f64) -> &mut Self {
        let frames = (duration_s * self.rate).round().max(1.0);
        self.t += frames / self.rate;
        self.knots.push((self.t, self.pos));
        self
    }

    /// Time of the most recently added knot.
    fn last_time(&self) -> f64 {
        self.t
    }

    fn build(self) -> Schedule {
        Schedule { knots: self.knots }
    }
}

/// Sample a schedule on the frame grid, clipped to `[0, duration]`.
fn sample_points(schedule: &Schedule, rate: f64, duration_s: f64) -> Vec<TrackPoint> {
    let first = (schedule.start().max(0.0) * rate).round() as i64;
    let last = (schedule.end().min(duration_s) * rate).round() as i64;
    let mut points = Vec::new();
    for f in first..=last {
        if f < 0 {
            continue;
        }
        let t = f as f64 / rate;
        let [x, y] = schedule.position(t);
        points.push(TrackPoint { frame: f as u64, time_s: t, x, y });
    }
    points
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let limit = (-lambda).exp();
    let mut k = 0usize;
    let mut p = 1.0;
    loop {
        p *= rng.gen::<f64>();
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

fn unit(angle_deg: f64) -> [f64; 2] {
    // Exact cardinal axes: sin(pi) is ~1e-16 in floats, and that wobble is
    // enough to scatter what should be a single heading across two bins.
    match angle_deg.rem_euclid(360.0) {
        r if r == 0.0 => [1.0, 0.0],
        r if r == 90.0 => [0.0, 1.0],
        r if r == 180.0 => [-1.0, 0.0],
        r if r == 270.0 => [0.0, -1.0],
        _ => {
            let r = angle_deg.to_radians();
            [r.cos(), r.sin()]
        }
    }
}

/// One scheduled conflict: where, when the vehicle arrives, who is timed to
/// pass first, and the vehicle's travel direction there.
struct Slot {
    point: [f64; 2],
    veh_time: f64,
    ped_first: bool,
    veh_angle_deg: f64,
}

/// Generate one scene. Deterministic in `params` (including the seed).
pub fn generate(params: &RegimeParams) -> Result<DatasetBundle> {
    params.validate()?;
    generate_scene(params, &params.name, &params.name, params.seed)
}

/// Generate `scenes` scenes as separate datasets `"{name}-{i:02}"`, with
/// seeds `seed + i`.
pub fn generate_batch(params: &RegimeParams, scenes: usize) -> Result<DatasetBundle> {
    params.validate()?;
    if scenes == 0 {
        return Err(Error::Config("scene count must be at least 1".into()));
    }
    let bundles = (0..scenes)
        .map(|i| {
            let id = format!("{}-{i:02}", params.name);
            generate_scene(params, &id, &id, params.seed.wrapping_add(i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    DatasetBundle::merge(bundles)
}

fn generate_scene(
    params: &RegimeParams,
    dataset_id: &str,
    scene_id: &str,
    seed: u64,
) -> Result<DatasetBundle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate = params.frame_rate_hz;
    let duration = params.duration_s;
    let side = params.area_m2.sqrt();
    let mid = side / 2.0;
    let quantize = |t: f64| (t * rate).round() / rate;

    let mut tracks: Vec<Track> = Vec::new();
    let mut push_track = |agent_id: String, kind: AgentKind, points: Vec<TrackPoint>| {
        if points.len() >= 2 {
            tracks.push(Track {
                dataset_id: dataset_id.to_string(),
                scene_id: scene_id.to_string(),
                agent_id,
                kind,
                points,
            });
        }
    };

    // --- Vehicles: straight lanes with slot-dependent slow zones. ---------
    let crawl_reach = 4.0_f64.min(0.10 * side);
    let wary_reach = 5.0_f64.min(0.12 * side);
    let mut slots: Vec<Slot> = Vec::new();
    for v in 0..params.veh_count {
        let eastbound = v % 2 == 0;
        let lane_y = if params.allowed_directions.is_free() {
            mid + rng.gen_range(-6.0_f64..6.0).clamp(-mid + 3.0, mid - 3.0)
        } else if eastbound {
            mid - 1.75
        } else {
            mid + 1.75
        };
        let speed = params.veh_speed_mean * rng.gen_range(0.9..1.1);
        let winners: Vec<bool> =
            SLOT_FRACTIONS.iter().map(|_| rng.gen_bool(params.yield_prob)).collect();

        // Route in route coordinates s ∈ [0, side]; x = s or side - s.
        let s_to_xy = |s: f64| -> [f64; 2] {
            if eastbound {
                [s, lane_y]
            } else {
                [side - s, lane_y]
            }
        };
        let mut builder = ScheduleBuilder::new(rate, 0.0, s_to_xy(0.0));
        let mut veh_slot_times = Vec::new();
        for (slot_i, frac) in SLOT_FRACTIONS.iter().enumerate() {
            let sc = frac * side;
            if winners[slot_i] {
                // Yield: crawl up to the conflict point.
                builder.walk_to(s_to_xy(sc - crawl_reach), speed);
                builder.walk_to(s_to_xy(sc), CRAWL_SPEED);
                veh_slot_times.push(builder.last_time());
            } else {
                // Pass first, but warily: slow through the zone.
                let wary = WARY_FACTOR * speed;
                builder.walk_to(s_to_xy(sc - wary_reach), speed);
                let t_enter = builder.last_time();
                builder.walk_to(s_to_xy(sc + wary_reach), wary);
                let t_leave = builder.last_time();
                // The conflict sits mid-zone; its time is exact on the leg.
                veh_slot_times.push(t_enter + 0.5 * (t_leave - t_enter));
            }
        }
        builder.walk_to(s_to_xy(side), speed);
        let travel = builder.last_time();
        let mut schedule = builder.build();
        let start = if params.veh_count > 1 {
            let span = (duration - travel).max(0.0);
            quantize(v as f64 * span / params.veh_count as f64)
        } else {
            0.0
        };
        schedule.shift(start);

        for (slot_i, frac) in SLOT_FRACTIONS.iter().enumerate() {
            slots.push(Slot {
                point: s_to_xy(frac * side),
                veh_time: veh_slot_times[slot_i] + start,
                ped_first: winners[slot_i],
                veh_angle_deg: if eastbound { 0.0 } else { 180.0 },
            });
        }
        push_track(format!("v{v:02}"), AgentKind::Vehicle, sample_points(&schedule, rate, duration));
    }

    // --- Pedestrians: crossers tied to slots, then walkers or roamers. ----
    let crosser_count = slots.len().min((params.ped_count * 2) / 5).max(usize::from(!slots.is_empty()));
    let crosser_count = crosser_count.min(params.ped_count);
    let stop_rate_hz = params.stop_rate / 60.0;

    for p in 0..params.ped_count {
        let speed = params.ped_speed_mean * rng.gen_range(0.9..1.1);
        if p < crosser_count {
            push_track(
                format!("p{p:02}"),
                AgentKind::Pedestrian,
                crosser_points(params, &mut rng, &slots[p], speed, p, rate, duration, quantize),
            );
        } else if params.allowed_directions.is_free() {
            push_track(
                format!("p{p:02}"),
                AgentKind::Pedestrian,
                roamer_points(params, &mut rng, speed, side, rate, duration, stop_rate_hz),
            );
        } else {
            push_track(
                format!("p{p:02}"),
                AgentKind::Pedestrian,
                walker_points(params, &mut rng, speed, side, mid, p, rate, duration, stop_rate_hz),
            );
        }
    }

    // --- Standing pedestrians: in the scene, out of every feature row. ----
    for s in 0..params.standing_ped_count {
        let pos = standing_position(params, &mut rng, side, mid);
        let mut builder = ScheduleBuilder::new(rate, 0.0, pos);
        builder.hold(duration);
        push_track(
            format!("s{s:02}"),
            AgentKind::Pedestrian,
            sample_points(&builder.build(), rate, duration),
        );
    }

    tracks.sort_by(|a, b| a.agent_id.cmp(&b.agent_id));
    let bundle = DatasetBundle {
        scenes: vec![SceneMeta {
            scene_id: scene_id.to_string(),
            dataset_id: dataset_id.to_string(),
            frame_rate_hz: rate,
            area_m2: params.area_m2,
        }],
        tracks,
    };
    bundle.validate()?;
    Ok(bundle)
}

/// A pedestrian timed through a conflict slot: straight line through the
/// slot point, stops only well before it, start time solved backward so the
/// crossing lands `g` seconds before or after the vehicle.
#[allow(clippy::too_many_arguments)]
fn crosser_points(
    params: &RegimeParams,
    rng: &mut ChaCha8Rng,
    slot: &Slot,
    speed: f64,
    index: usize,
    rate: f64,
    duration: f64,
    quantize: impl Fn(f64) -> f64,
) -> Vec<TrackPoint> {
    // Crossing direction: free regimes cut across at a wide random angle;
    // fixed-heading regimes pick a crossing-capable allowed direction.
    let angle_deg = match &params.allowed_directions {
        Headings::Free(_) => {
            let delta = rng.gen_range(25.0..155.0);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            slot.veh_angle_deg + sign * delta
        }
        Headings::Set(dirs) => {
            let capable: Vec<f64> = dirs
                .iter()
                .copied()
                .filter(|d| (d - slot.veh_angle_deg).to_radians().sin().abs() > 0.5)
                .collect();
            let base = if capable.is_empty() {
                slot.veh_angle_deg + 90.0
            } else {
                capable[index % capable.len()]
            };
            base + jitter(rng, params.heading_dispersion)
        }
    };
    let dir = unit(angle_deg);
    let d_pre = rng.gen_range(12.0..18.0);
    let d_post = rng.gen_range(6.0..10.0);
    let start = [slot.point[0] - d_pre * dir[0], slot.point[1] - d_pre * dir[1]];
    let end = [slot.point[0] + d_post * dir[0], slot.point[1] + d_post * dir[1]];

    // The pedestrian crosses g seconds before a yielding vehicle, or g
    // seconds behind a wary one.
    let g = if slot.ped_first { rng.gen_range(0.8..1.3) } else { rng.gen_range(0.7..0.9) };
    let cross_time = if slot.ped_first { slot.veh_time - g } else { slot.veh_time + g };

    // Stops land in the first 10–55% of the approach, far from the slot.
    let n_stops = poisson(rng, params.stop_rate / 60.0 * (d_pre + d_post) / speed);
    let mut stop_at: Vec<f64> = (0..n_stops).map(|_| rng.gen_range(0.10..0.55) * d_pre).collect();
    let stop_durs: Vec<f64> =
        (0..n_stops).map(|_| params.stop_duration_s * rng.gen_range(0.75..1.25)).collect();
    stop_at.sort_by(|a, b| a.total_cmp(b));

    let mut builder = ScheduleBuilder::new(rate, 0.0, start);
    for (s, dur) in stop_at.iter().zip(&stop_durs) {
        builder.walk_to([start[0] + s * dir[0], start[1] + s * dir[1]], speed);
        builder.hold(*dur);
    }
    builder.walk_to(slot.point, speed);
    let at_slot = builder.last_time();
    builder.walk_to(end, speed);
    let mut schedule = builder.build();
    schedule.shift(quantize(cross_time - at_slot));
    sample_points(&schedule, rate, duration)
}

/// Straight line across the area in one of the allowed directions, with
/// Poisson stops anywhere along it.
#[allow(clippy::too_many_arguments)]
fn walker_points(
    params: &RegimeParams,
    rng: &mut ChaCha8Rng,
    speed: f64,
    side: f64,
    mid: f64,
    index: usize,
    rate: f64,
    duration: f64,
    stop_rate_hz: f64,
) -> Vec<TrackPoint> {
    let dirs = match &params.allowed_directions {
        Headings::Set(d) => d.clone(),
        Headings::Free(_) => vec![rng.gen_range(-180.0..180.0)],
    };
    let angle = dirs[index % dirs.len()] + jitter(rng, params.heading_dispersion);
    let dir = unit(angle);

    // Anchor the line; horizontal walks keep off the vehicle lanes.
    let mut anchor = [rng.gen_range(2.0..side - 2.0), rng.gen_range(2.0..side - 2.0)];
    if params.veh_count > 0 && dir[1].abs() < 0.5 {
        let offset = rng.gen_range(4.2..(mid - 2.0).max(4.4));
        anchor[1] = if rng.gen_bool(0.5) { mid + offset } else { mid - offset };
        anchor[1] = anchor[1].clamp(1.0, side - 1.0);
    }
    let (t_lo, t_hi) = line_clip(anchor, dir, 0.5, side - 0.5);
    let start = [anchor[0] + t_lo * dir[0], anchor[1] + t_lo * dir[1]];
    let end = [anchor[0] + t_hi * dir[0], anchor[1] + t_hi * dir[1]];
    let length = t_hi - t_lo;

    let n_stops = poisson(rng, stop_rate_hz * length / speed);
    let mut stop_at: Vec<f64> = (0..n_stops).map(|_| rng.gen_range(0.1..0.9) * length).collect();
    stop_at.sort_by(|a, b| a.total_cmp(b));

    let start_time = (rng.gen_range(0.0..(duration * 0.6)) * rate).round() / rate;
    let mut builder = ScheduleBuilder::new(rate, start_time, start);
    for s in stop_at {
        builder.walk_to([start[0] + s * dir[0], start[1] + s * dir[1]], speed);
        builder.hold(params.stop_duration_s * rng.gen_range(0.75..1.25));
    }
    builder.walk_to(end, speed);
    sample_points(&builder.build(), rate, duration)
}

/// Waypoint roaming: legs of a few meters with bounded turns, per-leg speed
/// scaling, and chance stops, bouncing off the area edges until time is up.
fn roamer_points(
    params: &RegimeParams,
    rng: &mut ChaCha8Rng,
    speed: f64,
    side: f64,
    rate: f64,
    duration: f64,
    stop_rate_hz: f64,
) -> Vec<TrackPoint> {
    let mut pos = [rng.gen_range(2.0..side - 2.0), rng.gen_range(2.0..side - 2.0)];
    let mut angle = rng.gen_range(-180.0..180.0);
    let mut builder = ScheduleBuilder::new(rate, 0.0, pos);
    while builder.last_time() < duration {
        let leg = rng.gen_range(3.0..7.0);
        let leg_speed = speed * rng.gen_range(0.75..1.25);
        let dir = unit(angle);
        let mut next = [pos[0] + leg * dir[0], pos[1] + leg * dir[1]];
        if next[0] < 1.5 || next[0] > side - 1.5 || next[1] < 1.5 || next[1] > side - 1.5 {
            // Turn back toward the middle.
            let to_mid = (side / 2.0 - pos[1]).atan2(side / 2.0 - pos[0]);
            let retry = to_mid.to_degrees() + rng.gen_range(-45.0..45.0);
            let dir = unit(retry);
            next = [pos[0] + leg * dir[0], pos[1] + leg * dir[1]];
            angle = retry;
        }
        builder.walk_to(next, leg_speed);
        pos = next;
        // A stop between legs with the probability the stop rate implies.
        let leg_dur = leg / leg_speed;
        if params.stop_duration_s > 0.0 && rng.gen_bool((stop_rate_hz * leg_dur).clamp(0.0, 0.95)) {
            builder.hold(params.stop_duration_s * rng.gen_range(0.75..1.25));
        }
        angle += rng.gen_range(-90.0..90.0);
    }
    sample_points(&builder.build(), rate, duration)
}

fn standing_position(
    params: &RegimeParams,
    rng: &mut ChaCha8Rng,
    side: f64,
    mid: f64,
) -> [f64; 2] {
    let mut pos = [rng.gen_range(2.0..side - 2.0), rng.gen_range(2.0..side - 2.0)];
    // Keep out of the marked lanes when the regime has them.
    if !params.allowed_directions.is_free() && params.veh_count > 0 && (pos[1] - mid).abs() < 4.0 {
        pos[1] = if pos[1] >= mid { mid + 4.0 + (pos[1] - mid) } else { mid - 4.0 + (pos[1] - mid) };
        pos[1] = pos[1].clamp(1.0, side - 1.0);
    }
    pos
}

fn jitter(rng: &mut ChaCha8Rng, dispersion_deg: f64) -> f64 {
    if dispersion_deg > 0.0 {
        rng.gen_range(-dispersion_deg..dispersion_deg)
    } else {
        0.0
    }
}

/// Parameter range of `anchor + t * dir` inside the `[lo, hi]` square.
fn line_clip(anchor: [f64; 2], dir: [f64; 2], lo: f64, hi: f64) -> (f64, f64) {
    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::INFINITY;
    for axis in 0..2 {
        if dir[axis].abs() < 1e-12 {
            continue;
        }
        let a = (lo - anchor[axis]) / dir[axis];
        let b = (hi - anchor[axis]) / dir[axis];
        t_lo = t_lo.max(a.min(b));
        t_hi = t_hi.min(a.max(b));
    }
    if !t_lo.is_finite() || !t_hi.is_finite() || t_lo >= t_hi {
        (0.0, 1.0)
    } else {
        (t_lo, t_hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Thresholds;
    use crate::interact;
    use crate::kinematics;
    use crate::pedfeat;

    fn small(name: &str) -> RegimeParams {
        RegimeParams {
            name: name.into(),
            ped_speed_mean: 1.4,
            stop_rate: 0.0,
            stop_duration_s: 1.5,
            heading_dispersion: 0.0,
            allowed_directions: Headings::Set(vec![0.0, 180.0]),
            veh_speed_mean: 8.0,
            yield_prob: 0.25,
            ped_count: 20,
            veh_count: 0,
            standing_ped_count: 0,
            area_m2: 1600.0,
            frame_rate_hz: 10.0,
            duration_s: 40.0,
            seed: 77,
        }
    }

    #[test]
    fn same_seed_is_bit_identical_different_seed_is_not() {
        let params = RegimeParams::road();
        let a = generate(&params).unwrap();
        let b = generate(&params).unwrap();
        assert_eq!(a.tracks.len(), b.tracks.len());
        for (ta, tb) in a.tracks.iter().zip(&b.tracks) {
            assert_eq!(ta.agent_id, tb.agent_id);
            for (pa, pb) in ta.points.iter().zip(&tb.points) {
                assert_eq!(pa.x.to_bits(), pb.x.to_bits());
                assert_eq!(pa.y.to_bits(), pb.y.to_bits());
            }
        }
        let mut other = params.clone();
        other.seed += 1;
        let c = generate(&other).unwrap();
        let differs = a
            .tracks
            .iter()
            .zip(&c.tracks)
            .any(|(ta, tc)| {
                ta.points.len() != tc.points.len()
                    || ta.points.iter().zip(&tc.points).any(|(pa, pc)| pa.x != pc.x)
            });
        assert!(differs);
    }

    #[test]
    fn zero_stop_rate_means_zero_stop_fraction() {
        let params = small("nostop");
        let bundle = generate(&params).unwrap();
        let thresholds = Thresholds::default();
        for track in bundle.tracks.iter().filter(|t| t.kind == AgentKind::Pedestrian) {
            let series = kinematics::speed_series(track).unwrap();
            let sf = pedfeat::stop_fraction(&series, thresholds.ped_stop_speed_ms).unwrap();
            assert_eq!(sf, 0.0, "agent {} stopped", track.agent_id);
        }
    }

    #[test]
    fn two_exact_directions_give_ln2_orientation_entropy() {
        let params = small("twodir");
        let bundle = generate(&params).unwrap();
        let window = Thresholds::default().trajlet_window_s;
        let mut trajlets = Vec::new();
        for track in bundle.tracks.iter().filter(|t| t.kind == AgentKind::Pedestrian) {
            trajlets.extend(kinematics::split_trajlets(&track.points, window).unwrap());
        }
        let h = pedfeat::orientation_entropy(&trajlets).unwrap();
        assert!((h - 2.0_f64.ln()).abs() < 0.02, "entropy {h}");
    }

    #[test]
    fn higher_stop_rate_raises_mean_stop_fraction() {
        let mut lo = small("lo");
        lo.stop_rate = 0.5;
        lo.ped_count = 30;
        let mut hi = lo.clone();
        hi.name = "hi".into();
        hi.stop_rate = 5.0;
        let thresholds = Thresholds::default();
        let mean_sf = |params: &RegimeParams| {
            let bundle = generate(params).unwrap();
            let peds: Vec<f64> = bundle
                .tracks
                .iter()
                .filter(|t| t.kind == AgentKind::Pedestrian)
                .map(|t| {
                    let s = kinematics::speed_series(t).unwrap();
                    pedfeat::stop_fraction(&s, thresholds.ped_stop_speed_ms).unwrap()
                })
                .collect();
            peds.iter().sum::<f64>() / peds.len() as f64
        };
        assert!(mean_sf(&hi) > mean_sf(&lo) + 0.05);
    }

    #[test]
    fn presets_parse_and_validate() {
        let road = RegimeParams::road();
        road.validate().unwrap();
        assert!(!road.allowed_directions.is_free());
        assert!(road.veh_speed_mean > RegimeParams::campus().veh_speed_mean);
        let campus = RegimeParams::campus();
        campus.validate().unwrap();
        assert!(campus.allowed_directions.is_free());
        assert!(campus.stop_rate > road.stop_rate);
        assert!(campus.yield_prob > road.yield_prob);
    }

    #[test]
    fn batch_yields_one_dataset_per_scene() {
        let mut params = small("batch");
        params.ped_count = 6;
        let bundle = generate_batch(&params, 3).unwrap();
        assert_eq!(bundle.scenes.len(), 3);
        let ids = bundle.dataset_ids();
        assert_eq!(ids, vec!["batch-00", "batch-01", "batch-02"]);
        bundle.validate().unwrap();
    }

    #[test]
    fn road_preset_schedules_detectable_crossings() {
        let params = RegimeParams::road();
        let bundle = generate(&params).unwrap();
        let thresholds = Thresholds::default();
        let events = interact::find_interactions(&bundle, thresholds.interaction_distance_m).unwrap();
        assert!(!events.is_empty());
        let crossings: Vec<_> = events.iter().filter_map(|e| e.crossing.as_ref()).collect();
        assert!(
            crossings.len() >= 6,
            "expected most of the scheduled encounters to cross, got {}",
            crossings.len()
        );
        // Vehicles rarely yield on the road preset.
        let ratio = interact::priority_ratio(&events).unwrap();
        assert!(ratio < 0.5, "road priority ratio {ratio}");
    }

    #[test]
    fn campus_preset_gives_pedestrians_priority() {
        let params = RegimeParams::campus();
        let bundle = generate(&params).unwrap();
        let thresholds = Thresholds::default();
        let events = interact::find_interactions(&bundle, thresholds.interaction_distance_m).unwrap();
        let ratio = interact::priority_ratio(&events).expect("campus crossings exist");
        assert!(ratio > 0.5, "campus priority ratio {ratio}");
    }

    #[test]
    fn standing_pedestrians_never_move() {
        let mut params = small("stand");
        params.standing_ped_count = 3;
        let bundle = generate(&params).unwrap();
        let standers: Vec<_> =
            bundle.tracks.iter().filter(|t| t.agent_id.starts_with('s')).collect();
        assert_eq!(standers.len(), 3);
        for t in standers {
            let first = &t.points[0];
            assert!(t.points.iter().all(|p| p.x == first.x && p.y == first.y));
            assert_eq!(t.points.len() as u64, (params.duration_s * params.frame_rate_hz) as u64 + 1);
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = small("bad");
        p.yield_prob = 1.5;
        assert!(p.validate().is_err());
        let mut p = small("bad");
        p.ped_speed_mean = 0.0;
        assert!(p.validate().is_err());
        let mut p = small("bad");
        p.allowed_directions = Headings::Set(vec![]);
        assert!(p.validate().is_err());
        let mut p = small("bad");
        p.area_m2 = 100.0;
        assert!(p.validate().is_err());
    }
}
