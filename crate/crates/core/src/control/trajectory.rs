use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Approach,
    /// In contact, not moving, waiting for the loop to settle.
    Settle,
    /// In contact; the part of the run the force-tracking metric covers.
    Stroke,
    Lift,
    Transit,
    Retract,
}

impl SegmentKind {
    pub fn in_contact(&self) -> bool {
        matches!(self, SegmentKind::Settle | SegmentKind::Stroke)
    }
}

/// Straight line in task space, `[x, y, z]` in metres, `z` positive into the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub duration: f64,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn length(&self) -> f64 {
        dist(&self.start, &self.end)
    }

    pub fn xy_length(&self) -> f64 {
        let d = [self.end[0] - self.start[0], self.end[1] - self.start[1]];
        d[0].hypot(d[1])
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub p: [f64; 3],
    pub v: [f64; 3],
    pub kind: SegmentKind,
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub segments: Vec<Segment>,
    /// Constant force command, N.
    pub force_cmd: f64,
}

impl Trajectory {
    pub fn new(segments: Vec<Segment>, force_cmd: f64) -> Result<Self, String> {
        if segments.is_empty() {
            return Err("trajectory needs at least one segment".into());
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.duration > 0.0) {
                return Err(format!("segment {i} has non-positive duration {}", s.duration));
            }
        }
        for (i, w) in segments.windows(2).enumerate() {
            if dist(&w[0].end, &w[1].start) > 1e-12 {
                return Err(format!("segments {i} and {} are not contiguous", i + 1));
            }
        }
        Ok(Self { segments, force_cmd })
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Command at time `t`; holds the final point after the end.
    pub fn point_at(&self, t: f64) -> TrajectoryPoint {
        let mut t0 = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if t < t0 + s.duration || i + 1 == self.segments.len() {
                let u = ((t - t0) / s.duration).clamp(0.0, 1.0);
                let moving = t - t0 <= s.duration;
                let mut p = [0.0; 3];
                let mut v = [0.0; 3];
                for k in 0..3 {
                    p[k] = s.start[k] + (s.end[k] - s.start[k]) * u;
                    v[k] = if moving { (s.end[k] - s.start[k]) / s.duration } else { 0.0 };
                }
                return TrajectoryPoint { p, v, kind: s.kind, segment: i };
            }
            t0 += s.duration;
        }
        unreachable!("trajectory has segments")
    }

    pub fn stroke_count(&self) -> usize {
        self.segments.iter().filter(|s| s.kind == SegmentKind::Stroke).count()
    }

    pub fn lift_count(&self) -> usize {
        self.segments.iter().filter(|s| s.kind == SegmentKind::Lift).count()
    }

    pub fn stroke_length(&self) -> f64 {
        self.segments.iter().filter(|s| s.kind == SegmentKind::Stroke).map(Segment::length).sum()
    }
}

/// Timing and heights shared by the canned paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    /// Z command while off the surface (negative = above it).
    pub hover_z: f64,
    /// Z command while grinding.
    pub contact_z: f64,
    pub approach_time: f64,
    pub settle_time: f64,
    /// m/s along a stroke.
    pub stroke_speed: f64,
    pub lift_time: f64,
    pub transit_time: f64,
}

impl PathParams {
    /// Contact command that balances `force_cmd` on a surface of the given stiffness.
    pub fn for_force(force_cmd: f64, env_stiffness: f64) -> Self {
        Self {
            hover_z: -5e-3,
            contact_z: force_cmd / env_stiffness,
            approach_time: 1.0,
            settle_time: 1.5,
            stroke_speed: 0.01,
            lift_time: 0.3,
            transit_time: 0.7,
        }
    }
}

/// Vertices of the letter A in the XY plane for a given height.
pub fn letter_a_vertices(scale: f64) -> [[f64; 2]; 5] {
    let half_base = 0.4 * scale;
    let bar_y = 0.4 * scale;
    let bar_half = half_base * (1.0 - bar_y / scale);
    [
        [-half_base, 0.0],
        [0.0, scale],
        [half_base, 0.0],
        [-bar_half, bar_y],
        [bar_half, bar_y],
    ]
}

/// Three strokes (left leg up, right leg up, crossbar) joined by two pen lifts,
/// with an approach at the start and a retract at the end.
pub fn letter_a_path(scale: f64, force_cmd: f64, params: &PathParams) -> Result<Trajectory, String> {
    if !(scale > 0.0) {
        return Err(format!("letter scale must be > 0, got {scale}"));
    }
    let [left, apex, right, bar_l, bar_r] = letter_a_vertices(scale);
    let strokes = [(left, apex), (right, apex), (bar_l, bar_r)];
    let (hz, cz) = (params.hover_z, params.contact_z);
    let at = |xy: [f64; 2], z: f64| [xy[0], xy[1], z];
    let mut segs = Vec::new();
    for (i, &(a, b)) in strokes.iter().enumerate() {
        if i > 0 {
            let prev = strokes[i - 1].1;
            segs.push(Segment { start: at(prev, cz), end: at(prev, hz), duration: params.lift_time, kind: SegmentKind::Lift });
            segs.push(Segment { start: at(prev, hz), end: at(a, hz), duration: params.transit_time, kind: SegmentKind::Transit });
        }
        segs.push(Segment { start: at(a, hz), end: at(a, cz), duration: params.approach_time, kind: SegmentKind::Approach });
        segs.push(Segment { start: at(a, cz), end: at(a, cz), duration: params.settle_time, kind: SegmentKind::Settle });
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        segs.push(Segment { start: at(a, cz), end: at(b, cz), duration: len / params.stroke_speed, kind: SegmentKind::Stroke });
    }
    let last = strokes[2].1;
    segs.push(Segment { start: at(last, cz), end: at(last, hz), duration: params.lift_time, kind: SegmentKind::Retract });
    Trajectory::new(segs, force_cmd)
}

/// Approach, settle, then hold (or slide by `lateral`) in contact for `hold_time`.
pub fn press_path(force_cmd: f64, params: &PathParams, offset_z: f64, hold_time: f64, lateral: [f64; 2]) -> Result<Trajectory, String> {
    let top = [0.0, 0.0, params.hover_z];
    let down = [0.0, 0.0, params.contact_z + offset_z];
    let end = [lateral[0], lateral[1], params.contact_z + offset_z];
    Trajectory::new(
        vec![
            Segment { start: top, end: down, duration: params.approach_time, kind: SegmentKind::Approach },
            Segment { start: down, end: down, duration: params.settle_time, kind: SegmentKind::Settle },
            Segment { start: down, end, duration: hold_time, kind: SegmentKind::Stroke },
        ],
        force_cmd,
    )
}
