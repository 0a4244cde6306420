//! Pattern ingestion and cut planning: load a normalized 2-D pattern, split
//! it into cut segments at notch points (turns too sharp for scissors to
//! follow), order the segments, and resample into an executable trajectory.
//!
//! Patterns live in normalized [0,1]² material coordinates; trajectories are
//! emitted in millimetres on the gauze.

use std::fmt;
use std::path::Path;

use nalgebra::Vector2;

use crate::geom;
use crate::parallel::map_indexed;

/// Turning angles sharper than this default split the pattern: scissors
/// cannot reverse into an acute turn.
pub const DEFAULT_THETA_MAX_DEG: f64 = 60.0;

/// Points closer than this are duplicates; first≈last marks a closed curve.
pub const CLOSURE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum PatternError {
    Parse { line: usize, content: String },
    OutOfRange { line: usize, x: f64, y: f64 },
    TooFewPoints { count: usize },
    SelfIntersecting,
    TooManySegments { count: usize, max: usize },
    NoSegments,
    InvalidStepLength { step_mm: f64 },
    InvalidScale { scale_mm: f64 },
    Io(String),
}

impl fmt::Display for PatternError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternError::Parse { line, content } => {
                write!(f, "pattern line {line}: cannot parse waypoint from {content:?}")
            }
            PatternError::OutOfRange { line, x, y } => {
                write!(f, "pattern line {line}: ({x}, {y}) outside the unit square")
            }
            PatternError::TooFewPoints { count } => {
                write!(f, "pattern needs at least 2 distinct waypoints, got {count}")
            }
            PatternError::SelfIntersecting => write!(f, "pattern is self-intersecting"),
            PatternError::TooManySegments { count, max } => {
                write!(f, "exhaustive ordering supports at most {max} segments, got {count}")
            }
            PatternError::NoSegments => write!(f, "no segments to order"),
            PatternError::InvalidStepLength { step_mm } => {
                write!(f, "step length must be positive, got {step_mm}")
            }
            PatternError::InvalidScale { scale_mm } => {
                write!(f, "pattern scale must be positive, got {scale_mm}")
            }
            PatternError::Io(msg) => write!(f, "pattern file: {msg}"),
        }
    }
}

impl std::error::Error for PatternError {}

/// A validated pattern: normalized waypoints, closure flag, and the
/// (always-false after validation) self-intersection flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub waypoints: Vec<Vector2<f64>>,
    pub closed: bool,
    pub self_intersecting: bool,
}

/// One directed run of pattern waypoints, still in normalized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub points: Vec<Vector2<f64>>,
}

/// Ordering mode for `order_segments`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderingMode {
    /// All orderings × directions, scored; ≤ 6 segments.
    Exhaustive,
    /// Nearest-endpoint chaining from segment 0.
    Greedy,
}

/// Maximum segment count for exhaustive ordering (6! · 2⁶ = 46 080 cases).
pub const EXHAUSTIVE_MAX_SEGMENTS: usize = 6;

/// The executable plan: directed, resampled segments in mm plus bookkeeping
/// for scoring and rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct CutTrajectory {
    /// Resampled directed segments; their concatenation is `waypoints_mm`.
    pub segments_mm: Vec<Vec<Vector2<f64>>>,
    /// Flat waypoint list χ(1..N), mm.
    pub waypoints_mm: Vec<Vector2<f64>>,
    /// Flat index where each segment (a new cut) begins; first entry is 0.
    pub notch_indices: Vec<usize>,
    /// The input pattern scaled to mm; closed patterns repeat the first
    /// point at the end so distance-to-polyline covers the closing edge.
    pub pattern_polyline_mm: Vec<Vector2<f64>>,
    pub pattern_closed: bool,
    pub step_length_mm: f64,
    /// Scale mapping normalized pattern coordinates to mm (sheet edge).
    pub scale_mm: f64,
}

impl Pattern {
    /// Validate a waypoint list: deduplicate, detect/apply closure, check
    /// range and self-intersection.
    pub fn from_points(
        points: Vec<Vector2<f64>>,
        force_closed: bool,
    ) -> Result<Pattern, PatternError> {
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite())
                || p.x < 0.0
                || p.x > 1.0
                || p.y < 0.0
                || p.y > 1.0
            {
                return Err(PatternError::OutOfRange { line: i + 1, x: p.x, y: p.y });
            }
        }
        let mut pts: Vec<Vector2<f64>> = Vec::with_capacity(points.len());
        for p in points {
            if pts.last().map_or(true, |q| (p - q).norm() > CLOSURE_EPS) {
                pts.push(p);
            }
        }
        let mut closed = force_closed;
        if pts.len() >= 2 && (pts[0] - pts[pts.len() - 1]).norm() <= CLOSURE_EPS {
            closed = true;
            pts.pop();
        }
        if pts.len() < 2 {
            return Err(PatternError::TooFewPoints { count: pts.len() });
        }
        if is_self_intersecting(&pts, closed) {
            return Err(PatternError::SelfIntersecting);
        }
        Ok(Pattern { waypoints: pts, closed, self_intersecting: false })
    }

    /// Parse the plain-text pattern format: one `x,y` pair per line,
    /// normalized coordinates; `#` comments and blank lines skipped; a line
    /// reading `closed` forces closure.
    pub fn parse(text: &str) -> Result<Pattern, PatternError> {
        let mut points = Vec::new();
        let mut force_closed = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.eq_ignore_ascii_case("closed") {
                force_closed = true;
                continue;
            }
            let mut it = line.split(',');
            let (Some(xs), Some(ys), None) = (it.next(), it.next(), it.next()) else {
                return Err(PatternError::Parse { line: idx + 1, content: raw.to_string() });
            };
            let (Ok(x), Ok(y)) = (xs.trim().parse::<f64>(), ys.trim().parse::<f64>()) else {
                return Err(PatternError::Parse { line: idx + 1, content: raw.to_string() });
            };
            points.push(Vector2::new(x, y));
        }
        Pattern::from_points(points, force_closed)
    }

    /// Total polyline length in normalized units (including the closing edge
    /// for closed patterns).
    pub fn length(&self) -> f64 {
        let open = geom::polyline_length(&self.waypoints);
        if self.closed {
            open + (self.waypoints[self.waypoints.len() - 1] - self.waypoints[0]).norm()
        } else {
            open
        }
    }
}

/// Load a pattern file from disk (see `Pattern::parse` for the format).
pub fn load_pattern(path: &Path) -> Result<Pattern, PatternError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| PatternError::Io(format!("{path:?}: {e}")))?;
    Pattern::parse(&text)
}

/// True when any two non-adjacent polyline edges intersect.
pub fn is_self_intersecting(points: &[Vector2<f64>], closed: bool) -> bool {
    let n = points.len();
    if n < 3 {
        return false;
    }
    let edge_count = if closed { n } else { n - 1 };
    let edge = |i: usize| (points[i], points[(i + 1) % n]);
    for i in 0..edge_count {
        for j in (i + 1)..edge_count {
            // Skip edges sharing a vertex: consecutive, and for closed
            // curves the first/last pair.
            if j == i + 1 || (closed && i == 0 && j == edge_count - 1) {
                continue;
            }
            let (a, b) = edge(i);
            let (c, d) = edge(j);
            if geom::segments_intersect(&a, &b, &c, &d) {
                return true;
            }
        }
    }
    false
}

/// Indices where the turning angle between consecutive polyline directions
/// exceeds `theta_max_deg`. Open curves consider interior waypoints only;
/// closed curves consider every waypoint (wrapping).
pub fn find_notches(pattern: &Pattern, theta_max_deg: f64) -> Vec<usize> {
    let pts = &pattern.waypoints;
    let n = pts.len();
    let mut notches = Vec::new();
    let turn_exceeds = |prev: Vector2<f64>, at: Vector2<f64>, next: Vector2<f64>| {
        let v1 = at - prev;
        let v2 = next - at;
        let angle = v1.perp(&v2).atan2(v1.dot(&v2)).abs().to_degrees();
        angle > theta_max_deg
    };
    if pattern.closed {
        for i in 0..n {
            if turn_exceeds(pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]) {
                notches.push(i);
            }
        }
    } else {
        for i in 1..n - 1 {
            if turn_exceeds(pts[i - 1], pts[i], pts[i + 1]) {
                notches.push(i);
            }
        }
    }
    notches
}

/// Split the pattern into cut segments at the notch indices. Closed curves
/// with no notch become a single loop starting (and ending) at waypoint 0;
/// closed curves with notches wrap from each notch to the next.
pub fn split_segments(pattern: &Pattern, notches: &[usize]) -> Vec<Segment> {
    let pts = &pattern.waypoints;
    let n = pts.len();
    if pattern.closed {
        if notches.is_empty() {
            let mut points: Vec<Vector2<f64>> = pts.clone();
            points.push(pts[0]);
            return vec![Segment { points }];
        }
        let k = notches.len();
        let mut segments = Vec::with_capacity(k);
        for s in 0..k {
            let from = notches[s];
            let to = notches[(s + 1) % k];
            let mut points = vec![pts[from]];
            let mut i = from;
            loop {
                i = (i + 1) % n;
                points.push(pts[i]);
                if i == to {
                    break;
                }
            }
            segments.push(Segment { points });
        }
        segments
    } else {
        let mut bounds = vec![0];
        bounds.extend_from_slice(notches);
        bounds.push(n - 1);
        bounds.dedup();
        let mut segments = Vec::new();
        for w in bounds.windows(2) {
            segments.push(Segment { points: pts[w[0]..=w[1]].to_vec() });
        }
        segments
    }
}

/// Apply an ordering to the segment list, reversing where flagged.
pub fn apply_ordering(segments: &[Segment], ordering: &[(usize, bool)]) -> Vec<Segment> {
    ordering
        .iter()
        .map(|&(idx, rev)| {
            let mut points = segments[idx].points.clone();
            if rev {
                points.reverse();
            }
            Segment { points }
        })
        .collect()
}

/// Order segments for cutting. Exhaustive mode evaluates every ordering ×
/// per-segment direction with `scorer` (higher is better) and returns the
/// argmax, ties broken by lexicographic order of the (index, reversed)
/// sequence; greedy mode chains nearest endpoints starting from segment 0
/// and ignores the scorer. `threads` bounds the concurrency of exhaustive
/// scoring; results do not depend on it.
pub fn order_segments<F>(
    segments: &[Segment],
    mode: OrderingMode,
    scorer: F,
    threads: usize,
) -> Result<Vec<(usize, bool)>, PatternError>
where
    F: Fn(&[(usize, bool)]) -> f64 + Sync,
{
    let n = segments.len();
    if n == 0 {
        return Err(PatternError::NoSegments);
    }
    match mode {
        OrderingMode::Exhaustive => {
            if n > EXHAUSTIVE_MAX_SEGMENTS {
                return Err(PatternError::TooManySegments {
                    count: n,
                    max: EXHAUSTIVE_MAX_SEGMENTS,
                });
            }
            let mut candidates = Vec::new();
            let mut prefix = Vec::with_capacity(n);
            let mut used = vec![false; n];
            enumerate_orderings(n, &mut prefix, &mut used, &mut candidates);
            let scores = map_indexed(&candidates, threads.max(1), |_, c| scorer(c));
            let mut best = 0usize;
            for (i, s) in scores.iter().enumerate() {
                // Strict improvement keeps the earliest (lexicographically
                // smallest) candidate on ties.
                if *s > scores[best] {
                    best = i;
                }
            }
            Ok(candidates.swap_remove(best))
        }
        OrderingMode::Greedy => {
            let mut order = vec![(0usize, false)];
            let mut used = vec![false; n];
            used[0] = true;
            let mut tip = *segments[0].points.last().unwrap();
            for _ in 1..n {
                let mut best: Option<(f64, usize, bool)> = None;
                for (idx, seg) in segments.iter().enumerate() {
                    if used[idx] {
                        continue;
                    }
                    for rev in [false, true] {
                        let entry =
                            if rev { *seg.points.last().unwrap() } else { seg.points[0] };
                        let d = (entry - tip).norm();
                        let better = match best {
                            None => true,
                            // Ties: lower index, then forward direction.
                            Some((bd, bi, brev)) => {
                                d < bd - 1e-15
                                    || ((d - bd).abs() <= 1e-15
                                        && (idx < bi || (idx == bi && !rev && brev)))
                            }
                        };
                        if better {
                            best = Some((d, idx, rev));
                        }
                    }
                }
                let (_, idx, rev) = best.unwrap();
                used[idx] = true;
                tip = if rev { segments[idx].points[0] } else { *segments[idx].points.last().unwrap() };
                order.push((idx, rev));
            }
            Ok(order)
        }
    }
}

/// Depth-first enumeration in lexicographic order of (index, reversed)
/// sequences: lowest index first, forward before reversed.
fn enumerate_orderings(
    n: usize,
    prefix: &mut Vec<(usize, bool)>,
    used: &mut [bool],
    out: &mut Vec<Vec<(usize, bool)>>,
) {
    if prefix.len() == n {
        out.push(prefix.clone());
        return;
    }
    for idx in 0..n {
        if used[idx] {
            continue;
        }
        used[idx] = true;
        for rev in [false, true] {
            prefix.push((idx, rev));
            enumerate_orderings(n, prefix, used, out);
            prefix.pop();
        }
        used[idx] = false;
    }
}

/// Resample a polyline (mm) at uniform arc length ≤ `step_mm`, interval
/// count `ceil(length/step)`, endpoints preserved.
fn resample(points_mm: &[Vector2<f64>], step_mm: f64) -> Vec<Vector2<f64>> {
    let length = geom::polyline_length(points_mm);
    if length <= 0.0 {
        return vec![points_mm[0]];
    }
    let intervals = (length / step_mm).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(intervals + 1);
    for k in 0..=intervals {
        let s = length * (k as f64) / (intervals as f64);
        out.push(geom::point_at_arclength(points_mm, s));
    }
    out
}

/// Build the executable trajectory: scale ordered segments to mm and
/// resample each at uniform arc-length `step_length_mm` (interval count
/// rounded up, so actual spacing never exceeds the step). Notch indices mark
/// where each segment starts in the flat list.
pub fn build_trajectory(
    pattern: &Pattern,
    ordered_segments: &[Segment],
    step_length_mm: f64,
    scale_mm: f64,
) -> Result<CutTrajectory, PatternError> {
    if !(step_length_mm > 0.0) || !step_length_mm.is_finite() {
        return Err(PatternError::InvalidStepLength { step_mm: step_length_mm });
    }
    if !(scale_mm > 0.0) || !scale_mm.is_finite() {
        return Err(PatternError::InvalidScale { scale_mm });
    }
    if ordered_segments.is_empty() {
        return Err(PatternError::NoSegments);
    }
    let mut segments_mm = Vec::with_capacity(ordered_segments.len());
    let mut waypoints_mm = Vec::new();
    let mut notch_indices = Vec::with_capacity(ordered_segments.len());
    for seg in ordered_segments {
        let scaled: Vec<Vector2<f64>> = seg.points.iter().map(|p| p * scale_mm).collect();
        let resampled = resample(&scaled, step_length_mm);
        notch_indices.push(waypoints_mm.len());
        waypoints_mm.extend_from_slice(&resampled);
        segments_mm.push(resampled);
    }
    let mut pattern_polyline_mm: Vec<Vector2<f64>> =
        pattern.waypoints.iter().map(|p| p * scale_mm).collect();
    if pattern.closed {
        let first = pattern_polyline_mm[0];
        pattern_polyline_mm.push(first);
    }
    Ok(CutTrajectory {
        segments_mm,
        waypoints_mm,
        notch_indices,
        pattern_polyline_mm,
        pattern_closed: pattern.closed,
        step_length_mm,
        scale_mm,
    })
}

/// Convenience: full planning pass from pattern to trajectory with the
/// greedy orderer (exhaustive ordering needs a scorer, which needs a
/// simulator; the harness wires that separately).
pub fn plan_greedy(
    pattern: &Pattern,
    theta_max_deg: f64,
    step_length_mm: f64,
    scale_mm: f64,
) -> Result<CutTrajectory, PatternError> {
    let notches = find_notches(pattern, theta_max_deg);
    let segments = split_segments(pattern, &notches);
    let ordering = order_segments(&segments, OrderingMode::Greedy, |_| 0.0, 1)?;
    let directed = apply_ordering(&segments, &ordering);
    build_trajectory(pattern, &directed, step_length_mm, scale_mm)
}

/// Generate an `n`-point circle pattern: centre (cx, cy), radius r,
/// normalized coordinates, counterclockwise from angle 0.
pub fn circle_pattern(cx: f64, cy: f64, r: f64, n: usize) -> Result<Pattern, PatternError> {
    let pts: Vec<Vector2<f64>> = (0..n)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * (i as f64) / (n as f64);
            Vector2::new(cx + r * a.cos(), cy + r * a.sin())
        })
        .collect();
    Pattern::from_points(pts, true)
}
