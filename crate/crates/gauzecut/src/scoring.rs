//! Quality scoring: close intended and achieved cut curves into regions on
//! the unit square, rasterize them, and count the exclusive-or cells.
//!
//! All curves here are in normalized material coordinates ([0,1]² over the
//! gauze). Open curves are closed by extending both endpoints to the nearest
//! sheet edge and walking the boundary between the exit points along the
//! shorter perimeter arc; on a tie the walk runs clockwise in material
//! coordinates (counterclockwise as seen in a rendered image, whose y axis
//! points down), which assigns a y=0.5 chord the lower half of the sheet.
//! The same convention applies to intended and achieved curves, so it
//! cancels in the comparison.

use std::fmt;
use std::io::{self, Write};

use nalgebra::Vector2;

/// Default rasterization resolution: 200×200 cells ≈ 0.5 mm of gauze.
pub const DEFAULT_RESOLUTION: usize = 200;

/// Two achieved points closer than this close a loop instead of walking the
/// sheet boundary.
pub const LOOP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreError {
    TooFewPoints { count: usize },
    DegenerateClosure,
    ZeroResolution,
    ResolutionMismatch { a: usize, b: usize },
}

impl fmt::Display for ScoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreError::TooFewPoints { count } => {
                write!(f, "curve needs at least 2 points, got {count}")
            }
            ScoreError::DegenerateClosure => write!(f, "curve closure has zero area"),
            ScoreError::ZeroResolution => write!(f, "resolution must be at least 1"),
            ScoreError::ResolutionMismatch { a, b } => {
                write!(f, "mask resolutions differ: {a} vs {b}")
            }
        }
    }
}

impl std::error::Error for ScoreError {}

/// Boolean occupancy grid over [0,1]², row-major, cell (row, col) centred at
/// ((col+0.5)/res, (row+0.5)/res).
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub resolution: usize,
    pub inside: Vec<bool>,
}

impl RegionMask {
    pub fn empty(resolution: usize) -> Result<RegionMask, ScoreError> {
        if resolution == 0 {
            return Err(ScoreError::ZeroResolution);
        }
        Ok(RegionMask { resolution, inside: vec![false; resolution * resolution] })
    }

    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// XOR another mask into this one (piecewise accumulation).
    pub fn xor_with(&mut self, other: &RegionMask) -> Result<(), ScoreError> {
        if self.resolution != other.resolution {
            return Err(ScoreError::ResolutionMismatch {
                a: self.resolution,
                b: other.resolution,
            });
        }
        for (a, b) in self.inside.iter_mut().zip(other.inside.iter()) {
            *a ^= *b;
        }
        Ok(())
    }

    /// Portable-bitmap export (binary P4); image rows run top-to-bottom, so
    /// the high-y side of the sheet is the top of the image. Inside = black.
    pub fn write_pbm<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let res = self.resolution;
        write!(w, "P4\n{res} {res}\n")?;
        let row_bytes = (res + 7) / 8;
        let mut row = vec![0u8; row_bytes];
        for img_row in 0..res {
            let mask_row = res - 1 - img_row;
            row.iter_mut().for_each(|b| *b = 0);
            for col in 0..res {
                if self.inside[mask_row * res + col] {
                    row[col / 8] |= 0x80 >> (col % 8);
                }
            }
            w.write_all(&row)?;
        }
        Ok(())
    }
}

/// Symmetric-difference result: raw XOR cell count and the count normalized
/// by the grid size (lower is better).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub xor_count: usize,
    pub normalized: f64,
}

/// Perimeter parameter of a boundary point, s ∈ [0,4): bottom edge s=x,
/// right s=1+y, top s=2+(1−x), left s=3+(1−y) — a counterclockwise walk in
/// material coordinates.
#[derive(Clone, Copy)]
struct BoundaryPoint {
    point: Vector2<f64>,
    s: f64,
}

fn nearest_boundary(p: &Vector2<f64>) -> BoundaryPoint {
    let x = p.x.clamp(0.0, 1.0);
    let y = p.y.clamp(0.0, 1.0);
    // (distance, point, perimeter parameter); tie order fixed: bottom,
    // right, top, left.
    let candidates = [
        (y, Vector2::new(x, 0.0), x),
        (1.0 - x, Vector2::new(1.0, y), 1.0 + y),
        (1.0 - y, Vector2::new(x, 1.0), 2.0 + (1.0 - x)),
        (x, Vector2::new(0.0, y), 3.0 + (1.0 - y)),
    ];
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if c.0 < best.0 {
            best = *c;
        }
    }
    BoundaryPoint { point: best.1, s: best.2 % 4.0 }
}

fn corner(s: f64) -> Vector2<f64> {
    match s as usize % 4 {
        0 => Vector2::new(0.0, 0.0),
        1 => Vector2::new(1.0, 0.0),
        2 => Vector2::new(1.0, 1.0),
        _ => Vector2::new(0.0, 1.0),
    }
}

/// Signed area of an implicitly closed polygon (positive = counterclockwise
/// with y up).
pub fn polygon_area(points: &[Vector2<f64>]) -> f64 {
    let n = points.len();
    let mut twice = 0.0;
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        twice += p.x * q.y - q.x * p.y;
    }
    twice / 2.0
}

/// Close a curve into a polygon on the unit square. Closed curves pass
/// through unchanged (a duplicated terminal point is dropped); open curves
/// are extended to the sheet boundary and closed along the shorter perimeter
/// arc (tie → clockwise walk; see module docs). Zero-area closures are
/// rejected.
pub fn close_curve(
    curve: &[Vector2<f64>],
    closed: bool,
) -> Result<Vec<Vector2<f64>>, ScoreError> {
    if curve.len() < 2 {
        return Err(ScoreError::TooFewPoints { count: curve.len() });
    }
    let mut polygon: Vec<Vector2<f64>>;
    if closed {
        polygon = curve.to_vec();
        if polygon.len() > 2 && (polygon[0] - polygon[polygon.len() - 1]).norm() <= LOOP_EPS {
            polygon.pop();
        }
    } else {
        let start = nearest_boundary(&curve[0]);
        let end = nearest_boundary(&curve[curve.len() - 1]);
        polygon = Vec::with_capacity(curve.len() + 6);
        if (start.point - curve[0]).norm() > 1e-12 {
            polygon.push(start.point);
        }
        polygon.extend_from_slice(curve);
        if (end.point - curve[curve.len() - 1]).norm() > 1e-12 {
            polygon.push(end.point);
        }
        // Walk the boundary from the end exit back to the start exit.
        let d_ccw = (start.s - end.s).rem_euclid(4.0);
        let d_cw = (end.s - start.s).rem_euclid(4.0);
        let ccw = d_ccw < d_cw - 1e-12;
        let arc = if ccw { d_ccw } else { d_cw };
        // Corners at integer s values strictly between the exits along the
        // walk, appended in walk order.
        for k in 1..=4u32 {
            let s_corner = if ccw {
                (end.s + k as f64).floor()
            } else {
                (end.s - k as f64).ceil()
            };
            let along = if ccw {
                (s_corner - end.s).rem_euclid(4.0)
            } else {
                (end.s - s_corner).rem_euclid(4.0)
            };
            let s_corner_mod = s_corner.rem_euclid(4.0);
            if along <= 1e-12 || along >= arc - 1e-12 {
                continue;
            }
            polygon.push(corner(s_corner_mod));
        }
    }
    if polygon.len() < 3 || polygon_area(&polygon).abs() < 1e-12 {
        return Err(ScoreError::DegenerateClosure);
    }
    Ok(polygon)
}

/// Even-odd scanline rasterization: a cell is inside iff its centre is
/// inside the polygon by the even-odd rule.
pub fn rasterize(polygon: &[Vector2<f64>], resolution: usize) -> Result<RegionMask, ScoreError> {
    if resolution == 0 {
        return Err(ScoreError::ZeroResolution);
    }
    if polygon.len() < 3 {
        return Err(ScoreError::TooFewPoints { count: polygon.len() });
    }
    let mut mask = RegionMask::empty(resolution)?;
    let res = resolution as f64;
    let n = polygon.len();
    let mut crossings: Vec<f64> = Vec::with_capacity(8);
    for row in 0..resolution {
        let y = (row as f64 + 0.5) / res;
        crossings.clear();
        for i in 0..n {
            let p = polygon[i];
            let q = polygon[(i + 1) % n];
            // Half-open rule: count an edge iff it spans the scanline.
            if (p.y > y) != (q.y > y) {
                crossings.push(p.x + (y - p.y) * (q.x - p.x) / (q.y - p.y));
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in crossings.chunks_exact(2) {
            let (x0, x1) = (pair[0], pair[1]);
            // Cells whose centre lies strictly between the crossings.
            let first = ((x0 * res - 0.5).ceil().max(0.0)) as usize;
            let last_f = (x1 * res - 0.5).floor();
            if last_f < 0.0 {
                continue;
            }
            let last = (last_f as usize).min(resolution - 1);
            for col in first..=last.min(resolution - 1) {
                let centre = (col as f64 + 0.5) / res;
                if centre > x0 && centre < x1 {
                    mask.inside[row * resolution + col] = true;
                }
            }
        }
    }
    Ok(mask)
}

/// XOR cell count between two masks of equal resolution.
pub fn symmetric_difference(a: &RegionMask, b: &RegionMask) -> Result<Score, ScoreError> {
    if a.resolution != b.resolution {
        return Err(ScoreError::ResolutionMismatch { a: a.resolution, b: b.resolution });
    }
    let xor_count =
        a.inside.iter().zip(b.inside.iter()).filter(|(x, y)| x != y).count();
    let cells = (a.resolution * a.resolution) as f64;
    Ok(Score { xor_count, normalized: xor_count as f64 / cells })
}

/// Region mask of the intended pattern (normalized polyline + closure flag).
pub fn intended_mask(
    curve: &[Vector2<f64>],
    closed: bool,
    resolution: usize,
) -> Result<RegionMask, ScoreError> {
    rasterize(&close_curve(curve, closed)?, resolution)
}

/// Region mask of the achieved cut: material points in trajectory order,
/// None = missed cut. Misses split the curve into pieces; each piece with at
/// least 2 points is closed independently (as a loop when its endpoints
/// coincide, via the sheet boundary otherwise) and XOR-accumulated.
/// Degenerate pieces (too short, zero area) cut no measurable region and are
/// skipped.
pub fn achieved_mask(
    points: &[Option<Vector2<f64>>],
    resolution: usize,
) -> Result<RegionMask, ScoreError> {
    let mut mask = RegionMask::empty(resolution)?;
    for piece in points.split(|p| p.is_none()) {
        let run: Vec<Vector2<f64>> = piece.iter().map(|p| p.unwrap()).collect();
        if run.len() < 2 {
            continue;
        }
        let is_loop =
            run.len() >= 4 && (run[0] - run[run.len() - 1]).norm() <= LOOP_EPS;
        match close_curve(&run, is_loop) {
            Ok(polygon) => mask.xor_with(&rasterize(&polygon, resolution)?)?,
            Err(ScoreError::DegenerateClosure) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(mask)
}

/// Full comparison: intended pattern vs achieved material points, both in
/// normalized coordinates.
pub fn score_cut(
    intended: &[Vector2<f64>],
    intended_closed: bool,
    achieved: &[Option<Vector2<f64>>],
    resolution: usize,
) -> Result<Score, ScoreError> {
    let im = intended_mask(intended, intended_closed, resolution)?;
    let am = achieved_mask(achieved, resolution)?;
    symmetric_difference(&im, &am)
}
