//! Small 2-D geometry helpers shared by the planner, scoring, and cutting
//! modules: point/segment distances, segment intersection, polyline
//! arc-length parametrization, and polygon area.

use nalgebra::Vector2;

/// Distance from `p` to the segment `a`-`b`.
pub fn dist_point_segment(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Distance from `p` to a polyline (>= 1 point). A single point degenerates
/// to point distance.
pub fn dist_point_polyline(p: &Vector2<f64>, pts: &[Vector2<f64>]) -> f64 {
    assert!(!pts.is_empty(), "polyline must have at least one point");
    if pts.len() == 1 {
        return (p - pts[0]).norm();
    }
    pts.windows(2)
        .map(|w| dist_point_segment(p, &w[0], &w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Total arc length of a polyline.
pub fn polyline_length(pts: &[Vector2<f64>]) -> f64 {
    pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Point at arc length `s` along the polyline, clamped to its ends.
pub fn point_at_arclength(pts: &[Vector2<f64>], s: f64) -> Vector2<f64> {
    assert!(pts.len() >= 2, "need a segment to walk");
    if s <= 0.0 {
        return pts[0];
    }
    let mut remaining = s;
    for w in pts.windows(2) {
        let seg = (w[1] - w[0]).norm();
        if remaining <= seg {
            if seg == 0.0 {
                return w[0];
            }
            return w[0] + (w[1] - w[0]) * (remaining / seg);
        }
        remaining -= seg;
    }
    *pts.last().unwrap()
}

fn orient(a: &Vector2<f64>, b: &Vector2<f64>, c: &Vector2<f64>) -> f64 {
    (b - a).perp(&(c - a))
}

fn on_segment(a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>) -> bool {
    p.x >= a.x.min(b.x) - 1e-15
        && p.x <= a.x.max(b.x) + 1e-15
        && p.y >= a.y.min(b.y) - 1e-15
        && p.y <= a.y.max(b.y) + 1e-15
}

/// Whether segments `p1`-`p2` and `q1`-`q2` intersect, including collinear
/// overlap and endpoint touches.
pub fn segments_intersect(
    p1: &Vector2<f64>,
    p2: &Vector2<f64>,
    q1: &Vector2<f64>,
    q2: &Vector2<f64>,
) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);

    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Signed area of a polygon (positive when counterclockwise with y up).
pub fn polygon_signed_area(poly: &[Vector2<f64>]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = &poly[i];
        let b = &poly[(i + 1) % poly.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    acc * 0.5
}
