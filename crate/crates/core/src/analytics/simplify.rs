//! Douglas-Peucker simplification of closed rings.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use nalgebra::Point2;

use crate::polygon::{is_simple, signed_area, ClassPolygon, PixelPolygon};

/// Smallest tolerance tried when a simplified ring self-intersects.
const MIN_RETRY_TOLERANCE: f64 = 1.0 / 64.0;

fn seg_distance(p: Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Marks the vertices of `pts[lo..=hi]` to keep, `lo` and `hi` included.
fn dp_chain(pts: &[Point2<f64>], lo: usize, hi: usize, tol: f64, keep: &mut [bool]) {
    let mut stack = vec![(lo, hi)];
    while let Some((lo, hi)) = stack.pop() {
        keep[lo] = true;
        keep[hi] = true;
        if hi <= lo + 1 {
            continue;
        }
        let (mut best, mut best_d) = (lo, -1.0);
        for i in lo + 1..hi {
            let d = seg_distance(pts[i], pts[lo], pts[hi]);
            if d > best_d {
                best = i;
                best_d = d;
            }
        }
        if best_d > tol {
            stack.push((lo, best));
            stack.push((best, hi));
        }
    }
}

/// Simplifies a closed ring. Vertex 0 and the vertex farthest from it
/// anchor the two chains. Returns `None` when the ring collapses below
/// three vertices.
pub fn douglas_peucker_ring(ring: &[Point2<f64>], tol: f64) -> Option<Vec<Point2<f64>>> {
    let n = ring.len().saturating_sub(1);
    if n < 3 {
        return None;
    }
    let far = (1..n)
        .max_by(|&i, &j| (ring[i] - ring[0]).norm_squared().total_cmp(&(ring[j] - ring[0]).norm_squared()))
        .unwrap_or(1);
    let mut keep = vec![false; n + 1];
    dp_chain(ring, 0, far, tol, &mut keep);
    dp_chain(ring, far, n, tol, &mut keep);
    let mut out: Vec<Point2<f64>> = (0..n).filter(|&i| keep[i]).map(|i| ring[i]).collect();
    if out.len() < 3 {
        return None;
    }
    out.push(out[0]);
    Some(out)
}

/// Simplified ring that is still simple and keeps its orientation. The
/// tolerance is halved on failure; as a last resort the input is returned.
fn simplify_ring(ring: &[Point2<f64>], tol: f64) -> Option<Vec<Point2<f64>>> {
    let sign = signed_area(ring).signum();
    let mut t = tol;
    while t >= MIN_RETRY_TOLERANCE {
        match douglas_peucker_ring(ring, t) {
            None => return None,
            Some(r) if r.len() == ring.len() => return Some(r),
            Some(r) if signed_area(&r).signum() == sign && is_simple(&r) => return Some(r),
            Some(_) => t *= 0.5,
        }
    }
    Some(ring.to_vec())
}

/// Simplifies every ring of a polygon; holes that collapse are dropped.
/// `None` when the exterior collapses.
pub fn simplify_polygon(poly: &PixelPolygon, tol: f64) -> Option<PixelPolygon> {
    let exterior = simplify_ring(&poly.exterior, tol)?;
    let holes = poly.holes.iter().filter_map(|h| simplify_ring(h, tol)).collect();
    Some(ClassPolygon { class_id: poly.class_id, exterior, holes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed(pts: &[(f64, f64)]) -> Vec<Point2<f64>> {
        let mut r: Vec<_> = pts.iter().map(|&(x, y)| Point2::new(x, y)).collect();
        r.push(r[0]);
        r
    }

    #[test]
    fn staircase_collapses_to_diagonal() {
        // A 1-px staircase from (0,0) to (10,10) closed back along the axes.
        let mut pts = alloc::vec![(0.0, 0.0)];
        for k in 0..10 {
            pts.push((k as f64 + 1.0, k as f64));
            pts.push((k as f64 + 1.0, k as f64 + 1.0));
        }
        pts.push((0.0, 10.0));
        let r = closed(&pts);
        let s = douglas_peucker_ring(&r, 0.75).unwrap();
        assert_eq!(s.len(), 4, "{s:?}");
        let s = douglas_peucker_ring(&r, 0.25).unwrap();
        assert_eq!(s.len(), r.len());
    }

    #[test]
    fn small_ring_collapses() {
        let r = closed(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        assert!(douglas_peucker_ring(&r, 2.0).is_none());
        assert_eq!(douglas_peucker_ring(&r, 0.5).unwrap().len(), 5);
    }

    #[test]
    fn keeps_simplicity() {
        // A thin comb whose teeth would cross if flattened carelessly.
        let mut pts = alloc::vec![];
        for k in 0..20 {
            let x = k as f64 * 2.0;
            pts.push((x, 0.0));
            pts.push((x + 1.0, 0.0));
            pts.push((x + 1.0, 10.0 + (k % 3) as f64 * 0.4));
            pts.push((x + 2.0, 10.0 + (k % 3) as f64 * 0.4));
        }
        pts.push((40.0, -1.0));
        pts.push((0.0, -1.0));
        let r = closed(&pts);
        for tol in [0.5, 1.0, 2.0, 4.0, 8.0] {
            if let Some(s) = simplify_ring(&r, tol) {
                assert!(is_simple(&s), "tol {tol}");
            }
        }
    }
}
