//! Planar ring geometry shared by the vectorizer, georeferencing and the
//! simulator's rasterizers.
//!
//! Rings are stored closed: the first vertex is repeated as the last one.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use nalgebra::Point2;
use serde::{Deserialize, Serialize};

/// A class-labeled polygon: one exterior ring plus zero or more holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPolygon<P> {
    pub class_id: u8,
    pub exterior: Vec<P>,
    pub holes: Vec<Vec<P>>,
}

/// Polygon with vertices in pixel coordinates (x right, y down, pixel
/// centers at half-integers).
pub type PixelPolygon = ClassPolygon<Point2<f64>>;

impl<P> ClassPolygon<P> {
    pub fn rings(&self) -> impl Iterator<Item = &Vec<P>> {
        core::iter::once(&self.exterior).chain(self.holes.iter())
    }

    pub fn ring_count(&self) -> usize {
        1 + self.holes.len()
    }

    pub fn map_points<Q, E>(&self, mut f: impl FnMut(&P) -> Result<Q, E>) -> Result<ClassPolygon<Q>, E> {
        let exterior = self.exterior.iter().map(&mut f).collect::<Result<Vec<_>, _>>()?;
        let mut holes = Vec::with_capacity(self.holes.len());
        for hole in &self.holes {
            holes.push(hole.iter().map(&mut f).collect::<Result<Vec<_>, _>>()?);
        }
        Ok(ClassPolygon { class_id: self.class_id, exterior, holes })
    }
}

impl PixelPolygon {
    /// Scales every vertex about the origin; used to lift polygons from a
    /// downsampled mask back to full-resolution pixel space.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |p: &Point2<f64>| Ok::<_, core::convert::Infallible>(Point2::new(p.x * factor, p.y * factor));
        match self.map_points(s) {
            Ok(p) => p,
            Err(e) => match e {},
        }
    }

    /// Area of the exterior minus the holes.
    pub fn area(&self) -> f64 {
        signed_area(&self.exterior).abs() - self.holes.iter().map(|h| signed_area(h).abs()).sum::<f64>()
    }
}

pub fn is_closed<P: PartialEq>(ring: &[P]) -> bool {
    ring.len() >= 2 && ring.first() == ring.last()
}

pub fn close_ring<P: PartialEq + Clone>(ring: &mut Vec<P>) {
    if !ring.is_empty() && !is_closed(ring) {
        let first = ring[0].clone();
        ring.push(first);
    }
}

/// Shoelace area of a closed ring. Positive for counter-clockwise rings in a
/// y-up frame.
pub fn signed_area(ring: &[Point2<f64>]) -> f64 {
    let mut acc = 0.0;
    for w in ring.windows(2) {
        acc += w[0].x * w[1].y - w[1].x * w[0].y;
    }
    acc * 0.5
}

/// Even-odd point-in-ring test.
pub fn contains_point(ring: &[Point2<f64>], p: Point2<f64>) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.y <= p.y) != (b.y <= p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if x > p.x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Removes consecutive duplicate vertices, keeping the ring closed.
pub fn dedup_ring(ring: &[Point2<f64>]) -> Vec<Point2<f64>> {
    let mut out: Vec<Point2<f64>> = Vec::with_capacity(ring.len());
    for p in ring {
        if out.last() != Some(p) {
            out.push(*p);
        }
    }
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    close_ring(&mut out);
    out
}

fn orient(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Point2<f64>, b: Point2<f64>, p: Point2<f64>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_touch(p1: Point2<f64>, p2: Point2<f64>, p3: Point2<f64>, p4: Point2<f64>) -> bool {
    let d1 = orient(p3, p4, p1);
    let d2 = orient(p3, p4, p2);
    let d3 = orient(p1, p2, p3);
    let d4 = orient(p1, p2, p4);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(p3, p4, p1))
        || (d2 == 0.0 && on_segment(p3, p4, p2))
        || (d3 == 0.0 && on_segment(p1, p2, p3))
        || (d4 == 0.0 && on_segment(p1, p2, p4))
}

/// True when the closed ring has at least three distinct vertices, no
/// repeated vertices, and no two edges touch except consecutive edges at their
/// shared vertex.
pub fn is_simple(ring: &[Point2<f64>]) -> bool {
    let ring = dedup_ring(ring);
    let n = ring.len().saturating_sub(1);
    if n < 3 {
        return false;
    }
    // Spikes: consecutive edges folding back onto each other.
    for i in 0..n {
        let prev = ring[(i + n - 1) % n];
        let cur = ring[i];
        let next = ring[(i + 1) % n];
        if orient(prev, cur, next) == 0.0 {
            let dot = (prev.x - cur.x) * (next.x - cur.x) + (prev.y - cur.y) * (next.y - cur.y);
            if dot > 0.0 {
                return false;
            }
        }
    }

    let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &ring {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    let cells_per_axis = ((n as f64).sqrt().ceil() as usize).clamp(1, 512);
    let span = (max_x - min_x).max(max_y - min_y).max(1e-9);
    let cell = span / cells_per_axis as f64;
    let cell_of = |v: f64, lo: f64| (((v - lo) / cell) as usize).min(cells_per_axis - 1);
    let mut grid: Vec<Vec<u32>> = vec![Vec::new(); cells_per_axis * cells_per_axis];
    for i in 0..n {
        let (a, b) = (ring[i], ring[i + 1]);
        let (cx0, cx1) = (cell_of(a.x.min(b.x), min_x), cell_of(a.x.max(b.x), min_x));
        let (cy0, cy1) = (cell_of(a.y.min(b.y), min_y), cell_of(a.y.max(b.y), min_y));
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                grid[cy * cells_per_axis + cx].push(i as u32);
            }
        }
    }
    for bucket in &grid {
        for (k, &i) in bucket.iter().enumerate() {
            for &j in &bucket[k + 1..] {
                let (i, j) = (i as usize, j as usize);
                let adjacent = (i + 1) % n == j || (j + 1) % n == i;
                if adjacent {
                    continue;
                }
                if segments_touch(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                    return false;
                }
            }
        }
    }
    true
}
