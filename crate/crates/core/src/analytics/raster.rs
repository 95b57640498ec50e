//! Even-odd polygon rasterization at pixel centers.
//!
//! Pixel `(i, j)` is inside when a ray from its center `(i + 0.5, j + 0.5)`
//! toward −x crosses an odd number of edges. An edge `a→b` crosses row
//! `y` when `(a.y <= y) != (b.y <= y)`, at `x = a.x + (y − a.y)·(b.x − a.x)/(b.y − a.y)`;
//! crossings with `x <= cx` count.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use nalgebra::Point2;

use super::SegMask;
use crate::polygon::PixelPolygon;

fn crossing(a: Point2<f64>, b: Point2<f64>, y: f64) -> Option<f64> {
    ((a.y <= y) != (b.y <= y)).then(|| a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y))
}

/// Edges bucketed by the rows whose centers they span.
fn row_buckets(rings: &[Vec<Point2<f64>>], height: u32) -> Vec<Vec<(Point2<f64>, Point2<f64>)>> {
    let mut rows = vec![Vec::new(); height as usize];
    for ring in rings {
        for e in ring.windows(2) {
            let (a, b) = (e[0], e[1]);
            let (lo, hi) = (a.y.min(b.y), a.y.max(b.y));
            // Rows whose center y = j + 0.5 satisfies lo <= y < hi.
            let j0 = (lo - 0.5).ceil().max(0.0);
            let j1 = (hi - 0.5).ceil().min(height as f64);
            let (j0, j1) = (j0 as usize, j1.max(0.0) as usize);
            for row in rows.iter_mut().take(j1).skip(j0) {
                row.push((a, b));
            }
        }
    }
    rows
}

/// Scanline fill of closed rings into a `width`×`height` boolean grid.
pub fn rasterize_even_odd(rings: &[Vec<Point2<f64>>], width: u32, height: u32) -> Vec<bool> {
    let mut out = vec![false; width as usize * height as usize];
    let rows = row_buckets(rings, height);
    let mut xs = Vec::new();
    for (j, edges) in rows.iter().enumerate() {
        let y = j as f64 + 0.5;
        xs.clear();
        xs.extend(edges.iter().filter_map(|&(a, b)| crossing(a, b, y)));
        xs.sort_by(f64::total_cmp);
        let row = &mut out[j * width as usize..(j + 1) * width as usize];
        for pair in xs.chunks_exact(2) {
            let i0 = (pair[0] - 0.5).ceil().clamp(0.0, width as f64) as usize;
            let i1 = (pair[1] - 0.5).ceil().clamp(0.0, width as f64) as usize;
            for v in &mut row[i0..i1.max(i0)] {
                *v = true;
            }
        }
    }
    out
}

/// Per-pixel parity count, the reference the scanline fill is checked
/// against. Edges are bucketed by row so whole-frame masks stay tractable.
pub fn rasterize_oracle(rings: &[Vec<Point2<f64>>], width: u32, height: u32) -> Vec<bool> {
    let rows = row_buckets(rings, height);
    let mut out = Vec::with_capacity(width as usize * height as usize);
    for (j, edges) in rows.iter().enumerate() {
        let y = j as f64 + 0.5;
        for i in 0..width {
            let cx = i as f64 + 0.5;
            let n = edges.iter().filter(|&&(a, b)| crossing(a, b, y).is_some_and(|x| x <= cx)).count();
            out.push(n % 2 == 1);
        }
    }
    out
}

pub fn iou_masks(a: &[bool], b: &[bool]) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// IoU between the rasterized polygons of `class` and that class in `mask`.
/// Polygons are in mask pixel coordinates.
pub fn class_iou(polygons: &[PixelPolygon], mask: &SegMask, class: u8) -> f64 {
    let rings: Vec<Vec<Point2<f64>>> =
        polygons.iter().filter(|p| p.class_id == class).flat_map(|p| p.rings().cloned()).collect();
    let raster = rasterize_even_odd(&rings, mask.width, mask.height);
    let truth: Vec<bool> = mask.classes.iter().map(|&c| c == class).collect();
    iou_masks(&raster, &truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring(pts: &[(f64, f64)]) -> Vec<Point2<f64>> {
        let mut r: Vec<_> = pts.iter().map(|&(x, y)| Point2::new(x, y)).collect();
        r.push(r[0]);
        r
    }

    #[test]
    fn square_and_hole() {
        let outer = ring(&[(1.0, 1.0), (9.0, 1.0), (9.0, 9.0), (1.0, 9.0)]);
        let hole = ring(&[(3.0, 3.0), (3.0, 5.0), (5.0, 5.0), (5.0, 3.0)]);
        let r = rasterize_even_odd(&[outer, hole], 10, 10);
        assert_eq!(r.iter().filter(|&&v| v).count(), 64 - 4);
        assert!(!r[3 * 10 + 3] && r[1 * 10 + 1] && !r[0]);
    }

    #[test]
    fn iou_edge_cases() {
        assert_eq!(iou_masks(&[false, false], &[false, false]), 1.0);
        assert_eq!(iou_masks(&[true, false], &[false, true]), 0.0);
        assert_eq!(iou_masks(&[true, true], &[true, false]), 0.5);
    }

    proptest! {
        #[test]
        fn scanline_matches_oracle(pts in prop::collection::vec((-5.0f64..45.0, -5.0f64..45.0), 3..30)) {
            let mut r: Vec<_> = pts.iter().map(|&(x, y)| Point2::new(x, y)).collect();
            r.push(r[0]);
            prop_assert_eq!(rasterize_even_odd(&[r.clone()], 40, 40), rasterize_oracle(&[r], 40, 40));
        }

        // Half-pixel vertices put edges through pixel centers.
        #[test]
        fn scanline_matches_oracle_on_grid(pts in prop::collection::vec((-4i32..84, -4i32..84), 3..30)) {
            let mut r: Vec<_> = pts.iter().map(|&(x, y)| Point2::new(x as f64 * 0.5, y as f64 * 0.5)).collect();
            r.push(r[0]);
            prop_assert_eq!(rasterize_even_odd(&[r.clone()], 40, 40), rasterize_oracle(&[r], 40, 40));
        }
    }
}
