//! Iso-contours of a binary class mask.
//!
//! Samples sit at pixel centers and the 0.5 iso-line crosses each cell edge
//! at its midpoint, which for a binary raster is a pixel-boundary point.
//! Cells with a single odd corner route the contour through the shared pixel
//! corner instead of cutting it, so the traced rings enclose exactly the
//! foreground pixel centers. Saddle cells are cut, keeping foreground
//! 4-connected and rings free of touching vertices.
//!
//! Work is done in doubled integer coordinates: sample `(i, j)` lives at
//! `(2i + 1, 2j + 1)`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use nalgebra::Point2;

use super::SegMask;
use crate::polygon::signed_area;

type P = (i32, i32);

/// Closed rings of one class. Outer boundaries have positive shoelace area
/// in pixel coordinates (clockwise on screen), holes negative.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContourSet {
    pub outers: Vec<Vec<Point2<f64>>>,
    pub holes: Vec<Vec<Point2<f64>>>,
}

/// Traces `class` in `mask`.
pub fn trace_class(mask: &SegMask, class: u8) -> ContourSet {
    let (w, h) = (mask.width as i32, mask.height as i32);
    trace_contours(w, h, |x, y| mask.classes[(y * w + x) as usize] == class)
}

/// Traces the foreground of a `w`×`h` binary raster given by `inside`.
pub fn trace_contours(w: i32, h: i32, inside: impl Fn(i32, i32) -> bool) -> ContourSet {
    let sample = |x: i32, y: i32| x >= 0 && y >= 0 && x < w && y < h && inside(x, y);
    // start → (via, end)
    let mut next: BTreeMap<P, (Option<P>, P)> = BTreeMap::new();
    let mut row_above: Vec<bool> = (-1..=w).map(|x| sample(x, -1)).collect();
    for cj in -1..h {
        let row_below: Vec<bool> = (-1..=w).map(|x| sample(x, cj + 1)).collect();
        for ci in -1..w {
            let k = (ci + 1) as usize;
            let case = (row_above[k] as u8) << 3
                | (row_above[k + 1] as u8) << 2
                | (row_below[k + 1] as u8) << 1
                | row_below[k] as u8;
            if case == 0 || case == 15 {
                continue;
            }
            let t = (2 * ci + 2, 2 * cj + 1);
            let r = (2 * ci + 3, 2 * cj + 2);
            let b = (2 * ci + 2, 2 * cj + 3);
            let l = (2 * ci + 1, 2 * cj + 2);
            let c = Some((2 * ci + 2, 2 * cj + 2));
            // Foreground stays on the right-hand side walking along y-down
            // screen coordinates.
            let segs: &[(P, Option<P>, P)] = match case {
                8 => &[(t, c, l)],
                4 => &[(r, c, t)],
                2 => &[(b, c, r)],
                1 => &[(l, c, b)],
                7 => &[(l, c, t)],
                11 => &[(t, c, r)],
                13 => &[(r, c, b)],
                14 => &[(b, c, l)],
                12 => &[(r, None, l)],
                3 => &[(l, None, r)],
                6 => &[(b, None, t)],
                9 => &[(t, None, b)],
                10 => &[(t, None, l), (b, None, r)],
                5 => &[(r, None, t), (l, None, b)],
                _ => unreachable!(),
            };
            for &(s, via, e) in segs {
                next.insert(s, (via, e));
            }
        }
        row_above = row_below;
    }

    let mut out = ContourSet::default();
    while let Some((&start, _)) = next.iter().next() {
        let mut ring: Vec<P> = Vec::new();
        let mut cur = start;
        while let Some((via, end)) = next.remove(&cur) {
            ring.push(cur);
            if let Some(v) = via {
                ring.push(v);
            }
            cur = end;
        }
        debug_assert_eq!(cur, start, "open contour");
        let pts = merge_collinear(&ring);
        if pts.len() < 4 {
            continue;
        }
        if signed_area(&pts) > 0.0 {
            out.outers.push(pts);
        } else {
            out.holes.push(pts);
        }
    }
    out
}

/// Drops vertices lying on the line through their neighbors and closes
/// the ring. Input is open, in doubled coordinates.
fn merge_collinear(ring: &[P]) -> Vec<Point2<f64>> {
    let n = ring.len();
    let mut keep: Vec<P> = Vec::with_capacity(n / 2 + 1);
    for i in 0..n {
        let (a, b, c) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
        let cross = (b.0 - a.0) as i64 * (c.1 - b.1) as i64 - (b.1 - a.1) as i64 * (c.0 - b.0) as i64;
        if cross != 0 {
            keep.push(b);
        }
    }
    let mut pts: Vec<Point2<f64>> = keep.iter().map(|&(x, y)| Point2::new(x as f64 * 0.5, y as f64 * 0.5)).collect();
    if let Some(&f) = pts.first() {
        pts.push(f);
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::raster::rasterize_oracle;
    use crate::polygon::is_simple;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mask_from(rows: &[&str]) -> SegMask {
        let h = rows.len() as u32;
        let w = rows[0].len() as u32;
        let classes = rows.iter().flat_map(|r| r.bytes().map(|b| u8::from(b == b'#'))).collect();
        SegMask::new(w, h, classes)
    }

    #[test]
    fn single_pixel_is_unit_square() {
        let c = trace_class(&mask_from(&["...", ".#.", "..."]), 1);
        assert_eq!(c.outers.len(), 1);
        assert!(c.holes.is_empty());
        let r = &c.outers[0];
        assert_eq!(r.len(), 5);
        assert_eq!(signed_area(r), 1.0);
        assert!(r.contains(&Point2::new(1.0, 1.0)) && r.contains(&Point2::new(2.0, 2.0)));
    }

    #[test]
    fn square_has_four_corners() {
        let mut m = SegMask::filled(300, 200, 0);
        for y in 50..150 {
            for x in 120..220 {
                m.set(x, y, 1);
            }
        }
        let c = trace_class(&m, 1);
        assert_eq!(c.outers.len(), 1);
        let r = &c.outers[0];
        assert_eq!(r.len(), 5);
        for p in [(120.0, 50.0), (220.0, 50.0), (220.0, 150.0), (120.0, 150.0)] {
            assert!(r.contains(&Point2::new(p.0, p.1)));
        }
    }

    #[test]
    fn full_frame_is_image_rectangle() {
        let c = trace_class(&SegMask::filled(64, 48, 1), 1);
        assert_eq!(c.outers.len(), 1);
        assert_eq!(signed_area(&c.outers[0]), 64.0 * 48.0);
    }

    #[test]
    fn ring_with_hole() {
        let m = mask_from(&["#####", "#...#", "#.#.#", "#...#", "#####"]);
        let c = trace_class(&m, 1);
        assert_eq!(c.outers.len(), 2);
        assert_eq!(c.holes.len(), 1);
        assert_eq!(signed_area(&c.holes[0]), -9.0);
    }

    #[test]
    fn saddles_stay_simple() {
        let m = mask_from(&["#.#.", ".#.#", "#.#.", ".#.#"]);
        let c = trace_class(&m, 1);
        assert_eq!(c.outers.len(), 8);
        assert!(c.outers.iter().all(|r| is_simple(r)));
    }

    #[test]
    fn traced_rings_rasterize_to_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
            let classes = (0..w * h).map(|_| u8::from(rng.random_bool(0.45))).collect();
            let m = SegMask::new(w, h, classes);
            let c = trace_class(&m, 1);
            let rings: Vec<Vec<Point2<f64>>> = c.outers.iter().chain(&c.holes).cloned().collect();
            for r in &rings {
                assert!(is_simple(r), "{r:?}");
            }
            let raster = rasterize_oracle(&rings, w, h);
            let want: Vec<bool> = m.classes.iter().map(|&c| c == 1).collect();
            assert_eq!(raster, want);
        }
    }
}
