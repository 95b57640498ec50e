//! Mask → polygons under a byte budget.

use alloc::boxed::Box;
use alloc::vec::Vec;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::contour::trace_class;
use super::encode::encode_polygons;
use super::raster::class_iou;
use super::simplify::simplify_polygon;
use super::{SegMask, CLASS_BACKGROUND, CLASS_UNLABELED};
use crate::polygon::{contains_point, signed_area, ClassPolygon, PixelPolygon};

pub const MIN_BUDGET_BYTES: usize = 256;
pub const START_TOLERANCE_PX: f64 = 0.5;
pub const MAX_TOLERANCE_PX: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassIou {
    pub class_id: u8,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vectorized {
    /// Polygons in mask pixel coordinates.
    pub polygons: Vec<PixelPolygon>,
    /// Mask downsampling factor; multiply coordinates by it for
    /// full-resolution pixels.
    pub scale: u32,
    pub tolerance_px: f64,
    pub encoded: Vec<u8>,
    pub class_iou: Vec<ClassIou>,
}

impl Vectorized {
    pub fn encoded_bytes(&self) -> usize {
        self.encoded.len()
    }

    pub fn full_resolution(&self) -> Vec<PixelPolygon> {
        self.polygons.iter().map(|p| p.scaled(self.scale as f64)).collect()
    }

    pub fn min_iou(&self) -> f64 {
        self.class_iou.iter().map(|c| c.iou).fold(1.0, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VectorizeError {
    #[error("budget {0} bytes is below the {MIN_BUDGET_BYTES}-byte minimum")]
    BudgetTooSmall(usize),
    #[error("encoding needs {} bytes at {MAX_TOLERANCE_PX} px tolerance, over the {budget}-byte budget", best.encoded_bytes())]
    BudgetUnreachable { budget: usize, best: Box<Vectorized> },
}

/// Nests holes into the smallest exterior containing them.
fn assemble(class_id: u8, outers: Vec<Vec<Point2<f64>>>, holes: Vec<Vec<Point2<f64>>>) -> Vec<PixelPolygon> {
    let bbox = |r: &[Point2<f64>]| {
        r.iter().fold([f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY], |b, p| {
            [b[0].min(p.x), b[1].min(p.y), b[2].max(p.x), b[3].max(p.y)]
        })
    };
    let boxes: Vec<[f64; 4]> = outers.iter().map(|r| bbox(r)).collect();
    let areas: Vec<f64> = outers.iter().map(|r| signed_area(r).abs()).collect();
    let mut polys: Vec<PixelPolygon> =
        outers.into_iter().map(|exterior| ClassPolygon { class_id, exterior, holes: Vec::new() }).collect();
    for hole in holes {
        let hb = bbox(&hole);
        let owner = (0..polys.len())
            .filter(|&i| {
                let b = boxes[i];
                b[0] <= hb[0] && b[1] <= hb[1] && b[2] >= hb[2] && b[3] >= hb[3]
            })
            .filter(|&i| contains_point(&polys[i].exterior, hole[0]))
            .min_by(|&a, &b| areas[a].total_cmp(&areas[b]));
        debug_assert!(owner.is_some(), "hole without exterior");
        if let Some(i) = owner {
            polys[i].holes.push(hole);
        }
    }
    polys
}

/// Exact boundary polygons of every labeled, non-background class.
pub fn mask_polygons(mask: &SegMask) -> Vec<PixelPolygon> {
    let mut out = Vec::new();
    for class in mask.present_classes() {
        if class == CLASS_BACKGROUND || class == CLASS_UNLABELED {
            continue;
        }
        let c = trace_class(mask, class);
        out.extend(assemble(class, c.outers, c.holes));
    }
    out
}

fn at_tolerance(mask: &SegMask, exact: &[PixelPolygon], tol: f64) -> Vectorized {
    let polygons: Vec<PixelPolygon> = exact.iter().filter_map(|p| simplify_polygon(p, tol)).collect();
    let encoded = encode_polygons(&polygons);
    Vectorized { polygons, scale: mask.scale.max(1), tolerance_px: tol, encoded, class_iou: Vec::new() }
}

fn with_iou(mask: &SegMask, mut v: Vectorized) -> Vectorized {
    v.class_iou = mask
        .present_classes()
        .into_iter()
        .filter(|&c| c != CLASS_BACKGROUND && c != CLASS_UNLABELED)
        .map(|class_id| ClassIou { class_id, iou: class_iou(&v.polygons, mask, class_id) })
        .collect();
    v
}

/// Contours, then Douglas-Peucker with the tolerance doubling from
/// [`START_TOLERANCE_PX`] until the canonical encoding fits `budget_bytes`.
pub fn vectorize(mask: &SegMask, budget_bytes: usize) -> Result<Vectorized, VectorizeError> {
    if budget_bytes < MIN_BUDGET_BYTES {
        return Err(VectorizeError::BudgetTooSmall(budget_bytes));
    }
    let exact = mask_polygons(mask);
    let mut tol = START_TOLERANCE_PX;
    loop {
        let v = at_tolerance(mask, &exact, tol);
        if v.encoded_bytes() <= budget_bytes {
            return Ok(with_iou(mask, v));
        }
        if tol >= MAX_TOLERANCE_PX {
            return Err(VectorizeError::BudgetUnreachable { budget: budget_bytes, best: Box::new(with_iou(mask, v)) });
        }
        tol *= 2.0;
    }
}

/// Vectorization at one fixed tolerance, ignoring any budget.
pub fn vectorize_at(mask: &SegMask, tol: f64) -> Vectorized {
    with_iou(mask, at_tolerance(mask, &mask_polygons(mask), tol))
}
