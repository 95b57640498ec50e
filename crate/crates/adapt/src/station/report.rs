use std::collections::BTreeMap;

use adapt_core::analytics::rasterize_even_odd;
use adapt_core::downlink::{AnalyticsMsg, CommandRecord};
use adapt_core::geo::{EnuFrame, GeodeticPosition};
use adapt_core::polygon::PixelPolygon;
use adapt_core::Point2;
use serde::Serialize;

use super::state::LinkHealth;

/// Finest coverage grid cell.
const MIN_CELL_M: f64 = 0.05;
/// Longest coverage grid side in cells.
const MAX_GRID_SIDE: f64 = 4096.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionReport {
    pub mission_id: String,
    pub analytics_delivered: usize,
    /// Stored but still waiting on an earlier sequence number.
    pub analytics_held: usize,
    pub features: usize,
    /// Union area per class id, overlapping images counted once.
    pub coverage_m2: BTreeMap<u8, f64>,
    pub link: LinkHealth,
    pub commands: Vec<CommandRecord>,
    pub store_digest: String,
}

struct CoverageGrid {
    min: [f64; 2],
    cell_m: f64,
    width: u32,
    height: u32,
}

/// ENU polygons of every message, expressed relative to the first
/// message's origin.
fn common_frame_polygons<'a>(msgs: impl IntoIterator<Item = &'a AnalyticsMsg>) -> Vec<PixelPolygon> {
    let mut origin: Option<(GeodeticPosition, EnuFrame)> = None;
    let mut out = Vec::new();
    for m in msgs {
        let (o, frame) = origin.get_or_insert_with(|| (m.origin, EnuFrame::new(m.origin).expect("origin decoded from a valid message")));
        if m.origin == *o && m.ground_u == 0.0 {
            out.extend(m.enu_polygons().unwrap_or_default());
            continue;
        }
        let Ok(set) = m.to_geo() else { continue };
        for p in &set.polygons {
            if let Ok(q) = p.map_points(|g| frame.to_enu(g).map(|e| Point2::new(e.e, e.n))) {
                out.push(q);
            }
        }
    }
    out
}

/// Union area per class over all messages, by rasterizing each polygon
/// onto one shared ground grid.
pub fn coverage_by_class<'a>(msgs: impl IntoIterator<Item = &'a AnalyticsMsg>) -> BTreeMap<u8, f64> {
    let polys = common_frame_polygons(msgs);
    let mut out = BTreeMap::new();
    let pts = || polys.iter().flat_map(|p| p.rings()).flatten();
    if pts().next().is_none() {
        return out;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pts() {
        lo = [lo[0].min(p.x), lo[1].min(p.y)];
        hi = [hi[0].max(p.x), hi[1].max(p.y)];
    }
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let cell = (extent / MAX_GRID_SIDE).max(MIN_CELL_M);
    let grid = CoverageGrid {
        min: lo,
        cell_m: cell,
        width: ((hi[0] - lo[0]) / cell).ceil() as u32 + 1,
        height: ((hi[1] - lo[1]) / cell).ceil() as u32 + 1,
    };
    let mut per_class: BTreeMap<u8, Vec<bool>> = BTreeMap::new();
    for p in &polys {
        let union = per_class.entry(p.class_id).or_insert_with(|| vec![false; grid.width as usize * grid.height as usize]);
        paint(&grid, p, union);
    }
    for (c, cells) in per_class {
        out.insert(c, cells.iter().filter(|&&b| b).count() as f64 * cell * cell);
    }
    out
}

/// ORs one polygon into `union`, rasterizing only its bounding box.
fn paint(grid: &CoverageGrid, p: &PixelPolygon, union: &mut [bool]) {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for q in p.rings().flatten() {
        lo = [lo[0].min(q.x), lo[1].min(q.y)];
        hi = [hi[0].max(q.x), hi[1].max(q.y)];
    }
    let i0 = ((lo[0] - grid.min[0]) / grid.cell_m).floor().max(0.0) as u32;
    let j0 = ((lo[1] - grid.min[1]) / grid.cell_m).floor().max(0.0) as u32;
    let i1 = (((hi[0] - grid.min[0]) / grid.cell_m).ceil() as u32).min(grid.width);
    let j1 = (((hi[1] - grid.min[1]) / grid.cell_m).ceil() as u32).min(grid.height);
    if i1 <= i0 || j1 <= j0 {
        return;
    }
    let (w, h) = (i1 - i0, j1 - j0);
    let rings: Vec<Vec<Point2<f64>>> = p
        .rings()
        .map(|r| {
            r.iter()
                .map(|q| Point2::new((q.x - grid.min[0]) / grid.cell_m - i0 as f64, (q.y - grid.min[1]) / grid.cell_m - j0 as f64))
                .collect()
        })
        .collect();
    let local = rasterize_even_odd(&rings, w, h);
    for j in 0..h {
        let row = ((j0 + j) * grid.width + i0) as usize;
        for (u, &v) in union[row..row + w as usize].iter_mut().zip(&local[(j * w) as usize..((j + 1) * w) as usize]) {
            *u |= v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use adapt_core::geo::GeoPolygonSet;
    use adapt_core::polygon::ClassPolygon;

    fn square(x0: f64, y0: f64, s: f64) -> Vec<Point2<f64>> {
        vec![
            Point2::new(x0, y0),
            Point2::new(x0 + s, y0),
            Point2::new(x0 + s, y0 + s),
            Point2::new(x0, y0 + s),
            Point2::new(x0, y0),
        ]
    }

    fn msg(id: u64, polys: Vec<PixelPolygon>) -> AnalyticsMsg {
        let frame = EnuFrame::new(GeodeticPosition::new(64.85, -147.72, 130.0).unwrap()).unwrap();
        let geo = polys
            .iter()
            .map(|p| p.map_points(|q| Ok::<_, adapt_core::geo::GeoError>(frame.to_geodetic(&adapt_core::geo::EnuPoint::new(q.x, q.y, 0.0)))))
            .collect::<Result<Vec<_>, _>>()
            .unwrap();
        let set = GeoPolygonSet { image_id: id, polygons: geo, ..GeoPolygonSet::default() };
        AnalyticsMsg::from_geo(&set, &frame, 0.0, 1.0).unwrap()
    }

    #[test]
    fn overlapping_images_count_once() {
        let a = msg(0, vec![ClassPolygon { class_id: 1, exterior: square(0.0, 0.0, 10.0), holes: vec![] }]);
        let b = msg(1, vec![ClassPolygon { class_id: 1, exterior: square(5.0, 0.0, 10.0), holes: vec![] }]);
        let cov = coverage_by_class([&a, &b]);
        assert!((cov[&1] - 150.0).abs() < 1.0, "{cov:?}");
    }

    #[test]
    fn holes_are_excluded() {
        let p = ClassPolygon { class_id: 1, exterior: square(0.0, 0.0, 20.0), holes: vec![square(5.0, 5.0, 10.0)] };
        let cov = coverage_by_class([&msg(0, vec![p])]);
        assert!((cov[&1] - 300.0).abs() < 1.0, "{cov:?}");
    }

    #[test]
    fn nothing_delivered_is_empty() {
        assert!(coverage_by_class([]).is_empty());
    }
}
