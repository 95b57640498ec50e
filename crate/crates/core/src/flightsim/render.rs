//! Ray-cast frame rendering and scene-grid comparisons.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Point2, Vector3};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::{Capture, SimError, SimFlight, SimScene};
use crate::analytics::{rasterize_even_odd, Image, PixelFormat, SegMask};
use crate::geo::{CameraModel, CameraPose, GeoPolygonSet, TimestampedPose, MIN_GRAZING_DEG};

const MAX_BLUR_SAMPLES: usize = 64;

/// A rendered frame and its zero-blur truth mask, both at camera resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub image: Image,
    pub truth: SegMask,
}

/// Ray-casts every pixel center through the full camera model onto the
/// scene. Motion blur averages the scene along the ground track traversed
/// during the exposure, a box filter of `speed × exposure / GSD` pixels.
pub fn render_frame(
    scene: &SimScene,
    cam: &CameraModel,
    pose: &TimestampedPose,
    exposure_us: f64,
    velocity_enu: [f64; 3],
) -> Result<Rendered, SimError> {
    let cp = CameraPose::new(cam, pose, &scene.frame)?;
    let center = cp.center().to_vector();
    if center.z <= 0.0 {
        return Err(SimError::BelowGround(center.z));
    }
    let v = Vector3::from(velocity_enu);
    let exposure_s = exposure_us * 1e-6;
    let gsd = center.z / cam.fx;
    let blur_px = Vector3::new(v.x, v.y, 0.0).norm() * exposure_s / gsd;
    let samples = ((4.0 * blur_px).ceil() as usize).clamp(1, MAX_BLUR_SAMPLES);
    let offsets: Vec<f64> = if samples == 1 {
        vec![0.0]
    } else {
        (0..samples).map(|k| exposure_s * ((k as f64 + 0.5) / samples as f64 - 0.5)).collect()
    };
    let min_down = MIN_GRAZING_DEG.to_radians().sin();
    let (w, h) = (cam.width, cam.height);
    let mut rgb = Vec::with_capacity(w as usize * h as usize * 3);
    let mut classes = Vec::with_capacity(w as usize * h as usize);
    for y in 0..h {
        for x in 0..w {
            let ray = cp.ray_enu(cam, &Point2::new(x as f64 + 0.5, y as f64 + 0.5))?;
            if -ray.z < min_down {
                return Err(SimError::Horizon { x, y });
            }
            let mut acc = [0.0; 3];
            let mut class = None;
            for &tau in &offsets {
                let c = center + v * tau;
                let g = c + ray * (c.z / -ray.z);
                if !scene.contains(g.x, g.y) {
                    return Err(SimError::OutOfBounds { e: g.x, n: g.y });
                }
                let (k, s) = scene.sample(g.x, g.y);
                if tau == 0.0 {
                    class = Some(k);
                }
                for (a, s) in acc.iter_mut().zip(s) {
                    *a += s;
                }
            }
            rgb.extend(acc.map(|a| (a / samples as f64).round().clamp(0.0, 255.0) as u8));
            classes.push(class.unwrap_or_else(|| {
                let g = center + ray * (center.z / -ray.z);
                scene.class_at(g.x, g.y)
            }));
        }
    }
    Ok(Rendered { image: Image::new(w, h, PixelFormat::Rgb8, rgb).expect("sized above"), truth: SegMask::new(w, h, classes) })
}

/// Renders one capture of a flight.
pub fn render_capture(scene: &SimScene, flight: &SimFlight, capture: &Capture) -> Result<Rendered, SimError> {
    render_frame(scene, &flight.camera, &capture.pose, capture.exposure_us, capture.velocity_enu)
}

impl SimScene {
    /// Scene-grid coordinates of an ENU point; cell `(i, j)` spans
    /// `[i, i+1) × [j, j+1)`.
    pub fn grid_point(&self, e: f64, n: f64) -> Point2<f64> {
        let b = self.bounds();
        let r = self.config.resolution_m;
        Point2::new((e - b[0]) / r, (b[3] - n) / r)
    }

    /// Cells whose centers project inside the image of `capture`.
    pub fn visible_cells(&self, flight: &SimFlight, capture: &Capture, out: &mut [bool]) -> Result<(), SimError> {
        let cp = flight.camera_pose(capture)?;
        let Some(foot) = flight.footprint(capture) else {
            return Err(SimError::Horizon { x: 0, y: 0 });
        };
        let (w, h) = (flight.camera.width as f64, flight.camera.height as f64);
        let (mut lo, mut hi) = (Point2::new(f64::MAX, f64::MAX), Point2::new(f64::MIN, f64::MIN));
        for p in &foot {
            let g = self.grid_point(p.e, p.n);
            lo = Point2::new(lo.x.min(g.x), lo.y.min(g.y));
            hi = Point2::new(hi.x.max(g.x), hi.y.max(g.y));
        }
        // Distortion can bow edges outward; pad the corner box.
        let pad = 0.05 * (hi.x - lo.x).max(hi.y - lo.y) + 1.0;
        let i0 = (lo.x - pad).floor().max(0.0) as u32;
        let j0 = (lo.y - pad).floor().max(0.0) as u32;
        let i1 = ((hi.x + pad).ceil().max(0.0) as u32).min(self.width);
        let j1 = ((hi.y + pad).ceil().max(0.0) as u32).min(self.height);
        for j in j0..j1 {
            for i in i0..i1 {
                let (e, n) = self.cell_center(i, j);
                if let Some(px) = cp.project(&flight.camera, &crate::geo::EnuPoint::new(e, n, 0.0)) {
                    if px.x >= 0.0 && px.x < w && px.y >= 0.0 && px.y < h {
                        out[j as usize * self.width as usize + i as usize] = true;
                    }
                }
            }
        }
        Ok(())
    }

    /// Union of the cells seen by every capture.
    pub fn visible_under(&self, flight: &SimFlight) -> Result<Vec<bool>, SimError> {
        let mut out = vec![false; self.width as usize * self.height as usize];
        for c in &flight.captures {
            self.visible_cells(flight, c, &mut out)?;
        }
        Ok(out)
    }

    /// ORs the polygons of class `class` from one set into the scene grid.
    /// Each set is filled on its own so overlapping images do not cancel.
    pub fn rasterize_set(&self, set: &GeoPolygonSet, class: u8, out: &mut [bool]) -> Result<(), SimError> {
        let mut rings = Vec::new();
        let (mut lo, mut hi) = (Point2::new(f64::MAX, f64::MAX), Point2::new(f64::MIN, f64::MIN));
        for poly in set.polygons.iter().filter(|p| p.class_id == class) {
            for ring in poly.rings() {
                let mut r = Vec::with_capacity(ring.len());
                for g in ring {
                    let p = self.frame.to_enu(g)?;
                    let q = self.grid_point(p.e, p.n);
                    lo = Point2::new(lo.x.min(q.x), lo.y.min(q.y));
                    hi = Point2::new(hi.x.max(q.x), hi.y.max(q.y));
                    r.push(q);
                }
                rings.push(r);
            }
        }
        if rings.is_empty() {
            return Ok(());
        }
        let i0 = lo.x.floor().clamp(0.0, self.width as f64) as u32;
        let j0 = lo.y.floor().clamp(0.0, self.height as f64) as u32;
        let i1 = hi.x.ceil().clamp(0.0, self.width as f64) as u32;
        let j1 = hi.y.ceil().clamp(0.0, self.height as f64) as u32;
        if i1 <= i0 || j1 <= j0 {
            return Ok(());
        }
        let (ww, wh) = (i1 - i0, j1 - j0);
        for r in &mut rings {
            for p in r.iter_mut() {
                *p = Point2::new(p.x - i0 as f64, p.y - j0 as f64);
            }
        }
        let local = rasterize_even_odd(&rings, ww, wh);
        for j in 0..wh {
            let src = &local[(j * ww) as usize..((j + 1) * ww) as usize];
            let row = (j + j0) as usize * self.width as usize + i0 as usize;
            for (o, &v) in out[row..row + ww as usize].iter_mut().zip(src) {
                *o |= v;
            }
        }
        Ok(())
    }

    /// Cells of `class` restricted to `within`.
    pub fn class_cells(&self, class: u8, within: &[bool]) -> Vec<bool> {
        self.classes.iter().zip(within).map(|(&c, &w)| w && c == class).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{iou_masks, mask_polygons, sharpness, ReferenceSegmenter, CLASS_FROZEN_WATER};
    use crate::flightsim::{blur_length_px, MissionPlan, Pattern, SceneConfig, SensorSpec};
    use crate::geo::{georegister_mask, EnuPoint, PoseStatus, UnitQuaternion};

    fn small_flight() -> SimFlight {
        let plan = MissionPlan { area_m: [60.0, 60.0], ..MissionPlan::default() };
        SimFlight::generate(&plan).unwrap()
    }

    fn scene_for(flight: &SimFlight, resolution_m: f64) -> SimScene {
        let cfg = SceneConfig { resolution_m, feature_m: 40.0, ..SceneConfig::default() }.covering(flight.ground_bounds().unwrap(), 5.0);
        SimScene::generate(cfg, flight.plan.origin).unwrap()
    }

    #[test]
    fn uniform_scene_renders_uniform() {
        let cfg = SceneConfig { extent_m: [200.0, 200.0], ice_fraction: 1.0, grain_m: 1e6, feature_m: 1e6, ..SceneConfig::default() };
        let origin = MissionPlan::default().origin;
        let scene = SimScene::generate(cfg, origin).unwrap();
        let cam = SensorSpec::default().camera(32, 90.0);
        let pose = TimestampedPose {
            t: 0.0,
            position: scene.frame.to_geodetic(&EnuPoint::new(0.0, 0.0, 30.0)),
            attitude: UnitQuaternion::IDENTITY,
            status: PoseStatus::VALID,
        };
        let r = render_frame(&scene, &cam, &pose, 0.0, [0.0; 3]).unwrap();
        let first = &r.image.data[..3];
        assert!(r.image.data.chunks_exact(3).all(|p| p == first));
        assert!(r.truth.classes.iter().all(|&c| c == CLASS_FROZEN_WATER));
    }

    #[test]
    fn footprint_outside_scene_is_an_error() {
        let flight = small_flight();
        let cfg = SceneConfig { extent_m: [20.0, 20.0], ..SceneConfig::default() };
        let scene = SimScene::generate(cfg, flight.plan.origin).unwrap();
        assert!(matches!(render_capture(&scene, &flight, &flight.captures[0]), Err(SimError::OutOfBounds { .. })));
    }

    #[test]
    fn truth_mask_georegisters_back_onto_scene() {
        let flight = small_flight();
        let scene = scene_for(&flight, 0.1);
        for c in flight.captures.iter().step_by(11) {
            let r = render_capture(&scene, &flight, c).unwrap();
            let polys = mask_polygons(&r.truth);
            let set = georegister_mask(&flight.camera, &c.pose, &flight.frame, 0.0, c.image_id, &polys).unwrap();
            let mut seen = vec![false; scene.classes.len()];
            scene.visible_cells(&flight, c, &mut seen).unwrap();
            let mut got = vec![false; seen.len()];
            scene.rasterize_set(&set, CLASS_FROZEN_WATER, &mut got).unwrap();
            let got: Vec<bool> = got.iter().zip(&seen).map(|(&g, &s)| g && s).collect();
            let iou = iou_masks(&got, &scene.class_cells(CLASS_FROZEN_WATER, &seen));
            assert!(iou >= 0.99, "image {} IoU {iou}", c.image_id);
        }
    }

    #[test]
    fn reference_segmenter_matches_truth() {
        let flight = small_flight();
        let scene = scene_for(&flight, 0.25);
        let r = render_capture(&scene, &flight, &flight.captures[20]).unwrap();
        let seg = ReferenceSegmenter { downsample: 1, ..ReferenceSegmenter::default() };
        let pred: Vec<bool> = r.image.data.chunks_exact(3).map(|p| seg.classify([p[0], p[1], p[2]]) == CLASS_FROZEN_WATER).collect();
        let truth: Vec<bool> = r.truth.classes.iter().map(|&c| c == CLASS_FROZEN_WATER).collect();
        assert!(iou_masks(&pred, &truth) >= 0.95);
    }

    #[test]
    fn longer_exposure_blurs() {
        // A 640×480 window of the full-resolution sensor at 30 m: 1 cm GSD.
        let sensor = SensorSpec { width_px: 640, height_px: 480, ..SensorSpec::default() };
        assert!((blur_length_px(10.0, 2000.0, sensor.gsd_m(30.0)) - 2.0).abs() < 0.01);
        let plan = MissionPlan { pattern: Pattern::Hover, duration_s: Some(1.0), sensor, decimation: 1, ..MissionPlan::default() };
        let flight = SimFlight::generate(&plan).unwrap();
        let scene = SimScene::generate(SceneConfig { extent_m: [20.0, 20.0], ..SceneConfig::default() }, plan.origin).unwrap();
        let pose = flight.captures[0].pose;
        let score = |us: f64| {
            let r = render_frame(&scene, &flight.camera, &pose, us, [0.0, 10.0, 0.0]).unwrap();
            sharpness(&r.image, 64, us).global_score
        };
        let (fast, slow) = (score(500.0), score(2000.0));
        assert!(slow < 0.5 * fast, "{slow} vs {fast}");
        assert!(score(0.0) >= fast);
    }
}
