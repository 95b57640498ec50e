//! Direct georeferencing: casting pixel rays from an INS-derived camera pose
//! onto a horizontal ground plane.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use nalgebra::{Matrix3, Point2, Vector3};
use serde::{Deserialize, Serialize};

use super::{CameraModel, EnuFrame, EnuPoint, GeoError, GeodeticPosition, TimestampedPose};
use crate::polygon::{signed_area, ClassPolygon, PixelPolygon};

/// Rays must point at least this far below the horizon to be intersected
/// with the ground plane.
pub const MIN_GRAZING_DEG: f64 = 0.5;

const CLIP_BISECTION_STEPS: usize = 48;

/// Camera extrinsics in a mission ENU frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    center: Vector3<f64>,
    cam_to_enu: Matrix3<f64>,
}

impl CameraPose {
    /// Composes INS attitude, boresight and lever arm.
    pub fn new(cam: &CameraModel, pose: &TimestampedPose, frame: &EnuFrame) -> Result<Self, GeoError> {
        let ins = frame.to_enu(&pose.position)?.to_vector();
        let body_to_enu = pose.attitude.to_rotation_matrix();
        let lever = Vector3::from(cam.lever_arm);
        let cam_to_enu = body_to_enu * cam.boresight.to_rotation_matrix().transpose();
        Ok(Self { center: ins + body_to_enu * lever, cam_to_enu })
    }

    pub fn center(&self) -> EnuPoint {
        EnuPoint::from_vector(&self.center)
    }

    pub fn cam_to_enu(&self) -> Matrix3<f64> {
        self.cam_to_enu
    }

    pub fn ray_enu(&self, cam: &CameraModel, px: &Point2<f64>) -> Result<Vector3<f64>, GeoError> {
        Ok(self.cam_to_enu * cam.pixel_to_ray(px)?)
    }

    fn depression_ok(&self, ray: &Vector3<f64>) -> bool {
        -ray.z >= MIN_GRAZING_DEG.to_radians().sin()
    }

    /// Whether the pixel's ray meets the ground plane steeply enough.
    pub fn sees_ground(&self, cam: &CameraModel, px: &Point2<f64>) -> Result<bool, GeoError> {
        Ok(self.depression_ok(&self.ray_enu(cam, px)?))
    }

    pub fn ground_point(&self, cam: &CameraModel, px: &Point2<f64>, ground_u: f64) -> Result<EnuPoint, GeoError> {
        let ray = self.ray_enu(cam, px)?;
        let height = self.center.z - ground_u;
        if height <= 0.0 || !self.depression_ok(&ray) {
            return Err(GeoError::Horizon { min_deg: MIN_GRAZING_DEG });
        }
        let s = height / -ray.z;
        Ok(EnuPoint::from_vector(&(self.center + ray * s)))
    }

    /// Projects an ENU point into the image. `None` behind the camera.
    pub fn project(&self, cam: &CameraModel, p: &EnuPoint) -> Option<Point2<f64>> {
        cam.project(&(self.cam_to_enu.transpose() * (p.to_vector() - self.center)))
    }
}

/// Ground position of pixel `px` on the plane `u = ground_u`.
pub fn georegister_pixel(
    cam: &CameraModel,
    pose: &TimestampedPose,
    frame: &EnuFrame,
    ground_u: f64,
    px: &Point2<f64>,
) -> Result<GeodeticPosition, GeoError> {
    Ok(frame.to_geodetic(&georegister_pixel_enu(cam, pose, frame, ground_u, px)?))
}

pub fn georegister_pixel_enu(
    cam: &CameraModel,
    pose: &TimestampedPose,
    frame: &EnuFrame,
    ground_u: f64,
    px: &Point2<f64>,
) -> Result<EnuPoint, GeoError> {
    CameraPose::new(cam, pose, frame)?.ground_point(cam, px, ground_u)
}

pub type GeoPolygon = ClassPolygon<GeodeticPosition>;

/// Per-image analytic output in geodetic coordinates.
///
/// Exterior rings are counter-clockwise and holes clockwise when viewed with
/// east right and north up. Every ring is closed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GeoPolygonSet {
    pub image_id: u64,
    pub polygons: Vec<GeoPolygon>,
    /// Size of the canonical downlink encoding, filled in by the encoder.
    pub encoded_bytes: usize,
    /// Rings that were partially cut at the horizon threshold.
    pub clipped_rings: u32,
    /// Rings lying entirely above the horizon threshold.
    pub dropped_rings: u32,
}

impl GeoPolygonSet {
    /// Set when every input ring was above the horizon.
    pub fn horizon_empty(&self) -> bool {
        self.polygons.is_empty() && self.dropped_rings > 0
    }
}

/// Clips a closed pixel ring to the part whose rays meet the ground.
/// Returns `(ring, was_clipped)`; the ring is empty when nothing remains.
fn clip_ring(
    cp: &CameraPose,
    cam: &CameraModel,
    ring: &[Point2<f64>],
) -> Result<(Vec<Point2<f64>>, bool), GeoError> {
    let n = ring.len().saturating_sub(1);
    let mut valid = Vec::with_capacity(n);
    for p in &ring[..n] {
        valid.push(cp.sees_ground(cam, p)?);
    }
    if valid.iter().all(|&v| v) {
        return Ok((ring.to_vec(), false));
    }
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        let (va, vb) = (valid[i], valid[(i + 1) % n]);
        if va && vb {
            out.push(b);
        } else if va != vb {
            // Bisect along the pixel-space edge, keeping the valid end.
            let (mut good, mut bad) = if va { (a, b) } else { (b, a) };
            for _ in 0..CLIP_BISECTION_STEPS {
                let mid = Point2::new(0.5 * (good.x + bad.x), 0.5 * (good.y + bad.y));
                if cp.sees_ground(cam, &mid)? {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            out.push(good);
            if vb {
                out.push(b);
            }
        }
    }
    out.dedup();
    if out.len() < 3 {
        return Ok((Vec::new(), true));
    }
    let first = out[0];
    out.push(first);
    Ok((out, true))
}

fn map_ring(
    cp: &CameraPose,
    cam: &CameraModel,
    frame: &EnuFrame,
    ground_u: f64,
    ring: &[Point2<f64>],
    counter_clockwise: bool,
) -> Result<Vec<GeodeticPosition>, GeoError> {
    let mut enu = Vec::with_capacity(ring.len());
    for p in ring {
        let g = cp.ground_point(cam, p, ground_u)?;
        enu.push((Point2::new(g.e, g.n), g));
    }
    let planar: Vec<Point2<f64>> = enu.iter().map(|(p, _)| *p).collect();
    if (signed_area(&planar) > 0.0) != counter_clockwise {
        enu.reverse();
    }
    Ok(enu.iter().map(|(_, g)| frame.to_geodetic(g)).collect())
}

/// Maps pixel-space class polygons onto the ground plane. Ring portions
/// whose rays graze or miss the ground are clipped in pixel space first.
pub fn georegister_mask(
    cam: &CameraModel,
    pose: &TimestampedPose,
    frame: &EnuFrame,
    ground_u: f64,
    image_id: u64,
    polygons: &[PixelPolygon],
) -> Result<GeoPolygonSet, GeoError> {
    let cp = CameraPose::new(cam, pose, frame)?;
    let mut set = GeoPolygonSet { image_id, ..GeoPolygonSet::default() };
    for poly in polygons {
        let (exterior, clipped) = clip_ring(&cp, cam, &poly.exterior)?;
        set.clipped_rings += u32::from(clipped && !exterior.is_empty());
        if exterior.is_empty() {
            set.dropped_rings += poly.ring_count() as u32;
            continue;
        }
        let mut holes = Vec::new();
        for hole in &poly.holes {
            let (h, clipped) = clip_ring(&cp, cam, hole)?;
            if h.is_empty() {
                set.dropped_rings += 1;
                continue;
            }
            set.clipped_rings += u32::from(clipped);
            holes.push(map_ring(&cp, cam, frame, ground_u, &h, false)?);
        }
        set.polygons.push(ClassPolygon {
            class_id: poly.class_id,
            exterior: map_ring(&cp, cam, frame, ground_u, &exterior, true)?,
            holes,
        });
    }
    Ok(set)
}
