#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use nalgebra::{Point2, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeoError, UnitQuaternion};

pub const UNDISTORT_MAX_ITERATIONS: usize = 20;
/// Convergence threshold on the normalized-coordinate update.
pub const UNDISTORT_TOLERANCE: f64 = 1e-8;

/// Pinhole intrinsics with 4-parameter radial-tangential distortion and the
/// fixed mounting relative to the INS.
///
/// `boresight` rotates INS-body vectors into the camera frame (x right,
/// y down, z forward). `lever_arm` is the INS→camera offset in the body frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub k1: f64,
    #[serde(default)]
    pub k2: f64,
    #[serde(default)]
    pub p1: f64,
    #[serde(default)]
    pub p2: f64,
    #[serde(default)]
    pub boresight: UnitQuaternion,
    #[serde(default)]
    pub lever_arm: [f64; 3],
}

impl CameraModel {
    /// Distortion-free camera with the principal point at the image center.
    pub fn pinhole(width: u32, height: u32, focal_px: f64) -> Self {
        Self {
            width,
            height,
            fx: focal_px,
            fy: focal_px,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            k1: 0.0,
            k2: 0.0,
            p1: 0.0,
            p2: 0.0,
            boresight: UnitQuaternion::IDENTITY,
            lever_arm: [0.0; 3],
        }
    }

    pub fn with_boresight(mut self, boresight: UnitQuaternion) -> Self {
        self.boresight = boresight;
        self
    }

    pub fn with_distortion(mut self, k1: f64, k2: f64, p1: f64, p2: f64) -> Self {
        self.k1 = k1;
        self.k2 = k2;
        self.p1 = p1;
        self.p2 = p2;
        self
    }

    /// Boresight for a camera looking `depression_deg` below the body's
    /// forward axis with image-right pointing to the body's right.
    /// 90° is a nadir mount with the top of the image toward the nose.
    pub fn mount_depressed(depression_deg: f64) -> UnitQuaternion {
        let (s, c) = depression_deg.to_radians().sin_cos();
        // Rows: camera x, y, z axes expressed in body (forward, left, up).
        let m = nalgebra::Matrix3::new(0.0, -1.0, 0.0, -s, 0.0, -c, c, 0.0, -s);
        UnitQuaternion::from_rotation_matrix(&m)
    }

    pub fn nadir_mount() -> UnitQuaternion {
        Self::mount_depressed(90.0)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if self.width == 0 || self.height == 0 {
            return Err(GeoError::InvalidCamera("image dimensions must be positive"));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeoError::InvalidCamera("focal lengths must be positive"));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64 && self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(GeoError::InvalidCamera("principal point outside the image"));
        }
        if ![self.k1, self.k2, self.p1, self.p2].iter().all(|v| v.is_finite()) {
            return Err(GeoError::InvalidCamera("non-finite distortion"));
        }
        if (self.boresight.norm() - 1.0).abs() > 1e-9 {
            return Err(GeoError::InvalidCamera("boresight not unit-norm"));
        }
        Ok(())
    }

    pub fn has_distortion(&self) -> bool {
        self.k1 != 0.0 || self.k2 != 0.0 || self.p1 != 0.0 || self.p2 != 0.0
    }

    /// Applies lens distortion to normalized image coordinates.
    pub fn distort(&self, x: f64, y: f64) -> (f64, f64) {
        let r2 = x * x + y * y;
        let radial = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
        let dx = 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x);
        let dy = self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y;
        (x * radial + dx, y * radial + dy)
    }

    /// Inverts [`CameraModel::distort`] by iterating the Newton map of the
    /// forward model, starting from the distorted coordinates.
    pub fn undistort(&self, xd: f64, yd: f64) -> Result<(f64, f64), GeoError> {
        if !self.has_distortion() {
            return Ok((xd, yd));
        }
        let (mut x, mut y) = (xd, yd);
        for _ in 0..UNDISTORT_MAX_ITERATIONS {
            let (fx, fy) = self.distort(x, y);
            let (rx, ry) = (fx - xd, fy - yd);
            let [[a, b], [c, d]] = self.distort_jacobian(x, y);
            let det = a * d - b * c;
            if det.abs() < 1e-12 || !det.is_finite() {
                break;
            }
            let sx = (d * rx - b * ry) / det;
            let sy = (a * ry - c * rx) / det;
            x -= sx;
            y -= sy;
            if !(x.is_finite() && y.is_finite()) {
                break;
            }
            if sx.abs().max(sy.abs()) < UNDISTORT_TOLERANCE {
                return Ok((x, y));
            }
        }
        Err(GeoError::Undistortion { iterations: UNDISTORT_MAX_ITERATIONS })
    }

    fn distort_jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let r2 = x * x + y * y;
        let radial = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
        let dradial = self.k1 + 2.0 * self.k2 * r2; // d(radial)/d(r2)
        let (p1, p2) = (self.p1, self.p2);
        [
            [
                radial + 2.0 * x * x * dradial + 2.0 * p1 * y + 6.0 * p2 * x,
                2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y,
            ],
            [
                2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y,
                radial + 2.0 * y * y * dradial + 6.0 * p1 * y + 2.0 * p2 * x,
            ],
        ]
    }

    /// Projects a camera-frame point to pixels. `None` when the point is not
    /// in front of the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<Point2<f64>> {
        if p.z <= 0.0 {
            return None;
        }
        let (xd, yd) = self.distort(p.x / p.z, p.y / p.z);
        Some(Point2::new(self.fx * xd + self.cx, self.fy * yd + self.cy))
    }

    /// Unit viewing ray in the camera frame through pixel `px`.
    pub fn pixel_to_ray(&self, px: &Point2<f64>) -> Result<Vector3<f64>, GeoError> {
        let (x, y) = self.undistort((px.x - self.cx) / self.fx, (px.y - self.cy) / self.fy)?;
        Ok(Vector3::new(x, y, 1.0).normalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_1_SQRT_2;
    use proptest::prelude::*;

    fn cam() -> CameraModel {
        CameraModel::pinhole(1000, 800, 900.0)
    }

    #[test]
    fn principal_point_is_optical_axis() {
        let r = cam().pixel_to_ray(&Point2::new(500.0, 400.0)).unwrap();
        assert!((r - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn one_focal_length_right_is_45_degrees() {
        let c = cam();
        let r = c.pixel_to_ray(&Point2::new(c.cx + c.fx, c.cy)).unwrap();
        assert!((r - Vector3::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn barrel_distortion_round_trip() {
        let c = cam().with_distortion(-0.1, 0.0, 0.0, 0.0);
        for &(u, v) in &[(3.0, 5.0), (997.0, 795.0), (120.5, 640.25), (500.0, 10.0)] {
            let px = Point2::new(u, v);
            let back = c.project(&c.pixel_to_ray(&px).unwrap()).unwrap();
            assert!((back - px).norm() < 1e-3, "{px:?} -> {back:?}");
        }
    }

    #[test]
    fn pathological_distortion_reports_iterations() {
        let c = cam().with_distortion(-4.0, 0.0, 0.0, 0.0);
        // r·(1 − 4r²) never exceeds 0.19, so the corner has no preimage.
        let err = c.pixel_to_ray(&Point2::new(1000.0, 800.0)).unwrap_err();
        assert_eq!(err, GeoError::Undistortion { iterations: UNDISTORT_MAX_ITERATIONS });
    }

    #[test]
    fn nadir_mount_looks_down_with_nose_up_in_image() {
        let b = CameraModel::nadir_mount();
        // Body down (−z) is the optical axis; body forward is image up (−y).
        assert!((b.rotate(&Vector3::new(0.0, 0.0, -1.0)) - Vector3::z()).norm() < 1e-12);
        assert!((b.rotate(&Vector3::x()) - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        assert!((b.rotate(&Vector3::new(0.0, -1.0, 0.0)) - Vector3::x()).norm() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(cam().validate().is_ok());
        let mut c = cam();
        c.cx = 1200.0;
        assert!(c.validate().is_err());
        c = cam();
        c.fy = 0.0;
        assert!(c.validate().is_err());
    }

    proptest! {
        // Narrower field than `cam()`: with k1 = k2 = −0.3 the forward model
        // folds over near r = 0.75, beyond which distorted points have no
        // preimage at all. Corners here sit at r ≈ 0.49.
        #[test]
        fn project_unproject_identity(
            k1 in -0.3f64..0.3, k2 in -0.3f64..0.3, p1 in -0.01f64..0.01, p2 in -0.01f64..0.01,
            u in 0.0f64..1000.0, v in 0.0f64..800.0,
        ) {
            let c = CameraModel::pinhole(1000, 800, 1300.0).with_distortion(k1, k2, p1, p2);
            let px = Point2::new(u, v);
            let back = c.project(&c.pixel_to_ray(&px).unwrap()).unwrap();
            prop_assert!((back - px).norm() < 1e-3);
        }
    }
}
