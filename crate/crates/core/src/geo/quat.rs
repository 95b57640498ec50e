use core::ops::{Mul, Neg};

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeoError;

/// A rotation stored as a unit quaternion `w + xi + yj + zk`.
///
/// `q` and `-q` describe the same rotation; [`UnitQuaternion::angle_to`] and
/// [`UnitQuaternion::approx_eq`] treat them as equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuaternion", into = "RawQuaternion")]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Serialize, Deserialize)]
struct RawQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl TryFrom<RawQuaternion> for UnitQuaternion {
    type Error = GeoError;
    fn try_from(r: RawQuaternion) -> Result<Self, Self::Error> {
        UnitQuaternion::from_wxyz(r.w, r.x, r.y, r.z)
    }
}

impl From<UnitQuaternion> for RawQuaternion {
    fn from(q: UnitQuaternion) -> Self {
        RawQuaternion { w: q.w, x: q.x, y: q.y, z: q.z }
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuaternion {
    pub const IDENTITY: Self = Self { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Normalizes the given components. Components already of unit norm to
    /// within rounding are kept bit for bit, so serialized attitudes read
    /// back unchanged.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeoError> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(GeoError::DegenerateQuaternion);
        }
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(Self { w, x, y, z });
        }
        Ok(Self { w: w / n, x: x / n, y: y / n, z: z / n })
    }

    fn normalized(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Self { w: w / n, x: x / n, y: y / n, z: z / n }
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn wxyz(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n < 1e-300 || angle == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis / n;
        Self::normalized(c, a.x * s, a.y * s, a.z * s)
    }

    /// Rotation from a rotation vector (axis × angle).
    pub fn exp(v: &Vector3<f64>) -> Self {
        let angle = v.norm();
        if angle < 1e-12 {
            // First-order expansion keeps tiny rotations exact to rounding.
            return Self::normalized(1.0, 0.5 * v.x, 0.5 * v.y, 0.5 * v.z);
        }
        Self::from_axis_angle(v, angle)
    }

    /// Rotation vector of the shortest rotation equivalent to `self`.
    pub fn log(&self) -> Vector3<f64> {
        let q = self.canonical();
        let s = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
        if s < 1e-300 {
            return Vector3::zeros();
        }
        let angle = 2.0 * s.atan2(q.w);
        Vector3::new(q.x, q.y, q.z) * (angle / s)
    }

    /// Yaw about +z, then pitch about +y, then roll about +x (intrinsic z-y-x).
    pub fn from_yaw_pitch_roll(yaw: f64, pitch: f64, roll: f64) -> Self {
        let z = Self::from_axis_angle(&Vector3::z(), yaw);
        let y = Self::from_axis_angle(&Vector3::y(), pitch);
        let x = Self::from_axis_angle(&Vector3::x(), roll);
        z * y * x
    }

    pub fn conjugate(&self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn inverse(&self) -> Self {
        self.conjugate()
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// The representative with non-negative `w`.
    pub fn canonical(&self) -> Self {
        if self.w < 0.0 {
            -*self
        } else {
            *self
        }
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let u = Vector3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Converts a proper rotation matrix (Shepperd's method).
    pub fn from_rotation_matrix(m: &Matrix3<f64>) -> Self {
        let tr = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let q = if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            (0.25 * s, (m[(2, 1)] - m[(1, 2)]) / s, (m[(0, 2)] - m[(2, 0)]) / s, (m[(1, 0)] - m[(0, 1)]) / s)
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            (
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            (
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            (
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        };
        Self::normalized(q.0, q.1, q.2, q.3).canonical()
    }

    /// Angle in radians of the rotation taking `self` to `other`, in `[0, π]`.
    pub fn angle_to(&self, other: &Self) -> f64 {
        let d = self.conjugate() * *other;
        let s = (d.x * d.x + d.y * d.y + d.z * d.z).sqrt();
        2.0 * s.atan2(d.w.abs())
    }

    pub fn approx_eq(&self, other: &Self, tol_rad: f64) -> bool {
        self.angle_to(other) <= tol_rad
    }

    /// Geodesic interpolation along the shortest arc, valid for any `u`
    /// (values outside `[0, 1]` extrapolate at constant angular rate).
    pub fn slerp_unclamped(&self, other: &Self, u: f64) -> Self {
        let other = shortest_partner(self, other);
        let rel = self.conjugate() * other;
        *self * Self::exp(&(rel.log() * u))
    }
}

fn shortest_partner(q0: &UnitQuaternion, q1: &UnitQuaternion) -> UnitQuaternion {
    let d = q0.dot(q1);
    if d < 0.0 || (d == 0.0 && q1.w < 0.0) {
        -*q1
    } else {
        *q1
    }
}

impl Neg for UnitQuaternion {
    type Output = Self;
    fn neg(self) -> Self {
        Self { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
    }
}

impl Mul for UnitQuaternion {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        let a = self;
        Self::normalized(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

/// Spherical linear interpolation between `q0` (`u = 0`) and `q1` (`u = 1`)
/// along the shortest arc. `u` is clamped to `[0, 1]`.
///
/// When the pair is exactly 90° apart in quaternion space (a 180° relative
/// rotation) the partner with non-negative `w` is used.
pub fn slerp(q0: &UnitQuaternion, q1: &UnitQuaternion, u: f64) -> UnitQuaternion {
    let u = u.clamp(0.0, 1.0);
    let q1 = shortest_partner(q0, q1);
    let d = q0.dot(&q1).min(1.0);
    if u == 0.0 {
        return *q0;
    }
    if u == 1.0 {
        return q1;
    }
    if d > 1.0 - 1e-10 {
        // Nearly identical rotations: normalized lerp is exact to rounding.
        return UnitQuaternion::normalized(
            q0.w + u * (q1.w - q0.w),
            q0.x + u * (q1.x - q0.x),
            q0.y + u * (q1.y - q0.y),
            q0.z + u * (q1.z - q0.z),
        );
    }
    let theta = d.acos();
    let s = theta.sin();
    let a = ((1.0 - u) * theta).sin() / s;
    let b = (u * theta).sin() / s;
    UnitQuaternion::normalized(
        a * q0.w + b * q1.w,
        a * q0.x + b * q1.x,
        a * q0.y + b * q1.y,
        a * q0.z + b * q1.z,
    )
}
