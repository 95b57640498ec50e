use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{EnuFrame, EnuPoint, GeoError, GeodeticPosition, UnitQuaternion};

/// Poses may be extrapolated this far beyond either end of a trajectory
/// (five INS periods at 100 Hz).
pub const EXTRAPOLATION_WINDOW_S: f64 = 0.05;

/// INS solution status bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoseStatus(pub u8);

impl PoseStatus {
    pub const FIX_VALID: u8 = 0x01;
    pub const ATTITUDE_VALID: u8 = 0x02;
    pub const VALID: Self = Self(Self::FIX_VALID | Self::ATTITUDE_VALID);

    pub fn is_valid(self) -> bool {
        self.0 & Self::VALID.0 == Self::VALID.0
    }
}

impl Default for PoseStatus {
    fn default() -> Self {
        Self::VALID
    }
}

/// One INS record. `attitude` rotates body vectors into ENU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimestampedPose {
    pub t: f64,
    pub position: GeodeticPosition,
    pub attitude: UnitQuaternion,
    pub status: PoseStatus,
}

/// A validated, strictly time-ordered pose sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<TimestampedPose>,
}

impl Trajectory {
    pub fn new(poses: Vec<TimestampedPose>) -> Result<Self, GeoError> {
        if poses.is_empty() {
            return Err(GeoError::EmptyTrajectory);
        }
        for (i, w) in poses.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(GeoError::NonMonotonicTime(i + 1));
            }
        }
        for p in &poses {
            p.position.validate()?;
            if !p.t.is_finite() {
                return Err(GeoError::NonFinite);
            }
        }
        Ok(Self { poses })
    }

    pub fn poses(&self) -> &[TimestampedPose] {
        &self.poses
    }

    pub fn into_poses(self) -> Vec<TimestampedPose> {
        self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.poses[0].t
    }

    pub fn end(&self) -> f64 {
        self.poses[self.poses.len() - 1].t
    }

    /// Pose at time `t`: position linear in a local ENU frame, attitude by
    /// slerp. Within [`EXTRAPOLATION_WINDOW_S`] of either end the nearest
    /// two samples are extrapolated at constant velocity and angular rate.
    pub fn interpolate(&self, t: f64) -> Result<TimestampedPose, GeoError> {
        let (start, end) = (self.start(), self.end());
        if !t.is_finite() || t < start - EXTRAPOLATION_WINDOW_S || t > end + EXTRAPOLATION_WINDOW_S {
            return Err(GeoError::OutOfRange { t, start, end });
        }
        let idx = self.poses.partition_point(|p| p.t <= t);
        if idx > 0 && self.poses[idx - 1].t == t {
            let p = self.poses[idx - 1];
            check_status(&p)?;
            return Ok(p);
        }
        if self.poses.len() == 1 {
            let p = self.poses[0];
            check_status(&p)?;
            return Ok(TimestampedPose { t, ..p });
        }
        let i = idx.clamp(1, self.poses.len() - 1);
        let (a, b) = (&self.poses[i - 1], &self.poses[i]);
        check_status(a)?;
        check_status(b)?;
        let u = (t - a.t) / (b.t - a.t);
        let frame = EnuFrame::new(a.position)?;
        let pb = frame.to_enu(&b.position)?;
        let pos = frame.to_geodetic(&EnuPoint::new(u * pb.e, u * pb.n, u * pb.u));
        let attitude = if (0.0..=1.0).contains(&u) {
            super::slerp(&a.attitude, &b.attitude, u)
        } else {
            a.attitude.slerp_unclamped(&b.attitude, u)
        };
        Ok(TimestampedPose { t, position: pos, attitude, status: PoseStatus(a.status.0 & b.status.0) })
    }
}

fn check_status(p: &TimestampedPose) -> Result<(), GeoError> {
    if p.status.is_valid() {
        Ok(())
    } else {
        Err(GeoError::InvalidStatus { t: p.t, status: p.status.0 })
    }
}

pub fn interpolate_pose(traj: &Trajectory, t: f64) -> Result<TimestampedPose, GeoError> {
    traj.interpolate(t)
}
