//! Coordinate frames, attitude math, the camera model and direct
//! georeferencing.
//!
//! Conventions used throughout:
//!
//! - Local Cartesian coordinates are east/north/up ([`EnuPoint`]) relative to
//!   an [`EnuFrame`] origin on the WGS-84 ellipsoid.
//! - INS attitude is a body→ENU rotation. The body frame is forward/left/up.
//! - The camera frame is x right, y down, z along the optical axis. The
//!   camera boresight is the INS-body→camera rotation.
//! - Angles are radians internally; degrees appear only in geodetic
//!   coordinates and at I/O boundaries.

mod camera;
mod geodesy;
mod georef;
mod pose;
mod quat;

pub use camera::{CameraModel, UNDISTORT_MAX_ITERATIONS, UNDISTORT_TOLERANCE};
pub use geodesy::{enu_to_geodetic, geodetic_to_enu, EnuFrame, EnuPoint, GeodeticPosition, WGS84_A, WGS84_F};
pub use georef::{
    georegister_mask, georegister_pixel, georegister_pixel_enu, CameraPose, GeoPolygon, GeoPolygonSet,
    MIN_GRAZING_DEG,
};
pub use pose::{interpolate_pose, PoseStatus, TimestampedPose, Trajectory, EXTRAPOLATION_WINDOW_S};
pub use quat::{slerp, UnitQuaternion};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude {0}° outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0}° outside [-180, 180)")]
    LongitudeOutOfRange(f64),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("query time {t} outside trajectory span [{start}, {end}] plus extrapolation window")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("pose sample at t={t} has invalid status bits {status:#04x}")]
    InvalidStatus { t: f64, status: u8 },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("trajectory times not strictly increasing at index {0}")]
    NonMonotonicTime(usize),
    #[error("undistortion did not converge after {iterations} iterations")]
    Undistortion { iterations: usize },
    #[error("ray does not hit the ground plane at least {min_deg}° below the horizon")]
    Horizon { min_deg: f64 },
    #[error("invalid camera model: {0}")]
    InvalidCamera(&'static str),
    #[error("quaternion has zero or non-finite norm")]
    DegenerateQuaternion,
}
