//! Onboard-to-ground data path for an aerial imaging payload.
//!
//! This crate holds everything that does not need an operating system:
//!
//! - [`geo`]: geodesy, attitude math, the camera model and direct
//!   georeferencing of pixels and masks onto a ground plane.
//! - [`timebase`]: PPS clock discipline and timestamp validation.
//! - [`calib`]: similarity, boresight and time-offset calibration against an
//!   SfM pose export.
//! - [`analytics`]: segmentation backends, byte-budgeted mask vectorization,
//!   histogram, sharpness and the exposure advice rule.
//! - [`annotate`]: sparse label ingestion, masked metrics and triage accounting.
//! - [`downlink`]: the wire format, priority scheduling, blackout buffering,
//!   the lossy-link model and the reliable session simulation.
//! - [`flightsim`]: the deterministic synthetic mission generator used as the
//!   ground-truth oracle.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the ground
//! station service and the command line live in the `adapt` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytics;
pub mod annotate;
pub mod calib;
pub mod downlink;
pub mod flightsim;
pub mod geo;
pub mod polygon;
pub mod timebase;

pub use nalgebra::{Matrix3, Point2, Vector3};
