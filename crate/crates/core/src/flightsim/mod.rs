//! Deterministic synthetic missions: a river-ice scene, flight plans and
//! trajectories, camera triggering and frame rendering with motion blur.

mod noise;
mod plan;
mod render;
mod scene;

pub use noise::{fbm, value_noise};
pub use plan::{
    blur_length_px, generate_trajectory, ground_sample_distance, sfm_export, Capture, FlightState, InsNoise, MissionPlan,
    Pattern, PlanError, SensorSpec, SfmNoise, SimFlight, GRAVITY, MAX_BANK_DEG, MAX_ROLL_RATE_DEG_S,
};
pub use render::{render_capture, render_frame, Rendered};
pub use scene::{fractal_mask, SceneConfig, SimScene, BACKGROUND_LUMINANCE, ICE_LUMINANCE};

use thiserror::Error;

use crate::geo::GeoError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("scene: {0}")]
    Scene(&'static str),
    #[error("ground point ({e:.1}, {n:.1}) m lies outside the scene")]
    OutOfBounds { e: f64, n: f64 },
    #[error("pixel ({x}, {y}) does not see the ground")]
    Horizon { x: u32, y: u32 },
    #[error("camera is {0:.2} m above the ground plane")]
    BelowGround(f64),
    #[error(transparent)]
    Geo(#[from] GeoError),
}
