//! Mission plans, flight paths and camera triggering.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Vector3;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::{SfmPose, SimilarityTransform};
use crate::geo::{CameraModel, CameraPose, EnuFrame, EnuPoint, GeoError, GeodeticPosition, PoseStatus, TimestampedPose, Trajectory, UnitQuaternion};
use crate::timebase::mid_exposure;

pub const GRAVITY: f64 = 9.80665;
/// Steepest coordinated-turn bank a plan may demand.
pub const MAX_BANK_DEG: f64 = 45.0;
/// Roll rate limit when entering or leaving a turn.
pub const MAX_ROLL_RATE_DEG_S: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("overlap {0} outside [0, 0.9]")]
    Overlap(f64),
    #[error("camera rate {fps} Hz exceeds the INS rate {ins_hz} Hz")]
    FrameRate { fps: f64, ins_hz: f64 },
    #[error("{0} must be positive and finite")]
    NotPositive(&'static str),
    #[error("{pattern:?} plans need a duration")]
    Duration { pattern: Pattern },
    #[error("turn radius {radius_m:.1} m needs {bank_deg:.1}° of bank, more than {MAX_BANK_DEG}°")]
    TurnTooTight { radius_m: f64, bank_deg: f64 },
    #[error("camera depression {0}° outside (0, 90]")]
    Depression(f64),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Physical sensor behind the virtual camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub width_px: u32,
    pub height_px: u32,
    pub focal_mm: f64,
    pub pixel_pitch_um: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self { width_px: 5320, height_px: 3032, focal_mm: 8.0, pixel_pitch_um: 2.667 }
    }
}

impl SensorSpec {
    pub fn focal_px(&self) -> f64 {
        self.focal_mm * 1e3 / self.pixel_pitch_um
    }

    pub fn gsd_m(&self, altitude_m: f64) -> f64 {
        ground_sample_distance(altitude_m, self.focal_mm, self.pixel_pitch_um)
    }

    /// Nadir footprint `(across, along)` in meters; image rows run along track.
    pub fn footprint_m(&self, altitude_m: f64) -> (f64, f64) {
        let g = self.gsd_m(altitude_m);
        (self.width_px as f64 * g, self.height_px as f64 * g)
    }

    /// Camera model binned by `decimation` on both axes, mounted
    /// `depression_deg` below the nose.
    pub fn camera(&self, decimation: u32, depression_deg: f64) -> CameraModel {
        let d = decimation.max(1);
        CameraModel::pinhole(self.width_px / d, self.height_px / d, self.focal_px() / d as f64)
            .with_boresight(CameraModel::mount_depressed(depression_deg))
    }
}

/// Ground footprint of one pixel for a nadir view.
pub fn ground_sample_distance(altitude_m: f64, focal_mm: f64, pixel_pitch_um: f64) -> f64 {
    altitude_m * pixel_pitch_um * 1e-6 / (focal_mm * 1e-3)
}

/// Along-track smear during one exposure, in pixels.
pub fn blur_length_px(speed_mps: f64, exposure_us: f64, gsd_m: f64) -> f64 {
    speed_mps * exposure_us * 1e-6 / gsd_m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    Lawnmower,
    FigureEight,
    BankLine,
    Hover,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsNoise {
    pub position_sigma_m: f64,
    pub attitude_sigma_deg: f64,
}

impl Default for InsNoise {
    fn default() -> Self {
        Self { position_sigma_m: 0.02, attitude_sigma_deg: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionPlan {
    pub seed: u64,
    pub pattern: Pattern,
    /// Ground-level origin of the mission ENU frame.
    pub origin: GeodeticPosition,
    pub altitude_m: f64,
    pub speed_mps: f64,
    /// Cross-track overlap of adjacent lawnmower passes.
    pub overlap: f64,
    pub fps: f64,
    pub ins_hz: f64,
    /// 90 is nadir, smaller values look forward.
    pub camera_depression_deg: f64,
    pub sensor: SensorSpec,
    /// Pixel binning of the rendered frames; 1 renders the full sensor.
    pub decimation: u32,
    pub exposure_us: f64,
    /// `(seconds after start, exposure_us)` steps overriding `exposure_us`.
    pub exposure_schedule: Vec<[f64; 2]>,
    /// Lawnmower survey area across × along track. The figure-eight spans
    /// `area_m[0]` across; the bank line runs `area_m[1]` along.
    pub area_m: [f64; 2],
    /// Compass heading of the main track, degrees clockwise from north.
    pub heading_deg: f64,
    /// Required for repeating patterns; caps a lawnmower.
    pub duration_s: Option<f64>,
    /// Figure-eight altitude excursion, ± meters.
    pub altitude_swing_m: f64,
    pub turn_radius_m: f64,
    pub ins_noise: Option<InsNoise>,
    /// Added to recorded image timestamps.
    pub camera_time_offset_s: f64,
    /// GPS time of the first INS record; frames trigger on its whole seconds.
    pub start_gps_s: f64,
}

impl Default for MissionPlan {
    fn default() -> Self {
        Self {
            seed: 1,
            pattern: Pattern::Lawnmower,
            origin: GeodeticPosition { lat_deg: 64.8458, lon_deg: -147.7187, alt_m: 130.0 },
            altitude_m: 30.0,
            speed_mps: 10.0,
            overlap: 0.2,
            fps: 4.0,
            ins_hz: 100.0,
            camera_depression_deg: 90.0,
            sensor: SensorSpec::default(),
            decimation: 8,
            exposure_us: 500.0,
            exposure_schedule: Vec::new(),
            area_m: [150.0, 250.0],
            heading_deg: 0.0,
            duration_s: None,
            altitude_swing_m: 0.0,
            turn_radius_m: 20.0,
            ins_noise: None,
            camera_time_offset_s: 0.0,
            start_gps_s: 1_400_000_000.0,
        }
    }
}

impl MissionPlan {
    /// Multi-altitude figure-eight with the camera 45° down from forward.
    pub fn calibration_figure_eight() -> Self {
        Self {
            pattern: Pattern::FigureEight,
            altitude_m: 60.0,
            altitude_swing_m: 20.0,
            area_m: [200.0, 0.0],
            camera_depression_deg: 45.0,
            fps: 2.0,
            duration_s: Some(120.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let positive = |v: f64, what| if v.is_finite() && v > 0.0 { Ok(()) } else { Err(PlanError::NotPositive(what)) };
        if !(0.0..=0.9).contains(&self.overlap) {
            return Err(PlanError::Overlap(self.overlap));
        }
        positive(self.fps, "fps")?;
        positive(self.ins_hz, "ins_hz")?;
        if self.fps > self.ins_hz {
            return Err(PlanError::FrameRate { fps: self.fps, ins_hz: self.ins_hz });
        }
        positive(self.altitude_m, "altitude_m")?;
        if self.pattern != Pattern::Hover {
            positive(self.speed_mps, "speed_mps")?;
        }
        positive(self.sensor.focal_mm, "focal_mm")?;
        positive(self.sensor.pixel_pitch_um, "pixel_pitch_um")?;
        if self.sensor.width_px / self.decimation.max(1) == 0 || self.sensor.height_px / self.decimation.max(1) == 0 {
            return Err(PlanError::NotPositive("binned image size"));
        }
        if !(self.camera_depression_deg > 0.0 && self.camera_depression_deg <= 90.0) {
            return Err(PlanError::Depression(self.camera_depression_deg));
        }
        if !(self.exposure_us.is_finite() && self.exposure_us >= 0.0) {
            return Err(PlanError::NotPositive("exposure_us"));
        }
        if !self.start_gps_s.is_finite() {
            return Err(PlanError::NotPositive("start_gps_s"));
        }
        if self.altitude_swing_m.abs() >= self.altitude_m {
            return Err(PlanError::NotPositive("altitude minus swing"));
        }
        match self.pattern {
            Pattern::Lawnmower => {
                positive(self.area_m[0], "area_m across")?;
                positive(self.area_m[1], "area_m along")?;
            }
            Pattern::FigureEight => positive(self.area_m[0], "area_m across")?,
            Pattern::BankLine => {
                positive(self.area_m[1], "area_m along")?;
                positive(self.turn_radius_m, "turn_radius_m")?;
            }
            Pattern::Hover => {}
        }
        if self.pattern != Pattern::Lawnmower && self.duration_s.is_none() {
            return Err(PlanError::Duration { pattern: self.pattern });
        }
        if let Some(d) = self.duration_s {
            positive(d, "duration_s")?;
        }
        self.origin.validate()?;
        Ok(())
    }

    pub fn gsd_m(&self) -> f64 {
        self.sensor.gsd_m(self.altitude_m)
    }

    /// Distance between adjacent lawnmower pass centerlines.
    pub fn pass_spacing_m(&self) -> f64 {
        self.sensor.footprint_m(self.altitude_m).0 * (1.0 - self.overlap)
    }

    pub fn camera(&self) -> CameraModel {
        self.sensor.camera(self.decimation, self.camera_depression_deg)
    }

    pub fn exposure_at(&self, t_rel: f64) -> f64 {
        self.exposure_schedule.iter().filter(|s| s[0] <= t_rel).last().map_or(self.exposure_us, |s| s[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Segment {
    Line { start: [f64; 2], yaw: f64, len: f64 },
    /// `sweep` is signed, counter-clockwise positive.
    Arc { center: [f64; 2], radius: f64, start_angle: f64, sweep: f64 },
}

impl Segment {
    fn length(&self) -> f64 {
        match *self {
            Segment::Line { len, .. } => len,
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Position, ENU yaw (counter-clockwise from east) and signed curvature.
    fn at(&self, s: f64) -> ([f64; 2], f64, f64) {
        match *self {
            Segment::Line { start, yaw, .. } => ([start[0] + s * yaw.cos(), start[1] + s * yaw.sin()], yaw, 0.0),
            Segment::Arc { center, radius, start_angle, sweep } => {
                let dir = sweep.signum();
                let a = start_angle + dir * s / radius;
                ([center[0] + radius * a.cos(), center[1] + radius * a.sin()], a + dir * FRAC_PI_2, dir / radius)
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Path {
    segments: Vec<Segment>,
    closed: bool,
}

impl Path {
    fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    fn at(&self, s: f64) -> ([f64; 2], f64, f64) {
        let total = self.length();
        let mut s = if self.closed { s - total * (s / total).floor() } else { s.clamp(0.0, total) };
        for seg in &self.segments {
            let l = seg.length();
            if s <= l {
                return seg.at(s);
            }
            s -= l;
        }
        let last = self.segments.last().expect("paths are non-empty");
        last.at(last.length())
    }
}

fn compass_to_yaw(heading_deg: f64) -> f64 {
    FRAC_PI_2 - heading_deg.to_radians()
}

fn angle_of(v: [f64; 2]) -> f64 {
    v[1].atan2(v[0])
}

fn check_turn(plan: &MissionPlan, radius: f64) -> Result<(), PlanError> {
    let bank = (plan.speed_mps * plan.speed_mps / (GRAVITY * radius)).atan().to_degrees();
    if bank > MAX_BANK_DEG {
        return Err(PlanError::TurnTooTight { radius_m: radius, bank_deg: bank });
    }
    Ok(())
}

fn build_path(plan: &MissionPlan) -> Result<Path, PlanError> {
    let yaw = compass_to_yaw(plan.heading_deg);
    let d = [yaw.cos(), yaw.sin()];
    let right = [d[1], -d[0]];
    let at = |along: f64, across: f64| [along * d[0] + across * right[0], along * d[1] + across * right[1]];
    let neg = |v: [f64; 2]| [-v[0], -v[1]];
    let mut segments = Vec::new();
    let closed = match plan.pattern {
        Pattern::Lawnmower => {
            let [width, length] = plan.area_m;
            let spacing = plan.pass_spacing_m();
            let foot = plan.sensor.footprint_m(plan.altitude_m).0;
            let passes = if width > foot { ((width - foot) / spacing).ceil() as usize + 1 } else { 1 };
            let radius = 0.5 * spacing;
            if passes > 1 {
                check_turn(plan, radius)?;
            }
            for i in 0..passes {
                let x = (i as f64 - 0.5 * (passes - 1) as f64) * spacing;
                let forward = i % 2 == 0;
                let (from, dir) = if forward { (-0.5 * length, d) } else { (0.5 * length, neg(d)) };
                segments.push(Segment::Line { start: at(from, x), yaw: angle_of(dir), len: length });
                if i + 1 < passes {
                    let end = at(-from, x);
                    let center = [end[0] + radius * right[0], end[1] + radius * right[1]];
                    // Even passes turn right onto the next pass, odd ones left.
                    let sweep = if forward { -PI } else { PI };
                    segments.push(Segment::Arc { center, radius, start_angle: angle_of(neg(right)), sweep });
                }
            }
            false
        }
        Pattern::FigureEight => {
            let radius = 0.25 * plan.area_m[0];
            check_turn(plan, radius)?;
            segments.push(Segment::Arc { center: at(0.0, radius), radius, start_angle: angle_of(neg(right)), sweep: -TAU });
            segments.push(Segment::Arc { center: at(0.0, -radius), radius, start_angle: angle_of(right), sweep: TAU });
            true
        }
        Pattern::BankLine => {
            let (length, radius) = (plan.area_m[1], plan.turn_radius_m);
            check_turn(plan, radius)?;
            segments.push(Segment::Line { start: at(-0.5 * length, 0.0), yaw: angle_of(d), len: length });
            segments.push(Segment::Arc { center: at(0.5 * length, radius), radius, start_angle: angle_of(neg(right)), sweep: -PI });
            segments.push(Segment::Line { start: at(0.5 * length, 2.0 * radius), yaw: angle_of(neg(d)), len: length });
            segments.push(Segment::Arc { center: at(-0.5 * length, radius), radius, start_angle: angle_of(right), sweep: -PI });
            true
        }
        Pattern::Hover => {
            segments.push(Segment::Line { start: [0.0, 0.0], yaw, len: 0.0 });
            false
        }
    };
    Ok(Path { segments, closed })
}

/// Kinematic state at one instant of the truth flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightState {
    pub enu: EnuPoint,
    pub velocity: Vector3<f64>,
    pub attitude: UnitQuaternion,
}

fn duration_of(plan: &MissionPlan, path: &Path) -> f64 {
    match (plan.pattern, plan.duration_s) {
        (Pattern::Lawnmower, Some(d)) => d.min(path.length() / plan.speed_mps),
        (Pattern::Lawnmower, None) => path.length() / plan.speed_mps,
        (_, d) => d.unwrap_or(0.0),
    }
}

fn altitude_at(plan: &MissionPlan, t_rel: f64, period: f64) -> (f64, f64) {
    if plan.pattern != Pattern::FigureEight || plan.altitude_swing_m == 0.0 {
        return (plan.altitude_m, 0.0);
    }
    let w = TAU / period;
    (plan.altitude_m + plan.altitude_swing_m * (w * t_rel).sin(), plan.altitude_swing_m * w * (w * t_rel).cos())
}

/// Truth flight sampled at the INS rate, plus the instantaneous velocity
/// of every sample.
fn sample_flight(plan: &MissionPlan, frame: &EnuFrame) -> Result<(Vec<TimestampedPose>, Vec<Vector3<f64>>), PlanError> {
    plan.validate()?;
    let path = build_path(plan)?;
    let duration = duration_of(plan, &path);
    let n = ((duration * plan.ins_hz).round() as usize).max(2);
    let dt = 1.0 / plan.ins_hz;
    let period = path.length() / plan.speed_mps.max(1e-9);
    let speed = if plan.pattern == Pattern::Hover { 0.0 } else { plan.speed_mps };
    let max_step = MAX_ROLL_RATE_DEG_S.to_radians() * dt;
    let mut poses = Vec::with_capacity(n);
    let mut velocities = Vec::with_capacity(n);
    let mut roll = f64::NAN;
    for k in 0..n {
        let t_rel = k as f64 * dt;
        let (p, yaw, curvature) = path.at(speed * t_rel);
        let (alt, climb) = altitude_at(plan, t_rel, period);
        // A left (counter-clockwise) turn banks the left wing down.
        let target = -(speed * speed * curvature / GRAVITY).atan();
        roll = if roll.is_nan() { target } else { roll + (target - roll).clamp(-max_step, max_step) };
        let pitch = -(climb.atan2(speed.max(1e-9)));
        let attitude = UnitQuaternion::from_yaw_pitch_roll(yaw, pitch, roll);
        let enu = EnuPoint::new(p[0], p[1], alt);
        poses.push(TimestampedPose {
            t: plan.start_gps_s + t_rel,
            position: frame.to_geodetic(&enu),
            attitude,
            status: PoseStatus::VALID,
        });
        velocities.push(Vector3::new(speed * yaw.cos(), speed * yaw.sin(), climb));
    }
    Ok((poses, velocities))
}

/// Truth INS stream for `plan` at `ins_hz`.
pub fn generate_trajectory(plan: &MissionPlan) -> Result<Vec<TimestampedPose>, PlanError> {
    let frame = EnuFrame::new(plan.origin)?;
    Ok(sample_flight(plan, &frame)?.0)
}

/// One triggered exposure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capture {
    pub image_id: u64,
    pub name: String,
    pub trigger_gps_s: f64,
    pub exposure_us: f64,
    /// True middle of the exposure.
    pub mid_gps_s: f64,
    /// Timestamp written with the image: the mid-exposure time plus the
    /// plan's camera clock offset.
    pub recorded_gps_s: f64,
    /// Truth pose at mid-exposure.
    pub pose: TimestampedPose,
    pub velocity_enu: [f64; 3],
}

/// A generated flight: truth, what the INS reports, and the captures.
#[derive(Debug, Clone)]
pub struct SimFlight {
    pub plan: MissionPlan,
    pub frame: EnuFrame,
    pub camera: CameraModel,
    pub truth: Trajectory,
    /// INS log with the plan's noise applied; equal to `truth` without noise.
    pub ins: Vec<TimestampedPose>,
    pub captures: Vec<Capture>,
}

impl SimFlight {
    pub fn generate(plan: &MissionPlan) -> Result<Self, PlanError> {
        let frame = EnuFrame::new(plan.origin)?;
        let (poses, velocities) = sample_flight(plan, &frame)?;
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        let ins = match plan.ins_noise {
            Some(noise) => poses.iter().map(|p| perturb(p, &frame, noise, &mut rng)).collect(),
            None => poses.clone(),
        };
        let truth = Trajectory::new(poses)?;
        let (start, end) = (truth.start(), truth.end());
        let mut captures = Vec::new();
        let mut k = 0u64;
        loop {
            let trigger = plan.start_gps_s + k as f64 / plan.fps;
            let exposure_us = plan.exposure_at(trigger - start);
            let mid = mid_exposure(trigger, exposure_us);
            if mid > end {
                break;
            }
            let pose = truth.interpolate(mid)?;
            let i = (((mid - start) * plan.ins_hz) as usize).min(velocities.len() - 1);
            captures.push(Capture {
                image_id: k,
                name: format!("img_{k:06}"),
                trigger_gps_s: trigger,
                exposure_us,
                mid_gps_s: mid,
                recorded_gps_s: mid + plan.camera_time_offset_s,
                pose,
                velocity_enu: velocities[i].into(),
            });
            k += 1;
        }
        Ok(Self { plan: plan.clone(), frame, camera: plan.camera(), truth, ins, captures })
    }

    pub fn duration_s(&self) -> f64 {
        self.truth.end() - self.truth.start()
    }

    pub fn camera_pose(&self, capture: &Capture) -> Result<CameraPose, GeoError> {
        CameraPose::new(&self.camera, &capture.pose, &self.frame)
    }

    /// Ground points of the image corners, or `None` if any corner misses
    /// the ground.
    pub fn footprint(&self, capture: &Capture) -> Option<[EnuPoint; 4]> {
        let cp = self.camera_pose(capture).ok()?;
        let (w, h) = (self.camera.width as f64, self.camera.height as f64);
        let corners = [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)];
        let mut out = [EnuPoint::new(0.0, 0.0, 0.0); 4];
        for (o, (x, y)) in out.iter_mut().zip(corners) {
            *o = cp.ground_point(&self.camera, &nalgebra::Point2::new(x, y), 0.0).ok()?;
        }
        Some(out)
    }

    /// `[e_min, n_min, e_max, n_max]` over every capture footprint.
    pub fn ground_bounds(&self) -> Option<[f64; 4]> {
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for c in &self.captures {
            for p in self.footprint(c)? {
                b = [b[0].min(p.e), b[1].min(p.n), b[2].max(p.e), b[3].max(p.n)];
            }
        }
        b[0].is_finite().then_some(b)
    }
}

fn perturb(p: &TimestampedPose, frame: &EnuFrame, noise: InsNoise, rng: &mut ChaCha8Rng) -> TimestampedPose {
    let mut g = || -> f64 { StandardNormal.sample(rng) };
    let enu = frame.to_enu(&p.position).expect("poses are generated in this frame");
    let sp = noise.position_sigma_m;
    let moved = EnuPoint::new(enu.e + sp * g(), enu.n + sp * g(), enu.u + sp * g());
    let sa = noise.attitude_sigma_deg.to_radians();
    let tilt = UnitQuaternion::exp(&Vector3::new(sa * g(), sa * g(), sa * g()));
    TimestampedPose { position: frame.to_geodetic(&moved), attitude: tilt * p.attitude, ..*p }
}

/// Gaussian noise on a synthetic SfM reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfmNoise {
    pub position_sigma_m: f64,
    pub rotation_sigma_deg: f64,
}

/// What an SfM reconstruction of the flight's images would report when
/// `sfm_to_enu` maps its arbitrary frame onto the mission ENU frame.
pub fn sfm_export(flight: &SimFlight, sfm_to_enu: &SimilarityTransform, noise: Option<SfmNoise>) -> Result<Vec<SfmPose>, GeoError> {
    let enu_to_sfm = sfm_to_enu.inverse();
    let mut rng = ChaCha8Rng::seed_from_u64(flight.plan.seed ^ 0x5F_A0);
    let mut out = Vec::with_capacity(flight.captures.len());
    for c in &flight.captures {
        let cp = flight.camera_pose(c)?;
        let mut center = cp.center().to_vector();
        // ENU→camera, then SfM→ENU directions on the right.
        let mut world_to_cam = flight.camera.boresight * c.pose.attitude.conjugate() * sfm_to_enu.rotation;
        if let Some(n) = noise {
            let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
            center += Vector3::new(g(), g(), g()) * n.position_sigma_m;
            let s = n.rotation_sigma_deg.to_radians();
            world_to_cam = UnitQuaternion::exp(&Vector3::new(s * g(), s * g(), s * g())) * world_to_cam;
        }
        out.push(SfmPose {
            image_name: c.name.clone(),
            t_image: c.recorded_gps_s,
            position: enu_to_sfm.apply(&center).into(),
            rotation: world_to_cam,
        });
    }
    Ok(out)
}
