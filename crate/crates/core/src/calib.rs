//! Calibration against an SfM pose export: world similarity, INS→camera
//! boresight and residual INS time offset.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{EnuFrame, GeoError, Trajectory, UnitQuaternion};

/// Coarse offset grid step.
pub const OFFSET_GRID_S: f64 = 0.010;
/// Golden-section stopping width.
pub const OFFSET_TOL_S: f64 = 0.001;
pub const MAX_WINDOW_S: f64 = 2.0;
/// Residual curves flatter than this (peak-to-peak, degrees) carry no
/// information about the offset.
pub const MIN_CURVE_RANGE_DEG: f64 = 1e-3;
pub const WARN_POSITION_RMS_M: f64 = 1.0;
pub const WARN_ATTITUDE_RMS_DEG: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibError {
    #[error("need at least {need} samples, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("input lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),
    #[error("search window {0} s outside (0, {MAX_WINDOW_S}] s")]
    Window(f64),
    #[error(
        "time offset unobservable: residual curve spans {range_deg:.2e}° (minimum {min_deg:.2e}°); the flight needs attitude dynamics"
    )]
    Unobservable { range_deg: f64, min_deg: f64 },
    #[error("pose lookup failed: {0}")]
    Geo(#[from] GeoError),
}

/// `y = scale·R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: UnitQuaternion,
    pub translation: [f64; 3],
}

impl SimilarityTransform {
    pub const IDENTITY: Self = Self { scale: 1.0, rotation: UnitQuaternion::IDENTITY, translation: [0.0; 3] };

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(x) * self.scale + Vector3::from(self.translation)
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.conjugate();
        let t = r.rotate(&Vector3::from(self.translation)) * (-1.0 / self.scale);
        Self { scale: 1.0 / self.scale, rotation: r, translation: t.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityFit {
    pub transform: SimilarityTransform,
    /// RMS of the 3-D residual norms.
    pub rms_m: f64,
}

/// Closed-form least-squares similarity from `src` onto `dst` (Umeyama).
pub fn fit_similarity(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<SimilarityFit, CalibError> {
    if src.len() != dst.len() {
        return Err(CalibError::LengthMismatch(src.len(), dst.len()));
    }
    if src.len() < 3 {
        return Err(CalibError::InsufficientData { need: 3, got: src.len() });
    }
    let n = src.len() as f64;
    let mx = src.iter().sum::<Vector3<f64>>() / n;
    let my = dst.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    let mut var_x = 0.0;
    for (x, y) in src.iter().zip(dst) {
        let (dx, dy) = (x - mx, y - my);
        cov += dy * dx.transpose();
        var_x += dx.norm_squared();
    }
    cov /= n;
    var_x /= n;
    if var_x <= 0.0 {
        return Err(CalibError::Degenerate("source points coincide"));
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[1] <= 1e-12 * sv[0].max(f64::MIN_POSITIVE) {
        return Err(CalibError::Degenerate("points are collinear"));
    }
    let mut s = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let r = u * s * v_t;
    let trace_ds: f64 = (0..3).map(|i| svd.singular_values[i] * s[(i, i)]).sum();
    let scale = trace_ds / var_x;
    let t = my - r * mx * scale;
    let transform =
        SimilarityTransform { scale, rotation: UnitQuaternion::from_rotation_matrix(&r), translation: t.into() };
    let ss: f64 = src.iter().zip(dst).map(|(x, y)| (transform.apply(x) - y).norm_squared()).sum();
    Ok(SimilarityFit { transform, rms_m: (ss / n).sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoresightFit {
    /// INS-body→camera rotation.
    pub boresight: UnitQuaternion,
    /// Per-image angle between the truth and predicted camera attitude.
    pub residuals_deg: Vec<f64>,
    pub rms_deg: f64,
}

/// Fixed rotation `B` minimizing Σ‖R_cam,i − B·R_ins,i‖²_F, both lists
/// world→frame rotations.
pub fn fit_boresight(cam: &[UnitQuaternion], ins: &[UnitQuaternion]) -> Result<BoresightFit, CalibError> {
    if cam.len() != ins.len() {
        return Err(CalibError::LengthMismatch(cam.len(), ins.len()));
    }
    if cam.is_empty() {
        return Err(CalibError::InsufficientData { need: 1, got: 0 });
    }
    let mut m = Matrix3::zeros();
    for (c, i) in cam.iter().zip(ins) {
        m += c.to_rotation_matrix() * i.to_rotation_matrix().transpose();
    }
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut s = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let boresight = UnitQuaternion::from_rotation_matrix(&(u * s * v_t));
    let residuals_deg: Vec<f64> =
        cam.iter().zip(ins).map(|(c, i)| c.angle_to(&(boresight * *i)).to_degrees()).collect();
    let rms_deg = (residuals_deg.iter().map(|r| r * r).sum::<f64>() / residuals_deg.len() as f64).sqrt();
    Ok(BoresightFit { boresight, residuals_deg, rms_deg })
}

/// Truth camera attitude for one image: world→camera rotation at image
/// time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthAttitude {
    pub t: f64,
    pub world_to_camera: UnitQuaternion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetScan {
    /// How far INS timestamps lead the image clock.
    pub offset_s: f64,
    pub rms_deg: f64,
    /// Boresight residual RMS at every evaluated candidate, sorted by offset.
    pub curve: Vec<(f64, f64)>,
}

fn boresight_rms_at(traj: &Trajectory, truth: &[TruthAttitude], offset: f64) -> Result<f64, CalibError> {
    let cam: Vec<UnitQuaternion> = truth.iter().map(|a| a.world_to_camera).collect();
    let mut ins = Vec::with_capacity(truth.len());
    for a in truth {
        ins.push(traj.interpolate(a.t + offset)?.attitude.conjugate());
    }
    Ok(fit_boresight(&cam, &ins)?.rms_deg)
}

/// Finds the INS time offset that best explains the truth attitudes.
///
/// Evaluating a candidate `δ` looks poses up at `t + δ`, which is the same
/// as interpolating `apply_time_offset(traj, −δ)` at `t`.
pub fn scan_time_offset(traj: &Trajectory, truth: &[TruthAttitude], window_s: f64) -> Result<OffsetScan, CalibError> {
    if !(window_s > 0.0 && window_s <= MAX_WINDOW_S) {
        return Err(CalibError::Window(window_s));
    }
    if truth.is_empty() {
        return Err(CalibError::InsufficientData { need: 1, got: 0 });
    }
    let steps = (window_s / OFFSET_GRID_S).round() as i64;
    let mut curve = Vec::with_capacity(2 * steps as usize + 24);
    for k in -steps..=steps {
        let d = k as f64 * OFFSET_GRID_S;
        curve.push((d, boresight_rms_at(traj, truth, d)?));
    }
    let (lo_val, hi_val) = curve.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &(_, r)| (lo.min(r), hi.max(r)));
    let min_range = MIN_CURVE_RANGE_DEG.max(0.5 * lo_val);
    if hi_val - lo_val < min_range {
        return Err(CalibError::Unobservable { range_deg: hi_val - lo_val, min_deg: min_range });
    }
    let best = curve.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).map(|(i, _)| i).unwrap_or(0);
    let a = curve[best.saturating_sub(1)].0;
    let b = curve[(best + 1).min(curve.len() - 1)].0;
    let (offset_s, rms_deg) = golden_section(a, b, OFFSET_TOL_S, |d| {
        let r = boresight_rms_at(traj, truth, d)?;
        curve.push((d, r));
        Ok(r)
    })?;
    let (offset_s, rms_deg) =
        if rms_deg <= curve[best].1 { (offset_s, rms_deg) } else { (curve[best].0, curve[best].1) };
    curve.sort_by(|x, y| x.0.total_cmp(&y.0));
    curve.dedup_by(|x, y| x.0 == y.0);
    Ok(OffsetScan { offset_s, rms_deg, curve })
}

fn golden_section(
    mut a: f64,
    mut b: f64,
    tol: f64,
    mut f: impl FnMut(f64) -> Result<f64, CalibError>,
) -> Result<(f64, f64), CalibError> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a) > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// One image from an SfM reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfmPose {
    pub image_name: String,
    pub t_image: f64,
    /// Camera center in SfM coordinates.
    pub position: [f64; 3],
    /// SfM-world→camera rotation.
    pub rotation: UnitQuaternion,
}

impl SfmPose {
    /// From the usual export convention `x_cam = R·x_world + t`.
    pub fn from_world_to_camera(image_name: String, t_image: f64, rotation: UnitQuaternion, t: [f64; 3]) -> Self {
        let c = -rotation.conjugate().rotate(&Vector3::from(t));
        Self { image_name, t_image, position: c.into(), rotation }
    }

    pub fn translation(&self) -> [f64; 3] {
        (-self.rotation.rotate(&Vector3::from(self.position))).into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibOptions {
    pub window_s: f64,
}

impl Default for CalibOptions {
    fn default() -> Self {
        Self { window_s: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Maps SfM coordinates into the mission ENU frame.
    pub similarity: SimilarityTransform,
    /// INS-body→camera rotation.
    pub boresight: UnitQuaternion,
    pub time_offset_s: f64,
    pub position_rms_m: f64,
    pub attitude_rms_deg: f64,
    pub frame_origin: crate::geo::GeodeticPosition,
    pub offset_curve: Vec<(f64, f64)>,
    pub attitude_residuals_deg: Vec<f64>,
    pub warnings: Vec<String>,
}

fn similarity_at(
    sfm: &[SfmPose],
    traj: &Trajectory,
    frame: &EnuFrame,
    offset: f64,
) -> Result<SimilarityFit, CalibError> {
    let mut src = Vec::with_capacity(sfm.len());
    let mut dst = Vec::with_capacity(sfm.len());
    for s in sfm {
        let p = traj.interpolate(s.t_image + offset)?;
        src.push(Vector3::from(s.position));
        dst.push(frame.to_enu(&p.position)?.to_vector());
    }
    fit_similarity(&src, &dst)
}

fn truth_attitudes(sfm: &[SfmPose], sim: &SimilarityTransform) -> Vec<TruthAttitude> {
    // ENU→camera = (SfM-world→camera)·(ENU→SfM-world).
    let enu_to_sfm = sim.rotation.conjugate();
    sfm.iter().map(|s| TruthAttitude { t: s.t_image, world_to_camera: s.rotation * enu_to_sfm }).collect()
}

/// Full calibration: similarity at the nominal times, offset scan on the
/// boresight residual, then a similarity and boresight refit at the
/// selected offset.
pub fn calibrate(
    sfm: &[SfmPose],
    traj: &Trajectory,
    frame: &EnuFrame,
    opts: &CalibOptions,
) -> Result<CalibrationResult, CalibError> {
    // Every offset candidate must find INS coverage for every image.
    let (lo, hi) = (traj.start() + opts.window_s, traj.end() - opts.window_s);
    let covered: Vec<SfmPose> = sfm.iter().filter(|s| s.t_image >= lo && s.t_image <= hi).cloned().collect();
    let skipped = sfm.len() - covered.len();
    let sfm = &covered[..];
    let first = similarity_at(sfm, traj, frame, 0.0)?;
    let scan = scan_time_offset(traj, &truth_attitudes(sfm, &first.transform), opts.window_s)?;
    let sim = similarity_at(sfm, traj, frame, scan.offset_s)?;
    let truth = truth_attitudes(sfm, &sim.transform);
    let mut ins = Vec::with_capacity(truth.len());
    for a in &truth {
        ins.push(traj.interpolate(a.t + scan.offset_s)?.attitude.conjugate());
    }
    let cam: Vec<UnitQuaternion> = truth.iter().map(|a| a.world_to_camera).collect();
    let bore = fit_boresight(&cam, &ins)?;
    let mut warnings = Vec::new();
    if skipped > 0 {
        warnings.push(alloc::format!("{skipped} images within {} s of the INS log ends were skipped", opts.window_s));
    }
    if sim.rms_m > WARN_POSITION_RMS_M {
        warnings.push(alloc::format!("position RMS {:.3} m exceeds {WARN_POSITION_RMS_M} m", sim.rms_m));
    }
    if bore.rms_deg > WARN_ATTITUDE_RMS_DEG {
        warnings.push(alloc::format!("attitude RMS {:.3}° exceeds {WARN_ATTITUDE_RMS_DEG}°", bore.rms_deg));
    }
    Ok(CalibrationResult {
        similarity: sim.transform,
        boresight: bore.boresight,
        time_offset_s: scan.offset_s,
        position_rms_m: sim.rms_m,
        attitude_rms_deg: bore.rms_deg,
        frame_origin: frame.origin(),
        offset_curve: scan.curve,
        attitude_residuals_deg: bore.residuals_deg,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{EnuPoint, GeodeticPosition, PoseStatus, TimestampedPose};
    use crate::timebase::apply_time_offset;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn random_cloud(rng: &mut impl Rng, n: usize, spread: f64) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| Vector3::new(rng.random_range(-spread..spread), rng.random_range(-spread..spread), rng.random_range(-spread..spread)))
            .collect()
    }

    fn random_quat(rng: &mut impl Rng) -> UnitQuaternion {
        let n = Normal::new(0.0, 1.0).unwrap();
        UnitQuaternion::from_wxyz(n.sample(rng), n.sample(rng), n.sample(rng), n.sample(rng)).unwrap()
    }

    #[test]
    fn identical_clouds_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_cloud(&mut rng, 20, 50.0);
        let fit = fit_similarity(&pts, &pts).unwrap();
        assert!((fit.transform.scale - 1.0).abs() < 1e-12);
        assert!(fit.transform.rotation.approx_eq(&UnitQuaternion::IDENTITY, 1e-12));
        assert!(Vector3::from(fit.transform.translation).norm() < 1e-10);
    }

    #[test]
    fn known_similarity_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let truth =
            SimilarityTransform { scale: 2.5, rotation: random_quat(&mut rng), translation: [10.0, -3.0, 7.0] };
        let src = random_cloud(&mut rng, 30, 20.0);
        let dst: Vec<_> = src.iter().map(|x| truth.apply(x)).collect();
        let fit = fit_similarity(&src, &dst).unwrap().transform;
        assert!((fit.scale - 2.5).abs() < 1e-9);
        assert!(fit.rotation.approx_eq(&truth.rotation, 1e-9));
        assert!((Vector3::from(fit.translation) - Vector3::new(10.0, -3.0, 7.0)).norm() < 1e-9);
    }

    #[test]
    fn inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = SimilarityTransform { scale: 0.3, rotation: random_quat(&mut rng), translation: [1.0, 2.0, 3.0] };
        let x = Vector3::new(4.0, -5.0, 6.0);
        assert!((s.inverse().apply(&s.apply(&x)) - x).norm() < 1e-9);
    }

    // Per-coordinate noise σ: the 3-D residual RMS is σ·√3·√(1 − 7/(3N)).
    #[test]
    fn noisy_similarity_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sigma = 0.05;
        let noise = Normal::new(0.0, sigma).unwrap();
        let n = 100;
        let expected = sigma * 3f64.sqrt() * (1.0 - 7.0 / (3.0 * n as f64)).sqrt();
        let mut rms_sum = 0.0;
        let trials = 50;
        for _ in 0..trials {
            let truth = SimilarityTransform { scale: 3.7, rotation: random_quat(&mut rng), translation: [5.0, 1.0, -2.0] };
            let src = random_cloud(&mut rng, n, 100.0);
            let dst: Vec<_> = src
                .iter()
                .map(|x| truth.apply(x) + Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)))
                .collect();
            let fit = fit_similarity(&src, &dst).unwrap();
            assert!((fit.transform.scale / 3.7 - 1.0).abs() < 1e-3);
            rms_sum += fit.rms_m;
        }
        let mean = rms_sum / trials as f64;
        assert!((mean / expected - 1.0).abs() < 0.05, "mean rms {mean}, expected {expected}");
    }

    #[test]
    fn degenerate_inputs() {
        let line: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert_eq!(fit_similarity(&line, &line).unwrap_err(), CalibError::Degenerate("points are collinear"));
        assert!(matches!(fit_similarity(&line[..2], &line[..2]), Err(CalibError::InsufficientData { .. })));
        assert!(matches!(fit_boresight(&[], &[]), Err(CalibError::InsufficientData { .. })));
    }

    #[test]
    fn boresight_identity_and_known() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ins: Vec<_> = (0..10).map(|_| random_quat(&mut rng)).collect();
        let fit = fit_boresight(&ins, &ins).unwrap();
        assert!(fit.boresight.approx_eq(&UnitQuaternion::IDENTITY, 1e-12));
        let b = UnitQuaternion::from_axis_angle(&Vector3::y(), core::f64::consts::FRAC_PI_2);
        let cam: Vec<_> = ins.iter().map(|q| b * *q).collect();
        let fit = fit_boresight(&cam, &ins).unwrap();
        assert!(fit.boresight.angle_to(&b) < 1e-9);
        assert!(fit.rms_deg < 1e-6);
    }

    fn jitter(rng: &mut impl Rng, q: UnitQuaternion, sigma_deg: f64) -> UnitQuaternion {
        let n = Normal::new(0.0, sigma_deg.to_radians()).unwrap();
        UnitQuaternion::exp(&(Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng)) * 0.5)) * q
    }

    #[test]
    fn boresight_with_attitude_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = UnitQuaternion::from_yaw_pitch_roll(0.1, -0.7, 0.05);
        let ins: Vec<_> = (0..200).map(|_| random_quat(&mut rng)).collect();
        let cam: Vec<_> = ins.iter().map(|q| jitter(&mut rng, b * *q, 0.1)).collect();
        let fit = fit_boresight(&cam, &ins).unwrap();
        assert!(fit.boresight.angle_to(&b).to_degrees() < 0.05);
    }

    // Yawing at 10°/s with a slow pitch oscillation, sampled at 100 Hz.
    fn turning_trajectory(frame: &EnuFrame, duration: f64) -> Trajectory {
        let poses = (0..=(duration * 100.0) as usize)
            .map(|k| {
                let t = 1000.0 + k as f64 * 0.01;
                let yaw = (10.0 * (t - 1000.0)).to_radians();
                let pitch = 0.1 * (0.7 * t).sin();
                TimestampedPose {
                    t,
                    position: frame.to_geodetic(&EnuPoint::new(50.0 * yaw.cos(), 50.0 * yaw.sin(), 40.0)),
                    attitude: UnitQuaternion::from_yaw_pitch_roll(yaw + 1.57, pitch, 0.0),
                    status: PoseStatus::VALID,
                }
            })
            .collect();
        Trajectory::new(poses).unwrap()
    }

    fn frame() -> EnuFrame {
        EnuFrame::new(GeodeticPosition::new(64.8, -147.7, 130.0).unwrap()).unwrap()
    }

    fn truth_from(traj: &Trajectory, b: UnitQuaternion, times: impl Iterator<Item = f64>) -> Vec<TruthAttitude> {
        times
            .map(|t| TruthAttitude { t, world_to_camera: b * traj.interpolate(t).unwrap().attitude.conjugate() })
            .collect()
    }

    #[test]
    fn aligned_offset_is_zero() {
        let f = frame();
        let traj = turning_trajectory(&f, 40.0);
        let truth = truth_from(&traj, bore45(), (0..100).map(|i| 1005.0 + i as f64 * 0.3 + 0.0037));
        let scan = scan_time_offset(&traj, &truth, 0.5).unwrap();
        assert!(scan.offset_s.abs() < 0.002, "{}", scan.offset_s);
        assert!(scan.curve.len() > 101);
    }

    fn bore45() -> UnitQuaternion {
        crate::geo::CameraModel::mount_depressed(45.0)
    }

    #[test]
    fn injected_quarter_second_recovered() {
        let f = frame();
        let clean = turning_trajectory(&f, 40.0);
        let truth = truth_from(&clean, bore45(), (0..100).map(|i| 1005.0 + i as f64 * 0.3 + 0.0037));
        let shifted = Trajectory::new(apply_time_offset(clean.poses(), 0.25)).unwrap();
        let scan = scan_time_offset(&shifted, &truth, 0.5).unwrap();
        assert!((scan.offset_s - 0.25).abs() < 0.010, "{}", scan.offset_s);
        // Unimodal around the truth within ±0.5 s.
        let left: Vec<_> = scan.curve.iter().filter(|c| c.0 <= 0.24).collect();
        assert!(left.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9));
        let right: Vec<_> = scan.curve.iter().filter(|c| c.0 >= 0.26).collect();
        assert!(right.windows(2).all(|w| w[1].1 + 1e-9 >= w[0].1));
    }

    #[test]
    fn hover_is_unobservable() {
        let f = frame();
        let poses = (0..3000)
            .map(|k| TimestampedPose {
                t: k as f64 * 0.01,
                position: f.origin(),
                attitude: UnitQuaternion::from_yaw_pitch_roll(0.3, 0.0, 0.0),
                status: PoseStatus::VALID,
            })
            .collect();
        let traj = Trajectory::new(poses).unwrap();
        let truth = truth_from(&traj, bore45(), (0..50).map(|i| 2.0 + i as f64 * 0.5));
        assert!(matches!(scan_time_offset(&traj, &truth, 0.5), Err(CalibError::Unobservable { .. })));
        assert!(matches!(scan_time_offset(&traj, &truth, 3.0), Err(CalibError::Window(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn similarity_residual_invariant_under_joint_rigid_motion(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, 0.2).unwrap();
            let src = random_cloud(&mut rng, 15, 30.0);
            let dst: Vec<_> = src.iter().map(|x| x * 1.7 + Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), 1.0)).collect();
            let a = fit_similarity(&src, &dst).unwrap().rms_m;
            let q = random_quat(&mut rng);
            let t = Vector3::new(100.0, -40.0, 3.0);
            let src2: Vec<_> = src.iter().map(|x| q.rotate(x) + t).collect();
            let dst2: Vec<_> = dst.iter().map(|x| q.rotate(x) + t).collect();
            let b = fit_similarity(&src2, &dst2).unwrap().rms_m;
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn boresight_invariant_to_ordering(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = random_quat(&mut rng);
            let ins: Vec<_> = (0..12).map(|_| random_quat(&mut rng)).collect();
            let cam: Vec<_> = ins.iter().map(|q| jitter(&mut rng, b * *q, 1.0)).collect();
            let fit = fit_boresight(&cam, &ins).unwrap();
            let mut idx: Vec<usize> = (0..12).collect();
            idx.reverse();
            idx.swap(2, 7);
            let cam2: Vec<_> = idx.iter().map(|&i| cam[i]).collect();
            let ins2: Vec<_> = idx.iter().map(|&i| ins[i]).collect();
            let fit2 = fit_boresight(&cam2, &ins2).unwrap();
            prop_assert!(fit.boresight.angle_to(&fit2.boresight) < 1e-9);
        }
    }
}
