//! Clock discipline from 1PPS edges and timestamp validation.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::TimestampedPose;

pub const MAX_DRIFT_PPM: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimebaseError {
    #[error("need at least 2 PPS events, got {0}")]
    InsufficientData(usize),
    #[error("fitted drift {0} ppm exceeds ±{MAX_DRIFT_PPM} ppm")]
    DriftOutOfRange(f64),
    #[error("PPS event {0} is not finite")]
    NonFinite(usize),
}

/// Affine model of a free-running clock against GPS time:
/// `local = gps + offset_s + drift_ppm·1e-6·(gps − epoch_gps_s)` plus
/// Gaussian read noise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClockModel {
    pub offset_s: f64,
    pub drift_ppm: f64,
    pub jitter_sigma_s: f64,
    /// GPS time at which `offset_s` is referenced.
    #[serde(default)]
    pub epoch_gps_s: f64,
}

impl ClockModel {
    pub fn local_time(&self, gps_s: f64) -> f64 {
        gps_s + self.offset_s + self.drift_ppm * 1e-6 * (gps_s - self.epoch_gps_s)
    }

    /// Inverse of [`ClockModel::local_time`].
    pub fn gps_time(&self, local_s: f64) -> f64 {
        let k = self.drift_ppm * 1e-6;
        (local_s - self.offset_s + k * self.epoch_gps_s) / (1.0 + k)
    }

    /// One noisy clock read at GPS time `gps_s`.
    pub fn read<R: Rng + ?Sized>(&self, gps_s: f64, rng: &mut R) -> f64 {
        let noise = if self.jitter_sigma_s > 0.0 {
            Normal::new(0.0, self.jitter_sigma_s).map(|n| n.sample(rng)).unwrap_or(0.0)
        } else {
            0.0
        };
        self.local_time(gps_s) + noise
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpsEvent {
    pub true_gps_s: i64,
    pub observed_local_s: f64,
}

/// PPS edges observed by `clock` for `count` consecutive GPS seconds.
pub fn simulate_pps<R: Rng + ?Sized>(clock: &ClockModel, first_gps_s: i64, count: usize, rng: &mut R) -> Vec<PpsEvent> {
    (0..count as i64)
        .map(|k| {
            let s = first_gps_s + k;
            PpsEvent { true_gps_s: s, observed_local_s: clock.read(s as f64, rng) }
        })
        .collect()
}

/// Pairs raw edge times with GPS seconds. The first edge is assigned
/// `first_gps_s`; later edges take the nearest whole-second step from it.
pub fn associate_pps(observed_local_s: &[f64], first_gps_s: i64) -> Vec<PpsEvent> {
    let Some(&t0) = observed_local_s.first() else {
        return Vec::new();
    };
    observed_local_s
        .iter()
        .map(|&t| PpsEvent { true_gps_s: first_gps_s + (t - t0).round() as i64, observed_local_s: t })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockFit {
    /// Fitted model; `jitter_sigma_s` is the residual RMS.
    pub model: ClockModel,
    pub residual_rms_s: f64,
    pub events: usize,
}

/// Least-squares offset + drift fit. The epoch is the mean event time so
/// the offset and drift estimates are uncorrelated.
pub fn discipline_clock(events: &[PpsEvent]) -> Result<ClockFit, TimebaseError> {
    if events.len() < 2 {
        return Err(TimebaseError::InsufficientData(events.len()));
    }
    if let Some(i) = events.iter().position(|e| !e.observed_local_s.is_finite()) {
        return Err(TimebaseError::NonFinite(i));
    }
    let n = events.len() as f64;
    // Center on the first event before averaging to keep precision when
    // GPS seconds are ~1e9.
    let base = events[0].true_gps_s;
    let xs: Vec<f64> = events.iter().map(|e| (e.true_gps_s - base) as f64).collect();
    let ys: Vec<f64> = events.iter().map(|e| (e.observed_local_s - base as f64) - (e.true_gps_s - base) as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(TimebaseError::InsufficientData(1));
    }
    let slope = sxy / sxx;
    let drift_ppm = slope * 1e6;
    if drift_ppm.abs() >= MAX_DRIFT_PPM {
        return Err(TimebaseError::DriftOutOfRange(drift_ppm));
    }
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let rms = (ss / n).sqrt();
    Ok(ClockFit {
        model: ClockModel { offset_s: my, drift_ppm, jitter_sigma_s: rms, epoch_gps_s: base as f64 + mx },
        residual_rms_s: rms,
        events: events.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WholeSecondReport {
    pub deviations_s: Vec<f64>,
    pub max_deviation_s: f64,
    pub tolerance_s: f64,
    pub pass: bool,
}

/// Checks that PPS-triggered timestamps sit on whole GPS seconds.
pub fn validate_whole_second(timestamps: &[f64], tol_s: f64) -> WholeSecondReport {
    let deviations_s: Vec<f64> = timestamps.iter().map(|t| (t - t.round()).abs()).collect();
    let max_deviation_s = deviations_s.iter().copied().fold(0.0, f64::max);
    WholeSecondReport {
        pass: !timestamps.is_empty() && deviations_s.iter().all(|d| *d <= tol_s),
        deviations_s,
        max_deviation_s,
        tolerance_s: tol_s,
    }
}

/// Shifts every pose time by `delta_s`.
///
/// `delta_s` is how far the INS clock leads the camera clock: applying the
/// negated estimate from calibration realigns the stream.
pub fn apply_time_offset(traj: &[TimestampedPose], delta_s: f64) -> Vec<TimestampedPose> {
    traj.iter().map(|p| TimestampedPose { t: p.t + delta_s, ..*p }).collect()
}

/// Image timestamp convention: the middle of the exposure.
pub fn mid_exposure(exposure_start_s: f64, exposure_us: f64) -> f64 {
    exposure_start_s + 0.5 * exposure_us * 1e-6
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{GeodeticPosition, PoseStatus, UnitQuaternion};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ideal_clock_fits_to_zero() {
        let ev = simulate_pps(&ClockModel::default(), 0, 10, &mut ChaCha8Rng::seed_from_u64(0));
        let fit = discipline_clock(&ev).unwrap();
        assert_eq!(fit.model.offset_s, 0.0);
        assert_eq!(fit.model.drift_ppm, 0.0);
    }

    #[test]
    fn noiseless_offset_and_drift_recovered() {
        let truth = ClockModel { offset_s: 3.2, drift_ppm: 12.0, jitter_sigma_s: 0.0, epoch_gps_s: 0.0 };
        let ev = simulate_pps(&truth, 0, 60, &mut ChaCha8Rng::seed_from_u64(1));
        let fit = discipline_clock(&ev).unwrap();
        assert!((fit.model.drift_ppm - 12.0).abs() < 1e-9 * 1e6 * 1e-3, "{fit:?}");
        // Compare at epoch 0 by evaluating the fitted model.
        assert!((fit.model.local_time(0.0) - 3.2).abs() < 1e-9);
        assert!((fit.model.local_time(59.0) - truth.local_time(59.0)).abs() < 1e-9);
        assert!(fit.residual_rms_s < 1e-9);
    }

    #[test]
    fn jitter_monte_carlo_within_three_sigma_over_root_n() {
        let sigma = 1e-6;
        let n = 120;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut mean_err = 0.0;
        let mut inside = 0;
        let trials = 200;
        for _ in 0..trials {
            let truth = ClockModel { offset_s: 0.75, drift_ppm: -8.0, jitter_sigma_s: sigma, epoch_gps_s: 0.0 };
            let ev = simulate_pps(&truth, 0, n, &mut rng);
            let fit = discipline_clock(&ev).unwrap();
            let epoch = fit.model.epoch_gps_s;
            let err = fit.model.local_time(epoch) - truth.local_time(epoch);
            inside += usize::from(err.abs() < 3.0 * sigma / (n as f64).sqrt());
            mean_err += err / trials as f64;
        }
        // 3σ covers 99.7% of trials.
        assert!(inside >= trials - 3, "{inside}/{trials}");
        // Unbiased: the mean over trials shrinks by another √trials.
        assert!(mean_err.abs() < 3.0 * sigma / ((n * trials) as f64).sqrt());
    }

    #[test]
    fn too_few_events() {
        assert_eq!(discipline_clock(&[]), Err(TimebaseError::InsufficientData(0)));
        let e = PpsEvent { true_gps_s: 5, observed_local_s: 5.0 };
        assert_eq!(discipline_clock(&[e]), Err(TimebaseError::InsufficientData(1)));
    }

    #[test]
    fn association_uses_first_event() {
        let ev = associate_pps(&[1000.7, 1001.7000002, 1003.6999], 1_300_000_000);
        let secs: Vec<i64> = ev.iter().map(|e| e.true_gps_s).collect();
        assert_eq!(secs, [1_300_000_000, 1_300_000_001, 1_300_000_003]);
    }

    #[test]
    fn whole_second_examples() {
        let r = validate_whole_second(&[100.0, 101.0, 102.0], 1e-3);
        assert!(r.pass);
        assert_eq!(r.max_deviation_s, 0.0);
        let r = validate_whole_second(&[100.0003], 1e-3);
        assert!(r.pass);
        assert!((r.max_deviation_s - 300e-6).abs() < 1e-9);
        assert!(!validate_whole_second(&[100.002], 1e-3).pass);
    }

    // Camera triggered by PPS edges and stamped by a clock disciplined
    // from earlier edges.
    #[test]
    fn disciplined_pps_camera_passes_at_100us() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let clock = ClockModel { offset_s: 0.4, drift_ppm: 20.0, jitter_sigma_s: 1e-6, epoch_gps_s: 100.0 };
        let fit = discipline_clock(&simulate_pps(&clock, 100, 60, &mut rng)).unwrap();
        let stamps: Vec<f64> = (160..280).map(|s| fit.model.gps_time(clock.read(s as f64, &mut rng))).collect();
        let r = validate_whole_second(&stamps, 100e-6);
        assert!(r.pass, "max dev {}", r.max_deviation_s);
    }

    fn traj(times: &[f64]) -> Vec<TimestampedPose> {
        times
            .iter()
            .map(|&t| TimestampedPose {
                t,
                position: GeodeticPosition { lat_deg: 64.8, lon_deg: -147.7, alt_m: 130.0 },
                attitude: UnitQuaternion::IDENTITY,
                status: PoseStatus::VALID,
            })
            .collect()
    }

    #[test]
    fn offset_examples() {
        let tr = traj(&[10.0, 10.01, 10.02]);
        assert_eq!(apply_time_offset(&tr, 0.0), tr);
        let shifted = apply_time_offset(&tr, 0.25);
        for (a, b) in tr.iter().zip(&shifted) {
            assert_eq!(b.t, a.t + 0.25);
            assert_eq!(b.position, a.position);
        }
    }

    #[test]
    fn mid_exposure_stamp() {
        assert_eq!(mid_exposure(10.0, 500.0), 10.00025);
    }

    proptest! {
        #[test]
        fn whole_second_shift_invariant(ts in prop::collection::vec(0.0f64..1e5, 1..20), k in -1000i64..1000) {
            let a = validate_whole_second(&ts, 1e-3);
            let shifted: Vec<f64> = ts.iter().map(|t| t + k as f64).collect();
            let b = validate_whole_second(&shifted, 1e-3);
            prop_assert!((a.max_deviation_s - b.max_deviation_s).abs() < 1e-9);
        }

        // Exact whenever neither addition rounds: here times sit on a 2^-20 s
        // grid below 2^20 s and offsets on a 2^-10 s grid.
        #[test]
        fn offset_inverse_bitwise(ticks in prop::collection::btree_set(1u64 << 20..1u64 << 40, 1..20), m in -2048i32..2048) {
            let ts: Vec<f64> = ticks.iter().map(|&k| k as f64 / (1u64 << 20) as f64).collect();
            let tr = traj(&ts);
            let d = m as f64 / 1024.0;
            let back = apply_time_offset(&apply_time_offset(&tr, d), -d);
            for (a, b) in tr.iter().zip(&back) {
                prop_assert_eq!(a.t.to_bits(), b.t.to_bits());
            }
        }
    }
}
