//! One-directional lossy link model.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkProfile {
    /// `f64::INFINITY` is allowed and means no serialization delay.
    pub bandwidth_bps: f64,
    pub latency_ms: f64,
    pub drop_probability: f64,
    /// `[start, end)` mission seconds with total loss.
    #[serde(default)]
    pub blackouts: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinkError {
    #[error("bandwidth must be positive, got {0}")]
    Bandwidth(f64),
    #[error("latency must be finite and non-negative, got {0}")]
    Latency(f64),
    #[error("drop probability {0} outside [0, 1]")]
    DropProbability(f64),
    #[error("blackout window {0:?} is empty or not finite")]
    Window([f64; 2]),
    #[error("blackout windows {0:?} and {1:?} overlap")]
    Overlap([f64; 2], [f64; 2]),
}

impl LinkProfile {
    pub fn clean(bandwidth_bps: f64, latency_ms: f64) -> Self {
        Self { bandwidth_bps, latency_ms, drop_probability: 0.0, blackouts: Vec::new() }
    }

    pub fn with_blackout(mut self, start: f64, end: f64) -> Self {
        self.blackouts.push([start, end]);
        self
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        if !(self.bandwidth_bps > 0.0) {
            return Err(LinkError::Bandwidth(self.bandwidth_bps));
        }
        if !(self.latency_ms.is_finite() && self.latency_ms >= 0.0) {
            return Err(LinkError::Latency(self.latency_ms));
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(LinkError::DropProbability(self.drop_probability));
        }
        let mut w = self.blackouts.clone();
        if let Some(&bad) = w.iter().find(|b| !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1])) {
            return Err(LinkError::Window(bad));
        }
        w.sort_by(|a, b| a[0].total_cmp(&b[0]));
        if let Some(p) = w.windows(2).find(|p| p[1][0] < p[0][1]) {
            return Err(LinkError::Overlap(p[0], p[1]));
        }
        Ok(())
    }

    pub fn in_blackout(&self, t: f64) -> bool {
        self.blackouts.iter().any(|b| t >= b[0] && t < b[1])
    }

    /// Whether any part of `[a, b]` falls in a blackout.
    pub fn blackout_overlaps(&self, a: f64, b: f64) -> bool {
        self.blackouts.iter().any(|w| a < w[1] && b >= w[0])
    }

    pub fn serialization_s(&self, bytes: usize) -> f64 {
        bytes as f64 * 8.0 / self.bandwidth_bps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fate {
    Delivered,
    Dropped,
    Blackout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub offered_s: f64,
    pub start_s: f64,
    /// Arrival time, also set for lost frames (when they would have arrived).
    pub arrive_s: f64,
    pub fate: Fate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkStats {
    pub offered: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub blacked_out: u64,
    pub bytes_delivered: u64,
}

/// Frames are serialized one after another at the link rate, arrive after
/// a constant latency, and are lost by an independent coin flip or when the
/// transmission touches a blackout window.
#[derive(Debug, Clone)]
pub struct LinkChannel {
    profile: LinkProfile,
    rng: ChaCha8Rng,
    free_at: f64,
    pub stats: LinkStats,
}

impl LinkChannel {
    pub fn new(profile: LinkProfile, seed: u64) -> Result<Self, LinkError> {
        profile.validate()?;
        Ok(Self { profile, rng: ChaCha8Rng::seed_from_u64(seed), free_at: f64::NEG_INFINITY, stats: LinkStats::default() })
    }

    pub fn profile(&self) -> &LinkProfile {
        &self.profile
    }

    /// Time the transmitter becomes idle.
    pub fn free_at(&self) -> f64 {
        self.free_at
    }

    pub fn send(&mut self, t: f64, bytes: usize) -> LinkRecord {
        let start = t.max(self.free_at);
        let done = start + self.profile.serialization_s(bytes);
        self.free_at = done;
        let arrive = done + self.profile.latency_ms * 1e-3;
        // Always draw so the loss sequence does not depend on blackouts.
        let coin = self.profile.drop_probability > 0.0 && self.rng.random_bool(self.profile.drop_probability);
        let fate = if self.profile.blackout_overlaps(start, arrive) {
            Fate::Blackout
        } else if coin {
            Fate::Dropped
        } else {
            Fate::Delivered
        };
        self.stats.offered += 1;
        match fate {
            Fate::Delivered => {
                self.stats.delivered += 1;
                self.stats.bytes_delivered += bytes as u64;
            }
            Fate::Dropped => self.stats.dropped += 1,
            Fate::Blackout => self.stats.blacked_out += 1,
        }
        LinkRecord { offered_s: t, start_s: start, arrive_s: arrive, fate }
    }
}

/// Runs a stream of `(offer_time_s, frame_bytes)` through the link.
pub fn simulate_link(profile: &LinkProfile, frames: &[(f64, usize)], seed: u64) -> Result<Vec<LinkRecord>, LinkError> {
    let mut ch = LinkChannel::new(profile.clone(), seed)?;
    Ok(frames.iter().map(|&(t, n)| ch.send(t, n)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn ideal_link_is_identity() {
        let p = LinkProfile::clean(f64::INFINITY, 0.0);
        let frames: Vec<(f64, usize)> = (0..100).map(|i| (i as f64 * 0.1, 1000)).collect();
        let r = simulate_link(&p, &frames, 1).unwrap();
        assert!(r.iter().zip(&frames).all(|(r, f)| r.fate == Fate::Delivered && r.arrive_s == f.0));
    }

    #[test]
    fn blackout_window_delivers_nothing() {
        let p = LinkProfile::clean(1e6, 20.0).with_blackout(10.0, 40.0);
        let frames: Vec<(f64, usize)> = (0..600).map(|i| (i as f64 * 0.1, 500)).collect();
        for r in simulate_link(&p, &frames, 1).unwrap() {
            let inside = r.arrive_s >= 10.0 && r.start_s < 40.0;
            assert_eq!(r.fate == Fate::Blackout, inside, "{r:?}");
        }
    }

    #[test]
    fn one_percent_drop_is_binomial() {
        let mut p = LinkProfile::clean(1e7, 5.0);
        p.drop_probability = 0.01;
        let frames = vec![(0.0, 100); 10_000];
        let r = simulate_link(&p, &frames, 0xD11).unwrap();
        let drops = r.iter().filter(|r| r.fate == Fate::Dropped).count();
        assert!((70..=130).contains(&drops), "{drops}");
        assert_eq!(r, simulate_link(&p, &frames, 0xD11).unwrap());
    }

    #[test]
    fn serialization_enforces_rate() {
        let p = LinkProfile::clean(8000.0, 0.0);
        let r = simulate_link(&p, &[(0.0, 1000), (0.0, 1000), (5.0, 500)], 0).unwrap();
        let starts: Vec<f64> = r.iter().map(|r| r.start_s).collect();
        assert_eq!(starts, [0.0, 1.0, 5.0]);
        assert_eq!(r[2].arrive_s, 5.5);
    }

    #[test]
    fn profile_validation() {
        assert!(LinkProfile::clean(0.0, 0.0).validate().is_err());
        assert!(LinkProfile::clean(1.0, -1.0).validate().is_err());
        let p = LinkProfile::clean(1.0, 0.0).with_blackout(5.0, 10.0).with_blackout(8.0, 12.0);
        assert!(matches!(p.validate(), Err(LinkError::Overlap(..))));
        assert!(LinkProfile::clean(1.0, 0.0).with_blackout(5.0, 5.0).validate().is_err());
    }
}
