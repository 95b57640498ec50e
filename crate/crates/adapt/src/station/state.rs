//! Live mission state kept by the station and served to readers.

use std::collections::{BTreeMap, BTreeSet};

use adapt_core::downlink::{ns_to_seconds, CommandRecord, HistogramMsg, MsgType, SharpnessMsg};
use adapt_core::geo::{GeoPolygonSet, TimestampedPose};
use serde::Serialize;

/// Track keyframes are kept at this interval; the latest pose is kept too.
pub const KEYFRAME_INTERVAL_S: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosePoint {
    pub t_gps_s: f64,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
    /// w, x, y, z; body→ENU.
    pub attitude: [f64; 4],
    pub status: u8,
}

impl From<&TimestampedPose> for PosePoint {
    fn from(p: &TimestampedPose) -> Self {
        Self {
            t_gps_s: p.t,
            lat_deg: p.position.lat_deg,
            lon_deg: p.position.lon_deg,
            alt_m: p.position.alt_m,
            attitude: p.attitude.wxyz(),
            status: p.status.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticsStatus {
    /// Persisted and acknowledged, waiting on an earlier sequence number.
    Held,
    /// Released in sequence order into the mission product.
    Delivered,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticsEntry {
    pub seq: u32,
    pub image_id: Option<u64>,
    pub status: AnalyticsStatus,
    pub polygons: usize,
    pub encoded_bytes: usize,
    pub t_gps_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LinkHealth {
    pub frames: u64,
    pub bytes: u64,
    pub frames_by_type: BTreeMap<&'static str, u64>,
    /// Analytics frames received again after being stored.
    pub duplicates: u64,
    /// Frames whose payload failed to parse.
    pub payload_errors: u64,
    pub last_heard_s: Option<f64>,
    /// Issue-to-ack time of the most recent resolved command.
    pub rtt_s: Option<f64>,
    /// Share of telemetry sequence numbers never received. Includes
    /// samples superseded onboard, not only link loss.
    pub telemetry_gap_fraction: f64,
    #[serde(skip)]
    telemetry_seen: BTreeSet<u32>,
    #[serde(skip)]
    telemetry_max_seq: Option<u32>,
}

impl LinkHealth {
    pub(crate) fn heard(&mut self, ty: MsgType, seq: u32, bytes: usize, now: Option<f64>) {
        self.frames += 1;
        self.bytes += bytes as u64;
        *self.frames_by_type.entry(ty.name()).or_default() += 1;
        if let Some(now) = now {
            self.last_heard_s = Some(self.last_heard_s.map_or(now, |t| t.max(now)));
        }
        if ty == MsgType::Telemetry {
            self.telemetry_seen.insert(seq);
            let max = self.telemetry_max_seq.map_or(seq, |m| m.max(seq));
            self.telemetry_max_seq = Some(max);
            self.telemetry_gap_fraction = 1.0 - self.telemetry_seen.len() as f64 / (max as f64 + 1.0);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ThumbnailMeta {
    pub image_id: u64,
    pub width: u16,
    pub height: u16,
    pub bytes: usize,
}

/// What the operator console sees. Updated under one write lock per
/// ingested frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MissionState {
    pub mission_id: String,
    pub closed: bool,
    pub latest_pose: Option<PosePoint>,
    /// Keyframes at [`KEYFRAME_INTERVAL_S`], in time order.
    #[serde(serialize_with = "values")]
    pub track: BTreeMap<i64, PosePoint>,
    #[serde(serialize_with = "values")]
    pub analytics: BTreeMap<u32, AnalyticsEntry>,
    pub thumbnail: Option<ThumbnailMeta>,
    pub histogram: Option<HistogramMsg>,
    pub sharpness: Option<SharpnessMsg>,
    pub diagnostics: BTreeMap<String, String>,
    pub link: LinkHealth,
    pub commands: Vec<CommandRecord>,
    /// Delivered analytics in sequence order, served as the live export.
    #[serde(skip)]
    pub delivered: Vec<GeoPolygonSet>,
}

fn values<K, V: Serialize, S: serde::Serializer>(m: &BTreeMap<K, V>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(m.values())
}

impl MissionState {
    pub fn new(mission_id: &str) -> Self {
        Self { mission_id: mission_id.to_string(), ..Self::default() }
    }

    /// Adds a pose to the track. Older samples never replace the latest.
    /// Returns whether the latest pose changed.
    pub fn add_pose(&mut self, p: PosePoint) -> bool {
        let bucket = (p.t_gps_s / KEYFRAME_INTERVAL_S).floor() as i64;
        let slot = self.track.entry(bucket).or_insert(p);
        if p.t_gps_s < slot.t_gps_s {
            *slot = p;
        }
        match self.latest_pose {
            Some(l) if l.t_gps_s >= p.t_gps_s => false,
            _ => {
                self.latest_pose = Some(p);
                true
            }
        }
    }

    pub fn delivered_count(&self) -> usize {
        self.analytics.values().filter(|e| e.status == AnalyticsStatus::Delivered).count()
    }
}

/// Converts a frame timestamp for display.
pub fn frame_time_s(t_gps_ns: u64) -> f64 {
    ns_to_seconds(t_gps_ns)
}

/// One server-push update. `topic` is one of `pose`, `thumbnail`,
/// `histogram`, `sharpness`, `analytics`, `diagnostics`, `command`,
/// `link`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamEvent {
    /// Station-wide ingest order.
    pub id: u64,
    pub topic: &'static str,
    pub data: serde_json::Value,
}
