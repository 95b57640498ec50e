//! Ground station: persists downlinked frames, keeps the live mission
//! state and writes the mission products.

pub mod api;
mod report;
pub mod state;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use adapt_core::downlink::{
    spool_record, AnalyticsMsg, CommandRecord, CommandStatus, Frame, GroundHandler, MsgType, Payload, Reassembler,
};
use adapt_core::geo::GeoPolygonSet;
use base64::Engine;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tokio::sync::broadcast;

use crate::formats::feature_collection;
use crate::spool::SpoolWriter;
pub use report::{coverage_by_class, MissionReport};
pub use state::{AnalyticsEntry, AnalyticsStatus, LinkHealth, MissionState, PosePoint, StreamEvent, ThumbnailMeta};

pub const FRAMES_LOG: &str = "frames.log";
pub const ANALYTICS_BIN: &str = "analytics.bin";
pub const EXPORT_GEOJSON: &str = "export.geojson";
pub const REPORT_JSON: &str = "report.json";

const EVENT_CAPACITY: usize = 1024;
/// Link-health events are rate limited to one per this many seconds.
const LINK_EVENT_INTERVAL_S: f64 = 1.0;

pub type SharedState = Arc<RwLock<MissionState>>;

pub fn missions_dir(data_dir: &Path) -> PathBuf {
    data_dir.join("missions")
}

pub fn mission_dir(data_dir: &Path, mission_id: &str) -> PathBuf {
    missions_dir(data_dir).join(mission_id)
}

/// Mission ids become directory names.
pub fn valid_mission_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b"-_.".contains(&b)) && !id.starts_with('.')
}

/// SHA-256 over the delivered analytics and the GeoJSON export, the two
/// products that must not depend on link conditions.
pub fn store_digest(dir: &Path) -> io::Result<String> {
    let mut h = Sha256::new();
    for name in [ANALYTICS_BIN, EXPORT_GEOJSON] {
        h.update(fs::read(dir.join(name))?);
    }
    Ok(hex(&h.finalize()))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes via a temporary file and rename so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

#[derive(Debug)]
struct DeliveredAnalytics {
    frame: Frame,
    msg: AnalyticsMsg,
}

/// One mission at the station. Implements [`GroundHandler`] so a
/// [`adapt_core::downlink::GroundNode`] can drive it.
#[derive(Debug)]
pub struct Station {
    dir: PathBuf,
    log: SpoolWriter,
    state: SharedState,
    events: broadcast::Sender<StreamEvent>,
    next_event: u64,
    delivered: Vec<DeliveredAnalytics>,
    last_link_event_s: f64,
}

impl Station {
    /// Opens or resumes a mission. Frames already in the record log are
    /// replayed; the returned reassembler continues where they stop.
    pub fn open(data_dir: &Path, mission_id: &str) -> io::Result<(Self, Reassembler)> {
        if !valid_mission_id(mission_id) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, format!("invalid mission id {mission_id:?}")));
        }
        let dir = mission_dir(data_dir, mission_id);
        fs::create_dir_all(&dir)?;
        let (log, frames, _) = SpoolWriter::open(&dir.join(FRAMES_LOG))?;
        let (events, _) = broadcast::channel(EVENT_CAPACITY);
        let mut st = Self {
            dir,
            log,
            state: Arc::new(RwLock::new(MissionState::new(mission_id))),
            events,
            next_event: 0,
            delivered: Vec::new(),
            last_link_event_s: f64::NEG_INFINITY,
        };
        let mut reasm = Reassembler::new();
        let mut seen = BTreeSet::new();
        for f in frames {
            if f.msg_type == MsgType::Analytics {
                if reasm.is_duplicate(f.seq) {
                    continue;
                }
                st.note_received(&f, None);
                for r in reasm.accept(f).unwrap_or_default() {
                    st.ingest(&r);
                }
            } else if seen.insert(f.key()) {
                st.note_received(&f, None);
                st.ingest(&f);
            }
        }
        reasm.duplicates = 0;
        Ok((st, reasm))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state(&self) -> SharedState {
        Arc::clone(&self.state)
    }

    pub fn subscribe(&self) -> broadcast::Receiver<StreamEvent> {
        self.events.subscribe()
    }

    pub fn events(&self) -> broadcast::Sender<StreamEvent> {
        self.events.clone()
    }

    /// Delivered analytics in sequence order.
    pub fn delivered_sets(&self) -> Vec<GeoPolygonSet> {
        self.state.read().unwrap_or_else(|e| e.into_inner()).delivered.clone()
    }

    pub fn delivered_msgs(&self) -> impl Iterator<Item = &AnalyticsMsg> {
        self.delivered.iter().map(|d| &d.msg)
    }

    fn publish(&mut self, topic: &'static str, data: Value) {
        let id = self.next_event;
        self.next_event += 1;
        // No subscribers is fine.
        let _ = self.events.send(StreamEvent { id, topic, data });
    }

    fn write_state(&self) -> std::sync::RwLockWriteGuard<'_, MissionState> {
        self.state.write().unwrap_or_else(|e| e.into_inner())
    }

    /// `now` is `None` when replaying the record log.
    fn note_received(&mut self, f: &Frame, now: Option<f64>) {
        let mut s = self.write_state();
        s.link.heard(f.msg_type, f.seq, f.wire_len(), now);
        if f.msg_type == MsgType::Analytics {
            s.analytics.insert(
                f.seq,
                AnalyticsEntry {
                    seq: f.seq,
                    image_id: None,
                    status: AnalyticsStatus::Held,
                    polygons: 0,
                    encoded_bytes: f.payload.len(),
                    t_gps_s: state::frame_time_s(f.t_gps_ns),
                },
            );
        }
    }

    /// Applies a stored frame to the mission state.
    fn ingest(&mut self, f: &Frame) {
        let payload = match Payload::from_frame(f) {
            Ok(p) => p,
            Err(_) => {
                self.write_state().link.payload_errors += 1;
                return;
            }
        };
        let t = state::frame_time_s(f.t_gps_ns);
        match payload {
            Payload::Telemetry(tm) => {
                let p = PosePoint::from(&tm.to_pose(t));
                if self.write_state().add_pose(p) {
                    self.publish("pose", json!(p));
                }
            }
            Payload::Thumbnail(th) => {
                let meta = ThumbnailMeta { image_id: th.image_id, width: th.width, height: th.height, bytes: th.jpeg.len() };
                self.write_state().thumbnail = Some(meta.clone());
                let jpeg = base64::engine::general_purpose::STANDARD.encode(&th.jpeg);
                self.publish("thumbnail", json!({ "meta": meta, "jpeg_base64": jpeg }));
            }
            Payload::Histogram(h) => {
                let data = json!(h);
                self.write_state().histogram = Some(h);
                self.publish("histogram", data);
            }
            Payload::Sharpness(sh) => {
                let data = json!(sh);
                self.write_state().sharpness = Some(sh);
                self.publish("sharpness", data);
            }
            Payload::Analytics(msg) => {
                let Ok(set) = msg.to_geo() else {
                    self.write_state().link.payload_errors += 1;
                    return;
                };
                {
                    let mut s = self.write_state();
                    let e = s.analytics.entry(f.seq).or_insert(AnalyticsEntry {
                        seq: f.seq,
                        image_id: None,
                        status: AnalyticsStatus::Held,
                        polygons: 0,
                        encoded_bytes: f.payload.len(),
                        t_gps_s: t,
                    });
                    e.image_id = Some(msg.image_id);
                    e.status = AnalyticsStatus::Delivered;
                    e.polygons = set.polygons.len();
                }
                let data = json!({ "seq": f.seq, "image_id": msg.image_id, "features": feature_collection([&set])["features"] });
                self.write_state().delivered.push(set);
                self.delivered.push(DeliveredAnalytics { frame: f.clone(), msg });
                self.publish("analytics", data);
            }
            Payload::Diagnostics(d) => {
                let data: BTreeMap<String, String> = d.entries.into_iter().collect();
                self.write_state().diagnostics.extend(data.clone());
                self.publish("diagnostics", json!(data));
            }
            Payload::Ack(a) => self.publish("command_ack", json!(a)),
            Payload::Command(_) => {}
        }
    }

    /// Mirrors the session's command table and duplicate count into the
    /// state, publishing changed commands and rate-limited link health.
    pub fn sync_session<'a>(&mut self, commands: impl IntoIterator<Item = &'a CommandRecord>, duplicates: u64, now: f64) {
        let mut changed = Vec::new();
        {
            let mut s = self.write_state();
            for c in commands {
                match s.commands.iter_mut().find(|o| o.seq == c.seq) {
                    Some(o) if o == c => continue,
                    Some(o) => *o = *c,
                    None => s.commands.push(*c),
                }
                if c.status == CommandStatus::Acked {
                    if let Some(r) = c.resolved_s {
                        s.link.rtt_s = Some(r - c.issued_s);
                    }
                }
                changed.push(*c);
            }
            s.link.duplicates = duplicates;
        }
        for c in changed {
            self.publish("command", json!(c));
        }
        if now - self.last_link_event_s >= LINK_EVENT_INTERVAL_S {
            self.last_link_event_s = now;
            let link = json!(self.state.read().unwrap_or_else(|e| e.into_inner()).link);
            self.publish("link", link);
        }
    }

    /// Writes the mission products and marks the mission closed.
    pub fn close(&mut self) -> io::Result<MissionReport> {
        let mut bin = Vec::new();
        for d in &self.delivered {
            bin.extend(spool_record(&d.frame).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?);
        }
        write_atomic(&self.dir.join(ANALYTICS_BIN), &bin)?;
        let report = {
            let mut s = self.write_state();
            let export = serde_json::to_vec(&feature_collection(&s.delivered))?;
            write_atomic(&self.dir.join(EXPORT_GEOJSON), &export)?;
            s.closed = true;
            MissionReport {
                mission_id: s.mission_id.clone(),
                analytics_delivered: self.delivered.len(),
                analytics_held: s.analytics.len() - self.delivered.len(),
                features: s.delivered.iter().map(|d| d.polygons.len()).sum(),
                coverage_m2: coverage_by_class(self.delivered_msgs()),
                link: s.link.clone(),
                commands: s.commands.clone(),
                store_digest: store_digest(&self.dir)?,
            }
        };
        write_atomic(&self.dir.join(REPORT_JSON), &serde_json::to_vec_pretty(&report)?)?;
        self.publish("closed", json!({ "store_digest": report.store_digest }));
        Ok(report)
    }
}

impl GroundHandler for Station {
    type Error = io::Error;

    fn persist(&mut self, frame: &Frame, now: f64) -> io::Result<()> {
        // Analytics are acknowledged once this returns, so they must be on disk.
        self.log.append(frame, frame.msg_type == MsgType::Analytics)?;
        self.note_received(frame, Some(now));
        Ok(())
    }

    fn deliver(&mut self, frame: &Frame, _now: f64) {
        self.ingest(frame);
    }
}
