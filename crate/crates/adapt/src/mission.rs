//! End-to-end simulated mission: onboard products for every capture, the
//! downlink session against a station, and a deterministic summary.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use adapt_core::analytics::{
    histogram, iou_masks, segment, sharpness, vectorize, vectorize_at, ReferenceSegmenter, SegMask, VectorizeError,
    CLASS_FROZEN_WATER, CLASS_UNLABELED,
};
use adapt_core::calib::SimilarityTransform;
use adapt_core::downlink::{
    read_spool, run_session, seconds_to_ns, AnalyticsMsg, Command, CommandRecord, DeliveryRecord, Diagnostics, Direction,
    Emission, Fate, GroundNode, HistogramMsg, LinkChannel, LinkProfile, MemorySpill, MsgType, Payload, PayloadNode,
    Sender, SenderConfig, SessionConfig, SharpnessMsg, Telemetry, Thumbnail,
};
use adapt_core::flightsim::{render_capture, sfm_export, Capture, MissionPlan, SceneConfig, SimError, SimFlight, SimScene};
use adapt_core::geo::{georegister_mask, GeoPolygonSet, Trajectory, UnitQuaternion};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::sync::mpsc;

use crate::capture::{CaptureWriter, Capturing};
use crate::formats::{save, thumbnail_jpeg, write_image_times, write_ins_csv, write_sfm_poses, FileError, THUMBNAIL_LONG_EDGE, THUMBNAIL_QUALITY};
use crate::spool::{FileSpool, SpoolWriter};
use crate::station::api::CommandRequest;
use crate::station::{hex, mission_dir, valid_mission_id, MissionReport, Station};

/// Coarsest simplification tried when an analytics message is over budget.
const MAX_TOLERANCE_PX: f64 = 64.0;
/// Quiet period after both ends go idle before the session stops, so
/// unreliable frames still in flight can land.
const DRAIN_GRACE_S: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledCommand {
    /// Mission seconds.
    pub at_s: f64,
    pub exposure_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionConfig {
    pub mission_id: String,
    pub plan: MissionPlan,
    pub scene: SceneConfig,
    /// Scene margin around the union of image footprints.
    pub scene_margin_m: f64,
    pub downlink: LinkProfile,
    /// Defaults to the downlink profile, blackouts included.
    pub uplink: Option<LinkProfile>,
    pub link_seed: u64,
    /// Largest analytics payload in bytes.
    pub budget_bytes: usize,
    pub telemetry_hz: f64,
    pub segmenter: ReferenceSegmenter,
    /// Capture to products-ready delay.
    pub processing_latency_s: f64,
    pub sharpness_tile_px: u32,
    pub thumbnails: bool,
    pub diagnostics_interval_s: f64,
    /// Added to image timestamps before the INS lookup (INS = image + offset).
    pub time_offset_s: f64,
    pub commands: Vec<ScheduledCommand>,
    pub max_exposure_us: f64,
    /// Session time allowed after the last product for the queues to drain.
    pub drain_limit_s: f64,
    pub tick_s: f64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            mission_id: "sim-001".into(),
            plan: MissionPlan::default(),
            scene: SceneConfig::default(),
            scene_margin_m: 10.0,
            downlink: LinkProfile::clean(1_000_000.0, 20.0),
            uplink: None,
            link_seed: 7,
            budget_bytes: 20_480,
            telemetry_hz: 10.0,
            segmenter: ReferenceSegmenter::default(),
            processing_latency_s: 0.25,
            sharpness_tile_px: 64,
            thumbnails: true,
            diagnostics_interval_s: 5.0,
            time_offset_s: 0.0,
            commands: Vec::new(),
            max_exposure_us: 2_000.0,
            drain_limit_s: 300.0,
            tick_s: 0.01,
        }
    }
}

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("pipeline: {0}")]
    Pipeline(String),
    #[error(transparent)]
    File(#[from] FileError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn config_err(e: impl std::fmt::Display) -> MissionError {
    MissionError::Config(e.to_string())
}

fn pipeline_err(e: impl std::fmt::Display) -> MissionError {
    MissionError::Pipeline(e.to_string())
}

impl MissionConfig {
    pub fn uplink_profile(&self) -> LinkProfile {
        self.uplink.clone().unwrap_or_else(|| self.downlink.clone())
    }

    pub fn validate(&self) -> Result<(), MissionError> {
        if !valid_mission_id(&self.mission_id) {
            return Err(config_err(format!("invalid mission id {:?}", self.mission_id)));
        }
        self.plan.validate().map_err(config_err)?;
        self.scene.validate().map_err(config_err)?;
        self.downlink.validate().map_err(config_err)?;
        self.uplink_profile().validate().map_err(config_err)?;
        let positive = [
            ("telemetry_hz", self.telemetry_hz),
            ("tick_s", self.tick_s),
            ("diagnostics_interval_s", self.diagnostics_interval_s),
            ("drain_limit_s", self.drain_limit_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(config_err(format!("{name} must be positive, got {v}")));
            }
        }
        if self.telemetry_hz > self.plan.ins_hz {
            return Err(config_err("telemetry_hz exceeds the INS rate"));
        }
        if !(self.processing_latency_s.is_finite() && self.processing_latency_s >= 0.0) {
            return Err(config_err("processing_latency_s must be non-negative"));
        }
        if self.budget_bytes < 256 {
            return Err(config_err("budget_bytes below 256"));
        }
        if self.sharpness_tile_px == 0 {
            return Err(config_err("sharpness_tile_px must be positive"));
        }
        for c in &self.commands {
            Command::SetMaxExposure { exposure_us: c.exposure_us }.validate().map_err(config_err)?;
            if !(c.at_s.is_finite() && c.at_s >= 0.0) {
                return Err(config_err("command time must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Everything the payload computes for one capture.
#[derive(Debug, Clone)]
pub struct CaptureProducts {
    pub image_id: u64,
    pub mid_gps_s: f64,
    /// `None` when no simplification fit the budget.
    pub analytics: Option<AnalyticsMsg>,
    pub analytics_bytes: usize,
    pub tolerance_px: f64,
    /// Lowest per-class IoU of the polygons against the segmentation.
    pub vector_iou: f64,
    /// Share of pixels where segmentation matches the rendered truth.
    pub segmentation_agreement: f64,
    pub histogram: HistogramMsg,
    pub sharpness: SharpnessMsg,
    pub thumbnail: Option<Thumbnail>,
}

#[derive(Debug, Clone)]
pub struct MissionProducts {
    pub config: MissionConfig,
    pub flight: SimFlight,
    pub scene: SimScene,
    pub captures: Vec<CaptureProducts>,
}

fn agreement(mask: &SegMask, truth: &SegMask) -> f64 {
    let (mut same, mut n) = (0u64, 0u64);
    for j in 0..mask.height {
        for i in 0..mask.width {
            let (x, y) = (i * mask.scale, j * mask.scale);
            if x >= truth.width || y >= truth.height {
                continue;
            }
            let t = truth.get(x, y);
            if t == CLASS_UNLABELED {
                continue;
            }
            n += 1;
            same += u64::from(t == mask.get(i, j));
        }
    }
    if n == 0 {
        1.0
    } else {
        same as f64 / n as f64
    }
}

fn analytics_payload_len(msg: &AnalyticsMsg) -> usize {
    Payload::Analytics(msg.clone()).into_frame(0, 0).payload.len()
}

fn process_capture(cfg: &MissionConfig, scene: &SimScene, flight: &SimFlight, ins: &Trajectory, c: &Capture) -> Result<CaptureProducts, MissionError> {
    let r = render_capture(scene, flight, c)?;
    let mut seg = cfg.segmenter;
    let mask = segment(&mut seg, &r.image).map_err(pipeline_err)?;
    let pose = ins.interpolate(c.recorded_gps_s + cfg.time_offset_s).map_err(pipeline_err)?;
    let mut v = match vectorize(&mask, cfg.budget_bytes) {
        Ok(v) => v,
        Err(VectorizeError::BudgetUnreachable { best, .. }) => *best,
        Err(e) => return Err(pipeline_err(e)),
    };
    // Ground coordinates encode differently from pixels, so the budget is
    // rechecked on the message actually sent.
    let analytics = loop {
        let set = georegister_mask(&flight.camera, &pose, &flight.frame, 0.0, c.image_id, &v.full_resolution()).map_err(pipeline_err)?;
        let msg = AnalyticsMsg::from_geo(&set, &flight.frame, 0.0, v.tolerance_px).map_err(pipeline_err)?;
        if analytics_payload_len(&msg) <= cfg.budget_bytes {
            break Some(msg);
        }
        if v.tolerance_px >= MAX_TOLERANCE_PX {
            break None;
        }
        v = vectorize_at(&mask, v.tolerance_px * 2.0);
    };
    let thumbnail = if cfg.thumbnails {
        let (width, height, jpeg) = thumbnail_jpeg(&r.image, THUMBNAIL_LONG_EDGE, THUMBNAIL_QUALITY).map_err(pipeline_err)?;
        Some(Thumbnail { image_id: c.image_id, width, height, jpeg })
    } else {
        None
    };
    Ok(CaptureProducts {
        image_id: c.image_id,
        mid_gps_s: c.mid_gps_s,
        analytics_bytes: analytics.as_ref().map_or(0, analytics_payload_len),
        analytics,
        tolerance_px: v.tolerance_px,
        vector_iou: v.min_iou(),
        segmentation_agreement: agreement(&mask, &r.truth),
        histogram: HistogramMsg::new(c.image_id, &histogram(&r.image)),
        sharpness: SharpnessMsg::new(c.image_id, &sharpness(&r.image, cfg.sharpness_tile_px, c.exposure_us)),
        thumbnail,
    })
}

/// Renders and processes every capture. Captures are independent, so they
/// run in parallel.
pub fn simulate_products(cfg: &MissionConfig) -> Result<MissionProducts, MissionError> {
    cfg.validate()?;
    let flight = SimFlight::generate(&cfg.plan).map_err(SimError::from)?;
    let bounds = flight.ground_bounds().ok_or_else(|| config_err("an image footprint does not reach the ground"))?;
    let scene = SimScene::generate(cfg.scene.clone().covering(bounds, cfg.scene_margin_m), cfg.plan.origin)?;
    let ins = Trajectory::new(flight.ins.clone()).map_err(pipeline_err)?;
    let captures = flight
        .captures
        .par_iter()
        .map(|c| process_capture(cfg, &scene, &flight, &ins, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MissionProducts { config: cfg.clone(), flight, scene, captures })
}

impl MissionProducts {
    fn start_gps_s(&self) -> f64 {
        self.config.plan.start_gps_s
    }

    /// The onboard output schedule in mission seconds, in the order the
    /// payload emits it.
    pub fn emissions(&self) -> Vec<Emission> {
        let cfg = &self.config;
        let t0 = self.start_gps_s();
        let mut out = Vec::new();
        let step = ((cfg.plan.ins_hz / cfg.telemetry_hz).round() as usize).max(1);
        for p in self.flight.ins.iter().step_by(step) {
            out.push(Emission { at_s: p.t - t0, t_gps_ns: seconds_to_ns(p.t), payload: Payload::Telemetry(Telemetry::from_pose(p)) });
        }
        for c in &self.captures {
            let at_s = c.mid_gps_s - t0 + cfg.processing_latency_s;
            let t_gps_ns = seconds_to_ns(c.mid_gps_s);
            let mut push = |payload| out.push(Emission { at_s, t_gps_ns, payload });
            if let Some(a) = &c.analytics {
                push(Payload::Analytics(a.clone()));
            }
            push(Payload::Histogram(c.histogram.clone()));
            push(Payload::Sharpness(c.sharpness.clone()));
            if let Some(t) = &c.thumbnail {
                push(Payload::Thumbnail(t.clone()));
            }
        }
        let end = self.flight.duration_s();
        let mut k = 1;
        while k as f64 * cfg.diagnostics_interval_s <= end {
            let at_s = k as f64 * cfg.diagnostics_interval_s;
            let done = self.captures.iter().filter(|c| c.mid_gps_s - t0 + cfg.processing_latency_s <= at_s).count();
            let entries = vec![("frames_processed".into(), done.to_string()), ("mission_time_s".into(), format!("{at_s:.1}"))];
            out.push(Emission { at_s, t_gps_ns: seconds_to_ns(t0 + at_s), payload: Payload::Diagnostics(Diagnostics { entries }) });
            k += 1;
        }
        out.sort_by(|a, b| a.at_s.total_cmp(&b.at_s));
        out
    }

    /// Analytics frames with the sequence numbers the payload will assign.
    pub fn analytics_frames(&self, emissions: &[Emission]) -> Vec<adapt_core::downlink::Frame> {
        emissions
            .iter()
            .filter(|e| matches!(e.payload, Payload::Analytics(_)))
            .enumerate()
            .map(|(seq, e)| e.payload.into_frame(seq as u32, e.t_gps_ns))
            .collect()
    }

    pub fn max_analytics_bytes(&self) -> usize {
        self.captures.iter().map(|c| c.analytics_bytes).max().unwrap_or(0)
    }
}

/// Operator commands arriving while a session runs, and real-time pacing.
#[derive(Debug)]
pub struct LiveControl {
    pub commands: mpsc::Receiver<CommandRequest>,
    /// Mission seconds per wall second; 0 runs unpaced.
    pub speed: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeStats {
    pub frames: u64,
    pub bytes: u64,
    pub retransmissions: u64,
    pub lost: u64,
}

/// Outcome of one mission. Contains no wall-clock data, so equal inputs give
/// an equal summary and hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSummary {
    pub mission_id: String,
    pub captures: usize,
    pub analytics_emitted: usize,
    pub analytics_over_budget: usize,
    pub analytics_delivered: usize,
    pub analytics_max_bytes: usize,
    pub analytics_max_latency_s: f64,
    pub min_vector_iou: f64,
    pub mean_segmentation_agreement: f64,
    pub downlink: std::collections::BTreeMap<String, TypeStats>,
    pub telemetry_max_latency_s: f64,
    pub telemetry_received: u64,
    pub duplicates_at_station: u64,
    pub persist_failures: u64,
    pub commands: Vec<CommandRecord>,
    /// Mission time and value of each exposure limit applied onboard.
    pub applied_exposures: Vec<(f64, f64)>,
    pub session_end_s: f64,
    pub coverage_m2: f64,
    pub truth_area_m2: f64,
    pub mapping_iou: f64,
    pub store_digest: String,
    pub summary_hash: String,
}

impl MissionSummary {
    fn seal(mut self) -> Self {
        self.summary_hash.clear();
        let bytes = serde_json::to_vec(&self).expect("summary serializes");
        self.summary_hash = hex(&Sha256::digest(bytes));
        self
    }
}

#[derive(Debug)]
pub struct MissionOutcome {
    pub summary: MissionSummary,
    pub report: MissionReport,
    pub deliveries: Vec<DeliveryRecord>,
    pub station_dir: PathBuf,
    /// Delivered analytics in sequence order.
    pub delivered: Vec<GeoPolygonSet>,
}

/// Fixed SfM frame used for the exported reconstruction.
pub fn demo_sfm_transform() -> SimilarityTransform {
    SimilarityTransform { scale: 0.25, rotation: UnitQuaternion::from_yaw_pitch_roll(0.7, 0.05, -0.02), translation: [12.0, -3.0, 40.0] }
}

fn write_sim_inputs(p: &MissionProducts, dir: &Path) -> Result<(), MissionError> {
    fs::create_dir_all(dir.join("onboard"))?;
    fs::write(dir.join("mission.json"), serde_json::to_vec_pretty(&p.config).map_err(pipeline_err)?)?;
    save(&dir.join("ins.csv"), |w| write_ins_csv(w, &p.flight.ins))?;
    let sfm = sfm_export(&p.flight, &demo_sfm_transform(), None).map_err(pipeline_err)?;
    save(&dir.join("images.csv"), |w| write_image_times(w, &sfm))?;
    save(&dir.join("sfm.txt"), |w| write_sfm_poses(w, &sfm))?;
    Ok(())
}

/// Flies the mission against a fresh station under
/// `data_dir/missions/<id>/`; simulator-side files go to its `sim/`
/// directory. `on_open` sees the station before the first frame.
pub fn run_mission(
    products: &MissionProducts,
    data_dir: &Path,
    mut live: Option<LiveControl>,
    on_open: impl FnOnce(&Station),
) -> Result<MissionOutcome, MissionError> {
    let cfg = &products.config;
    let station_dir = mission_dir(data_dir, &cfg.mission_id);
    if station_dir.join(crate::station::FRAMES_LOG).exists() {
        return Err(config_err(format!("mission {} already exists in {}", cfg.mission_id, data_dir.display())));
    }
    let (station, reasm) = Station::open(data_dir, &cfg.mission_id)?;
    let sim_dir = station_dir.join("sim");
    write_sim_inputs(products, &sim_dir)?;

    let emissions = products.emissions();
    let analytics_frames = products.analytics_frames(&emissions);
    {
        // The onboard archive holds every analytics product regardless of the link.
        let (mut archive, _, _) = SpoolWriter::open(&sim_dir.join("onboard").join("analytics.spool"))?;
        for f in &analytics_frames {
            archive.append(f, false)?;
        }
    }
    let spill = FileSpool::open(&sim_dir.join("onboard").join("spill.spool"), false)?;
    let mut air = PayloadNode::new(
        Sender::new(SenderConfig::for_rate(cfg.downlink.bandwidth_bps), spill),
        emissions,
        cfg.max_exposure_us,
        seconds_to_ns(products.start_gps_s()),
    );
    on_open(&station);
    let uplink = cfg.uplink_profile();
    let ground_sender = Sender::new(SenderConfig::for_rate(uplink.bandwidth_bps), MemorySpill::default());
    let capture = CaptureWriter::create(&sim_dir.join("downlink.cap"))?;
    let mut ground = Capturing::new(GroundNode::new(station, ground_sender, reasm), Some(capture));
    let mut down = LinkChannel::new(cfg.downlink.clone(), cfg.link_seed).map_err(config_err)?;
    let mut up = LinkChannel::new(uplink, cfg.link_seed ^ 0x55AA).map_err(config_err)?;

    let mut scheduled = cfg.commands.clone();
    scheduled.sort_by(|a, b| a.at_s.total_cmp(&b.at_s));
    let mut scheduled = scheduled.into_iter().peekable();
    let mut command_errors = Vec::new();
    let mut idle_since: Option<f64> = None;
    let mut end_s = 0.0;
    let wall = Instant::now();
    let session = SessionConfig { tick_s: cfg.tick_s, end_s: products.flight.duration_s() + cfg.processing_latency_s + cfg.drain_limit_s };
    let deliveries = run_session(&mut air, &mut ground, &mut down, &mut up, session, |now, air, ground| {
        end_s = now;
        let g = &mut ground.inner;
        while let Some(c) = scheduled.next_if(|c| c.at_s <= now) {
            if let Err(e) = g.send_command(Command::SetMaxExposure { exposure_us: c.exposure_us }, now) {
                command_errors.push(e);
            }
        }
        if let Some(l) = &mut live {
            while let Ok(req) = l.commands.try_recv() {
                let _ = req.reply.send(g.send_command(req.command, now).map_err(String::from));
            }
            if l.speed > 0.0 && l.speed.is_finite() {
                let due = Duration::from_secs_f64(now / l.speed);
                if let Some(wait) = due.checked_sub(wall.elapsed()) {
                    std::thread::sleep(wait);
                }
            }
        }
        g.handler.sync_session(g.commands.values(), g.analytics.duplicates, now);
        let quiet = air.pending_outputs() == 0 && air.sender.is_idle() && g.sender.is_idle() && scheduled.peek().is_none();
        if !quiet {
            idle_since = None;
            return false;
        }
        now - *idle_since.get_or_insert(now) >= DRAIN_GRACE_S
    });
    ground.finish()?;
    if !command_errors.is_empty() {
        return Err(pipeline_err(format!("commands refused: {}", command_errors.join(", "))));
    }
    let mut g = ground.inner;
    g.handler.sync_session(g.commands.values(), g.analytics.duplicates, f64::INFINITY);
    let report = g.handler.close()?;
    let mut log = Vec::new();
    for d in &deliveries {
        serde_json::to_writer(&mut log, d).map_err(pipeline_err)?;
        log.push(b'\n');
    }
    fs::write(sim_dir.join("deliveries.jsonl"), log)?;

    let delivered = g.handler.delivered_sets();
    let (coverage_m2, truth_area_m2, mapping_iou) = mapping_fidelity(products, &delivered)?;
    let summary = MissionSummary {
        mission_id: cfg.mission_id.clone(),
        captures: products.captures.len(),
        analytics_emitted: analytics_frames.len(),
        analytics_over_budget: products.captures.iter().filter(|c| c.analytics.is_none()).count(),
        analytics_delivered: report.analytics_delivered,
        analytics_max_bytes: products.max_analytics_bytes(),
        analytics_max_latency_s: max_first_arrival_latency(&deliveries, MsgType::Analytics),
        min_vector_iou: products.captures.iter().map(|c| c.vector_iou).fold(1.0, f64::min),
        mean_segmentation_agreement: products.captures.iter().map(|c| c.segmentation_agreement).sum::<f64>()
            / products.captures.len().max(1) as f64,
        downlink: type_stats(&deliveries),
        telemetry_max_latency_s: max_first_arrival_latency(&deliveries, MsgType::Telemetry),
        telemetry_received: report.link.frames_by_type.get(MsgType::Telemetry.name()).copied().unwrap_or(0),
        duplicates_at_station: g.analytics.duplicates,
        persist_failures: g.persist_failures,
        commands: g.commands.values().copied().collect(),
        applied_exposures: air.applied.clone(),
        session_end_s: end_s,
        coverage_m2,
        truth_area_m2,
        mapping_iou,
        store_digest: report.store_digest.clone(),
        summary_hash: String::new(),
    }
    .seal();
    fs::write(sim_dir.join("summary.json"), serde_json::to_vec_pretty(&summary).map_err(pipeline_err)?)?;
    Ok(MissionOutcome { summary, report, deliveries, station_dir, delivered })
}

fn type_stats(deliveries: &[DeliveryRecord]) -> std::collections::BTreeMap<String, TypeStats> {
    let mut out = std::collections::BTreeMap::<String, TypeStats>::new();
    let mut seen = std::collections::BTreeSet::new();
    for d in deliveries.iter().filter(|d| d.direction == Direction::Down) {
        let s = out.entry(d.msg_type.name().to_string()).or_default();
        s.frames += 1;
        s.bytes += d.bytes as u64;
        s.retransmissions += u64::from(!seen.insert((d.msg_type, d.seq)));
        s.lost += u64::from(d.fate != Fate::Delivered);
    }
    out
}

/// Worst time from first enqueue to first successful arrival, over every
/// sequence number of `ty` that arrived.
pub fn max_first_arrival_latency(deliveries: &[DeliveryRecord], ty: MsgType) -> f64 {
    let mut first: std::collections::BTreeMap<u32, (f64, f64)> = std::collections::BTreeMap::new();
    for d in deliveries.iter().filter(|d| d.direction == Direction::Down && d.msg_type == ty) {
        let e = first.entry(d.seq).or_insert((d.enqueued_s, f64::INFINITY));
        if d.fate == Fate::Delivered {
            e.1 = e.1.min(d.arrive_s);
        }
    }
    first.values().filter(|(_, a)| a.is_finite()).map(|(q, a)| a - q).fold(0.0, f64::max)
}

/// Area and IoU of the delivered frozen-water map against the scene, both
/// restricted to ground some image saw.
pub fn mapping_fidelity(p: &MissionProducts, delivered: &[GeoPolygonSet]) -> Result<(f64, f64, f64), MissionError> {
    let seen = p.scene.visible_under(&p.flight)?;
    let truth = p.scene.class_cells(CLASS_FROZEN_WATER, &seen);
    let mut mapped = vec![false; seen.len()];
    for s in delivered {
        p.scene.rasterize_set(s, CLASS_FROZEN_WATER, &mut mapped)?;
    }
    for (m, &v) in mapped.iter_mut().zip(&seen) {
        *m &= v;
    }
    let area = |v: &[bool]| v.iter().filter(|&&b| b).count() as f64 * p.scene.cell_area();
    Ok((area(&mapped), area(&truth), iou_masks(&mapped, &truth)))
}

/// Re-reads the onboard archive of a finished mission.
pub fn read_onboard_archive(station_dir: &Path) -> io::Result<Vec<adapt_core::downlink::Frame>> {
    Ok(read_spool(&fs::read(station_dir.join("sim").join("onboard").join("analytics.spool"))?).0)
}
