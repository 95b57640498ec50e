use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adapt::capture::{read_capture, replay};
use adapt::formats::{load, read_image_times, read_ins_csv, read_mask_png, read_sfm_poses, FileError};
use adapt::mission::{run_mission, simulate_products, LiveControl, MissionConfig, MissionError, MissionSummary};
use adapt::station::api::{router, ApiState, LiveMission};
use adapt::station::{mission_dir, valid_mission_id, MissionReport, Station, FRAMES_LOG};
use adapt_core::analytics::{vectorize, VectorizeError};
use adapt_core::calib::{calibrate, CalibOptions};
use adapt_core::downlink::{GroundNode, MemorySpill, Sender, SenderConfig};
use adapt_core::geo::{EnuFrame, Trajectory};
use clap::{Parser, Subcommand};
use serde::Serialize;
use tokio::sync::mpsc;

#[derive(Parser)]
#[command(name = "adapt", version, about = "Payload data path: simulate, calibrate, vectorize, serve and replay missions")]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fly a simulated mission against a local station.
    Simulate {
        /// Mission configuration JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "ADAPT_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        #[arg(long)]
        mission_id: Option<String>,
    },
    /// Estimate camera time offset, boresight and SfM alignment.
    Calibrate {
        /// SfM poses: `name qw qx qy qz tx ty tz` per line.
        #[arg(long)]
        sfm: PathBuf,
        /// `image_name,t_gps_s` capture times.
        #[arg(long)]
        times: PathBuf,
        #[arg(long)]
        ins: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        window: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vectorize a class-id mask PNG under a byte budget.
    Vectorize {
        mask: PathBuf,
        #[arg(long, default_value_t = 20_480)]
        budget: usize,
        /// Write the polygons as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve stored missions, optionally while flying a simulated one.
    Serve {
        #[arg(long, env = "ADAPT_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Fly this mission configuration live.
        #[arg(long)]
        live: Option<PathBuf>,
        /// Mission seconds per wall second for the live mission.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Feed a recorded downlink capture into a new station mission.
    Replay {
        capture: PathBuf,
        #[arg(long, env = "ADAPT_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        #[arg(long, default_value = "replay")]
        mission_id: String,
        /// Mission seconds per wall second; 0 replays unpaced.
        #[arg(long, default_value_t = 0.0)]
        speed: f64,
        /// Serve the replayed mission while it runs.
        #[arg(long)]
        serve: Option<SocketAddr>,
    },
}

/// Exit status classes.
enum Failure {
    Config(String),
    Data(String),
    Pipeline(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Pipeline(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Data(m) | Failure::Pipeline(m) => m,
        }
    }
}

impl From<MissionError> for Failure {
    fn from(e: MissionError) -> Self {
        match e {
            MissionError::Config(_) => Failure::Config(e.to_string()),
            MissionError::File(_) | MissionError::Io(_) => Failure::Data(e.to_string()),
            MissionError::Sim(_) | MissionError::Pipeline(_) => Failure::Pipeline(e.to_string()),
        }
    }
}

impl From<FileError> for Failure {
    fn from(e: FileError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) {
    if json {
        println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
    } else {
        println!("{}", text());
    }
}

fn load_config(path: Option<&Path>, mission_id: Option<String>) -> Result<MissionConfig, Failure> {
    let mut cfg = match path {
        Some(p) => {
            let bytes = fs::read(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_slice(&bytes).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
        }
        None => MissionConfig::default(),
    };
    if let Some(id) = mission_id {
        cfg.mission_id = id;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summary_text(s: &MissionSummary) -> String {
    format!(
        "mission {}: {} captures, {}/{} analytics delivered (max {} B), telemetry max latency {:.3} s\n\
         mapping IoU {:.4}, coverage {:.1} m² of {:.1} m² truth\nstore digest {}\nsummary hash {}",
        s.mission_id,
        s.captures,
        s.analytics_delivered,
        s.analytics_emitted,
        s.analytics_max_bytes,
        s.telemetry_max_latency_s,
        s.mapping_iou,
        s.coverage_m2,
        s.truth_area_m2,
        s.store_digest,
        s.summary_hash
    )
}

fn report_text(r: &MissionReport) -> String {
    format!(
        "mission {}: {} analytics delivered, {} held, {} features, {} frames received\nstore digest {}",
        r.mission_id, r.analytics_delivered, r.analytics_held, r.features, r.link.frames, r.store_digest
    )
}

fn simulate(json: bool, config: Option<PathBuf>, data_dir: PathBuf, mission_id: Option<String>) -> Result<(), Failure> {
    let cfg = load_config(config.as_deref(), mission_id)?;
    let products = simulate_products(&cfg)?;
    let out = run_mission(&products, &data_dir, None, |_| {})?;
    emit(json, &out.summary, || format!("{}\nwritten to {}", summary_text(&out.summary), out.station_dir.display()));
    Ok(())
}

fn run_calibrate(json: bool, sfm: PathBuf, times: PathBuf, ins: PathBuf, window: f64, out: Option<PathBuf>) -> Result<(), Failure> {
    if !(window.is_finite() && window > 0.0) {
        return Err(Failure::Config(format!("--window must be positive, got {window}")));
    }
    let times = load(&times, read_image_times)?;
    let sfm = load(&sfm, |f| read_sfm_poses(f, &times))?;
    let poses = load(&ins, read_ins_csv)?;
    let frame = EnuFrame::at_median(poses.iter().map(|p| &p.position)).map_err(|e| Failure::Data(format!("{}: {e}", ins.display())))?;
    let traj = Trajectory::new(poses).map_err(|e| Failure::Data(format!("{}: {e}", ins.display())))?;
    let result = calibrate(&sfm, &traj, &frame, &CalibOptions { window_s: window }).map_err(|e| Failure::Pipeline(e.to_string()))?;
    if let Some(path) = out {
        fs::write(&path, serde_json::to_vec_pretty(&result).expect("serializable"))?;
    }
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    emit(json, &result, || {
        format!(
            "time offset {:+.4} s (INS = image + offset)\nposition rms {:.3} m, attitude rms {:.3}°\nSfM scale {:.6}",
            result.time_offset_s, result.position_rms_m, result.attitude_rms_deg, result.similarity.scale
        )
    });
    Ok(())
}

#[derive(Serialize)]
struct VectorizeOutput {
    width: u32,
    height: u32,
    polygons: usize,
    encoded_bytes: usize,
    tolerance_px: f64,
    min_iou: f64,
}

/// Pixel-space polygon; the first ring is the exterior.
#[derive(Serialize)]
struct PolygonOut {
    class_id: u8,
    rings: Vec<Vec<[f64; 2]>>,
}

fn run_vectorize(json: bool, mask: PathBuf, budget: usize, out: Option<PathBuf>) -> Result<(), Failure> {
    let m = load(&mask, read_mask_png)?;
    let v = match vectorize(&m, budget) {
        Ok(v) => v,
        Err(e @ VectorizeError::BudgetTooSmall(_)) => return Err(Failure::Config(e.to_string())),
        Err(e) => return Err(Failure::Pipeline(e.to_string())),
    };
    if let Some(path) = out {
        let polys: Vec<PolygonOut> = v
            .full_resolution()
            .iter()
            .map(|p| PolygonOut { class_id: p.class_id, rings: p.rings().map(|r| r.iter().map(|q| [q.x, q.y]).collect()).collect() })
            .collect();
        fs::write(&path, serde_json::to_vec(&polys).expect("serializable"))?;
    }
    let o = VectorizeOutput {
        width: m.width,
        height: m.height,
        polygons: v.polygons.len(),
        encoded_bytes: v.encoded_bytes(),
        tolerance_px: v.tolerance_px,
        min_iou: v.min_iou(),
    };
    emit(json, &o, || {
        format!("{} polygons, {} B at tolerance {} px, min class IoU {:.4}", o.polygons, o.encoded_bytes, o.tolerance_px, o.min_iou)
    });
    Ok(())
}

async fn serve_until_interrupted(state: ApiState, bind: SocketAddr) -> Result<(), Failure> {
    let listener = tokio::net::TcpListener::bind(bind).await.map_err(|e| Failure::Config(format!("bind {bind}: {e}")))?;
    eprintln!("serving on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn serve(data_dir: PathBuf, bind: SocketAddr, live: Option<PathBuf>, speed: f64) -> Result<(), Failure> {
    let Some(config) = live else {
        return serve_until_interrupted(ApiState { data_dir, live: None }, bind).await;
    };
    let cfg = load_config(Some(&config), None)?;
    let (handles_tx, handles_rx) = std::sync::mpsc::channel();
    let (commands_tx, commands_rx) = mpsc::channel(16);
    let dir = data_dir.clone();
    let worker = std::thread::spawn(move || -> Result<MissionSummary, MissionError> {
        let products = simulate_products(&cfg)?;
        let control = LiveControl { commands: commands_rx, speed };
        let out = run_mission(&products, &dir, Some(control), |st| {
            let _ = handles_tx.send((st.state(), st.events()));
        })?;
        Ok(out.summary)
    });
    let handles = tokio::task::spawn_blocking(move || handles_rx.recv()).await.expect("handle receiver");
    let Ok((state, events)) = handles else {
        // The mission failed before its station opened.
        return Err(match worker.join().expect("mission thread") {
            Err(e) => e.into(),
            Ok(_) => Failure::Pipeline("mission ended before the station opened".into()),
        });
    };
    tokio::task::spawn_blocking(move || match worker.join().expect("mission thread") {
        Ok(s) => eprintln!("{}", summary_text(&s)),
        Err(e) => eprintln!("error: mission failed: {e}"),
    });
    let live = LiveMission { state, events, commands: commands_tx };
    serve_until_interrupted(ApiState { data_dir, live: Some(live) }, bind).await
}

fn run_replay(json: bool, capture: PathBuf, data_dir: PathBuf, mission_id: String, speed: f64, serve: Option<SocketAddr>) -> Result<(), Failure> {
    let bytes = fs::read(&capture).map_err(|e| Failure::Data(format!("{}: {e}", capture.display())))?;
    let (frames, unread) = read_capture(&bytes);
    if unread > 0 {
        eprintln!("warning: {unread} trailing bytes of {} are damaged or incomplete", capture.display());
    }
    if !valid_mission_id(&mission_id) {
        return Err(Failure::Config(format!("invalid mission id {mission_id:?}")));
    }
    if mission_dir(&data_dir, &mission_id).join(FRAMES_LOG).exists() {
        return Err(Failure::Config(format!("mission {mission_id} already exists in {}", data_dir.display())));
    }
    let (station, reasm) = Station::open(&data_dir, &mission_id)?;
    let (state, events) = (station.state(), station.events());
    let mut node = GroundNode::new(station, Sender::new(SenderConfig::for_rate(1e6), MemorySpill::default()), reasm);
    let runtime = match serve {
        Some(bind) => {
            let rt = tokio::runtime::Runtime::new()?;
            // Commands cannot reach a recorded payload.
            let (tx, _) = mpsc::channel(1);
            let api = ApiState { data_dir: data_dir.clone(), live: Some(LiveMission { state, events, commands: tx }) };
            rt.spawn(async move {
                if let Err(e) = serve_until_interrupted(api, bind).await {
                    eprintln!("error: {}", e.message());
                }
            });
            Some(rt)
        }
        None => None,
    };
    replay(&frames, &mut node, speed, |t, n| {
        let dups = n.analytics.duplicates;
        let commands: Vec<_> = n.commands.values().copied().collect();
        n.handler.sync_session(&commands, dups, t);
    });
    let report = node.handler.close()?;
    emit(json, &report, || report_text(&report));
    if let Some(rt) = runtime {
        eprintln!("replay finished; serving until interrupted");
        rt.block_on(async {
            let _ = tokio::signal::ctrl_c().await;
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    let result = match cli.cmd {
        Cmd::Simulate { config, data_dir, mission_id } => simulate(json, config, data_dir, mission_id),
        Cmd::Calibrate { sfm, times, ins, window, out } => run_calibrate(json, sfm, times, ins, window, out),
        Cmd::Vectorize { mask, budget, out } => run_vectorize(json, mask, budget, out),
        Cmd::Serve { data_dir, bind, live, speed } => match tokio::runtime::Runtime::new() {
            Ok(rt) => rt.block_on(serve(data_dir, bind, live, speed)),
            Err(e) => Err(Failure::Pipeline(e.to_string())),
        },
        Cmd::Replay { capture, data_dir, mission_id, speed, serve } => run_replay(json, capture, data_dir, mission_id, speed, serve),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
