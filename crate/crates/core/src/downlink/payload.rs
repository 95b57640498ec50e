//! Typed payloads carried inside frames. Big-endian like the header.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Point2;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::wire::{Frame, MsgType};
use crate::analytics::{decode_polygons_with, encode_polygons_with, DecodeError, Histogram, SharpnessReport};
use crate::geo::{EnuFrame, EnuPoint, GeoError, GeoPolygonSet, GeodeticPosition, PoseStatus, TimestampedPose, UnitQuaternion};
use crate::polygon::{ClassPolygon, PixelPolygon};

/// Ground coordinates in analytics payloads are quantized to 1 cm.
pub const GEO_FIXED_SCALE: f64 = 100.0;

pub const NS_PER_S: f64 = 1e9;

pub fn seconds_to_ns(t: f64) -> u64 {
    (t * NS_PER_S).round().max(0.0) as u64
}

pub fn ns_to_seconds(t: u64) -> f64 {
    t as f64 / NS_PER_S
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PayloadError {
    #[error("{ty:?} payload truncated at byte {at}")]
    Truncated { ty: MsgType, at: usize },
    #[error("{ty:?} payload has {0} trailing bytes", .extra)]
    Trailing { ty: MsgType, extra: usize },
    #[error("invalid field in {ty:?} payload: {what}")]
    Invalid { ty: MsgType, what: &'static str },
    #[error("analytics polygons: {0}")]
    Polygons(#[from] DecodeError),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) -> &mut Self {
        self.0.push(v);
        self
    }
    fn u16(&mut self, v: u16) -> &mut Self {
        self.0.extend_from_slice(&v.to_be_bytes());
        self
    }
    fn u32(&mut self, v: u32) -> &mut Self {
        self.0.extend_from_slice(&v.to_be_bytes());
        self
    }
    fn u64(&mut self, v: u64) -> &mut Self {
        self.0.extend_from_slice(&v.to_be_bytes());
        self
    }
    fn f32(&mut self, v: f32) -> &mut Self {
        self.0.extend_from_slice(&v.to_be_bytes());
        self
    }
    fn f64(&mut self, v: f64) -> &mut Self {
        self.0.extend_from_slice(&v.to_be_bytes());
        self
    }
    fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.0.extend_from_slice(v);
        self
    }
    fn str(&mut self, s: &str) -> &mut Self {
        let b = &s.as_bytes()[..s.len().min(u16::MAX as usize)];
        self.u16(b.len() as u16).bytes(b)
    }
}

struct Reader<'a> {
    ty: MsgType,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(ty: MsgType, buf: &'a [u8]) -> Self {
        Self { ty, buf, pos: 0 }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8], PayloadError> {
        let s = self.buf.get(self.pos..self.pos + n).ok_or(PayloadError::Truncated { ty: self.ty, at: self.pos })?;
        self.pos += n;
        Ok(s)
    }
    fn arr<const N: usize>(&mut self) -> Result<[u8; N], PayloadError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8, PayloadError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, PayloadError> {
        Ok(u16::from_be_bytes(self.arr()?))
    }
    fn u32(&mut self) -> Result<u32, PayloadError> {
        Ok(u32::from_be_bytes(self.arr()?))
    }
    fn u64(&mut self) -> Result<u64, PayloadError> {
        Ok(u64::from_be_bytes(self.arr()?))
    }
    fn f32(&mut self) -> Result<f32, PayloadError> {
        Ok(f32::from_be_bytes(self.arr()?))
    }
    fn f64(&mut self) -> Result<f64, PayloadError> {
        Ok(f64::from_be_bytes(self.arr()?))
    }
    fn str(&mut self) -> Result<String, PayloadError> {
        let n = self.u16()? as usize;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| PayloadError::Invalid { ty: self.ty, what: "utf-8" })
    }
    fn rest(&mut self) -> &'a [u8] {
        let r = &self.buf[self.pos..];
        self.pos = self.buf.len();
        r
    }
    fn finish(self) -> Result<(), PayloadError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            extra => Err(PayloadError::Trailing { ty: self.ty, extra }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub position: GeodeticPosition,
    pub attitude: UnitQuaternion,
    pub status: u8,
}

impl Telemetry {
    pub fn from_pose(p: &TimestampedPose) -> Self {
        Self { position: p.position, attitude: p.attitude, status: p.status.0 }
    }

    pub fn to_pose(&self, t: f64) -> TimestampedPose {
        TimestampedPose { t, position: self.position, attitude: self.attitude, status: PoseStatus(self.status) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thumbnail {
    pub image_id: u64,
    pub width: u16,
    pub height: u16,
    pub jpeg: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramMsg {
    pub image_id: u64,
    pub bins: Vec<u32>,
}

impl HistogramMsg {
    pub fn new(image_id: u64, h: &Histogram) -> Self {
        Self { image_id, bins: h.iter().map(|&c| c.min(u32::MAX as u64) as u32).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessMsg {
    pub image_id: u64,
    pub exposure_us: f32,
    pub global_score: f32,
    pub tiles_x: u16,
    pub tiles_y: u16,
    pub tile_scores: Vec<f32>,
}

impl SharpnessMsg {
    pub fn new(image_id: u64, r: &SharpnessReport) -> Self {
        Self {
            image_id,
            exposure_us: r.exposure_us as f32,
            global_score: r.global_score as f32,
            tiles_x: r.tiles_x as u16,
            tiles_y: r.tiles_y as u16,
            tile_scores: r.tile_scores.iter().map(|&s| s as f32).collect(),
        }
    }
}

/// Georegistered polygons of one image, as ENU ground coordinates relative
/// to `origin` on the plane `u = ground_u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsMsg {
    pub image_id: u64,
    pub origin: GeodeticPosition,
    pub ground_u: f64,
    pub tolerance_px: f32,
    pub clipped_rings: u32,
    pub dropped_rings: u32,
    /// Canonical polygon encoding in 1 cm units.
    pub polygons: Vec<u8>,
}

impl AnalyticsMsg {
    pub fn from_geo(set: &GeoPolygonSet, frame: &EnuFrame, ground_u: f64, tolerance_px: f64) -> Result<Self, GeoError> {
        let planar: Vec<PixelPolygon> = set
            .polygons
            .iter()
            .map(|p| {
                p.map_points(|g| {
                    let e = frame.to_enu(g)?;
                    Ok::<_, GeoError>(Point2::new(e.e, e.n))
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            image_id: set.image_id,
            origin: frame.origin(),
            ground_u,
            tolerance_px: tolerance_px as f32,
            clipped_rings: set.clipped_rings,
            dropped_rings: set.dropped_rings,
            polygons: encode_polygons_with(&planar, GEO_FIXED_SCALE),
        })
    }

    pub fn enu_polygons(&self) -> Result<Vec<PixelPolygon>, PayloadError> {
        Ok(decode_polygons_with(&self.polygons, GEO_FIXED_SCALE)?)
    }

    pub fn to_geo(&self) -> Result<GeoPolygonSet, PayloadError> {
        let frame = EnuFrame::new(self.origin)?;
        let polygons = self
            .enu_polygons()?
            .iter()
            .map(|p| {
                p.map_points(|q| Ok::<_, GeoError>(frame.to_geodetic(&EnuPoint::new(q.x, q.y, self.ground_u))))
            })
            .collect::<Result<Vec<ClassPolygon<GeodeticPosition>>, _>>()?;
        Ok(GeoPolygonSet {
            image_id: self.image_id,
            polygons,
            encoded_bytes: self.polygons.len(),
            clipped_rings: self.clipped_rings,
            dropped_rings: self.dropped_rings,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub entries: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Command {
    SetMaxExposure { exposure_us: f64 },
}

pub const MIN_EXPOSURE_LIMIT_US: f64 = 50.0;
pub const MAX_EXPOSURE_LIMIT_US: f64 = 20_000.0;

impl Command {
    pub fn validate(&self) -> Result<(), &'static str> {
        match *self {
            Command::SetMaxExposure { exposure_us } if (MIN_EXPOSURE_LIMIT_US..=MAX_EXPOSURE_LIMIT_US).contains(&exposure_us) => Ok(()),
            Command::SetMaxExposure { .. } => Err("exposure limit outside [50 µs, 20 ms]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum AckStatus {
    /// Stored durably (analytics) or accepted (commands).
    Ok = 0,
    Rejected = 1,
}

/// Acknowledges one reliable frame. Used for both command acks and
/// analytics acks; `acked_type` says which.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub acked_type: MsgType,
    pub acked_seq: u32,
    pub status: AckStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Telemetry(Telemetry),
    Thumbnail(Thumbnail),
    Histogram(HistogramMsg),
    Sharpness(SharpnessMsg),
    Analytics(AnalyticsMsg),
    Diagnostics(Diagnostics),
    Command(Command),
    Ack(Ack),
}

impl Payload {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Payload::Telemetry(_) => MsgType::Telemetry,
            Payload::Thumbnail(_) => MsgType::Thumbnail,
            Payload::Histogram(_) => MsgType::Histogram,
            Payload::Sharpness(_) => MsgType::Sharpness,
            Payload::Analytics(_) => MsgType::Analytics,
            Payload::Diagnostics(_) => MsgType::Diagnostics,
            Payload::Command(_) => MsgType::Command,
            Payload::Ack(_) => MsgType::CommandAck,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        match self {
            Payload::Telemetry(t) => {
                let [qw, qx, qy, qz] = t.attitude.wxyz();
                w.f64(t.position.lat_deg).f64(t.position.lon_deg).f64(t.position.alt_m);
                w.f64(qw).f64(qx).f64(qy).f64(qz).u8(t.status);
            }
            Payload::Thumbnail(t) => {
                w.u64(t.image_id).u16(t.width).u16(t.height).bytes(&t.jpeg);
            }
            Payload::Histogram(h) => {
                w.u64(h.image_id).u16(h.bins.len() as u16);
                h.bins.iter().for_each(|&b| {
                    w.u32(b);
                });
            }
            Payload::Sharpness(s) => {
                w.u64(s.image_id).f32(s.exposure_us).f32(s.global_score).u16(s.tiles_x).u16(s.tiles_y);
                s.tile_scores.iter().for_each(|&v| {
                    w.f32(v);
                });
            }
            Payload::Analytics(a) => {
                w.u64(a.image_id).f64(a.origin.lat_deg).f64(a.origin.lon_deg).f64(a.origin.alt_m);
                w.f64(a.ground_u).f32(a.tolerance_px).u32(a.clipped_rings).u32(a.dropped_rings).bytes(&a.polygons);
            }
            Payload::Diagnostics(d) => {
                w.u16(d.entries.len() as u16);
                for (k, v) in &d.entries {
                    w.str(k).str(v);
                }
            }
            Payload::Command(Command::SetMaxExposure { exposure_us }) => {
                w.u8(1).f64(*exposure_us);
            }
            Payload::Ack(a) => {
                w.u8(a.acked_type as u8).u32(a.acked_seq).u8(a.status as u8);
            }
        }
        w.0
    }

    pub fn from_frame(frame: &Frame) -> Result<Self, PayloadError> {
        let ty = frame.msg_type;
        let mut r = Reader::new(ty, &frame.payload);
        let bad = |what| PayloadError::Invalid { ty, what };
        let p = match ty {
            MsgType::Telemetry => {
                let position = GeodeticPosition { lat_deg: r.f64()?, lon_deg: r.f64()?, alt_m: r.f64()? };
                let attitude = UnitQuaternion::from_wxyz(r.f64()?, r.f64()?, r.f64()?, r.f64()?)
                    .map_err(|_| bad("attitude quaternion"))?;
                Payload::Telemetry(Telemetry { position, attitude, status: r.u8()? })
            }
            MsgType::Thumbnail => Payload::Thumbnail(Thumbnail {
                image_id: r.u64()?,
                width: r.u16()?,
                height: r.u16()?,
                jpeg: r.rest().to_vec(),
            }),
            MsgType::Histogram => {
                let image_id = r.u64()?;
                let n = r.u16()? as usize;
                let bins = (0..n).map(|_| r.u32()).collect::<Result<_, _>>()?;
                Payload::Histogram(HistogramMsg { image_id, bins })
            }
            MsgType::Sharpness => {
                let (image_id, exposure_us, global_score) = (r.u64()?, r.f32()?, r.f32()?);
                let (tiles_x, tiles_y) = (r.u16()?, r.u16()?);
                let tile_scores = (0..tiles_x as usize * tiles_y as usize).map(|_| r.f32()).collect::<Result<_, _>>()?;
                Payload::Sharpness(SharpnessMsg { image_id, exposure_us, global_score, tiles_x, tiles_y, tile_scores })
            }
            MsgType::Analytics => {
                let image_id = r.u64()?;
                let origin = GeodeticPosition { lat_deg: r.f64()?, lon_deg: r.f64()?, alt_m: r.f64()? };
                origin.validate()?;
                Payload::Analytics(AnalyticsMsg {
                    image_id,
                    origin,
                    ground_u: r.f64()?,
                    tolerance_px: r.f32()?,
                    clipped_rings: r.u32()?,
                    dropped_rings: r.u32()?,
                    polygons: r.rest().to_vec(),
                })
            }
            MsgType::Diagnostics => {
                let n = r.u16()?;
                let entries = (0..n).map(|_| Ok((r.str()?, r.str()?))).collect::<Result<_, PayloadError>>()?;
                Payload::Diagnostics(Diagnostics { entries })
            }
            MsgType::Command => match r.u8()? {
                1 => Payload::Command(Command::SetMaxExposure { exposure_us: r.f64()? }),
                _ => return Err(bad("command kind")),
            },
            MsgType::CommandAck => {
                let acked_type = MsgType::from_u8(r.u8()?).ok_or(bad("acked type"))?;
                let acked_seq = r.u32()?;
                let status = match r.u8()? {
                    0 => AckStatus::Ok,
                    1 => AckStatus::Rejected,
                    _ => return Err(bad("ack status")),
                };
                Payload::Ack(Ack { acked_type, acked_seq, status })
            }
        };
        r.finish()?;
        Ok(p)
    }

    pub fn into_frame(&self, seq: u32, t_gps_ns: u64) -> Frame {
        Frame::new(self.msg_type(), seq, t_gps_ns, self.to_bytes())
    }
}
