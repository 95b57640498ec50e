//! Frame layout, big-endian:
//!
//! ```text
//! 0   magic 0xAD 0x47
//! 2   version
//! 3   msg_type
//! 4   seq         u32
//! 8   t_gps       u64 nanoseconds
//! 16  payload_len u32
//! 20  payload
//! ..  crc32 over every preceding byte
//! ```

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: [u8; 2] = [0xAD, 0x47];
pub const WIRE_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 20;
pub const CRC_LEN: usize = 4;
pub const FRAME_OVERHEAD: usize = HEADER_LEN + CRC_LEN;
/// Largest payload a decoder accepts.
pub const MAX_PAYLOAD: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum MsgType {
    Telemetry = 1,
    Thumbnail = 2,
    Histogram = 3,
    Sharpness = 4,
    Analytics = 5,
    Diagnostics = 6,
    Command = 7,
    CommandAck = 8,
}

impl MsgType {
    pub const ALL: [MsgType; 8] = [
        MsgType::Telemetry,
        MsgType::Thumbnail,
        MsgType::Histogram,
        MsgType::Sharpness,
        MsgType::Analytics,
        MsgType::Diagnostics,
        MsgType::Command,
        MsgType::CommandAck,
    ];

    pub fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.get(v.wrapping_sub(1) as usize).copied()
    }

    /// Scheduling rank, 0 first.
    pub fn priority(self) -> usize {
        match self {
            MsgType::Telemetry => 0,
            MsgType::CommandAck | MsgType::Command => 1,
            MsgType::Diagnostics => 2,
            MsgType::Analytics => 3,
            MsgType::Histogram | MsgType::Sharpness => 4,
            MsgType::Thumbnail => 5,
        }
    }

    /// Acknowledged and retransmitted until acked.
    pub fn is_reliable(self) -> bool {
        matches!(self, MsgType::Analytics | MsgType::Command)
    }

    /// A newer queued frame supersedes an older one of the same type.
    pub fn is_latest_only(self) -> bool {
        matches!(self, MsgType::Telemetry | MsgType::Thumbnail | MsgType::Histogram | MsgType::Sharpness)
    }

    pub fn name(self) -> &'static str {
        match self {
            MsgType::Telemetry => "telemetry",
            MsgType::Thumbnail => "thumbnail",
            MsgType::Histogram => "histogram",
            MsgType::Sharpness => "sharpness",
            MsgType::Analytics => "analytics",
            MsgType::Diagnostics => "diagnostics",
            MsgType::Command => "command",
            MsgType::CommandAck => "command_ack",
        }
    }
}

pub const PRIORITY_LEVELS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Frame {
    pub msg_type: MsgType,
    pub seq: u32,
    pub t_gps_ns: u64,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, seq: u32, t_gps_ns: u64, payload: Vec<u8>) -> Self {
        Self { msg_type, seq, t_gps_ns, payload }
    }

    pub fn wire_len(&self) -> usize {
        FRAME_OVERHEAD + self.payload.len()
    }

    pub fn key(&self) -> (MsgType, u32) {
        (self.msg_type, self.seq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("frame truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    Version(u8),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("payload length {0} exceeds limit")]
    Length(u32),
    #[error("crc mismatch")]
    Crc,
    #[error("payload too large to encode")]
    PayloadTooLarge,
}

pub fn encode(frame: &Frame) -> Result<Vec<u8>, WireError> {
    if frame.payload.len() > MAX_PAYLOAD {
        return Err(WireError::PayloadTooLarge);
    }
    let mut out = Vec::with_capacity(frame.wire_len());
    out.extend_from_slice(&MAGIC);
    out.push(WIRE_VERSION);
    out.push(frame.msg_type as u8);
    out.extend_from_slice(&frame.seq.to_be_bytes());
    out.extend_from_slice(&frame.t_gps_ns.to_be_bytes());
    out.extend_from_slice(&(frame.payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&frame.payload);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_be_bytes());
    Ok(out)
}

fn be32(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

fn parse_header(buf: &[u8]) -> Result<(MsgType, usize), WireError> {
    if buf.len() < HEADER_LEN {
        return Err(WireError::Truncated { need: HEADER_LEN, have: buf.len() });
    }
    if buf[..2] != MAGIC {
        return Err(WireError::BadMagic);
    }
    if buf[2] != WIRE_VERSION {
        return Err(WireError::Version(buf[2]));
    }
    let ty = MsgType::from_u8(buf[3]).ok_or(WireError::UnknownType(buf[3]))?;
    let len = be32(&buf[16..20]);
    if len as usize > MAX_PAYLOAD {
        return Err(WireError::Length(len));
    }
    Ok((ty, HEADER_LEN + len as usize + CRC_LEN))
}

/// Decodes one frame from the start of `buf`, returning it with the number
/// of bytes consumed.
pub fn decode(buf: &[u8]) -> Result<(Frame, usize), WireError> {
    let (msg_type, total) = parse_header(buf)?;
    if buf.len() < total {
        return Err(WireError::Truncated { need: total, have: buf.len() });
    }
    let body = total - CRC_LEN;
    if crc32fast::hash(&buf[..body]) != be32(&buf[body..total]) {
        return Err(WireError::Crc);
    }
    let frame = Frame {
        msg_type,
        seq: be32(&buf[4..8]),
        t_gps_ns: u64::from_be_bytes(buf[8..16].try_into().expect("8 bytes")),
        payload: buf[HEADER_LEN..body].to_vec(),
    };
    Ok((frame, total))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderStats {
    pub frames: u64,
    pub crc_errors: u64,
    pub framing_errors: u64,
    pub skipped_bytes: u64,
}

/// Byte-stream decoder that resynchronizes on the next magic after any
/// corrupt or malformed frame.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    pub stats: DecoderStats,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Bytes held waiting for the rest of a frame.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }

    fn skip(&mut self, n: usize) {
        self.buf.drain(..n);
        self.stats.skipped_bytes += n as u64;
    }

    pub fn next_frame(&mut self) -> Option<Frame> {
        loop {
            let start = self.buf.windows(2).position(|w| w == MAGIC);
            match start {
                Some(0) => {}
                Some(p) => self.skip(p),
                None => {
                    // Keep a trailing 0xAD that may begin the next magic.
                    let keep = usize::from(self.buf.last() == Some(&MAGIC[0]));
                    let n = self.buf.len() - keep;
                    self.skip(n);
                    return None;
                }
            }
            match decode(&self.buf) {
                Ok((frame, used)) => {
                    self.buf.drain(..used);
                    self.stats.frames += 1;
                    return Some(frame);
                }
                Err(WireError::Truncated { .. }) => return None,
                Err(e) => {
                    if e == WireError::Crc {
                        self.stats.crc_errors += 1;
                    } else {
                        self.stats.framing_errors += 1;
                    }
                    self.skip(1);
                }
            }
        }
    }

    /// Drains every complete frame.
    pub fn frames(&mut self) -> Vec<Frame> {
        core::iter::from_fn(|| self.next_frame()).collect()
    }
}

/// A spool record: u32 big-endian length, then the encoded frame.
pub fn spool_record(frame: &Frame) -> Result<Vec<u8>, WireError> {
    let enc = encode(frame)?;
    let mut out = Vec::with_capacity(4 + enc.len());
    out.extend_from_slice(&(enc.len() as u32).to_be_bytes());
    out.extend_from_slice(&enc);
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpoolStats {
    pub records: u64,
    pub corrupt_regions: u64,
    /// Incomplete record at the end, typically a write cut short by a crash.
    pub truncated_tail: usize,
}

/// True when `b` could be the start of a frame cut off by end of input.
fn plausible_prefix(b: &[u8]) -> bool {
    let n = b.len().min(2);
    n > 0 && b[..n] == MAGIC[..n] && (b.len() < HEADER_LEN || parse_header(b).is_ok())
}

/// Reads a spool, skipping damaged records by resynchronizing on magic.
pub fn read_spool(bytes: &[u8]) -> (Vec<Frame>, SpoolStats) {
    let mut stats = SpoolStats::default();
    let mut out = Vec::new();
    let mut pos = 0;
    let mut in_corruption = false;
    while pos < bytes.len() {
        let rest = &bytes[pos..];
        if rest.len() < 4 {
            stats.truncated_tail = rest.len();
            break;
        }
        let len = be32(rest) as usize;
        if (FRAME_OVERHEAD..=MAX_PAYLOAD + FRAME_OVERHEAD).contains(&len) {
            if rest.len() >= 4 + len {
                if let Ok((f, used)) = decode(&rest[4..4 + len]) {
                    if used == len {
                        out.push(f);
                        stats.records += 1;
                        pos += 4 + len;
                        in_corruption = false;
                        continue;
                    }
                }
            } else if plausible_prefix(&rest[4..]) {
                stats.truncated_tail = rest.len();
                break;
            }
        }
        if !in_corruption {
            stats.corrupt_regions += 1;
            in_corruption = true;
        }
        // The next candidate record starts 4 bytes before a magic.
        let from = pos + 5;
        match bytes.get(from..).and_then(|b| b.windows(2).position(|w| w == MAGIC)) {
            Some(p) => pos = from + p - 4,
            None => break,
        }
    }
    (out, stats)
}
