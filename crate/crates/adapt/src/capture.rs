//! Downlink capture files: every frame as it arrived at the station, so a
//! mission can be replayed into a fresh station.
//!
//! Each record is the arrival time in mission seconds as a big-endian
//! `f64` followed by a spool record.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use adapt_core::downlink::{read_spool, spool_record, Frame, Node, Queued};

#[derive(Debug)]
pub struct CaptureWriter {
    out: BufWriter<File>,
    records: u64,
}

impl CaptureWriter {
    pub fn create(path: &Path) -> io::Result<Self> {
        Ok(Self { out: BufWriter::new(File::create(path)?), records: 0 })
    }

    pub fn record(&mut self, arrive_s: f64, frame: &Frame) -> io::Result<()> {
        let rec = spool_record(frame).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        self.out.write_all(&arrive_s.to_be_bytes())?;
        self.out.write_all(&rec)?;
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()?;
        self.out.get_ref().sync_all()
    }
}

/// Reads a capture. Stops at the first damaged or incomplete record and
/// reports how many bytes were left unread.
pub fn read_capture(bytes: &[u8]) -> (Vec<(f64, Frame)>, usize) {
    let mut out = Vec::new();
    let mut pos = 0;
    while bytes.len() - pos >= 12 {
        let t = f64::from_be_bytes(bytes[pos..pos + 8].try_into().expect("8 bytes"));
        let len = u32::from_be_bytes(bytes[pos + 8..pos + 12].try_into().expect("4 bytes")) as usize;
        let end = pos + 12 + len;
        if end > bytes.len() {
            break;
        }
        let (frames, stats) = read_spool(&bytes[pos + 8..end]);
        match frames.as_slice() {
            [f] if stats.corrupt_regions == 0 && t.is_finite() => out.push((t, f.clone())),
            _ => break,
        }
        pos = end;
    }
    (out, bytes.len() - pos)
}

/// Wraps the ground node and writes every arriving frame to a capture.
#[derive(Debug)]
pub struct Capturing<N> {
    pub inner: N,
    writer: Option<CaptureWriter>,
    pub errors: u64,
}

impl<N> Capturing<N> {
    pub fn new(inner: N, writer: Option<CaptureWriter>) -> Self {
        Self { inner, writer, errors: 0 }
    }

    pub fn finish(&mut self) -> io::Result<()> {
        self.writer.take().map_or(Ok(()), CaptureWriter::finish)
    }
}

impl<N: Node> Node for Capturing<N> {
    fn poll(&mut self, now: f64, link_idle: bool) -> Vec<Queued> {
        self.inner.poll(now, link_idle)
    }

    fn receive(&mut self, frame: Frame, now: f64) {
        if let Some(w) = &mut self.writer {
            if w.record(now, &frame).is_err() {
                self.errors += 1;
            }
        }
        self.inner.receive(frame, now);
    }
}

/// Feeds captured frames into `node` in arrival order. With `speed` > 0
/// arrivals are paced at `speed` times real time; otherwise as fast as
/// possible. `between` runs after each frame.
pub fn replay<N: Node>(frames: &[(f64, Frame)], node: &mut N, speed: f64, mut between: impl FnMut(f64, &mut N)) {
    let start = Instant::now();
    let t0 = frames.first().map_or(0.0, |(t, _)| *t);
    for (t, f) in frames {
        if speed > 0.0 && speed.is_finite() {
            let due = Duration::from_secs_f64(((t - t0) / speed).max(0.0));
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        node.receive(f.clone(), *t);
        // Acks go nowhere during replay; polling keeps timers moving.
        node.poll(*t, true);
        between(*t, node);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use adapt_core::downlink::MsgType;

    #[derive(Default)]
    struct Sink(Vec<(f64, u32)>);

    impl Node for Sink {
        fn poll(&mut self, _: f64, _: bool) -> Vec<Queued> {
            Vec::new()
        }
        fn receive(&mut self, f: Frame, now: f64) {
            self.0.push((now, f.seq));
        }
    }

    #[test]
    fn capture_round_trip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("down.cap");
        let mut c = Capturing::new(Sink::default(), Some(CaptureWriter::create(&path).unwrap()));
        for k in 0..3u32 {
            c.receive(Frame::new(MsgType::Telemetry, k, 5, vec![k as u8; 10]), 1.0 + k as f64);
        }
        c.finish().unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let (frames, rest) = read_capture(&bytes);
        assert_eq!(rest, 0);
        assert_eq!(frames.iter().map(|(t, f)| (*t, f.seq)).collect::<Vec<_>>(), c.inner.0);
        bytes.truncate(bytes.len() - 3);
        let (frames, rest) = read_capture(&bytes);
        assert_eq!(frames.len(), 2);
        assert!(rest > 0);
        let mut sink = Sink::default();
        replay(&frames, &mut sink, 0.0, |_, _| {});
        assert_eq!(sink.0, vec![(1.0, 0), (2.0, 1)]);
    }
}
