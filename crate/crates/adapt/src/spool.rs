//! Spool files: length-prefixed encoded frames, the format of the onboard
//! spill, the onboard analytics archive and the station record log.

use std::collections::VecDeque;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use adapt_core::downlink::{decode, read_spool, spool_record, Frame, SpoolStats, Spill};

fn invalid(e: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e.to_string())
}

/// Reads every recoverable frame from a spool file.
pub fn read_spool_file(path: &Path) -> io::Result<(Vec<Frame>, SpoolStats)> {
    Ok(read_spool(&fs::read(path)?))
}

/// Append-only spool. Opening an existing file drops a torn record at
/// its end so new records start on a clean boundary.
#[derive(Debug)]
pub struct SpoolWriter {
    file: File,
    path: PathBuf,
    len: u64,
}

impl SpoolWriter {
    /// Returns the writer and the frames already in the file.
    pub fn open(path: &Path) -> io::Result<(Self, Vec<Frame>, SpoolStats)> {
        let existing = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e),
        };
        let (frames, stats) = read_spool(&existing);
        let len = (existing.len() - stats.truncated_tail) as u64;
        let file = OpenOptions::new().create(true).read(true).write(true).truncate(false).open(path)?;
        if stats.truncated_tail > 0 {
            file.set_len(len)?;
            file.sync_data()?;
        }
        let mut w = Self { file, path: path.to_path_buf(), len };
        w.file.seek(SeekFrom::Start(len))?;
        Ok((w, frames, stats))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Byte length of the spool.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Appends one record, forcing it to stable storage when `durable`.
    /// Returns the record's byte offset.
    pub fn append(&mut self, frame: &Frame, durable: bool) -> io::Result<u64> {
        let rec = spool_record(frame).map_err(invalid)?;
        let at = self.len;
        if let Err(e) = self.file.write_all(&rec) {
            // Cut back to the last whole record.
            let _ = self.file.set_len(at);
            let _ = self.file.seek(SeekFrom::Start(at));
            return Err(e);
        }
        if durable {
            self.file.sync_data()?;
        }
        self.len += rec.len() as u64;
        Ok(at)
    }

    fn read_at(&mut self, offset: u64, len: u32) -> io::Result<Frame> {
        let mut buf = vec![0; len as usize];
        self.file.seek(SeekFrom::Start(offset + 4))?;
        self.file.read_exact(&mut buf)?;
        self.file.seek(SeekFrom::Start(self.len))?;
        decode(&buf).map(|(f, _)| f).map_err(invalid)
    }

    fn reset(&mut self) -> io::Result<()> {
        self.file.set_len(0)?;
        self.file.seek(SeekFrom::Start(0))?;
        self.len = 0;
        Ok(())
    }
}

/// Disk-backed overflow for the analytics queue. Only offsets stay in
/// memory. Frames left over from a previous run are pending again after
/// [`FileSpool::open`].
#[derive(Debug)]
pub struct FileSpool {
    writer: SpoolWriter,
    pending: VecDeque<(u64, u32)>,
    durable: bool,
}

impl FileSpool {
    pub fn open(path: &Path, durable: bool) -> io::Result<Self> {
        let (mut writer, mut frames, stats) = SpoolWriter::open(path)?;
        if stats.corrupt_regions > 0 {
            // Rewrite without the damaged regions so offsets are contiguous.
            drop(writer);
            let tmp = path.with_extension("compact");
            let _ = fs::remove_file(&tmp);
            let (mut w, _, _) = SpoolWriter::open(&tmp)?;
            for f in &frames {
                w.append(f, false)?;
            }
            w.file.sync_data()?;
            fs::rename(&tmp, path)?;
            (writer, frames, _) = SpoolWriter::open(path)?;
        }
        let mut pending = VecDeque::with_capacity(frames.len());
        let mut at = 0;
        for f in &frames {
            pending.push_back((at, f.wire_len() as u32));
            at += 4 + f.wire_len() as u64;
        }
        debug_assert_eq!(at, writer.len());
        Ok(Self { writer, pending, durable })
    }

    pub fn path(&self) -> &Path {
        self.writer.path()
    }

    /// The frames still waiting, oldest first.
    pub fn pending_frames(&mut self) -> io::Result<Vec<Frame>> {
        let offsets: Vec<_> = self.pending.iter().copied().collect();
        offsets.into_iter().map(|(at, n)| self.writer.read_at(at, n)).collect()
    }
}

impl Spill for FileSpool {
    type Error = io::Error;

    fn push(&mut self, frame: &Frame) -> io::Result<()> {
        let at = self.writer.append(frame, self.durable)?;
        self.pending.push_back((at, frame.wire_len() as u32));
        Ok(())
    }

    fn pop(&mut self) -> io::Result<Option<Frame>> {
        let Some(&(at, n)) = self.pending.front() else {
            return Ok(None);
        };
        let f = self.writer.read_at(at, n)?;
        self.pending.pop_front();
        if self.pending.is_empty() {
            self.writer.reset()?;
        }
        Ok(Some(f))
    }

    fn len(&self) -> usize {
        self.pending.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use adapt_core::downlink::MsgType;

    fn frame(seq: u32, n: usize) -> Frame {
        Frame::new(MsgType::Analytics, seq, 1_000 + seq as u64, vec![seq as u8; n])
    }

    #[test]
    fn spill_is_fifo_and_resets_when_drained() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = FileSpool::open(&dir.path().join("spill"), false).unwrap();
        for k in 0..5 {
            s.push(&frame(k, 100 + k as usize)).unwrap();
        }
        assert_eq!(s.len(), 5);
        assert_eq!(s.pop().unwrap(), Some(frame(0, 100)));
        s.push(&frame(5, 10)).unwrap();
        let seqs: Vec<u32> = std::iter::from_fn(|| s.pop().unwrap()).map(|f| f.seq).collect();
        assert_eq!(seqs, vec![1, 2, 3, 4, 5]);
        assert!(s.is_empty());
        assert_eq!(fs::metadata(s.path()).unwrap().len(), 0);
    }

    #[test]
    fn pending_frames_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spill");
        {
            let mut s = FileSpool::open(&path, true).unwrap();
            for k in 0..4 {
                s.push(&frame(k, 50)).unwrap();
            }
            s.pop().unwrap();
        }
        let mut s = FileSpool::open(&path, true).unwrap();
        // The popped frame is still on disk; resending it is harmless
        // because delivery is idempotent by sequence number.
        let seqs: Vec<u32> = s.pending_frames().unwrap().iter().map(|f| f.seq).collect();
        assert_eq!(seqs, vec![0, 1, 2, 3]);
    }

    #[test]
    fn torn_tail_is_dropped_on_open() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log");
        {
            let (mut w, _, _) = SpoolWriter::open(&path).unwrap();
            w.append(&frame(0, 30), true).unwrap();
            w.append(&frame(1, 30), true).unwrap();
        }
        let full = fs::metadata(&path).unwrap().len();
        OpenOptions::new().write(true).open(&path).unwrap().set_len(full - 7).unwrap();
        let (mut w, frames, stats) = SpoolWriter::open(&path).unwrap();
        assert_eq!(frames, vec![frame(0, 30)]);
        assert!(stats.truncated_tail > 0);
        w.append(&frame(2, 30), true).unwrap();
        let (back, stats) = read_spool_file(&path).unwrap();
        assert_eq!(back, vec![frame(0, 30), frame(2, 30)]);
        assert_eq!(stats.corrupt_regions, 0);
    }

    #[test]
    fn corrupt_region_is_compacted_away() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spill");
        {
            let mut s = FileSpool::open(&path, false).unwrap();
            for k in 0..3 {
                s.push(&frame(k, 40)).unwrap();
            }
        }
        let mut bytes = fs::read(&path).unwrap();
        bytes[4 + 48 + 30] ^= 0xFF;
        fs::write(&path, &bytes).unwrap();
        let mut s = FileSpool::open(&path, false).unwrap();
        let seqs: Vec<u32> = std::iter::from_fn(|| s.pop().unwrap()).map(|f| f.seq).collect();
        assert_eq!(seqs, vec![0, 2]);
    }
}
