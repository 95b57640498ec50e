//! Outbound queues, the token bucket and strict-priority scheduling.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::wire::{Frame, MsgType, PRIORITY_LEVELS};

/// Overflow storage for analytics frames beyond the in-memory bound.
/// Frames come back out in the order they went in.
pub trait Spill {
    type Error: fmt::Display;
    fn push(&mut self, frame: &Frame) -> Result<(), Self::Error>;
    fn pop(&mut self) -> Result<Option<Frame>, Self::Error>;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// In-memory spill, optionally failing every write for tests.
#[derive(Debug, Default, Clone)]
pub struct MemorySpill {
    frames: VecDeque<Frame>,
    pub fail_writes: bool,
}

impl Spill for MemorySpill {
    type Error = &'static str;

    fn push(&mut self, frame: &Frame) -> Result<(), Self::Error> {
        if self.fail_writes {
            return Err("spill write refused");
        }
        self.frames.push_back(frame.clone());
        Ok(())
    }

    fn pop(&mut self) -> Result<Option<Frame>, Self::Error> {
        Ok(self.frames.pop_front())
    }

    fn len(&self) -> usize {
        self.frames.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueLimits {
    /// In-memory analytics bytes before spilling.
    pub analytics_memory_bytes: usize,
    /// Diagnostics frames kept; the oldest is dropped beyond this.
    pub diagnostics_frames: usize,
}

impl Default for QueueLimits {
    fn default() -> Self {
        Self { analytics_memory_bytes: 256 * 1024, diagnostics_frames: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueueEvent {
    /// A queued frame was replaced by a newer one of the same type.
    Superseded(MsgType, u32),
    DiagnosticsDropped(u32),
    /// The spill store refused a write; analytics stayed in memory and the
    /// oldest thumbnail was evicted instead.
    SpillFailed { error: String, evicted_thumbnail: Option<u32> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Queued {
    pub frame: Frame,
    pub enqueued_s: f64,
}

/// Per-priority outbound queues with blackout buffering.
#[derive(Debug)]
pub struct OutboundQueues<S> {
    levels: [VecDeque<Queued>; PRIORITY_LEVELS],
    analytics_mem: usize,
    limits: QueueLimits,
    spill: S,
    pub events: Vec<QueueEvent>,
}

impl<S: Spill> OutboundQueues<S> {
    pub fn new(limits: QueueLimits, spill: S) -> Self {
        Self { levels: Default::default(), analytics_mem: 0, limits, spill, events: Vec::new() }
    }

    pub fn spill(&self) -> &S {
        &self.spill
    }

    pub fn spill_mut(&mut self) -> &mut S {
        &mut self.spill
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(VecDeque::len).sum::<usize>() + self.spill.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn queued(&self, ty: MsgType) -> usize {
        let mem = self.levels[ty.priority()].iter().filter(|q| q.frame.msg_type == ty).count();
        mem + if ty == MsgType::Analytics { self.spill.len() } else { 0 }
    }

    pub fn push(&mut self, frame: Frame, now: f64) {
        let ty = frame.msg_type;
        let p = ty.priority();
        if ty.is_latest_only() {
            if let Some(i) = self.levels[p].iter().position(|q| q.frame.msg_type == ty) {
                let old = self.levels[p].remove(i).expect("index from position");
                self.events.push(QueueEvent::Superseded(ty, old.frame.seq));
            }
        }
        match ty {
            MsgType::Analytics => self.push_analytics(frame, now),
            MsgType::Diagnostics => {
                self.levels[p].push_back(Queued { frame, enqueued_s: now });
                if self.levels[p].len() > self.limits.diagnostics_frames {
                    let old = self.levels[p].pop_front().expect("non-empty");
                    self.events.push(QueueEvent::DiagnosticsDropped(old.frame.seq));
                }
            }
            _ => self.levels[p].push_back(Queued { frame, enqueued_s: now }),
        }
    }

    fn push_analytics(&mut self, frame: Frame, now: f64) {
        let size = frame.wire_len();
        // Once anything is spilled, later frames must follow it there to
        // keep sequence order.
        let over = self.analytics_mem + size > self.limits.analytics_memory_bytes
            && !self.levels[MsgType::Analytics.priority()].is_empty();
        if over || !self.spill.is_empty() {
            match self.spill.push(&frame) {
                Ok(()) => return,
                Err(e) => {
                    let thumbs = &mut self.levels[MsgType::Thumbnail.priority()];
                    let evicted = thumbs.pop_front().map(|q| q.frame.seq);
                    self.events.push(QueueEvent::SpillFailed { error: alloc::format!("{e}"), evicted_thumbnail: evicted });
                }
            }
        }
        self.analytics_mem += size;
        insert_by_seq(&mut self.levels[MsgType::Analytics.priority()], Queued { frame, enqueued_s: now });
    }

    /// Puts a reliable frame back for retransmission, in sequence order.
    pub fn requeue(&mut self, frame: Frame, now: f64) {
        if frame.msg_type == MsgType::Analytics {
            self.analytics_mem += frame.wire_len();
        }
        insert_by_seq(&mut self.levels[frame.msg_type.priority()], Queued { frame, enqueued_s: now });
    }

    fn refill_from_spill(&mut self) {
        let level = MsgType::Analytics.priority();
        while self.analytics_mem < self.limits.analytics_memory_bytes {
            match self.spill.pop() {
                Ok(Some(f)) => {
                    self.analytics_mem += f.wire_len();
                    insert_by_seq(&mut self.levels[level], Queued { frame: f, enqueued_s: f64::NAN });
                }
                Ok(None) => break,
                Err(e) => {
                    self.events.push(QueueEvent::SpillFailed { error: alloc::format!("{e}"), evicted_thumbnail: None });
                    break;
                }
            }
        }
    }

    fn head(&mut self, level: usize) -> Option<&Queued> {
        if level == MsgType::Analytics.priority() && self.levels[level].is_empty() {
            self.refill_from_spill();
        }
        self.levels[level].front()
    }

    fn pop(&mut self, level: usize) -> Option<Queued> {
        let q = self.levels[level].pop_front()?;
        if q.frame.msg_type == MsgType::Analytics {
            self.analytics_mem -= q.frame.wire_len();
            self.refill_from_spill();
        }
        Some(q)
    }

    /// Drops queued frames for which `keep` is false, e.g. a retransmission
    /// acknowledged while waiting.
    pub fn retain(&mut self, mut keep: impl FnMut(&Frame) -> bool) {
        for level in &mut self.levels {
            level.retain(|q| {
                let k = keep(&q.frame);
                if !k && q.frame.msg_type == MsgType::Analytics {
                    self.analytics_mem -= q.frame.wire_len();
                }
                k
            });
        }
    }
}

fn insert_by_seq(level: &mut VecDeque<Queued>, q: Queued) {
    let key = q.frame.seq;
    let ty = q.frame.msg_type;
    let at = level.iter().position(|o| o.frame.msg_type == ty && o.frame.seq > key).unwrap_or(level.len());
    level.insert(at, q);
}

/// Strict priority, FIFO within a level. A frame is taken whole or not at
/// all, and a head that does not fit blocks lower levels so large frames
/// cannot be starved by small ones.
pub fn schedule<S: Spill>(queues: &mut OutboundQueues<S>, budget_bytes: usize) -> Vec<Queued> {
    schedule_with(queues, budget_bytes, |_| true)
}

/// As [`schedule`], but a head refused by `allow` closes only its own
/// level for this round.
pub fn schedule_with<S: Spill>(queues: &mut OutboundQueues<S>, budget_bytes: usize, mut allow: impl FnMut(&Frame) -> bool) -> Vec<Queued> {
    let mut out = Vec::new();
    let mut left = budget_bytes;
    for level in 0..PRIORITY_LEVELS {
        while let Some(head) = queues.head(level) {
            let n = head.frame.wire_len();
            if n > left {
                return out;
            }
            if !allow(&head.frame) {
                break;
            }
            left -= n;
            out.push(queues.pop(level).expect("head exists"));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenBucket {
    pub rate_bytes_per_s: f64,
    pub capacity: f64,
    tokens: f64,
    last_s: f64,
}

impl TokenBucket {
    /// Starts full.
    pub fn new(rate_bps: f64, capacity_bytes: usize) -> Self {
        Self { rate_bytes_per_s: rate_bps / 8.0, capacity: capacity_bytes as f64, tokens: capacity_bytes as f64, last_s: f64::NAN }
    }

    pub fn refill(&mut self, now: f64) {
        if self.last_s.is_finite() && now > self.last_s {
            self.tokens = (self.tokens + (now - self.last_s) * self.rate_bytes_per_s).min(self.capacity);
        }
        if !(self.last_s >= now) {
            self.last_s = now;
        }
    }

    pub fn available(&self) -> usize {
        self.tokens.max(0.0) as usize
    }

    pub fn take(&mut self, bytes: usize) {
        self.tokens -= bytes as f64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::downlink::wire::FRAME_OVERHEAD;

    fn f(ty: MsgType, seq: u32, payload: usize) -> Frame {
        Frame::new(ty, seq, 0, vec![0; payload])
    }

    fn queues() -> OutboundQueues<MemorySpill> {
        OutboundQueues::new(QueueLimits::default(), MemorySpill::default())
    }

    #[test]
    fn priority_and_whole_frames() {
        let mut q = queues();
        q.push(f(MsgType::Thumbnail, 0, 1000), 0.0);
        q.push(f(MsgType::Telemetry, 0, 57), 0.0);
        let out = schedule(&mut q, 200);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].frame.msg_type, MsgType::Telemetry);
        assert_eq!(q.queued(MsgType::Thumbnail), 1);
        assert!(schedule(&mut queues(), 10_000).is_empty());
    }

    #[test]
    fn full_priority_order() {
        let mut q = queues();
        for ty in [MsgType::Thumbnail, MsgType::Sharpness, MsgType::Analytics, MsgType::Diagnostics, MsgType::CommandAck, MsgType::Telemetry] {
            q.push(f(ty, 0, 10), 0.0);
        }
        let order: Vec<MsgType> = schedule(&mut q, 1 << 20).iter().map(|q| q.frame.msg_type).collect();
        assert_eq!(
            order,
            [MsgType::Telemetry, MsgType::CommandAck, MsgType::Diagnostics, MsgType::Analytics, MsgType::Sharpness, MsgType::Thumbnail]
        );
    }

    #[test]
    fn latest_only_supersedes() {
        let mut q = queues();
        for s in 0..5 {
            q.push(f(MsgType::Telemetry, s, 57), s as f64);
            q.push(f(MsgType::Analytics, s, 100), s as f64);
        }
        assert_eq!(q.queued(MsgType::Telemetry), 1);
        assert_eq!(q.queued(MsgType::Analytics), 5);
        let out = schedule(&mut q, 1 << 20);
        assert_eq!(out[0].frame.seq, 4);
        let seqs: Vec<u32> = out[1..].iter().map(|q| q.frame.seq).collect();
        assert_eq!(seqs, [0, 1, 2, 3, 4]);
    }

    #[test]
    fn analytics_spill_preserves_order_and_refills() {
        let limits = QueueLimits { analytics_memory_bytes: 3 * (1000 + FRAME_OVERHEAD), ..QueueLimits::default() };
        let mut q = OutboundQueues::new(limits, MemorySpill::default());
        for s in 0..10 {
            q.push(f(MsgType::Analytics, s, 1000), 0.0);
        }
        assert_eq!(q.spill().len(), 7);
        q.requeue(f(MsgType::Analytics, 100, 10), 0.0);
        let mut seqs = vec![];
        loop {
            let out = schedule(&mut q, 2000);
            if out.is_empty() {
                break;
            }
            seqs.extend(out.iter().map(|x| x.frame.seq));
        }
        assert_eq!(seqs, [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 100]);
    }

    #[test]
    fn spill_failure_evicts_thumbnail_not_analytics() {
        let limits = QueueLimits { analytics_memory_bytes: 2000, ..QueueLimits::default() };
        let spill = MemorySpill { fail_writes: true, ..MemorySpill::default() };
        let mut q = OutboundQueues::new(limits, spill);
        q.push(f(MsgType::Thumbnail, 0, 500), 0.0);
        for s in 0..5 {
            q.push(f(MsgType::Analytics, s, 1000), 0.0);
        }
        assert_eq!(q.queued(MsgType::Analytics), 5);
        assert_eq!(q.queued(MsgType::Thumbnail), 0);
        assert!(q.events.iter().any(|e| matches!(e, QueueEvent::SpillFailed { evicted_thumbnail: Some(0), .. })));
    }

    #[test]
    fn token_bucket_caps_release() {
        let mut b = TokenBucket::new(8000.0, 500);
        b.refill(0.0);
        assert_eq!(b.available(), 500);
        b.take(500);
        b.refill(0.5);
        assert_eq!(b.available(), 500);
        b.refill(10.0);
        assert_eq!(b.available(), 500);
    }
}
