//! Downlink: wire framing, message payloads, link model, outbound
//! scheduling and the reliable session.

pub mod link;
pub mod payload;
pub mod sched;
pub mod session;
pub mod wire;

pub use link::{simulate_link, Fate, LinkChannel, LinkError, LinkProfile, LinkRecord, LinkStats};
pub use payload::*;
pub use sched::{schedule, schedule_with, MemorySpill, OutboundQueues, QueueEvent, QueueLimits, Queued, Spill, TokenBucket};
pub use session::*;
pub use wire::*;
