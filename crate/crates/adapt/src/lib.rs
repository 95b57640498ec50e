//! Operating-system side of the payload data path: file formats, the
//! durable ground station and its HTTP API, the end-to-end mission runner
//! and the `adapt` command line.

pub mod formats;
pub mod spool;
pub mod station;
pub mod capture;
pub mod mission;
