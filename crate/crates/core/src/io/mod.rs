//! Run configuration, binary field snapshots and run manifests.

pub mod config;
pub mod manifest;
pub mod snapshot;

pub use config::{parse_config, RunConfig, CONFIG_KEYS};
pub use manifest::{Manifest, SnapshotEntry};
pub use snapshot::{read_snapshot, snapshot_byte_len, write_snapshot};
