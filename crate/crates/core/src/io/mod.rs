//! Configuration files, binary snapshots and CSV output.

pub mod config;
pub mod csv;
pub mod snapshot;

pub use config::{load_config, parse_config, RunConfig, Setup};
pub use snapshot::{load_snapshot, save_snapshot, FieldSnapshot};
