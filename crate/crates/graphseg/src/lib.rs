//! Files, experiments and the command line around [`graphseg_core`].
//!
//! [`io`] reads series records and reads/writes graph edge lists,
//! [`checkpoint`] stores trained models, [`config`] resolves run settings
//! from defaults, TOML and flags, [`runner`] drives batch experiments and
//! [`report`] summarizes their results.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod runner;

pub use error::{Error, Result};

/// Version stamped into every output artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
