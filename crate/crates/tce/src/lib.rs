//! File formats, the remote scorer client and the experiment harness around
//! `tce-core`.
//!
//! [`artifacts::preprocess`] trains the built-in scorers and the word banks
//! from a labelled dataset once; [`harness`] then explains texts in batches,
//! compares operator sets and records anytime curves. The `tce` binary
//! exposes the same steps on the command line.

pub mod artifacts;
pub mod config;
pub mod harness;
pub mod io;
pub mod remote;
pub mod synthetic;

pub use artifacts::{preprocess, Artifacts, Split};
pub use config::RunConfig;
pub use harness::{Engine, Job, Record, RunSettings};
