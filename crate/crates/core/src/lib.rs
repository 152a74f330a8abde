//! Cross-view alignment and graph-based refinement of per-view point maps.

pub mod alignment;
pub mod error;
pub mod graph;
pub mod io;
pub mod kdtree;
pub mod metrics;
pub mod model;
pub mod normals;
pub mod optimizer;
mod par;
pub mod synth;

pub use error::{Error, Result};
