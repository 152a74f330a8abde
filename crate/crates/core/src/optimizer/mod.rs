//! Adam over a coarse-to-fine pyramid.

mod adam;
mod pyramid;
mod refine;

pub use adam::{Adam, AdamParams};
pub use pyramid::{downsample_image, downsample_matches, downsample_pointmap, downsample_state, upsample_delta, PyramidLevel};
pub use refine::{prepare, run_refinement, LevelSummary, LossTrace, RefinementAborted, TraceRow, TRACE_HEADER};
