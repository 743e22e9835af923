//! Runtime synthesis: patch seeding and tracking, repository matching,
//! anticipation and rendering.

pub mod frames;
pub mod kernel;
pub mod render;
pub mod runtime;
pub mod sampling;
pub mod tracking;

pub use frames::{load_frame, save_frames};
pub use kernel::{accumulate_undeformed, kernel};
pub use render::{render_volume, upsample};
pub use runtime::{
    backward_pass, forward_pass, FrameData, PatchSnapshot, Synthesis, SynthesisParams, SynthesisStats,
};
pub use sampling::{sample_density, sample_flow_block};
pub use tracking::{PatchTracker, Removal, TrackingParams};
