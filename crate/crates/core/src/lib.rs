//! Collaborative cloud-client rendering for hierarchical Gaussian-splat
//! scenes.
//!
//! The cloud holds a level-of-detail tree over the full splat set and runs
//! the cut search (streaming on the first frame, temporal-aware after);
//! each round it ships only the cut members the client is missing,
//! compressed with a shared SH codebook and 16-bit fixed point. The client
//! mirrors the cloud's bookkeeping, selects its render queue locally, and
//! rasterizes both stereo eyes while reusing the left eye's per-tile lists
//! for the right eye.

pub mod camera;
pub mod codec;
pub mod config;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod math;
pub mod render;
pub mod scene;
pub mod search;
pub mod sh;
pub mod stream;

mod bytes;

pub use camera::{frustum_test, project_point, Camera, Projected, StereoRig};
pub use config::RenderConfig;
pub use error::{Error, Result};
pub use gaussian::Gaussian;
