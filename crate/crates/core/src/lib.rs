//! Focused building damage toolkit.
//!
//! Synthesizes single-damaged-building image pairs by Poisson-blending one
//! post-disaster building into pre-disaster context, and scores damage
//! segmentation at the pixel level (xView2) and the object level.

pub mod raster;
pub mod blend;
pub mod objects;
pub mod metrics;
pub mod losses;
pub mod pipeline;
