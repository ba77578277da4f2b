//! Gradient-domain compositing of one building into another image.
//!
//! The region interior takes the gradients of the source image while its
//! one-pixel boundary keeps the target's values (Dirichlet). The resulting
//! 5-point Poisson system is symmetric positive definite and is solved per
//! channel with conjugate gradients on a cropped window around the region.

mod cg;
mod region;
mod system;

pub use cg::{conjugate_gradient, solve, SolveReport};
pub use region::{make_blend_region, BlendRegion};
pub use system::{assemble, CsrMatrix, PoissonSystem};

use serde::{Deserialize, Serialize};

use crate::raster::ImageBuffer;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BlendError {
    #[error("blend region for building {0} is empty")]
    EmptyRegion(String),
    #[error("blend region touches the image border at ({x}, {y})")]
    RegionTouchesBorder { x: u32, y: u32 },
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch { expected: (u32, u32, u8), actual: (u32, u32, u8) },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlendConfig {
    /// Footprint dilation radius (8-neighborhood), pixels.
    pub dilation_px: u32,
    /// Relative residual at which CG stops.
    pub cg_tolerance: f64,
    pub cg_max_iters: usize,
    /// Margin around the region bbox of the solve window, pixels.
    pub window_margin_px: u32,
}

impl Default for BlendConfig {
    fn default() -> Self {
        Self { dilation_px: 2, cg_tolerance: 1e-6, cg_max_iters: 10_000, window_margin_px: 8 }
    }
}

/// Composite plus the unclamped solution, for inspection.
#[derive(Debug, Clone)]
pub struct BlendOutput {
    pub composite: ImageBuffer,
    pub report: SolveReport,
    /// Region pixels in image coordinates, raster order.
    pub pixels: Vec<(u32, u32)>,
    /// Solved values per channel, aligned with `pixels`, before clamping.
    pub field: Vec<Vec<f64>>,
}

/// Blends `source` into `target` over `region`.
///
/// Outside the region the composite is `target` bit for bit; inside, the
/// solved values are clamped to [0, 255] and rounded half to even.
pub fn blend(target: &ImageBuffer, source: &ImageBuffer, region: &BlendRegion, config: &BlendConfig) -> Result<(ImageBuffer, SolveReport), BlendError> {
    blend_detailed(target, source, region, config).map(|o| (o.composite, o.report))
}

pub fn blend_detailed(target: &ImageBuffer, source: &ImageBuffer, region: &BlendRegion, config: &BlendConfig) -> Result<BlendOutput, BlendError> {
    if !target.same_shape(source) {
        return Err(BlendError::DimensionMismatch {
            expected: (target.width(), target.height(), target.channels()),
            actual: (source.width(), source.height(), source.channels()),
        });
    }
    if region.width() != target.width() || region.height() != target.height() {
        return Err(BlendError::DimensionMismatch {
            expected: (target.width(), target.height(), target.channels()),
            actual: (region.width(), region.height(), target.channels()),
        });
    }
    let Some(bbox) = region.bbox() else {
        return Ok(BlendOutput {
            composite: target.clone(),
            report: SolveReport::TRIVIAL,
            pixels: Vec::new(),
            field: vec![Vec::new(); target.channels() as usize],
        });
    };

    let window = bbox.expand(config.window_margin_px.max(1), target.width(), target.height());
    let local_target = target.crop(window);
    let local_source = source.crop(window);
    let local_region = region.crop(window);
    let system = assemble(&local_target, &local_source, &local_region)?;
    let (field, report) = solve(&system, config.cg_tolerance, config.cg_max_iters);

    let mut composite = target.clone();
    let pixels: Vec<(u32, u32)> = system.unknowns.iter().map(|&(x, y)| (x + window.x0, y + window.y0)).collect();
    for (c, values) in field.iter().enumerate() {
        for (&(x, y), &v) in pixels.iter().zip(values) {
            composite.set(x, y, c as u8, to_intensity(v));
        }
    }
    Ok(BlendOutput { composite, report, pixels, field })
}

#[inline]
fn to_intensity(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round_ties_even() as u8
}
