//! Image buffers, building polygons, class masks and building chips.

mod annotation;
mod bbox;
mod chip;
mod damage;
mod image;
mod mask;
mod polygon;
mod rasterize;

pub use annotation::{label_dimensions, AnnotationWarning, SceneAnnotation};
pub use bbox::BBox;
pub use chip::{extract_chip, Chip};
pub use damage::DamageClass;
pub use image::ImageBuffer;
pub use mask::{build_target_masks, ClassMask, TargetMasks};
pub use polygon::{parse_wkt_polygon, ring_to_wkt, BuildingPolygon, Point};
pub use rasterize::{polygon_pixels, rasterize_polygon};

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("malformed WKT: {0}")]
    MalformedWkt(String),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("unknown damage subtype {0:?}")]
    UnknownSubtype(String),
    #[error("images must have 1 or 3 channels, got {0}")]
    UnsupportedChannels(u8),
    #[error("buffer length {actual} does not match shape ({expected})")]
    BufferLength { expected: usize, actual: usize },
    #[error("mask code {0} is outside 0..=4")]
    InvalidMaskCode(u8),
    #[error("{0}: expected a single-channel mask image")]
    NotSingleChannel(String),
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch { expected: (u32, u32), actual: (u32, u32) },
    #[error("polygon {0} covers no pixel centers")]
    EmptyPolygon(String),
    #[error("chip pad size must be positive")]
    InvalidPadSize,
    #[error("invalid label JSON: {0}")]
    BadJson(String),
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("{path}: {source}")]
    Image {
        path: String,
        #[source]
        source: ::image::ImageError,
    },
}
