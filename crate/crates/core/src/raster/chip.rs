use super::{rasterize::polygon_pixels, BBox, BuildingPolygon, DamageClass, ImageBuffer, RasterError};

/// Pre/post patches of a single building, masked to its footprint and
/// centered on a square zero canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct Chip {
    pub pre_patch: ImageBuffer,
    pub post_patch: ImageBuffer,
    pub pad_size: u32,
    pub label: DamageClass,
    pub source_uid: String,
    /// Footprint bbox in the source image.
    pub source_bbox: BBox,
    /// Top-left of the building patch inside the canvas.
    pub offset: (u32, u32),
    /// Set when the footprint was larger than `pad_size` and got shrunk.
    pub downscaled: bool,
}

impl Chip {
    /// Interleaved pre then post channels per pixel (6 bytes/pixel for RGB).
    pub fn stacked(&self) -> Vec<u8> {
        let pc = self.pre_patch.channels() as usize;
        let qc = self.post_patch.channels() as usize;
        let pre = self.pre_patch.data();
        let post = self.post_patch.data();
        let n = self.pad_size as usize * self.pad_size as usize;
        let mut out = Vec::with_capacity(n * (pc + qc));
        for i in 0..n {
            out.extend_from_slice(&pre[i * pc..(i + 1) * pc]);
            out.extend_from_slice(&post[i * qc..(i + 1) * qc]);
        }
        out
    }
}

pub fn extract_chip(pre: &ImageBuffer, post: &ImageBuffer, poly: &BuildingPolygon, pad_size: u32) -> Result<Chip, RasterError> {
    if !pre.same_shape(post) {
        return Err(RasterError::DimensionMismatch {
            expected: (pre.width(), pre.height()),
            actual: (post.width(), post.height()),
        });
    }
    if pad_size == 0 {
        return Err(RasterError::InvalidPadSize);
    }
    let pixels = polygon_pixels(&poly.ring, pre.width(), pre.height());
    let bbox = BBox::around(pixels.iter().copied()).ok_or_else(|| RasterError::EmptyPolygon(poly.uid.clone()))?;
    let ch = pre.channels();
    let (bw, bh) = (bbox.width(), bbox.height());

    let mut pre_crop = ImageBuffer::new(bw, bh, ch)?;
    let mut post_crop = ImageBuffer::new(bw, bh, ch)?;
    for &(x, y) in &pixels {
        for c in 0..ch {
            pre_crop.set(x - bbox.x0, y - bbox.y0, c, pre.get(x, y, c));
            post_crop.set(x - bbox.x0, y - bbox.y0, c, post.get(x, y, c));
        }
    }

    let downscaled = bw > pad_size || bh > pad_size;
    let (pw, ph) = if downscaled {
        let longest = bw.max(bh) as u64;
        let fit = |d: u32| ((d as u64 * pad_size as u64) / longest).max(1) as u32;
        (fit(bw), fit(bh))
    } else {
        (bw, bh)
    };
    let ox = (pad_size - pw) / 2;
    let oy = (pad_size - ph) / 2;

    let place = |src: &ImageBuffer| -> ImageBuffer {
        let mut canvas = ImageBuffer::new(pad_size, pad_size, ch).expect("valid shape");
        for j in 0..ph {
            let sy = (j as u64 * bh as u64 / ph as u64) as u32;
            for i in 0..pw {
                let sx = (i as u64 * bw as u64 / pw as u64) as u32;
                for c in 0..ch {
                    canvas.set(ox + i, oy + j, c, src.get(sx, sy, c));
                }
            }
        }
        canvas
    };

    Ok(Chip {
        pre_patch: place(&pre_crop),
        post_patch: place(&post_crop),
        pad_size,
        label: poly.label,
        source_uid: poly.uid.clone(),
        source_bbox: bbox,
        offset: (ox, oy),
        downscaled,
    })
}
