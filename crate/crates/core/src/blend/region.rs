use crate::raster::{polygon_pixels, BBox, BuildingPolygon};

use super::BlendError;

/// Set of pixels whose values the blend solves for.
///
/// Never touches row/column 0 or the last row/column, so every interior
/// pixel has four in-frame neighbors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlendRegion {
    width: u32,
    height: u32,
    mask: Vec<bool>,
    bbox: Option<BBox>,
    interior_count: usize,
}

impl BlendRegion {
    /// Wraps an arbitrary interior mask, rejecting masks that reach the border.
    pub fn from_mask(width: u32, height: u32, mask: Vec<bool>) -> Result<Self, BlendError> {
        assert_eq!(mask.len(), width as usize * height as usize, "mask length");
        let mut bbox: Option<BBox> = None;
        let mut interior_count = 0;
        for y in 0..height {
            for x in 0..width {
                if mask[y as usize * width as usize + x as usize] {
                    if x == 0 || y == 0 || x + 1 == width || y + 1 == height {
                        return Err(BlendError::RegionTouchesBorder { x, y });
                    }
                    interior_count += 1;
                    match bbox.as_mut() {
                        Some(b) => b.include(x, y),
                        None => bbox = Some(BBox::point(x, y)),
                    }
                }
            }
        }
        Ok(Self { width, height, mask, bbox, interior_count })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, mask: vec![false; width as usize * height as usize], bbox: None, interior_count: 0 }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bbox(&self) -> Option<BBox> {
        self.bbox
    }

    pub fn interior_count(&self) -> usize {
        self.interior_count
    }

    pub fn is_empty(&self) -> bool {
        self.interior_count == 0
    }

    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height && self.mask[y as usize * self.width as usize + x as usize]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Restriction to the inclusive rectangle `rect`, in its local coordinates.
    pub fn crop(&self, rect: BBox) -> BlendRegion {
        let (w, h) = (rect.width(), rect.height());
        let mut mask = Vec::with_capacity(w as usize * h as usize);
        for y in rect.y0..=rect.y1 {
            let row = y as usize * self.width as usize;
            mask.extend_from_slice(&self.mask[row + rect.x0 as usize..=row + rect.x1 as usize]);
        }
        let bbox = self.bbox.and_then(|b| b.intersection(&rect)).map(|b| BBox {
            x0: b.x0 - rect.x0,
            y0: b.y0 - rect.y0,
            x1: b.x1 - rect.x0,
            y1: b.y1 - rect.y0,
        });
        let interior_count = mask.iter().filter(|&&m| m).count();
        BlendRegion { width: w, height: h, mask, bbox, interior_count }
    }
}

/// Building footprint grown by `dilation` pixels (8-neighborhood), with the
/// growth kept one pixel inside the frame.
///
/// Fails when the footprint itself covers a border pixel.
pub fn make_blend_region(poly: &BuildingPolygon, width: u32, height: u32, dilation: u32) -> Result<BlendRegion, BlendError> {
    let footprint = polygon_pixels(&poly.ring, width, height);
    if footprint.is_empty() {
        return Err(BlendError::EmptyRegion(poly.uid.clone()));
    }
    if let Some(&(x, y)) = footprint.iter().find(|&&(x, y)| x == 0 || y == 0 || x + 1 == width || y + 1 == height) {
        return Err(BlendError::RegionTouchesBorder { x, y });
    }
    let mut mask = vec![false; width as usize * height as usize];
    let d = dilation as i64;
    let (lo_x, hi_x) = (1i64, width as i64 - 2);
    let (lo_y, hi_y) = (1i64, height as i64 - 2);
    for &(x, y) in &footprint {
        let (x, y) = (x as i64, y as i64);
        for ny in (y - d).max(lo_y)..=(y + d).min(hi_y) {
            let row = ny as usize * width as usize;
            for nx in (x - d).max(lo_x)..=(x + d).min(hi_x) {
                mask[row + nx as usize] = true;
            }
        }
    }
    BlendRegion::from_mask(width, height, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::DamageClass;

    fn square(x0: f64, y0: f64, side: f64) -> BuildingPolygon {
        BuildingPolygon::rect("b", x0, y0, x0 + side, y0 + side, DamageClass::Destroyed)
    }

    #[test]
    fn no_dilation_is_footprint() {
        let r = make_blend_region(&square(7.0, 7.0, 3.0), 16, 16, 0).unwrap();
        assert_eq!(r.interior_count(), 9);
        assert_eq!(r.bbox(), Some(BBox::new(7, 7, 9, 9)));
    }

    #[test]
    fn one_pixel_dilation_of_3x3_is_5x5() {
        let r = make_blend_region(&square(7.0, 7.0, 3.0), 16, 16, 1).unwrap();
        assert_eq!(r.interior_count(), 25);
        assert_eq!(r.bbox(), Some(BBox::new(6, 6, 10, 10)));
    }

    #[test]
    fn flush_against_border_is_rejected() {
        for d in [0, 1, 2, 5] {
            assert!(matches!(
                make_blend_region(&square(0.0, 5.0, 3.0), 16, 16, d),
                Err(BlendError::RegionTouchesBorder { x: 0, .. })
            ));
        }
        assert!(matches!(make_blend_region(&square(13.0, 5.0, 3.0), 16, 16, 0), Err(BlendError::RegionTouchesBorder { .. })));
    }

    #[test]
    fn dilation_stops_inside_frame() {
        let r = make_blend_region(&square(1.0, 1.0, 2.0), 16, 16, 3).unwrap();
        assert_eq!(r.bbox(), Some(BBox::new(1, 1, 5, 5)));
        assert!(!r.contains(0, 0));
    }

    #[test]
    fn empty_polygon() {
        let p = BuildingPolygon::rect("z", 3.0, 3.0, 3.2, 3.2, DamageClass::Destroyed);
        assert!(matches!(make_blend_region(&p, 16, 16, 2), Err(BlendError::EmptyRegion(_))));
    }

    #[test]
    fn crop_keeps_interior() {
        let r = make_blend_region(&square(7.0, 7.0, 3.0), 16, 16, 1).unwrap();
        let c = r.crop(BBox::new(4, 4, 12, 12));
        assert_eq!(c.interior_count(), 25);
        assert_eq!(c.bbox(), Some(BBox::new(2, 2, 6, 6)));
        assert!(c.contains(2, 2) && !c.contains(1, 2));
    }
}
