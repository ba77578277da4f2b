use super::{ClassMask, DamageClass, Point};

/// Pixels whose centers `(x + 0.5, y + 0.5)` fall inside `ring` under the
/// even-odd rule, clipped to a `width` x `height` frame, in row-major order.
///
/// An edge crosses a scanline at height `yc` when exactly one endpoint has
/// `y <= yc`; a center on a left or top edge is inside, on a right or bottom
/// edge outside.
pub fn polygon_pixels(ring: &[Point], width: u32, height: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    if ring.len() < 2 || width == 0 || height == 0 {
        return out;
    }
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in ring {
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    let row_lo = (ymin - 0.5).floor().max(0.0) as u32;
    let row_hi = ymax.ceil().min(height as f64 - 1.0);
    if row_hi < 0.0 {
        return out;
    }
    let row_hi = row_hi as u32;
    let mut xs: Vec<f64> = Vec::new();
    for y in row_lo..=row_hi {
        let yc = y as f64 + 0.5;
        xs.clear();
        for e in ring.windows(2) {
            let (a, b) = (e[0], e[1]);
            if (a.y <= yc) != (b.y <= yc) {
                xs.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        xs.sort_by(f64::total_cmp);
        for span in xs.chunks_exact(2) {
            let (lo, hi) = (span[0], span[1]);
            let start = (lo - 0.5).floor().max(0.0);
            if start >= width as f64 {
                continue;
            }
            let mut x = start as u32;
            while x < width {
                let xc = x as f64 + 0.5;
                if xc >= hi {
                    break;
                }
                if xc >= lo {
                    out.push((x, y));
                }
                x += 1;
            }
        }
    }
    out
}

/// Paints the polygon into `mask` with `class`, overwriting earlier values.
/// Returns the number of pixels painted.
pub fn rasterize_polygon(ring: &[Point], mask: &mut ClassMask, class: DamageClass) -> usize {
    let pixels = polygon_pixels(ring, mask.width(), mask.height());
    let code = class.mask_code();
    for &(x, y) in &pixels {
        mask.set_code(x, y, code);
    }
    pixels.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::BuildingPolygon;
    use proptest::prelude::*;

    // Crossing-number test, evaluated independently per pixel center.
    fn inside(ring: &[Point], px: f64, py: f64) -> bool {
        let mut odd = false;
        for e in ring.windows(2) {
            let (a, b) = (e[0], e[1]);
            if (a.y <= py) != (b.y <= py) {
                let xi = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y);
                if px >= xi {
                    odd = !odd;
                }
            }
        }
        odd
    }

    fn brute_force(ring: &[Point], w: u32, h: u32) -> Vec<(u32, u32)> {
        let mut v = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if inside(ring, x as f64 + 0.5, y as f64 + 0.5) {
                    v.push((x, y));
                }
            }
        }
        v
    }

    #[test]
    fn square_covering_nine_centers() {
        let sq = BuildingPolygon::rect("s", 1.0, 1.0, 4.0, 4.0, DamageClass::Destroyed);
        let mut mask = ClassMask::new(8, 8);
        assert_eq!(rasterize_polygon(&sq.ring, &mut mask, DamageClass::Destroyed), 9);
        assert_eq!(mask.data().iter().filter(|&&v| v == 4).count(), 9);
        for y in 1..4 {
            for x in 1..4 {
                assert_eq!(mask.code(x, y), 4);
            }
        }
    }

    #[test]
    fn outside_frame_after_clamp_is_empty() {
        let mut p = BuildingPolygon::rect("o", 20.0, 20.0, 30.0, 30.0, DamageClass::NoDamage);
        p.clamp_to(8, 8);
        let mut mask = ClassMask::new(8, 8);
        assert_eq!(rasterize_polygon(&p.ring, &mut mask, DamageClass::NoDamage), 0);
        assert!(mask.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn painter_order() {
        let mut mask = ClassMask::new(8, 8);
        let a = BuildingPolygon::rect("a", 0.0, 0.0, 4.0, 4.0, DamageClass::Destroyed);
        let b = BuildingPolygon::rect("b", 2.0, 2.0, 6.0, 6.0, DamageClass::NoDamage);
        rasterize_polygon(&a.ring, &mut mask, a.label);
        rasterize_polygon(&b.ring, &mut mask, b.label);
        assert_eq!(mask.code(3, 3), 1);
        assert_eq!(mask.code(1, 1), 4);
        assert_eq!(mask.code(5, 5), 1);
    }

    #[test]
    fn triangle_matches_brute_force() {
        let ring = vec![Point::new(0.3, 0.2), Point::new(7.7, 1.9), Point::new(2.2, 6.6), Point::new(0.3, 0.2)];
        assert_eq!(polygon_pixels(&ring, 8, 8), brute_force(&ring, 8, 8));
    }

    proptest! {
        #[test]
        fn scanline_equals_per_pixel_test(
            pts in proptest::collection::vec((-3.0f64..19.0, -3.0f64..19.0), 3..9),
        ) {
            let mut ring: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
            ring.push(ring[0]);
            prop_assert_eq!(polygon_pixels(&ring, 16, 16), brute_force(&ring, 16, 16));
        }

        #[test]
        fn deterministic(pts in proptest::collection::vec((0.0f64..16.0, 0.0f64..16.0), 3..9)) {
            let mut ring: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
            ring.push(ring[0]);
            prop_assert_eq!(polygon_pixels(&ring, 16, 16), polygon_pixels(&ring, 16, 16));
        }
    }
}
