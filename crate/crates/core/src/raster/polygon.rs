use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use wkt::Wkt;

use super::{DamageClass, RasterError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// One annotated building footprint in pixel coordinates.
///
/// `ring` is closed: the first vertex is repeated at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingPolygon {
    pub uid: String,
    pub ring: Vec<Point>,
    pub label: DamageClass,
}

impl BuildingPolygon {
    pub fn new(uid: impl Into<String>, ring: Vec<Point>, label: DamageClass) -> Self {
        Self { uid: uid.into(), ring, label }
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]` as a closed ring.
    pub fn rect(uid: impl Into<String>, x0: f64, y0: f64, x1: f64, y1: f64, label: DamageClass) -> Self {
        let ring = vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
            Point::new(x0, y0),
        ];
        Self::new(uid, ring, label)
    }

    /// Clamps vertices into `[0, width] x [0, height]`, returning how many moved.
    pub fn clamp_to(&mut self, width: u32, height: u32) -> usize {
        let (w, h) = (width as f64, height as f64);
        let mut moved = 0;
        for p in &mut self.ring {
            let q = Point::new(p.x.clamp(0.0, w), p.y.clamp(0.0, h));
            if q != *p {
                moved += 1;
                *p = q;
            }
        }
        moved
    }

    /// Signed shoelace area of the ring.
    pub fn signed_area(&self) -> f64 {
        self.ring.windows(2).map(|e| e[0].x * e[1].y - e[1].x * e[0].y).sum::<f64>() / 2.0
    }

    pub fn to_wkt(&self) -> String {
        ring_to_wkt(&self.ring)
    }
}

/// Parses a WKT `POLYGON` into its closed outer ring.
///
/// Holes, multipolygons and other geometry types are rejected.
pub fn parse_wkt_polygon(text: &str) -> Result<Vec<Point>, RasterError> {
    let trimmed = text.trim_start();
    let head: String = trimmed.chars().take_while(|c| c.is_ascii_alphabetic()).collect::<String>().to_ascii_uppercase();
    if head != "POLYGON" {
        return match head.as_str() {
            "POINT" | "LINESTRING" | "MULTIPOINT" | "MULTILINESTRING" | "MULTIPOLYGON" | "GEOMETRYCOLLECTION" => {
                Err(RasterError::UnsupportedGeometry(head))
            }
            _ => Err(RasterError::MalformedWkt(format!("expected POLYGON, found {:?}", truncate(trimmed)))),
        };
    }
    let geom = Wkt::<f64>::from_str(trimmed).map_err(|e| RasterError::MalformedWkt(e.to_string()))?;
    let Wkt::Polygon(poly) = geom else {
        return Err(RasterError::UnsupportedGeometry(head));
    };
    let rings = poly.rings();
    match rings.len() {
        0 => return Err(RasterError::MalformedWkt("empty polygon".into())),
        1 => {}
        n => return Err(RasterError::UnsupportedGeometry(format!("POLYGON with {} holes", n - 1))),
    }
    let mut ring: Vec<Point> = rings[0].coords().iter().map(|c| Point::new(c.x, c.y)).collect();
    if ring.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(RasterError::MalformedWkt("non-finite coordinate".into()));
    }
    let mut distinct: Vec<Point> = Vec::new();
    for p in &ring {
        if !distinct.contains(p) {
            distinct.push(*p);
        }
    }
    if distinct.len() < 3 {
        return Err(RasterError::MalformedWkt(format!("ring has {} distinct vertices, need 3", distinct.len())));
    }
    if ring.first() != ring.last() {
        ring.push(ring[0]);
    }
    Ok(ring)
}

pub fn ring_to_wkt(ring: &[Point]) -> String {
    let mut s = String::from("POLYGON ((");
    for (i, p) in ring.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        write!(s, "{} {}", p.x, p.y).unwrap();
    }
    s.push_str("))");
    s
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(24) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn square() {
        let ring = parse_wkt_polygon("POLYGON ((0 0, 4 0, 4 4, 0 4, 0 0))").unwrap();
        assert_eq!(ring.len(), 5);
        assert_eq!(ring[2], Point::new(4.0, 4.0));
        assert_eq!(ring.first(), ring.last());
    }

    #[test]
    fn float_triangle() {
        let ring = parse_wkt_polygon("POLYGON ((1.5 2.25, 3 2, 2 4, 1.5 2.25))").unwrap();
        assert_eq!(ring, vec![Point::new(1.5, 2.25), Point::new(3.0, 2.0), Point::new(2.0, 4.0), Point::new(1.5, 2.25)]);
    }

    #[test]
    fn open_ring_is_closed() {
        let ring = parse_wkt_polygon("POLYGON ((0 0, 2 0, 2 2))").unwrap();
        assert_eq!(ring.len(), 4);
        assert_eq!(ring[3], ring[0]);
    }

    #[test]
    fn degenerate_ring() {
        assert!(matches!(parse_wkt_polygon("POLYGON ((0 0, 1 0))"), Err(RasterError::MalformedWkt(_))));
        assert!(matches!(parse_wkt_polygon("POLYGON ((0 0, 1 0, 0 0, 1 0))"), Err(RasterError::MalformedWkt(_))));
    }

    #[test]
    fn malformed() {
        for bad in ["POLYGON ((0 0, 4 0, 4 4, 0 0)", "POLYGON ((0 0, a 0, 4 4, 0 0))", "POLYGON EMPTY", "garbage", ""] {
            assert!(matches!(parse_wkt_polygon(bad), Err(RasterError::MalformedWkt(_))), "{bad}");
        }
    }

    #[test]
    fn unsupported() {
        let multi = "MULTIPOLYGON (((0 0, 4 0, 4 4, 0 0)), ((5 5, 6 5, 6 6, 5 5)))";
        assert!(matches!(parse_wkt_polygon(multi), Err(RasterError::UnsupportedGeometry(_))));
        let holed = "POLYGON ((0 0, 10 0, 10 10, 0 10, 0 0), (2 2, 4 2, 4 4, 2 2))";
        assert!(matches!(parse_wkt_polygon(holed), Err(RasterError::UnsupportedGeometry(_))));
        assert!(matches!(parse_wkt_polygon("POINT (1 2)"), Err(RasterError::UnsupportedGeometry(_))));
    }

    #[test]
    fn clamping_counts_moved_vertices() {
        let mut p = BuildingPolygon::rect("a", -2.0, 1.0, 5.0, 12.0, DamageClass::NoDamage);
        assert_eq!(p.clamp_to(10, 10), 4);
        assert!(p.ring.iter().all(|q| (0.0..=10.0).contains(&q.x) && (0.0..=10.0).contains(&q.y)));
    }

    proptest! {
        #[test]
        fn wkt_round_trip_is_fixed_point(coords in proptest::collection::vec((-1e4f64..1e4, -1e4f64..1e4), 3..12)) {
            let ring: Vec<Point> = coords.iter().map(|&(x, y)| Point::new(x, y)).collect();
            let text = ring_to_wkt(&ring);
            if let Ok(first) = parse_wkt_polygon(&text) {
                let again = parse_wkt_polygon(&ring_to_wkt(&first)).unwrap();
                prop_assert_eq!(first, again);
            }
        }
    }
}
