//! Object-level view of masks and annotations.
//!
//! Prediction masks become one detection per connected component, labelled
//! by majority vote over the damage mask. Ground truth becomes one detection
//! per annotated polygon, so touching buildings stay separate on that side.

mod coco;
mod components;

pub use coco::{from_coco, to_coco, CocoAnnotation, CocoCategory, CocoDataset, CocoImage};
pub use components::{connected_components, majority_vote_label, Component, Connectivity, Vote};

use serde::{Deserialize, Serialize};

use crate::raster::{polygon_pixels, BBox, ClassMask, DamageClass, SceneAnnotation};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ObjectError {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch { expected: (u32, u32), actual: (u32, u32) },
    #[error("invalid COCO document: {0}")]
    BadCoco(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    FromMask,
    FromAnnotation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    /// One of the four damage levels.
    pub label: DamageClass,
    /// Always 1.0: masks and polygons carry no confidence.
    pub score: f64,
    /// Pixel count of the component or rasterized footprint.
    pub area: u64,
    pub origin: Origin,
    /// Building uid for annotation-derived detections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uid: Option<String>,
    /// The majority vote saw only background damage pixels.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate_vote: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub scene_id: String,
    pub width: u32,
    pub height: u32,
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    pub fn new(scene_id: impl Into<String>, width: u32, height: u32) -> Self {
        Self { scene_id: scene_id.into(), width, height, detections: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    /// True when every box lies inside the scene frame.
    pub fn in_bounds(&self) -> bool {
        self.detections.iter().all(|d| d.bbox.x1 < self.width && d.bbox.y1 < self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionConfig {
    pub connectivity: Connectivity,
    /// Components smaller than this many pixels are dropped; 0 keeps all.
    pub min_area: u64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { connectivity: Connectivity::Eight, min_area: 0 }
    }
}

/// One detection per connected component of `loc`, labelled from `dam`.
pub fn masks_to_detections(
    scene_id: &str,
    loc: &ClassMask,
    dam: &ClassMask,
    config: &DetectionConfig,
) -> Result<DetectionSet, ObjectError> {
    if !loc.same_size(dam) {
        return Err(ObjectError::DimensionMismatch {
            expected: (loc.width(), loc.height()),
            actual: (dam.width(), dam.height()),
        });
    }
    let mut set = DetectionSet::new(scene_id, loc.width(), loc.height());
    for comp in connected_components(loc, config.connectivity) {
        let area = comp.area() as u64;
        if area < config.min_area {
            continue;
        }
        let vote = majority_vote_label(&comp, dam);
        set.detections.push(Detection {
            bbox: comp.bbox,
            label: vote.label,
            score: 1.0,
            area,
            origin: Origin::FromMask,
            uid: None,
            degenerate_vote: vote.degenerate,
        });
    }
    Ok(set)
}

/// Ground-truth detections from polygons.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationDetections {
    pub set: DetectionSet,
    /// Footprint boxes of unclassified buildings, left out of `set`.
    pub unclassified: Vec<BBox>,
    /// Uids of polygons that cover no pixel center.
    pub empty: Vec<String>,
}

/// One detection per polygon: the box of its own rasterized footprint.
///
/// Overlaps do not matter here; each polygon is rasterized on its own.
pub fn annotation_to_detections(annotation: &SceneAnnotation) -> AnnotationDetections {
    let mut set = DetectionSet::new(annotation.scene_id.clone(), annotation.width, annotation.height);
    let mut unclassified = Vec::new();
    let mut empty = Vec::new();
    for b in &annotation.buildings {
        let pixels = polygon_pixels(&b.ring, annotation.width, annotation.height);
        let area = pixels.len() as u64;
        let Some(bbox) = BBox::around(pixels) else {
            empty.push(b.uid.clone());
            continue;
        };
        if b.label == DamageClass::Unclassified {
            unclassified.push(bbox);
            continue;
        }
        set.detections.push(Detection {
            bbox,
            label: b.label,
            score: 1.0,
            area,
            origin: Origin::FromAnnotation,
            uid: Some(b.uid.clone()),
            degenerate_vote: false,
        });
    }
    AnnotationDetections { set, unclassified, empty }
}

/// Intersection over union of two boxes, counting pixels inclusively.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection(b).map_or(0, |i| i.area());
    if inter == 0 {
        return 0.0;
    }
    inter as f64 / (a.area() + b.area() - inter) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{build_target_masks, BuildingPolygon};
    use proptest::prelude::*;

    fn paint(m: &mut ClassMask, x0: u32, y0: u32, x1: u32, y1: u32, code: u8) {
        for y in y0..=y1 {
            for x in x0..=x1 {
                m.set_code(x, y, code);
            }
        }
    }

    #[test]
    fn iou_examples() {
        let a = BBox::new(0, 0, 9, 9);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &BBox::new(20, 20, 25, 25)), 0.0);
        assert!((iou(&a, &BBox::new(5, 0, 14, 9)) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn isolated_block() {
        let mut dam = ClassMask::new(10, 10);
        paint(&mut dam, 2, 3, 4, 5, 4);
        let set = masks_to_detections("s", &dam.localization(), &dam, &DetectionConfig::default()).unwrap();
        assert_eq!(set.len(), 1);
        let d = &set.detections[0];
        assert_eq!((d.bbox, d.label, d.area, d.score), (BBox::new(2, 3, 4, 5), DamageClass::Destroyed, 9, 1.0));
    }

    #[test]
    fn bridge_fuses_blocks_and_votes_over_all_pixels() {
        // 3x3 destroyed + 4x4 no-damage joined by a 1-pixel minor bridge.
        let mut dam = ClassMask::new(16, 8);
        paint(&mut dam, 1, 1, 3, 3, 4);
        dam.set_code(4, 2, 2);
        paint(&mut dam, 5, 1, 8, 4, 1);
        let set = masks_to_detections("s", &dam.localization(), &dam, &DetectionConfig::default()).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.detections[0].label, DamageClass::NoDamage);
        assert_eq!(set.detections[0].area, 9 + 1 + 16);
        assert_eq!(set.detections[0].bbox, BBox::new(1, 1, 8, 4));
    }

    #[test]
    fn min_area_filter() {
        let mut dam = ClassMask::new(8, 8);
        paint(&mut dam, 1, 1, 2, 1, 3);
        let cfg = DetectionConfig { min_area: 5, ..Default::default() };
        assert!(masks_to_detections("s", &dam.localization(), &dam, &cfg).unwrap().is_empty());
    }

    #[test]
    fn mismatched_masks() {
        let e = masks_to_detections("s", &ClassMask::new(4, 4), &ClassMask::new(4, 5), &DetectionConfig::default());
        assert!(matches!(e, Err(ObjectError::DimensionMismatch { .. })));
    }

    #[test]
    fn annotation_side() {
        let mut ann = SceneAnnotation::new("s", 16, 16);
        assert!(annotation_to_detections(&ann).set.is_empty());
        ann.buildings.push(BuildingPolygon::rect("a", 2.0, 2.0, 6.0, 5.0, DamageClass::MajorDamage));
        ann.buildings.push(BuildingPolygon::rect("b", 4.0, 3.0, 9.0, 9.0, DamageClass::NoDamage));
        ann.buildings.push(BuildingPolygon::rect("c", 10.0, 10.0, 12.0, 12.0, DamageClass::Unclassified));
        ann.buildings.push(BuildingPolygon::rect("d", 13.0, 13.0, 13.2, 13.2, DamageClass::Destroyed));
        let out = annotation_to_detections(&ann);
        assert_eq!(out.set.len(), 2);
        assert_eq!(out.set.detections[0].bbox, BBox::new(2, 2, 5, 4));
        assert_eq!(out.set.detections[1].bbox, BBox::new(4, 3, 8, 8));
        assert_eq!(out.unclassified, vec![BBox::new(10, 10, 11, 11)]);
        assert_eq!(out.empty, vec!["d".to_string()]);
        assert!(out.set.in_bounds());
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_one_only_on_identity(a in (0u32..20, 0u32..20, 0u32..8, 0u32..8), b in (0u32..20, 0u32..20, 0u32..8, 0u32..8)) {
            let ba = BBox::new(a.0, a.1, a.0 + a.2, a.1 + a.3);
            let bb = BBox::new(b.0, b.1, b.0 + b.2, b.1 + b.3);
            let v = iou(&ba, &bb);
            prop_assert_eq!(v, iou(&bb, &ba));
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v == 1.0, ba == bb);
        }

        #[test]
        fn separated_polygons_round_trip(labels in proptest::collection::vec(1u8..=4, 1..9)) {
            // k rectangles on a grid with at least one empty pixel between them.
            let mut ann = SceneAnnotation::new("s", 40, 40);
            for (i, &code) in labels.iter().enumerate() {
                let (gx, gy) = ((i % 3) as f64 * 12.0 + 1.0, (i / 3) as f64 * 12.0 + 1.0);
                ann.buildings.push(BuildingPolygon::rect(format!("b{i}"), gx, gy, gx + 5.0 + code as f64, gy + 4.0, DamageClass::from_code(code).unwrap()));
            }
            let t = build_target_masks(&ann);
            let set = masks_to_detections("s", &t.loc, &t.dam, &DetectionConfig::default()).unwrap();
            let got: Vec<_> = set.detections.iter().map(|d| d.label).collect();
            let want: Vec<_> = ann.buildings.iter().map(|b| b.label).collect();
            prop_assert_eq!(got, want);
        }
    }
}
