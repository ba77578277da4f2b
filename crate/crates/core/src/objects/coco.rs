use serde::{Deserialize, Serialize};

use crate::raster::{BBox, DamageClass};

use super::{Detection, DetectionSet, ObjectError, Origin};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    /// `[x, y, w, h]` in pixels.
    pub bbox: [u32; 4],
    pub category_id: u32,
    #[serde(default = "one")]
    pub score: f64,
    #[serde(default)]
    pub area: u64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u32,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoDataset {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

/// COCO detection document with one image per set; image ids start at 1.
pub fn to_coco(sets: &[DetectionSet]) -> CocoDataset {
    let mut images = Vec::with_capacity(sets.len());
    let mut annotations = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        let image_id = i as u64 + 1;
        images.push(CocoImage { id: image_id, file_name: set.scene_id.clone(), width: set.width, height: set.height });
        for d in &set.detections {
            let Some(category_id) = d.label.category_id() else { continue };
            annotations.push(CocoAnnotation {
                id: annotations.len() as u64 + 1,
                image_id,
                bbox: d.bbox.to_xywh(),
                category_id,
                score: d.score,
                area: d.area,
            });
        }
    }
    let categories = DamageClass::DAMAGE_LEVELS
        .iter()
        .map(|c| CocoCategory { id: c.category_id().unwrap(), name: c.subtype().to_string() })
        .collect();
    CocoDataset { images, annotations, categories }
}

/// Reads detections back, one set per COCO image, in image order.
pub fn from_coco(doc: &CocoDataset, origin: Origin) -> Result<Vec<DetectionSet>, ObjectError> {
    let mut sets: Vec<DetectionSet> =
        doc.images.iter().map(|im| DetectionSet::new(im.file_name.clone(), im.width, im.height)).collect();
    for a in &doc.annotations {
        let idx = doc
            .images
            .iter()
            .position(|im| im.id == a.image_id)
            .ok_or_else(|| ObjectError::BadCoco(format!("annotation {} refers to unknown image {}", a.id, a.image_id)))?;
        let label = match a.category_id {
            1..=4 => DamageClass::from_code(a.category_id as u8).unwrap(),
            c => return Err(ObjectError::BadCoco(format!("unknown category {c}"))),
        };
        let bbox = BBox::from_xywh(a.bbox).ok_or_else(|| ObjectError::BadCoco(format!("annotation {} has an empty box", a.id)))?;
        sets[idx].detections.push(Detection {
            bbox,
            label,
            score: a.score,
            area: if a.area > 0 { a.area } else { bbox.area() },
            origin,
            uid: None,
            degenerate_vote: false,
        });
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DetectionSet {
        let mut s = DetectionSet::new("scene_a", 64, 32);
        for (b, l) in [(BBox::new(1, 2, 5, 6), DamageClass::Destroyed), (BBox::new(10, 10, 10, 12), DamageClass::NoDamage)] {
            s.detections.push(Detection { bbox: b, label: l, score: 1.0, area: b.area(), origin: Origin::FromMask, uid: None, degenerate_vote: false });
        }
        s
    }

    #[test]
    fn layout() {
        let doc = to_coco(&[sample()]);
        let v = serde_json::to_value(&doc).unwrap();
        assert_eq!(v["annotations"][0]["bbox"], serde_json::json!([1, 2, 5, 5]));
        assert_eq!(v["annotations"][0]["category_id"], 4);
        assert_eq!(v["annotations"][1]["category_id"], 1);
        assert_eq!(v["categories"].as_array().unwrap().len(), 4);
        assert_eq!(v["categories"][2]["name"], "major-damage");
    }

    #[test]
    fn round_trip() {
        let doc = to_coco(&[sample(), DetectionSet::new("empty", 8, 8)]);
        let text = serde_json::to_string(&doc).unwrap();
        let back = from_coco(&serde_json::from_str(&text).unwrap(), Origin::FromMask).unwrap();
        assert_eq!(back, vec![sample(), DetectionSet::new("empty", 8, 8)]);
    }

    #[test]
    fn rejects_unknown_category() {
        let mut doc = to_coco(&[sample()]);
        doc.annotations[0].category_id = 7;
        assert!(matches!(from_coco(&doc, Origin::FromMask), Err(ObjectError::BadCoco(_))));
    }
}
