use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{parse_wkt_polygon, BuildingPolygon, DamageClass, RasterError};

/// Building polygons for one pre/post image pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAnnotation {
    pub scene_id: String,
    pub width: u32,
    pub height: u32,
    pub buildings: Vec<BuildingPolygon>,
}

/// Non-fatal findings while reading a label file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnnotationWarning {
    ClampedVertices { uid: String, count: usize },
    RejectedGeometry { uid: String, reason: String },
    DuplicateUid { uid: String },
    UnknownSubtype { uid: String, subtype: String },
    MissingUid { index: usize },
}

#[derive(Debug, Deserialize)]
struct LabelFile {
    features: LabelFeatures,
    #[serde(default)]
    metadata: Option<LabelMetadata>,
}

#[derive(Debug, Deserialize)]
struct LabelFeatures {
    #[serde(default)]
    xy: Vec<LabelFeature>,
}

#[derive(Debug, Deserialize)]
struct LabelFeature {
    wkt: String,
    #[serde(default)]
    properties: LabelProperties,
}

#[derive(Debug, Default, Deserialize)]
struct LabelProperties {
    uid: Option<String>,
    subtype: Option<String>,
}

/// `metadata` block of an xBD label file; only the fields used here.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
pub struct LabelMetadata {
    pub width: Option<u32>,
    pub height: Option<u32>,
}

/// Image size recorded in a label file, if any.
pub fn label_dimensions(json: &str) -> Result<Option<(u32, u32)>, RasterError> {
    let file: LabelFile = serde_json::from_str(json).map_err(|e| RasterError::BadJson(e.to_string()))?;
    Ok(file.metadata.and_then(|m| Some((m.width?, m.height?))))
}

impl SceneAnnotation {
    pub fn new(scene_id: impl Into<String>, width: u32, height: u32) -> Self {
        Self { scene_id: scene_id.into(), width, height, buildings: Vec::new() }
    }

    /// Reads an xBD label document (`features.xy[*].wkt` in pixel space).
    ///
    /// Unsupported or malformed geometries and duplicate uids are dropped
    /// with a warning; out-of-frame vertices are clamped. A missing
    /// `subtype` (pre-disaster labels) reads as no-damage.
    pub fn from_label_json(
        scene_id: impl Into<String>,
        json: &str,
        width: u32,
        height: u32,
    ) -> Result<(Self, Vec<AnnotationWarning>), RasterError> {
        let file: LabelFile = serde_json::from_str(json).map_err(|e| RasterError::BadJson(e.to_string()))?;
        let mut ann = SceneAnnotation::new(scene_id, width, height);
        let mut warnings = Vec::new();
        let mut seen = HashSet::new();
        for (index, feat) in file.features.xy.into_iter().enumerate() {
            let uid = match feat.properties.uid {
                Some(u) => u,
                None => {
                    warnings.push(AnnotationWarning::MissingUid { index });
                    format!("feature-{index}")
                }
            };
            let label = match feat.properties.subtype.as_deref() {
                None => DamageClass::NoDamage,
                Some(s) => match s.parse::<DamageClass>() {
                    Ok(DamageClass::Background) | Err(_) => {
                        warnings.push(AnnotationWarning::UnknownSubtype { uid, subtype: s.to_string() });
                        continue;
                    }
                    Ok(d) => d,
                },
            };
            let ring = match parse_wkt_polygon(&feat.wkt) {
                Ok(r) => r,
                Err(e) => {
                    warnings.push(AnnotationWarning::RejectedGeometry { uid, reason: e.to_string() });
                    continue;
                }
            };
            if !seen.insert(uid.clone()) {
                warnings.push(AnnotationWarning::DuplicateUid { uid });
                continue;
            }
            let mut poly = BuildingPolygon::new(uid, ring, label);
            let moved = poly.clamp_to(width, height);
            if moved > 0 {
                warnings.push(AnnotationWarning::ClampedVertices { uid: poly.uid.clone(), count: moved });
            }
            ann.buildings.push(poly);
        }
        Ok((ann, warnings))
    }

    /// xBD-compatible label document.
    pub fn to_label_json(&self) -> serde_json::Value {
        let xy: Vec<_> = self
            .buildings
            .iter()
            .map(|b| {
                json!({
                    "wkt": b.to_wkt(),
                    "properties": { "feature_type": "building", "subtype": b.label.subtype(), "uid": b.uid },
                })
            })
            .collect();
        json!({
            "features": { "xy": xy },
            "metadata": { "width": self.width, "height": self.height, "img_name": self.scene_id },
        })
    }

    pub fn building(&self, uid: &str) -> Option<&BuildingPolygon> {
        self.buildings.iter().find(|b| b.uid == uid)
    }

    /// Checks uid uniqueness and that no building is labeled background.
    pub fn validate(&self) -> Result<(), RasterError> {
        let mut seen = HashSet::new();
        for b in &self.buildings {
            if !seen.insert(b.uid.as_str()) {
                return Err(RasterError::InvalidAnnotation(format!("duplicate uid {}", b.uid)));
            }
            if b.label == DamageClass::Background {
                return Err(RasterError::InvalidAnnotation(format!("building {} labeled background", b.uid)));
            }
        }
        Ok(())
    }
}
