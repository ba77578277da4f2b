use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::objects::{annotation_to_detections, iou, masks_to_detections, Connectivity, DetectionConfig};
use crate::raster::{build_target_masks, ClassMask, DamageClass, SceneAnnotation};

use super::{
    check_same_size, collapse_classes, match_detections, object_counts, pixel_counts, xview2_score, Counts, MetricError,
    ObjectClass, HIGH, LOW,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub iou_threshold: f64,
    pub connectivity: Connectivity,
    pub min_area: u64,
    /// Also score the two-level (low/high) collapse.
    pub collapse: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { iou_threshold: 0.5, connectivity: Connectivity::Eight, min_area: 0, collapse: false }
    }
}

impl MetricConfig {
    pub fn detection(&self) -> DetectionConfig {
        DetectionConfig { connectivity: self.connectivity, min_area: self.min_area }
    }
}

/// One value per damage level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PerClass<T> {
    pub no_damage: T,
    pub minor_damage: T,
    pub major_damage: T,
    pub destroyed: T,
}

impl<T: Copy> PerClass<T> {
    pub fn from_array([a, b, c, d]: [T; 4]) -> Self {
        Self { no_damage: a, minor_damage: b, major_damage: c, destroyed: d }
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.no_damage, self.minor_damage, self.major_damage, self.destroyed]
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> PerClass<U> {
        PerClass::from_array(self.to_array().map(f))
    }
}

pub type ClassF1 = PerClass<f64>;

/// Raw counts behind a report. Merging is elementwise addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneCounts {
    pub scenes: u64,
    pub pixel_localization: Counts,
    pub pixel_damage: PerClass<Counts>,
    pub object_localization: Counts,
    pub object_damage: PerClass<Counts>,
    /// Low and high counts, present when collapse scoring is on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapsed: Option<[Counts; 2]>,
    /// Pixels under unclassified buildings, left out of every pixel count.
    pub ignored_pixels: u64,
    /// Unmatched predictions lying on unclassified buildings, not counted as false positives.
    pub ignored_objects: u64,
    /// Predicted components whose damage pixels were all background.
    pub degenerate_votes: u64,
}

impl SceneCounts {
    pub fn merge(&self, o: &SceneCounts) -> SceneCounts {
        let add4 = |a: PerClass<Counts>, b: PerClass<Counts>| {
            let (x, y) = (a.to_array(), b.to_array());
            PerClass::from_array([x[0] + y[0], x[1] + y[1], x[2] + y[2], x[3] + y[3]])
        };
        let collapsed = match (self.collapsed, o.collapsed) {
            (None, None) => None,
            (a, b) => {
                let (a, b) = (a.unwrap_or_default(), b.unwrap_or_default());
                Some([a[0] + b[0], a[1] + b[1]])
            }
        };
        SceneCounts {
            scenes: self.scenes + o.scenes,
            pixel_localization: self.pixel_localization + o.pixel_localization,
            pixel_damage: add4(self.pixel_damage, o.pixel_damage),
            object_localization: self.object_localization + o.object_localization,
            object_damage: add4(self.object_damage, o.object_damage),
            collapsed,
            ignored_pixels: self.ignored_pixels + o.ignored_pixels,
            ignored_objects: self.ignored_objects + o.ignored_objects,
            degenerate_votes: self.degenerate_votes + o.degenerate_votes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelScores {
    pub localization_f1: f64,
    pub damage_f1: ClassF1,
    pub overall_damage_f1: f64,
    pub xview2_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectScores {
    pub localization_f1: f64,
    pub damage_f1: ClassF1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapsedScores {
    pub low_f1: f64,
    pub high_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Scene id, or `"aggregate"` for a merged report.
    pub scene_id: String,
    pub pixel: PixelScores,
    pub object: ObjectScores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapsed: Option<CollapsedScores>,
    pub counts: SceneCounts,
}

impl EvalReport {
    pub fn from_counts(scene_id: impl Into<String>, counts: SceneCounts) -> Self {
        let loc = counts.pixel_localization.f1();
        let damage = counts.pixel_damage.map(|c| c.f1());
        let (overall, score) = xview2_score(loc, &damage.to_array());
        EvalReport {
            scene_id: scene_id.into(),
            pixel: PixelScores { localization_f1: loc, damage_f1: damage, overall_damage_f1: overall, xview2_score: score },
            object: ObjectScores {
                localization_f1: counts.object_localization.f1(),
                damage_f1: counts.object_damage.map(|c| c.f1()),
            },
            collapsed: counts.collapsed.map(|[l, h]| CollapsedScores { low_f1: l.f1(), high_f1: h.f1() }),
            counts,
        }
    }

    /// Micro-averaged report over many scenes: counts are summed first.
    pub fn aggregate<'a>(reports: impl IntoIterator<Item = &'a EvalReport>) -> EvalReport {
        let total = reports.into_iter().fold(SceneCounts::default(), |acc, r| acc.merge(&r.counts));
        EvalReport::from_counts("aggregate", total)
    }

    /// Every F1 in the report, for bulk checks.
    pub fn all_f1(&self) -> Vec<f64> {
        let mut v = vec![self.pixel.localization_f1, self.pixel.overall_damage_f1, self.pixel.xview2_score, self.object.localization_f1];
        v.extend(self.pixel.damage_f1.to_array());
        v.extend(self.object.damage_f1.to_array());
        if let Some(c) = self.collapsed {
            v.extend([c.low_f1, c.high_f1]);
        }
        v
    }
}

/// Scores one scene's predicted masks against its annotation.
///
/// The predicted damage class of a pixel is `pred_dam` where `pred_loc` is
/// nonzero and background elsewhere; damage F1 is counted over all pixels.
/// Pixels and objects of unclassified buildings are ignored.
pub fn evaluate_scene(
    pred_loc: &ClassMask,
    pred_dam: &ClassMask,
    gt: &SceneAnnotation,
    config: &MetricConfig,
) -> Result<EvalReport, MetricError> {
    let target = build_target_masks(gt);
    check_same_size(pred_loc, &target.dam)?;
    check_same_size(pred_dam, &target.dam)?;
    let ignore = Some(target.ignore.as_slice());

    let effective: Vec<u8> = pred_loc.data().iter().zip(pred_dam.data()).map(|(&l, &d)| if l != 0 { d } else { 0 }).collect();
    let effective = ClassMask::from_raw(pred_dam.width(), pred_dam.height(), effective).expect("codes come from a valid mask");

    let mut counts = SceneCounts {
        scenes: 1,
        pixel_localization: pixel_counts(&pred_loc.localization(), &target.loc, 1, ignore)?,
        pixel_damage: PerClass::from_array(
            [1u8, 2, 3, 4].map(|code| pixel_counts(&effective, &target.dam, code, ignore).expect("sizes checked")),
        ),
        ignored_pixels: target.ignore_count() as u64,
        ..Default::default()
    };
    if config.collapse {
        let (p, g) = (collapse_classes(&effective), collapse_classes(&target.dam));
        counts.collapsed = Some([pixel_counts(&p, &g, LOW, ignore)?, pixel_counts(&p, &g, HIGH, ignore)?]);
    }

    let preds = masks_to_detections(&gt.scene_id, pred_loc, &effective, &config.detection())?;
    let gts = annotation_to_detections(gt);
    counts.degenerate_votes = preds.detections.iter().filter(|d| d.degenerate_vote).count() as u64;

    let mut loc = match_detections(&preds, &gts.set, config.iou_threshold, false)?;
    let mut aware = match_detections(&preds, &gts.set, config.iou_threshold, true)?;
    let on_unclassified: BTreeSet<usize> = (0..preds.len())
        .filter(|&i| {
            let b = &preds.detections[i].bbox;
            gts.unclassified.iter().any(|u| {
                let v = iou(b, u);
                v > 0.0 && v >= config.iou_threshold
            })
        })
        .collect();
    counts.ignored_objects = loc.unmatched_predictions.iter().filter(|i| on_unclassified.contains(i)).count() as u64;
    loc.unmatched_predictions.retain(|i| !on_unclassified.contains(i));
    aware.unmatched_predictions.retain(|i| !on_unclassified.contains(i));

    counts.object_localization = object_counts(&loc, &preds, &gts.set, ObjectClass::Localization);
    counts.object_damage =
        PerClass::from_array(DamageClass::DAMAGE_LEVELS.map(|c| object_counts(&aware, &preds, &gts.set, ObjectClass::Damage(c))));
    Ok(EvalReport::from_counts(gt.scene_id.clone(), counts))
}

#[derive(Serialize)]
struct CsvRow<'a> {
    scene_id: &'a str,
    xview2_score: f64,
    pixel_localization_f1: f64,
    pixel_overall_damage_f1: f64,
    pixel_no_damage_f1: f64,
    pixel_minor_damage_f1: f64,
    pixel_major_damage_f1: f64,
    pixel_destroyed_f1: f64,
    object_localization_f1: f64,
    object_no_damage_f1: f64,
    object_minor_damage_f1: f64,
    object_major_damage_f1: f64,
    object_destroyed_f1: f64,
    low_f1: Option<f64>,
    high_f1: Option<f64>,
    pixel_localization_tp: u64,
    pixel_localization_fp: u64,
    pixel_localization_fn: u64,
    object_localization_tp: u64,
    object_localization_fp: u64,
    object_localization_fn: u64,
}

/// One CSV row per report.
pub fn write_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        let [pn, pm, pj, pd] = r.pixel.damage_f1.to_array();
        let [on, om, oj, od] = r.object.damage_f1.to_array();
        let (pl, ol) = (r.counts.pixel_localization, r.counts.object_localization);
        w.serialize(CsvRow {
            scene_id: &r.scene_id,
            xview2_score: r.pixel.xview2_score,
            pixel_localization_f1: r.pixel.localization_f1,
            pixel_overall_damage_f1: r.pixel.overall_damage_f1,
            pixel_no_damage_f1: pn,
            pixel_minor_damage_f1: pm,
            pixel_major_damage_f1: pj,
            pixel_destroyed_f1: pd,
            object_localization_f1: r.object.localization_f1,
            object_no_damage_f1: on,
            object_minor_damage_f1: om,
            object_major_damage_f1: oj,
            object_destroyed_f1: od,
            low_f1: r.collapsed.map(|c| c.low_f1),
            high_f1: r.collapsed.map(|c| c.high_f1),
            pixel_localization_tp: pl.tp,
            pixel_localization_fp: pl.fp,
            pixel_localization_fn: pl.fn_,
            object_localization_tp: ol.tp,
            object_localization_fp: ol.fp,
            object_localization_fn: ol.fn_,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::BuildingPolygon;

    fn scene() -> SceneAnnotation {
        // 16x16: A = destroyed 4x4 at (1,1); B = no-damage 4x3 at (6,1); C = major 3x3 at (10,10).
        let mut s = SceneAnnotation::new("hand", 16, 16);
        s.buildings.push(BuildingPolygon::rect("A", 1.0, 1.0, 5.0, 5.0, DamageClass::Destroyed));
        s.buildings.push(BuildingPolygon::rect("B", 6.0, 1.0, 10.0, 4.0, DamageClass::NoDamage));
        s.buildings.push(BuildingPolygon::rect("C", 10.0, 10.0, 13.0, 13.0, DamageClass::MajorDamage));
        s
    }

    #[test]
    fn perfect_prediction() {
        let t = build_target_masks(&scene());
        let r = evaluate_scene(&t.loc, &t.dam, &scene(), &MetricConfig { collapse: true, ..Default::default() }).unwrap();
        assert!(r.all_f1().iter().all(|&f| f == 1.0), "{r:?}");
        assert_eq!(r.counts.object_localization, Counts::new(3, 0, 0));
    }

    #[test]
    fn background_prediction() {
        let z = ClassMask::new(16, 16);
        let r = evaluate_scene(&z, &z, &scene(), &MetricConfig::default()).unwrap();
        assert_eq!(r.pixel.localization_f1, 0.0);
        assert_eq!(r.object.localization_f1, 0.0);
        assert_eq!(r.counts.pixel_localization, Counts::new(0, 0, 16 + 12 + 9));
        assert_eq!(r.counts.object_localization, Counts::new(0, 0, 3));
    }

    #[test]
    fn fused_prediction_by_hand() {
        // A covers x 1..4, y 1..4 and B covers x 6..9, y 1..3. The prediction fills
        // x 1..9, y 1..4, so column 5 fuses them into one 36-pixel component whose
        // damage mask is all destroyed. C is predicted exactly as major.
        let gt = scene();
        let mut loc = ClassMask::new(16, 16);
        let mut dam = ClassMask::new(16, 16);
        for y in 1..=4 {
            for x in 1..=9 {
                loc.set_code(x, y, 1);
                dam.set_code(x, y, 4);
            }
        }
        for y in 10..=12 {
            for x in 10..=12 {
                loc.set_code(x, y, 1);
                dam.set_code(x, y, 3);
            }
        }
        let r = evaluate_scene(&loc, &dam, &gt, &MetricConfig { collapse: true, ..Default::default() }).unwrap();
        let c = r.counts;
        // Pixels. GT loc: A 16 (x1..4,y1..4), B 12 (x6..9,y1..3), C 9.
        // Pred loc: 36 + 9. TP = 16 + 12 + 9 = 37, FP = 36 - 28 = 8 (column 5 and B's row 4), FN = 0.
        assert_eq!(c.pixel_localization, Counts::new(37, 8, 0));
        // destroyed: pred 36, gt 16 -> tp 16, fp 20. no-damage: gt 12 all missed.
        assert_eq!(c.pixel_damage.destroyed, Counts::new(16, 20, 0));
        assert_eq!(c.pixel_damage.no_damage, Counts::new(0, 0, 12));
        assert_eq!(c.pixel_damage.major_damage, Counts::new(9, 0, 0));
        assert_eq!(c.pixel_damage.minor_damage, Counts::default());
        // Collapsed: low gt 12 missed (predicted high); high tp 16 + 9, fp 20.
        assert_eq!(c.collapsed, Some([Counts::new(0, 0, 12), Counts::new(25, 20, 0)]));
        // Objects. Fused box (1,1)-(9,4) = 36 px. IoU with A (1,1)-(4,4): 16/36 < 0.5;
        // with B (6,1)-(9,3): 12/36 < 0.5. So it is a false positive; C matches.
        assert_eq!(c.object_localization, Counts::new(1, 1, 2));
        assert_eq!(c.object_damage.destroyed, Counts::new(0, 1, 1));
        assert_eq!(c.object_damage.no_damage, Counts::new(0, 0, 1));
        assert_eq!(c.object_damage.major_damage, Counts::new(1, 0, 0));
        assert!((r.object.localization_f1 - 2.0 / 5.0).abs() < 1e-15);
        let loc_f1 = 74.0 / 82.0;
        assert!((r.pixel.localization_f1 - loc_f1).abs() < 1e-15);
        assert_eq!(r.pixel.overall_damage_f1, 0.0);
        assert!((r.pixel.xview2_score - 0.3 * loc_f1).abs() < 1e-15);
    }

    #[test]
    fn unclassified_is_ignored_everywhere() {
        let mut gt = scene();
        gt.buildings[1].label = DamageClass::Unclassified;
        let t = build_target_masks(&gt);
        let r = evaluate_scene(&t.loc, &t.dam, &gt, &MetricConfig::default()).unwrap();
        assert!(r.all_f1().iter().all(|&f| f == 1.0), "{r:?}");
        assert_eq!(r.counts.ignored_pixels, 12);
        assert_eq!(r.counts.ignored_objects, 1);
        assert_eq!(r.counts.object_localization, Counts::new(2, 0, 0));
    }

    #[test]
    fn aggregation_is_order_free() {
        let gt = scene();
        let t = build_target_masks(&gt);
        let z = ClassMask::new(16, 16);
        let a = evaluate_scene(&t.loc, &t.dam, &gt, &MetricConfig::default()).unwrap();
        let b = evaluate_scene(&z, &z, &gt, &MetricConfig::default()).unwrap();
        let ab = EvalReport::aggregate([&a, &b]);
        assert_eq!(ab, EvalReport::aggregate([&b, &a]));
        assert_eq!(ab.counts.scenes, 2);
        assert_eq!(ab.counts.pixel_localization, Counts::new(37, 0, 37));
        assert!((ab.pixel.localization_f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn json_and_csv() {
        let gt = scene();
        let t = build_target_masks(&gt);
        let r = evaluate_scene(&t.loc, &t.dam, &gt, &MetricConfig { collapse: true, ..Default::default() }).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["pixel"]["damage_f1"]["destroyed"], 1.0);
        assert_eq!(v["counts"]["pixel_localization"]["fn"], 0);
        let back: EvalReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
        let mut buf = Vec::new();
        write_csv(&[r.clone(), EvalReport::aggregate([&r])], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().next().unwrap().starts_with("scene_id,xview2_score"));
        assert!(text.lines().nth(2).unwrap().starts_with("aggregate,1.0"));
    }

    #[test]
    fn size_mismatch() {
        let z = ClassMask::new(8, 8);
        assert!(matches!(evaluate_scene(&z, &z, &scene(), &MetricConfig::default()), Err(MetricError::DimensionMismatch { .. })));
    }
}
