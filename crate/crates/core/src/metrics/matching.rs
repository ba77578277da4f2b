use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::objects::{iou, DetectionSet};
use crate::raster::DamageClass;

use super::{Counts, MetricError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
}

/// One-to-one pairing of predictions with ground truth.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchAssignment {
    /// In the order the predictions were processed.
    pub pairs: Vec<MatchPair>,
    pub unmatched_predictions: Vec<usize>,
    pub unmatched_ground_truths: Vec<usize>,
    pub class_aware: bool,
}

/// Greedy matching at `iou_threshold`.
///
/// Predictions are visited by score (descending), then area (descending),
/// then box (lexicographic on x0, y0, x1, y1), then index. Each takes the
/// free ground truth with the highest IoU, provided that IoU is positive and
/// at least the threshold; equal IoUs go to the lower ground-truth index.
/// With `class_aware`, only ground truth of the same label is eligible.
pub fn match_detections(
    preds: &DetectionSet,
    gts: &DetectionSet,
    iou_threshold: f64,
    class_aware: bool,
) -> Result<MatchAssignment, MetricError> {
    if preds.scene_id != gts.scene_id {
        return Err(MetricError::SceneMismatch { pred: preds.scene_id.clone(), gt: gts.scene_id.clone() });
    }
    let p = &preds.detections;
    let g = &gts.detections;
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        p[b].score
            .partial_cmp(&p[a].score)
            .unwrap_or(Ordering::Equal)
            .then(p[b].area.cmp(&p[a].area))
            .then(p[a].bbox.cmp(&p[b].bbox))
            .then(a.cmp(&b))
    });
    let mut taken = vec![false; g.len()];
    let mut out = MatchAssignment { class_aware, ..Default::default() };
    for i in order {
        let mut best: Option<(usize, f64)> = None;
        for (j, gt) in g.iter().enumerate() {
            if taken[j] || (class_aware && gt.label != p[i].label) {
                continue;
            }
            let v = iou(&p[i].bbox, &gt.bbox);
            if v > 0.0 && v >= iou_threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        match best {
            Some((j, v)) => {
                taken[j] = true;
                out.pairs.push(MatchPair { pred: i, gt: j, iou: v });
            }
            None => out.unmatched_predictions.push(i),
        }
    }
    out.unmatched_predictions.sort_unstable();
    out.unmatched_ground_truths = (0..g.len()).filter(|&j| !taken[j]).collect();
    Ok(out)
}

/// What an object F1 is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectClass {
    /// Class-agnostic: any matched pair is a true positive.
    Localization,
    Damage(DamageClass),
}

/// Object counts from an assignment.
///
/// For [`ObjectClass::Damage`] the assignment should be class-aware; pairs,
/// leftover predictions and leftover ground truth are restricted to the class.
pub fn object_counts(assignment: &MatchAssignment, preds: &DetectionSet, gts: &DetectionSet, class: ObjectClass) -> Counts {
    match class {
        ObjectClass::Localization => Counts::new(
            assignment.pairs.len() as u64,
            assignment.unmatched_predictions.len() as u64,
            assignment.unmatched_ground_truths.len() as u64,
        ),
        ObjectClass::Damage(c) => {
            let pred_is = |i: &usize| preds.detections[*i].label == c;
            let gt_is = |j: &usize| gts.detections[*j].label == c;
            Counts::new(
                assignment.pairs.iter().filter(|m| gt_is(&m.gt)).count() as u64,
                assignment.unmatched_predictions.iter().filter(|i| pred_is(i)).count() as u64,
                assignment.unmatched_ground_truths.iter().filter(|j| gt_is(j)).count() as u64,
            )
        }
    }
}

pub fn object_f1(assignment: &MatchAssignment, preds: &DetectionSet, gts: &DetectionSet, class: ObjectClass) -> (f64, Counts) {
    let c = object_counts(assignment, preds, gts, class);
    (c.f1(), c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objects::{Detection, Origin};
    use crate::raster::BBox;
    use proptest::prelude::*;

    fn det(b: BBox, label: DamageClass) -> Detection {
        Detection { bbox: b, label, score: 1.0, area: b.area(), origin: Origin::FromMask, uid: None, degenerate_vote: false }
    }

    fn set(boxes: &[(BBox, DamageClass)]) -> DetectionSet {
        let mut s = DetectionSet::new("s", 256, 256);
        s.detections = boxes.iter().map(|&(b, l)| det(b, l)).collect();
        s
    }

    /// Maximum-cardinality bipartite matching (augmenting paths).
    fn max_matching(adj: &[Vec<usize>], n_right: usize) -> usize {
        fn augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                        owner[v] = Some(u);
                        return true;
                    }
                }
            }
            false
        }
        let mut owner = vec![None; n_right];
        (0..adj.len()).filter(|&u| augment(u, adj, &mut vec![false; n_right], &mut owner)).count()
    }

    #[test]
    fn identical_sets_match_fully() {
        let s = set(&[(BBox::new(0, 0, 4, 4), DamageClass::NoDamage), (BBox::new(10, 10, 19, 12), DamageClass::Destroyed)]);
        let a = match_detections(&s, &s, 0.5, true).unwrap();
        assert_eq!(a.pairs.len(), 2);
        assert!(a.pairs.iter().all(|m| m.iou == 1.0 && m.pred == m.gt));
        assert_eq!(object_f1(&a, &s, &s, ObjectClass::Localization).0, 1.0);
    }

    #[test]
    fn best_of_two_overlaps() {
        // pred 20x20; gt A is 12x20 inside it (IoU 240/400 = 0.6), gt B is 11x20 (220/400 = 0.55).
        let pred = set(&[(BBox::new(0, 0, 19, 19), DamageClass::Destroyed)]);
        let gts = set(&[(BBox::new(0, 0, 10, 19), DamageClass::Destroyed), (BBox::new(0, 0, 11, 19), DamageClass::Destroyed)]);
        let m = match_detections(&pred, &gts, 0.5, false).unwrap();
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].gt, 1);
        assert!((m.pairs[0].iou - 0.6).abs() < 1e-15);
        assert_eq!(m.unmatched_ground_truths, vec![0]);
    }

    #[test]
    fn threshold_is_inclusive() {
        // 0.5 exactly: pred 10x10, gt 5x10 inside it.
        let pred = set(&[(BBox::new(0, 0, 9, 9), DamageClass::NoDamage)]);
        let gt = set(&[(BBox::new(0, 0, 4, 9), DamageClass::NoDamage)]);
        assert_eq!(match_detections(&pred, &gt, 0.5, false).unwrap().pairs.len(), 1);
        // 49/100 -> 0.49 below threshold
        let gt = set(&[(BBox::new(0, 0, 6, 6), DamageClass::NoDamage)]);
        let m = match_detections(&pred, &gt, 0.5, false).unwrap();
        assert!(m.pairs.is_empty());
        assert_eq!((m.unmatched_predictions.clone(), m.unmatched_ground_truths.clone()), (vec![0], vec![0]));
    }

    #[test]
    fn class_aware_blocks_cross_class_pairs() {
        let pred = set(&[(BBox::new(0, 0, 9, 9), DamageClass::MajorDamage)]);
        let gt = set(&[(BBox::new(0, 0, 9, 9), DamageClass::Destroyed)]);
        assert_eq!(match_detections(&pred, &gt, 0.5, false).unwrap().pairs.len(), 1);
        let m = match_detections(&pred, &gt, 0.5, true).unwrap();
        assert!(m.pairs.is_empty());
        assert_eq!(object_counts(&m, &pred, &gt, ObjectClass::Damage(DamageClass::MajorDamage)), Counts::new(0, 1, 0));
        assert_eq!(object_counts(&m, &pred, &gt, ObjectClass::Damage(DamageClass::Destroyed)), Counts::new(0, 0, 1));
        assert_eq!(object_counts(&m, &pred, &gt, ObjectClass::Damage(DamageClass::NoDamage)).f1(), 1.0);
    }

    #[test]
    fn fused_swath() {
        // Five 4x4 buildings in a row with 1-px gaps; one prediction box covers all of them.
        let gts: Vec<_> = (0..5).map(|i| (BBox::new(2 + 5 * i, 2, 5 + 5 * i, 5), DamageClass::Destroyed)).collect();
        let pred = set(&[(BBox::new(2, 2, 25, 5), DamageClass::Destroyed)]);
        let m = match_detections(&pred, &set(&gts), 0.5, false).unwrap();
        // each IoU = 16 / 96
        assert_eq!(object_counts(&m, &pred, &set(&gts), ObjectClass::Localization), Counts::new(0, 1, 5));
    }

    #[test]
    fn empty_sets_score_one() {
        let e = set(&[]);
        let m = match_detections(&e, &e, 0.5, false).unwrap();
        assert_eq!(object_f1(&m, &e, &e, ObjectClass::Localization), (1.0, Counts::default()));
    }

    #[test]
    fn scene_mismatch() {
        let mut other = set(&[]);
        other.scene_id = "t".into();
        assert!(matches!(match_detections(&set(&[]), &other, 0.5, false), Err(MetricError::SceneMismatch { .. })));
    }

    fn arb_boxes(n: usize) -> impl Strategy<Value = Vec<BBox>> {
        proptest::collection::vec((0u32..40, 0u32..40, 1u32..12, 1u32..12), 0..=n)
            .prop_map(|v| v.into_iter().map(|(x, y, w, h)| BBox::new(x, y, x + w - 1, y + h - 1)).collect())
    }

    proptest! {
        #[test]
        fn greedy_never_beats_max_matching(p in arb_boxes(12), g in arb_boxes(12)) {
            let preds = set(&p.iter().map(|&b| (b, DamageClass::NoDamage)).collect::<Vec<_>>());
            let gts = set(&g.iter().map(|&b| (b, DamageClass::NoDamage)).collect::<Vec<_>>());
            let m = match_detections(&preds, &gts, 0.5, false).unwrap();
            let adj: Vec<Vec<usize>> = p.iter().map(|a| (0..g.len()).filter(|&j| iou(a, &g[j]) >= 0.5).collect()).collect();
            let best = max_matching(&adj, g.len());
            prop_assert!(m.pairs.len() <= best);
            if adj.iter().all(|row| row.len() <= 1) {
                prop_assert_eq!(m.pairs.len(), best);
            }
            let mut used: Vec<usize> = m.pairs.iter().map(|x| x.gt).chain(m.unmatched_ground_truths.iter().copied()).collect();
            used.sort_unstable();
            prop_assert_eq!(used, (0..g.len()).collect::<Vec<_>>());
        }
    }
}
