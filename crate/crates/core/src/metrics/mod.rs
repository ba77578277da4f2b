//! Pixel-level xView2 scores, class collapse, and object-level F1.

mod matching;
mod report;

pub use matching::{match_detections, object_counts, object_f1, MatchAssignment, MatchPair, ObjectClass};
pub use report::{
    evaluate_scene, write_csv, ClassF1, CollapsedScores, EvalReport, MetricConfig, ObjectScores, PerClass, PixelScores,
    SceneCounts,
};

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::objects::ObjectError;
use crate::raster::ClassMask;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch { expected: (u32, u32), actual: (u32, u32) },
    #[error("prediction scene {pred:?} does not match ground-truth scene {gt:?}")]
    SceneMismatch { pred: String, gt: String },
    #[error(transparent)]
    Object(#[from] ObjectError),
}

/// True positives, false positives and false negatives for one class.
///
/// Counts add elementwise, so per-scene counts can be merged in any order
/// before computing a dataset-level (micro-averaged) F1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }

    pub fn is_zero(&self) -> bool {
        self.tp == 0 && self.fp == 0 && self.fn_ == 0
    }

    /// `2tp / (2tp + fp + fn)`; 1.0 when all three counts are zero.
    pub fn f1(&self) -> f64 {
        if self.is_zero() {
            return 1.0;
        }
        2.0 * self.tp as f64 / (2 * self.tp + self.fp + self.fn_) as f64
    }
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts { tp: self.tp + o.tp, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_ }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

fn check_same_size(a: &ClassMask, b: &ClassMask) -> Result<(), MetricError> {
    if a.same_size(b) {
        Ok(())
    } else {
        Err(MetricError::DimensionMismatch { expected: (b.width(), b.height()), actual: (a.width(), a.height()) })
    }
}

/// Pixel counts for mask code `code`, skipping pixels flagged in `ignore`.
///
/// Every other value, background included, counts as "not this class".
pub fn pixel_counts(pred: &ClassMask, gt: &ClassMask, code: u8, ignore: Option<&[bool]>) -> Result<Counts, MetricError> {
    check_same_size(pred, gt)?;
    if let Some(ig) = ignore {
        assert_eq!(ig.len(), gt.len(), "ignore mask length");
    }
    let mut c = Counts::default();
    for (i, (&p, &g)) in pred.data().iter().zip(gt.data()).enumerate() {
        if ignore.is_some_and(|ig| ig[i]) {
            continue;
        }
        match (p == code, g == code) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

/// Pixel F1 of one mask code together with its counts.
pub fn pixel_f1(pred: &ClassMask, gt: &ClassMask, code: u8, ignore: Option<&[bool]>) -> Result<(f64, Counts), MetricError> {
    let c = pixel_counts(pred, gt, code, ignore)?;
    Ok((c.f1(), c))
}

/// Harmonic mean of the four damage F1s; exactly 0 if any of them is 0.
pub fn harmonic_mean(values: &[f64; 4]) -> f64 {
    if values.contains(&0.0) {
        return 0.0;
    }
    values.len() as f64 / values.iter().map(|v| 1.0 / v).sum::<f64>()
}

/// `(overall_damage_f1, score)` with `score = 0.3 loc + 0.7 overall`.
pub fn xview2_score(localization_f1: f64, damage_f1: &[f64; 4]) -> (f64, f64) {
    let overall = harmonic_mean(damage_f1);
    (overall, 0.3 * localization_f1 + 0.7 * overall)
}

/// Collapsed mask code for no-damage and minor damage.
pub const LOW: u8 = 1;
/// Collapsed mask code for major damage and destroyed.
pub const HIGH: u8 = 2;

/// Two-level damage mask: {1, 2} become [`LOW`], {3, 4} become [`HIGH`].
pub fn collapse_classes(mask: &ClassMask) -> ClassMask {
    let data = mask
        .data()
        .iter()
        .map(|&v| match v {
            0 => 0,
            1 | 2 => LOW,
            _ => HIGH,
        })
        .collect();
    ClassMask::from_raw(mask.width(), mask.height(), data).expect("collapsed codes are valid")
}
