use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::{evaluate_scene, write_csv, EvalReport, MetricConfig};
use crate::raster::{label_dimensions, ClassMask, SceneAnnotation};

use super::{io_err, write_json, PipelineError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFailure {
    pub stem: String,
    pub error: String,
}

/// Aggregate and per-scene reports of a scoring run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRun {
    pub config: MetricConfig,
    pub aggregate: EvalReport,
    pub scenes: Vec<EvalReport>,
    pub failures: Vec<SceneFailure>,
}

impl ScoreRun {
    pub fn write_json(&self, path: &Path) -> Result<(), PipelineError> {
        write_json(path, self)
    }

    /// Per-scene rows followed by the aggregate row.
    pub fn write_csv(&self, path: &Path) -> Result<(), PipelineError> {
        let file = std::fs::File::create(path).map_err(io_err(path))?;
        let mut rows = self.scenes.clone();
        rows.push(self.aggregate.clone());
        write_csv(&rows, file).map_err(|e| PipelineError::Io { path: path.to_path_buf(), source: e.into() })
    }
}

enum Prediction {
    Split { loc: PathBuf, dam: PathBuf },
    Single(PathBuf),
}

const GT_SUFFIXES: [&str; 2] = ["_label.json", "_post_disaster.json"];

fn file_names(dir: &Path) -> Result<Vec<String>, PipelineError> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    Ok(names)
}

fn prediction_for(dir: &Path, stem: &str) -> Option<Prediction> {
    let loc = dir.join(format!("{stem}_localization.png"));
    let dam = dir.join(format!("{stem}_damage.png"));
    if loc.is_file() && dam.is_file() {
        return Some(Prediction::Split { loc, dam });
    }
    ["prediction", "target"].iter().map(|s| dir.join(format!("{stem}_{s}.png"))).find(|p| p.is_file()).map(Prediction::Single)
}

fn prediction_stem(name: &str) -> Option<&str> {
    ["_localization.png", "_damage.png", "_prediction.png", "_target.png"].iter().find_map(|s| name.strip_suffix(s))
}

fn score_one(stem: &str, gt_path: &Path, pred: &Prediction, cfg: &MetricConfig) -> Result<EvalReport, PipelineError> {
    let (loc, dam) = match pred {
        Prediction::Split { loc, dam } => (ClassMask::load_binary_png(loc)?, ClassMask::load_png(dam)?),
        Prediction::Single(p) => {
            let m = ClassMask::load_png(p)?;
            (m.localization(), m)
        }
    };
    let json = std::fs::read_to_string(gt_path).map_err(io_err(gt_path))?;
    let bad = |message: String| PipelineError::BadJson { path: gt_path.to_path_buf(), message };
    let (w, h) = label_dimensions(&json).map_err(|e| bad(e.to_string()))?.unwrap_or((loc.width(), loc.height()));
    if (w, h) != (loc.width(), loc.height()) {
        return Err(PipelineError::DimensionMismatch { what: format!("{stem} prediction vs label"), expected: (w, h), actual: (loc.width(), loc.height()) });
    }
    let (ann, warnings) = SceneAnnotation::from_label_json(stem, &json, w, h).map_err(|e| bad(e.to_string()))?;
    for warning in warnings {
        log::warn!("{stem}: {warning:?}");
    }
    Ok(evaluate_scene(&loc, &dam, &ann, cfg)?)
}

/// Scores every prediction in `pred_dir` against its label in `gt_dir`.
///
/// Ground truth is `<stem>_label.json` (or `<stem>_post_disaster.json`).
/// A prediction is either `<stem>_localization.png` plus `<stem>_damage.png`,
/// or one class-coded `<stem>_prediction.png` / `<stem>_target.png`. Any stem
/// present on only one side fails the run with [`PipelineError::UnpairedFile`];
/// per-scene errors are collected and the remaining scenes are still scored.
pub fn score_run(pred_dir: &Path, gt_dir: &Path, cfg: &MetricConfig) -> Result<ScoreRun, PipelineError> {
    for d in [pred_dir, gt_dir] {
        if !d.is_dir() {
            return Err(PipelineError::MissingFile(d.to_path_buf()));
        }
    }
    let mut gts: BTreeMap<String, PathBuf> = BTreeMap::new();
    for name in file_names(gt_dir)? {
        if let Some(stem) = GT_SUFFIXES.iter().find_map(|s| name.strip_suffix(s)) {
            gts.insert(stem.to_string(), gt_dir.join(&name));
        }
    }
    let pred_names = file_names(pred_dir)?;
    let mut unpaired: Vec<String> = Vec::new();
    let mut pairs = Vec::new();
    for (stem, path) in &gts {
        match prediction_for(pred_dir, stem) {
            Some(p) => pairs.push((stem.clone(), path.clone(), p)),
            None => unpaired.push(stem.clone()),
        }
    }
    for name in &pred_names {
        if let Some(stem) = prediction_stem(name) {
            if !gts.contains_key(stem) && !unpaired.iter().any(|s| s == stem) {
                unpaired.push(stem.to_string());
            }
        }
    }
    if !unpaired.is_empty() {
        unpaired.sort();
        return Err(PipelineError::UnpairedFile { stems: unpaired });
    }

    let results: Vec<(String, Result<EvalReport, PipelineError>)> =
        pairs.par_iter().map(|(stem, gt, pred)| (stem.clone(), score_one(stem, gt, pred, cfg))).collect();
    let mut scenes = Vec::new();
    let mut failures = Vec::new();
    for (stem, r) in results {
        match r {
            Ok(report) => scenes.push(report),
            Err(e) => {
                log::error!("{stem}: {e}");
                failures.push(SceneFailure { stem, error: e.to_string() });
            }
        }
    }
    let aggregate = EvalReport::aggregate(&scenes);
    Ok(ScoreRun { config: *cfg, aggregate, scenes, failures })
}
