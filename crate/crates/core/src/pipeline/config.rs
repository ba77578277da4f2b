use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blend::BlendConfig;
use crate::metrics::MetricConfig;
use crate::objects::Connectivity;
use crate::raster::DamageClass;

use super::{io_err, CandidatePolicy, PipelineError};

/// Flat key/value run configuration, read from TOML.
///
/// Every key is optional; command-line flags override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// xBD-layout root: `<input_dir>/<split>/{images,labels}`.
    pub input_dir: Option<PathBuf>,
    /// Flat directory of `<scene_id>_pre_disaster.png` alternate-date images.
    pub secondary_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Splits to process; empty means every subdirectory of `input_dir` with a `labels` folder.
    pub splits: Vec<String>,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,

    pub dilation_px: u32,
    pub cg_tolerance: f64,
    pub cg_max_iters: usize,
    pub window_margin_px: u32,

    pub eligible_classes: Vec<DamageClass>,
    pub exclude_uids: Vec<String>,
    pub min_pixels: usize,

    pub iou_threshold: f64,
    pub connectivity: Connectivity,
    pub min_area: u64,
    pub collapse: bool,

    pub pred_dir: Option<PathBuf>,
    pub gt_dir: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let blend = BlendConfig::default();
        let metric = MetricConfig::default();
        let policy = CandidatePolicy::default();
        Self {
            input_dir: None,
            secondary_dir: None,
            output_dir: None,
            splits: Vec::new(),
            workers: 0,
            dilation_px: blend.dilation_px,
            cg_tolerance: blend.cg_tolerance,
            cg_max_iters: blend.cg_max_iters,
            window_margin_px: blend.window_margin_px,
            eligible_classes: policy.eligible_classes,
            exclude_uids: policy.exclude_uids,
            min_pixels: policy.min_pixels,
            iou_threshold: metric.iou_threshold,
            connectivity: metric.connectivity,
            min_area: metric.min_area,
            collapse: metric.collapse,
            pred_dir: None,
            gt_dir: None,
            report: None,
            csv: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            for p in [&mut cfg.input_dir, &mut cfg.secondary_dir, &mut cfg.output_dir, &mut cfg.pred_dir, &mut cfg.gt_dir, &mut cfg.report, &mut cfg.csv]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn blend(&self) -> BlendConfig {
        BlendConfig {
            dilation_px: self.dilation_px,
            cg_tolerance: self.cg_tolerance,
            cg_max_iters: self.cg_max_iters,
            window_margin_px: self.window_margin_px,
        }
    }

    pub fn metric(&self) -> MetricConfig {
        MetricConfig { iou_threshold: self.iou_threshold, connectivity: self.connectivity, min_area: self.min_area, collapse: self.collapse }
    }

    pub fn policy(&self) -> CandidatePolicy {
        CandidatePolicy { eligible_classes: self.eligible_classes.clone(), exclude_uids: self.exclude_uids.clone(), min_pixels: self.min_pixels }
    }

    /// Range checks that do not touch the file system.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if !(self.cg_tolerance > 0.0 && self.cg_tolerance < 1.0) {
            return bad("cg_tolerance must be in (0, 1)");
        }
        if self.cg_max_iters == 0 {
            return bad("cg_max_iters must be positive");
        }
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return bad("iou_threshold must be in [0, 1]");
        }
        if self.eligible_classes.iter().any(|c| c.severity().is_none()) {
            return bad("eligible_classes must be damage levels");
        }
        Ok(())
    }
}
