//! Scene ingest, single-building sample generation, and batch scoring.

mod config;
mod generate;
mod scene;
mod score;

pub use config::RunConfig;
pub use generate::{
    generate_dataset, generate_sample, rescan_split, select_blend_candidates, CandidatePolicy, DatasetManifest, FailedItem,
    Sample, SampleRecord, SkippedScene, SplitManifest,
};
pub use scene::{ingest_scene, scene_id_from_label_path, xbd_image_paths, Scene};
pub use score::{score_run, ScoreRun, SceneFailure};

use std::path::{Path, PathBuf};

use crate::blend::BlendError;
use crate::metrics::MetricError;
use crate::raster::RasterError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("{path}: invalid JSON: {message}")]
    BadJson { path: PathBuf, message: String },
    #[error("{what}: expected {expected:?}, got {actual:?}")]
    DimensionMismatch { what: String, expected: (u32, u32), actual: (u32, u32) },
    #[error("building {uid} is not a blend candidate: {reason}")]
    NotACandidate { uid: String, reason: String },
    #[error("scene {0} has no secondary pre-disaster image")]
    MissingSecondaryPre(String),
    #[error("unpaired files: {}", stems.join(", "))]
    UnpairedFile { stems: Vec<String> },
    #[error("self-check failed for {sample_id}: {reason}")]
    SelfCheck { sample_id: String, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Blend(#[from] BlendError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

pub(crate) fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(io_err(path))
}
