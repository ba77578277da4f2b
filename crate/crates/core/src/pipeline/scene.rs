use std::path::{Path, PathBuf};

use crate::raster::{label_dimensions, AnnotationWarning, ImageBuffer, SceneAnnotation};

use super::{io_err, PipelineError};

/// One pre/post pair with its buildings and an optional alternate-date pre image.
#[derive(Debug, Clone)]
pub struct Scene {
    pub scene_id: String,
    pub pre: ImageBuffer,
    pub post: ImageBuffer,
    pub secondary_pre: Option<ImageBuffer>,
    pub annotation: SceneAnnotation,
    pub warnings: Vec<AnnotationWarning>,
}

/// `guatemala-volcano_00000001` from `.../guatemala-volcano_00000001_post_disaster.json`.
pub fn scene_id_from_label_path(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    for suffix in ["_post_disaster", "_pre_disaster"] {
        if let Some(id) = stem.strip_suffix(suffix) {
            return id.to_string();
        }
    }
    stem
}

/// Pre and post image paths of an xBD label file (`<split>/labels/x.json`
/// next to `<split>/images/`).
pub fn xbd_image_paths(label_path: &Path) -> (PathBuf, PathBuf) {
    let id = scene_id_from_label_path(label_path);
    let images = label_path.parent().and_then(Path::parent).map(|p| p.join("images")).unwrap_or_else(|| PathBuf::from("images"));
    (images.join(format!("{id}_pre_disaster.png")), images.join(format!("{id}_post_disaster.png")))
}

fn load(path: &Path) -> Result<ImageBuffer, PipelineError> {
    if !path.is_file() {
        return Err(PipelineError::MissingFile(path.to_path_buf()));
    }
    Ok(ImageBuffer::load_png(path)?)
}

fn same_dims(what: &str, reference: &ImageBuffer, other: &ImageBuffer) -> Result<(), PipelineError> {
    if (reference.width(), reference.height()) != (other.width(), other.height()) {
        return Err(PipelineError::DimensionMismatch {
            what: what.to_string(),
            expected: (reference.width(), reference.height()),
            actual: (other.width(), other.height()),
        });
    }
    Ok(())
}

/// Loads a scene; vertices are clamped to the pre image frame and problems
/// that only drop single buildings are returned as warnings.
pub fn ingest_scene(pre_path: &Path, post_path: &Path, label_path: &Path, secondary_pre_path: Option<&Path>) -> Result<Scene, PipelineError> {
    let pre = load(pre_path)?;
    let post = load(post_path)?;
    same_dims("post image vs pre image", &pre, &post)?;
    let secondary_pre = match secondary_pre_path {
        Some(p) => {
            let img = load(p)?;
            same_dims("secondary pre image vs pre image", &pre, &img)?;
            Some(img)
        }
        None => None,
    };
    if !label_path.is_file() {
        return Err(PipelineError::MissingFile(label_path.to_path_buf()));
    }
    let json = std::fs::read_to_string(label_path).map_err(io_err(label_path))?;
    let bad_json = |message: String| PipelineError::BadJson { path: label_path.to_path_buf(), message };
    if let Some((w, h)) = label_dimensions(&json).map_err(|e| bad_json(e.to_string()))? {
        if (w, h) != (pre.width(), pre.height()) {
            return Err(PipelineError::DimensionMismatch {
                what: "label metadata vs pre image".into(),
                expected: (pre.width(), pre.height()),
                actual: (w, h),
            });
        }
    }
    let scene_id = scene_id_from_label_path(label_path);
    let (annotation, warnings) =
        SceneAnnotation::from_label_json(scene_id.clone(), &json, pre.width(), pre.height()).map_err(|e| bad_json(e.to_string()))?;
    for w in &warnings {
        log::warn!("{scene_id}: {w:?}");
    }
    Ok(Scene { scene_id, pre, post, secondary_pre, annotation, warnings })
}
