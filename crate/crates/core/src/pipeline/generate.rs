use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blend::{blend, make_blend_region, BlendConfig, SolveReport};
use crate::metrics::PerClass;
use crate::raster::{build_target_masks, polygon_pixels, BuildingPolygon, ClassMask, DamageClass, ImageBuffer, SceneAnnotation};

use super::{ingest_scene, io_err, scene_id_from_label_path, write_json, xbd_image_paths, PipelineError, RunConfig, Scene};

/// Which buildings may be blended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CandidatePolicy {
    pub eligible_classes: Vec<DamageClass>,
    /// Uids never blended, e.g. damage not visible from the roof.
    pub exclude_uids: Vec<String>,
    /// Smallest footprint, in pixels, worth blending.
    pub min_pixels: usize,
}

impl Default for CandidatePolicy {
    fn default() -> Self {
        Self {
            eligible_classes: vec![DamageClass::MinorDamage, DamageClass::MajorDamage, DamageClass::Destroyed],
            exclude_uids: Vec::new(),
            min_pixels: 16,
        }
    }
}

impl CandidatePolicy {
    /// `Err(reason)` when `building` cannot be blended into a `width` x `height` frame.
    pub fn check(&self, building: &BuildingPolygon, width: u32, height: u32, dilation: u32) -> Result<(), String> {
        if !self.eligible_classes.contains(&building.label) {
            return Err(format!("label {} is not eligible", building.label));
        }
        if self.exclude_uids.contains(&building.uid) {
            return Err("uid is on the exclusion list".into());
        }
        let pixels = polygon_pixels(&building.ring, width, height).len();
        if pixels < self.min_pixels {
            return Err(format!("footprint has {pixels} pixels, fewer than {}", self.min_pixels));
        }
        make_blend_region(building, width, height, dilation).map(|_| ()).map_err(|e| e.to_string())
    }
}

/// Buildings of `annotation` that pass `policy`, in annotation order.
pub fn select_blend_candidates(annotation: &SceneAnnotation, policy: &CandidatePolicy, dilation: u32) -> Vec<BuildingPolygon> {
    annotation
        .buildings
        .iter()
        .filter(|b| policy.check(b, annotation.width, annotation.height, dilation).is_ok())
        .cloned()
        .collect()
}

/// One generated training pair with a single damaged building.
#[derive(Debug, Clone)]
pub struct Sample {
    pub sample_id: String,
    pub scene_id: String,
    /// The secondary pre-disaster image.
    pub pre: ImageBuffer,
    /// Original pre image with the one building blended in from the post image.
    pub post_composite: ImageBuffer,
    pub target_loc: ClassMask,
    pub target_dam: ClassMask,
    /// Scene buildings with every label but the blended one set to no-damage.
    pub annotation: SceneAnnotation,
    pub blended_uid: String,
    pub blended_label: DamageClass,
    pub region_pixels: usize,
    pub solve: SolveReport,
}

fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn single_damaged(annotation: &SceneAnnotation, dam: &ClassMask, uid: &str, label: DamageClass) -> Result<(), String> {
    let damaged: Vec<&BuildingPolygon> = annotation.buildings.iter().filter(|b| b.label != DamageClass::NoDamage).collect();
    match damaged.as_slice() {
        [only] if only.uid == uid && only.label == label => {}
        _ => {
            let uids: Vec<&str> = damaged.iter().map(|b| b.uid.as_str()).collect();
            return Err(format!("expected only {uid} damaged, found {uids:?}"));
        }
    }
    let code = label.mask_code();
    if dam.count(code) == 0 {
        return Err(format!("blended building {uid} is fully covered in the target mask"));
    }
    if (1..=4).any(|c| c != 1 && c != code && dam.count(c) > 0) {
        return Err("target mask holds a second damage class".into());
    }
    Ok(())
}

impl Sample {
    /// Verifies the single-damaged-building invariant and target consistency.
    pub fn check(&self) -> Result<(), PipelineError> {
        let fail = |reason: String| PipelineError::SelfCheck { sample_id: self.sample_id.clone(), reason };
        single_damaged(&self.annotation, &self.target_dam, &self.blended_uid, self.blended_label).map_err(fail)?;
        let t = build_target_masks(&self.annotation);
        if t.dam != self.target_dam || t.loc != self.target_loc {
            return Err(fail("targets differ from the rasterized annotation".into()));
        }
        let dims = (self.annotation.width, self.annotation.height);
        for (name, img) in [("pre", &self.pre), ("post", &self.post_composite)] {
            if (img.width(), img.height()) != dims {
                return Err(fail(format!("{name} image size differs from the annotation")));
            }
        }
        Ok(())
    }

    /// xBD-style label document with the blend recorded in `metadata`.
    pub fn label_json(&self) -> serde_json::Value {
        let mut v = self.annotation.to_label_json();
        let meta = v["metadata"].as_object_mut().expect("metadata object");
        meta.insert("source_scene".into(), self.scene_id.clone().into());
        meta.insert("blended_uid".into(), self.blended_uid.clone().into());
        meta.insert("blended_subtype".into(), self.blended_label.subtype().into());
        v
    }

    /// Writes `<id>_pre.png`, `<id>_post.png`, `<id>_target.png` and `<id>_label.json`.
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        let id = &self.sample_id;
        self.pre.save_png(dir.join(format!("{id}_pre.png")))?;
        self.post_composite.save_png(dir.join(format!("{id}_post.png")))?;
        self.target_dam.save_png(dir.join(format!("{id}_target.png")))?;
        write_json(&dir.join(format!("{id}_label.json")), &self.label_json())
    }

    /// Re-reads the written files and repeats the invariant checks on them.
    pub fn verify_written(&self, dir: &Path) -> Result<(), PipelineError> {
        let id = &self.sample_id;
        let fail = |reason: String| PipelineError::SelfCheck { sample_id: id.clone(), reason };
        let target = ClassMask::load_png(dir.join(format!("{id}_target.png")))?;
        if target != self.target_dam {
            return Err(fail("written target differs".into()));
        }
        let path = dir.join(format!("{id}_label.json"));
        let json = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let (ann, warnings) = SceneAnnotation::from_label_json(id.clone(), &json, self.annotation.width, self.annotation.height)?;
        if !warnings.is_empty() {
            return Err(fail(format!("written label re-reads with warnings {warnings:?}")));
        }
        if build_target_masks(&ann).dam != target {
            return Err(fail("written label and target disagree".into()));
        }
        single_damaged(&ann, &target, &self.blended_uid, self.blended_label).map_err(fail)?;
        for suffix in ["pre", "post"] {
            let p = dir.join(format!("{id}_{suffix}.png"));
            if !p.is_file() {
                return Err(PipelineError::MissingFile(p));
            }
        }
        Ok(())
    }
}

/// Blends building `uid` of `scene` from the post image into the pre image.
pub fn generate_sample(scene: &Scene, uid: &str, policy: &CandidatePolicy, config: &BlendConfig) -> Result<Sample, PipelineError> {
    let ann = &scene.annotation;
    let building = ann
        .building(uid)
        .ok_or_else(|| PipelineError::NotACandidate { uid: uid.to_string(), reason: "no building with this uid".into() })?;
    policy
        .check(building, ann.width, ann.height, config.dilation_px)
        .map_err(|reason| PipelineError::NotACandidate { uid: uid.to_string(), reason })?;
    let secondary = scene.secondary_pre.clone().ok_or_else(|| PipelineError::MissingSecondaryPre(scene.scene_id.clone()))?;

    let region = make_blend_region(building, ann.width, ann.height, config.dilation_px)?;
    let (post_composite, solve) = blend(&scene.pre, &scene.post, &region, config)?;
    if !solve.converged {
        log::warn!("{}/{uid}: solver stopped after {} iterations (residual {:e})", scene.scene_id, solve.iterations, solve.relative_residual);
    }

    let sample_id = format!("{}_{}", scene.scene_id, file_safe(uid));
    let mut annotation = ann.clone();
    annotation.scene_id = sample_id.clone();
    for b in &mut annotation.buildings {
        if b.uid != uid {
            b.label = DamageClass::NoDamage;
        }
    }
    let targets = build_target_masks(&annotation);
    let sample = Sample {
        sample_id,
        scene_id: scene.scene_id.clone(),
        pre: secondary,
        post_composite,
        target_loc: targets.loc,
        target_dam: targets.dam,
        annotation,
        blended_uid: uid.to_string(),
        blended_label: building.label,
        region_pixels: region.interior_count(),
        solve,
    };
    sample.check()?;
    Ok(sample)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub scene_id: String,
    pub uid: String,
    pub label: DamageClass,
    pub region_pixels: usize,
    pub solve: SolveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedScene {
    pub scene_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedItem {
    pub scene_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uid: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub name: String,
    pub sample_count: usize,
    /// Scenes that contributed at least one sample.
    pub source_image_count: usize,
    /// Scenes found in the split.
    pub scene_count: usize,
    pub class_counts: PerClass<usize>,
    pub samples: Vec<SampleRecord>,
    pub skipped: Vec<SkippedScene>,
    pub failed: Vec<FailedItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub splits: Vec<SplitManifest>,
    pub blend: BlendConfig,
    pub policy: CandidatePolicy,
}

impl DatasetManifest {
    pub fn sample_count(&self) -> usize {
        self.splits.iter().map(|s| s.sample_count).sum()
    }

    pub fn has_failures(&self) -> bool {
        self.splits.iter().any(|s| !s.failed.is_empty())
    }
}

#[derive(Default)]
struct SceneOutcome {
    samples: Vec<SampleRecord>,
    skipped: Option<SkippedScene>,
    failed: Vec<FailedItem>,
}

fn process_scene(label_path: &Path, cfg: &RunConfig, out_dir: &Path) -> SceneOutcome {
    let scene_id = scene_id_from_label_path(label_path);
    let mut outcome = SceneOutcome::default();
    let secondary = cfg.secondary_dir.as_ref().map(|d| d.join(format!("{scene_id}_pre_disaster.png")));
    let Some(secondary) = secondary.filter(|p| p.is_file()) else {
        log::info!("{scene_id}: skipped, no secondary pre-disaster image");
        outcome.skipped = Some(SkippedScene { scene_id, reason: "no secondary pre-disaster image".into() });
        return outcome;
    };
    let (pre, post) = xbd_image_paths(label_path);
    let scene = match ingest_scene(&pre, &post, label_path, Some(&secondary)) {
        Ok(s) => s,
        Err(e) => {
            log::error!("{scene_id}: {e}");
            outcome.failed.push(FailedItem { scene_id, uid: None, error: e.to_string() });
            return outcome;
        }
    };
    let (policy, blend_cfg) = (cfg.policy(), cfg.blend());
    for building in select_blend_candidates(&scene.annotation, &policy, blend_cfg.dilation_px) {
        let result = generate_sample(&scene, &building.uid, &policy, &blend_cfg).and_then(|s| {
            s.write(out_dir)?;
            s.verify_written(out_dir)?;
            Ok(s)
        });
        match result {
            Ok(s) => outcome.samples.push(SampleRecord {
                sample_id: s.sample_id,
                scene_id: s.scene_id,
                uid: s.blended_uid,
                label: s.blended_label,
                region_pixels: s.region_pixels,
                solve: s.solve,
            }),
            Err(e) => {
                log::error!("{scene_id}/{}: {e}", building.uid);
                outcome.failed.push(FailedItem { scene_id: scene_id.clone(), uid: Some(building.uid.clone()), error: e.to_string() });
            }
        }
    }
    log::info!("{scene_id}: {} samples", outcome.samples.len());
    outcome
}

fn list_dir(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir).map_err(io_err(dir))?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    out.sort();
    Ok(out)
}

fn class_counts(samples: &[SampleRecord]) -> PerClass<usize> {
    let mut counts = [0usize; 4];
    for s in samples {
        if let Some(sev) = s.label.severity() {
            counts[sev as usize] += 1;
        }
    }
    PerClass::from_array(counts)
}

/// Generates one sample per (scene, candidate) over every split of `cfg.input_dir`.
///
/// Unwritable output fails the run immediately. Scenes without a secondary
/// pre-image are skipped; scene and sample errors are recorded in the
/// manifest and the run continues. `manifest.json` lands in `output_dir`.
pub fn generate_dataset(cfg: &RunConfig) -> Result<DatasetManifest, PipelineError> {
    cfg.validate()?;
    let input = cfg.input_dir.as_deref().ok_or_else(|| PipelineError::Config("input_dir is required".into()))?;
    let output = cfg.output_dir.as_deref().ok_or_else(|| PipelineError::Config("output_dir is required".into()))?;
    if !input.is_dir() {
        return Err(PipelineError::MissingFile(input.to_path_buf()));
    }
    std::fs::create_dir_all(output).map_err(io_err(output))?;
    let probe = output.join(".write-probe");
    std::fs::write(&probe, b"").map_err(io_err(&probe))?;
    std::fs::remove_file(&probe).map_err(io_err(&probe))?;

    let splits: Vec<String> = if cfg.splits.is_empty() {
        list_dir(input)?
            .into_iter()
            .filter(|p| p.join("labels").is_dir())
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect()
    } else {
        cfg.splits.clone()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))?;

    let mut manifest = DatasetManifest { splits: Vec::new(), blend: cfg.blend(), policy: cfg.policy() };
    for split in splits {
        let labels_dir = input.join(&split).join("labels");
        if !labels_dir.is_dir() {
            return Err(PipelineError::MissingFile(labels_dir));
        }
        let labels: Vec<PathBuf> = list_dir(&labels_dir)?
            .into_iter()
            .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().ends_with("_post_disaster.json")))
            .collect();
        let out_dir = output.join(&split);
        std::fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
        let outcomes: Vec<SceneOutcome> = pool.install(|| labels.par_iter().map(|l| process_scene(l, cfg, &out_dir)).collect());

        let mut m = SplitManifest {
            name: split.clone(),
            sample_count: 0,
            source_image_count: 0,
            scene_count: labels.len(),
            class_counts: PerClass::default(),
            samples: Vec::new(),
            skipped: Vec::new(),
            failed: Vec::new(),
        };
        for o in outcomes {
            m.source_image_count += !o.samples.is_empty() as usize;
            m.samples.extend(o.samples);
            m.skipped.extend(o.skipped);
            m.failed.extend(o.failed);
        }
        m.sample_count = m.samples.len();
        m.class_counts = class_counts(&m.samples);
        log::info!("split {split}: {} samples from {} scenes ({} skipped, {} failed)", m.sample_count, m.source_image_count, m.skipped.len(), m.failed.len());
        manifest.splits.push(m);
    }
    if manifest.sample_count() == 0 {
        log::warn!("no samples generated");
    }
    write_json(&output.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Counts emitted samples in a split directory from its label files.
pub fn rescan_split(dir: &Path) -> Result<(usize, PerClass<usize>), PipelineError> {
    let mut counts = [0usize; 4];
    let mut total = 0;
    for path in list_dir(dir)? {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let Some(id) = name.strip_suffix("_label.json") else { continue };
        for suffix in ["pre.png", "post.png", "target.png"] {
            let p = dir.join(format!("{id}_{suffix}"));
            if !p.is_file() {
                return Err(PipelineError::MissingFile(p));
            }
        }
        let json = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let v: serde_json::Value = serde_json::from_str(&json).map_err(|e| PipelineError::BadJson { path: path.clone(), message: e.to_string() })?;
        let label: DamageClass = v["metadata"]["blended_subtype"]
            .as_str()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PipelineError::BadJson { path: path.clone(), message: "missing metadata.blended_subtype".into() })?;
        if let Some(sev) = label.severity() {
            counts[sev as usize] += 1;
        }
        total += 1;
    }
    Ok((total, PerClass::from_array(counts)))
}
