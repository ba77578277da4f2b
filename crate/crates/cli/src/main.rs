//! `xfbd`: dataset generation, single-building blending, scoring, chip
//! extraction and loss gradient checks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use xfbd_core::blend::{blend, make_blend_region};
use xfbd_core::losses::{gradient_suite, LossConfig, SuiteConfig};
use xfbd_core::objects::Connectivity;
use xfbd_core::pipeline::{generate_dataset, scene_id_from_label_path, score_run, xbd_image_paths, RunConfig};
use xfbd_core::raster::{extract_chip, DamageClass, ImageBuffer, SceneAnnotation};

#[derive(Parser)]
#[command(name = "xfbd", version, about = "Synthetic destroyed-building data and xView2 scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a blended dataset from an xBD-layout directory.
    Generate(GenerateArgs),
    /// Blend one building from the post image into the pre image.
    BlendOne(BlendOneArgs),
    /// Score prediction masks against ground-truth labels.
    Score(ScoreArgs),
    /// Write per-building pre/post chips for one scene.
    Chip(ChipArgs),
    /// Run the randomized gradient check of every loss.
    LossCheck(LossCheckArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input_dir: Option<PathBuf>,
    #[arg(long)]
    secondary_dir: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Split name to process; repeatable.
    #[arg(long = "split")]
    splits: Vec<String>,
    /// Worker threads (0 uses all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    dilation_px: Option<u32>,
    #[arg(long)]
    cg_tolerance: Option<f64>,
    #[arg(long)]
    min_pixels: Option<usize>,
    /// Eligible damage class; repeatable.
    #[arg(long = "eligible")]
    eligible_classes: Vec<DamageClass>,
    /// Building uid to leave out; repeatable.
    #[arg(long = "exclude-uid")]
    exclude_uids: Vec<String>,
}

#[derive(Args)]
struct BlendOneArgs {
    #[arg(long)]
    pre: PathBuf,
    #[arg(long)]
    post: PathBuf,
    /// xBD label JSON holding the building polygon.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    uid: String,
    /// Output PNG for the composite.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    pred_dir: Option<PathBuf>,
    #[arg(long)]
    gt_dir: Option<PathBuf>,
    /// IoU threshold for object matching.
    #[arg(long)]
    iou: Option<f64>,
    /// Component connectivity, 4 or 8.
    #[arg(long)]
    connectivity: Option<Connectivity>,
    #[arg(long)]
    min_area: Option<u64>,
    /// Also report the two-class (low/high damage) scores.
    #[arg(long)]
    collapse: bool,
    /// JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-scene CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ChipArgs {
    /// xBD label JSON of the scene.
    #[arg(long)]
    scene: PathBuf,
    /// Pre image; defaults to the xBD sibling of the label file.
    #[arg(long)]
    pre: Option<PathBuf>,
    /// Post image; defaults to the xBD sibling of the label file.
    #[arg(long)]
    post: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    pad: u32,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct LossCheckArgs {
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 64)]
    length: usize,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    /// Print the table as JSON.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::BlendOne(a) => blend_one(a),
        Command::Score(a) => score(a),
        Command::Chip(a) => chip(a),
        Command::LossCheck(a) => loss_check(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn generate(a: GenerateArgs) -> Result<bool> {
    let mut cfg = load_config(a.config.as_deref())?;
    set(&mut cfg.input_dir, a.input_dir.map(Some));
    set(&mut cfg.secondary_dir, a.secondary_dir.map(Some));
    set(&mut cfg.output_dir, a.output_dir.map(Some));
    set(&mut cfg.workers, a.workers);
    set(&mut cfg.dilation_px, a.dilation_px);
    set(&mut cfg.cg_tolerance, a.cg_tolerance);
    set(&mut cfg.min_pixels, a.min_pixels);
    if !a.splits.is_empty() {
        cfg.splits = a.splits;
    }
    if !a.eligible_classes.is_empty() {
        cfg.eligible_classes = a.eligible_classes;
    }
    cfg.exclude_uids.extend(a.exclude_uids);

    let manifest = generate_dataset(&cfg)?;
    for s in &manifest.splits {
        log::info!(
            "{}: {} samples from {} of {} scenes ({} skipped, {} failed)",
            s.name,
            s.sample_count,
            s.source_image_count,
            s.scene_count,
            s.skipped.len(),
            s.failed.len()
        );
        for f in &s.failed {
            log::error!("{} {}: {}", f.scene_id, f.uid.as_deref().unwrap_or("-"), f.error);
        }
    }
    Ok(!manifest.has_failures())
}

fn blend_one(a: BlendOneArgs) -> Result<bool> {
    let cfg = load_config(a.config.as_deref())?.blend();
    let pre = ImageBuffer::load_png(&a.pre)?;
    let post = ImageBuffer::load_png(&a.post)?;
    let json = std::fs::read_to_string(&a.labels).with_context(|| format!("reading {}", a.labels.display()))?;
    let (ann, _) = SceneAnnotation::from_label_json(scene_id_from_label_path(&a.labels), &json, pre.width(), pre.height())?;
    let Some(building) = ann.building(&a.uid) else {
        bail!("no building with uid {} in {}", a.uid, a.labels.display());
    };
    let region = make_blend_region(building, pre.width(), pre.height(), cfg.dilation_px)?;
    let (composite, report) = blend(&pre, &post, &region, &cfg)?;
    composite.save_png(&a.out)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report.converged)
}

fn score(a: ScoreArgs) -> Result<bool> {
    let mut cfg = load_config(a.config.as_deref())?;
    set(&mut cfg.pred_dir, a.pred_dir.map(Some));
    set(&mut cfg.gt_dir, a.gt_dir.map(Some));
    set(&mut cfg.iou_threshold, a.iou);
    set(&mut cfg.connectivity, a.connectivity);
    set(&mut cfg.min_area, a.min_area);
    set(&mut cfg.report, a.report.map(Some));
    set(&mut cfg.csv, a.csv.map(Some));
    set(&mut cfg.workers, a.workers);
    cfg.collapse |= a.collapse;
    cfg.validate()?;
    let (Some(pred), Some(gt)) = (&cfg.pred_dir, &cfg.gt_dir) else {
        bail!("both --pred-dir and --gt-dir are required");
    };
    let pool = rayon_pool(cfg.workers)?;
    let run = pool.install(|| score_run(pred, gt, &cfg.metric()))?;
    for f in &run.failures {
        log::error!("{}: {}", f.stem, f.error);
    }
    match &cfg.report {
        Some(p) => run.write_json(p)?,
        None => println!("{}", serde_json::to_string_pretty(&run.aggregate)?),
    }
    if let Some(p) = &cfg.csv {
        run.write_csv(p)?;
    }
    let agg = &run.aggregate;
    log::info!("{} scenes: xView2 score {:.4}, object localization F1 {:.4}", agg.counts.scenes, agg.pixel.xview2_score, agg.object.localization_f1);
    Ok(run.failures.is_empty())
}

fn rayon_pool(workers: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}

fn chip(a: ChipArgs) -> Result<bool> {
    let (default_pre, default_post) = xbd_image_paths(&a.scene);
    let pre = ImageBuffer::load_png(a.pre.unwrap_or(default_pre))?;
    let post = ImageBuffer::load_png(a.post.unwrap_or(default_post))?;
    let json = std::fs::read_to_string(&a.scene).with_context(|| format!("reading {}", a.scene.display()))?;
    let (ann, _) = SceneAnnotation::from_label_json(scene_id_from_label_path(&a.scene), &json, pre.width(), pre.height())?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;

    let mut index = Vec::new();
    let mut ok = true;
    for b in &ann.buildings {
        match extract_chip(&pre, &post, b, a.pad) {
            Ok(c) => {
                c.pre_patch.save_png(a.out_dir.join(format!("{}_pre.png", b.uid)))?;
                c.post_patch.save_png(a.out_dir.join(format!("{}_post.png", b.uid)))?;
                index.push(serde_json::json!({
                    "uid": b.uid,
                    "label": c.label,
                    "source_bbox": c.source_bbox,
                    "offset": c.offset,
                    "downscaled": c.downscaled,
                }));
            }
            Err(e) => {
                log::warn!("{}: {e}", b.uid);
                ok = false;
            }
        }
    }
    let doc = serde_json::json!({ "scene_id": ann.scene_id, "pad_size": a.pad, "chips": index });
    std::fs::write(a.out_dir.join("index.json"), serde_json::to_string_pretty(&doc)?)?;
    Ok(ok)
}

fn loss_check(a: LossCheckArgs) -> Result<bool> {
    let suite = SuiteConfig { instances: a.instances, length: a.length, seed: a.seed, ..Default::default() };
    let rows = gradient_suite(&LossConfig::default(), &suite)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        println!("{:<36} {:>9} {:>12}  result", "check", "instances", "worst");
        for r in &rows {
            println!("{:<36} {:>9} {:>12.3e}  {}", r.name, r.instances, r.worst, if r.passed { "PASS" } else { "FAIL" });
        }
    }
    Ok(rows.iter().all(|r| r.passed))
}
