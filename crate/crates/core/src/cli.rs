//! The `hdrgs` command line: dataset generation, training, rendering,
//! evaluation and response-curve export.
//!
//! Configuration is resolved as defaults, then an optional JSON file given
//! with `--config` (or `--spec` for `generate`), then repeated
//! `--set key.path=value` overrides, then the dedicated flags. Unknown keys
//! are rejected. `--dump-config` prints the resolved configuration and exits.
//!
//! Exit codes: 0 on success, 2 for usage and input errors, 3 when training
//! aborts on a non-finite loss.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::checkpoint::ModelCheckpoint;
use crate::dataset::{generate_synthetic, ExposureSelection, MultiExposureDataset, SceneSpec, Split, ViewPose};
use crate::error::{Error, Result};
use crate::geometry::{Camera, Intrinsics};
use crate::image::FloatImage;
use crate::loss::{hdr_log_rmse, psnr, ssim};
use crate::model::reinhard_preview;
use crate::pfm::write_pfm;
use crate::tone::GridConfig;
use crate::train::{train, write_log_csv, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable that sets the worker thread count.
pub const THREADS_ENV: &str = "HDRGS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "hdrgs", version, about = "HDR Gaussian splatting from multi-exposure LDR images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic multi-exposure dataset with ground truth.
    Generate(GenerateArgs),
    /// Train a model on a dataset directory and write a checkpoint.
    Train(TrainArgs),
    /// Render an LDR image at an exposure time, or the HDR radiance.
    Render(RenderArgs),
    /// Per-image PSNR, SSIM and HDR error against a dataset, as CSV.
    Eval(EvalArgs),
    /// Sample the learned response curves as CSV.
    ExportCrf(ExportCrfArgs),
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Override one configuration key, e.g. `--set loss.dssim_weight=0.3`.
    /// Values are parsed as JSON and fall back to plain strings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Scene description (JSON); missing keys take their defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace the dataset files of an existing output directory.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Loss log CSV; defaults to the checkpoint path with a `.log.csv` suffix.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Training configuration (JSON); missing keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Train on the 1st, 3rd, 5th, ... exposure levels only.
    #[arg(long, conflicts_with = "ldr_ne")]
    pub ldr_oe: bool,
    /// Train on the 2nd, 4th, ... exposure levels only.
    #[arg(long)]
    pub ldr_ne: bool,
    /// Skip the sigmoid warm-up and train the grid from the start.
    #[arg(long)]
    pub no_coarse: bool,
    /// Feed raw log exposure times to the tone mapper.
    #[arg(long)]
    pub no_time_scaling: bool,
    /// Use the dense node spacing on both sides of the grid split.
    #[arg(long)]
    pub symmetric_grid: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub coarse_iters: Option<usize>,
    #[arg(long)]
    pub fine_iters: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// View index into `--data`, or a JSON file with `intrinsics`,
    /// `world_to_camera`, `width` and `height`.
    #[arg(long)]
    pub pose: String,
    /// Dataset providing the poses for an index `--pose`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Exposure time in seconds.
    #[arg(long, required_unless_present = "hdr", allow_negative_numbers = true)]
    pub exposure: Option<f64>,
    /// Write linear radiance as PFM instead of an LDR PNG.
    #[arg(long)]
    pub hdr: bool,
    /// Also write a tone-mapped PNG preview of the HDR radiance.
    #[arg(long)]
    pub preview: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportCrfArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Sample range `lo:hi:step`; defaults to the grid domain at 0.01.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
}

/// Camera description accepted by `render --pose <file>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseFile {
    pub intrinsics: Intrinsics,
    /// Row-major 4x4 rigid transform.
    pub world_to_camera: [[f64; 4]; 4],
    pub width: usize,
    pub height: usize,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFiniteLoss { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Render(a) => cmd_render(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::ExportCrf(a) => cmd_export_crf(&a),
    }
}

// ---------------------------------------------------------------- config

/// Defaults, then `file`, then `set` overrides, deserialized strictly.
pub fn resolve_config<T>(file: Option<&Path>, set: &[String]) -> Result<T>
where
    T: Default + Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(T::default())?;
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let patch: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        merge(&mut value, patch);
    }
    for s in set {
        apply_set(&mut value, s)?;
    }
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies one `key.path=value` assignment.
pub fn apply_set(value: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got {assignment:?}")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("bad key {key:?}")));
    }
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = value;
    for part in key.split('.') {
        let Value::Object(map) = slot else {
            return Err(Error::Config(format!("{key}: {part:?} is not inside an object")));
        };
        if !map.contains_key(part) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        slot = map.get_mut(part).expect("checked above");
    }
    *slot = parsed;
    Ok(())
}

fn dump<T: Serialize>(cfg: &T) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(cfg)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn required<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    v.as_deref().ok_or_else(|| Error::Config(format!("{flag} is required")))
}

// ---------------------------------------------------------------- generate

pub fn resolve_spec(a: &GenerateArgs) -> Result<SceneSpec> {
    let mut spec: SceneSpec = resolve_config(a.spec.as_deref(), &a.overrides.set)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let spec = resolve_spec(a)?;
    if a.overrides.dump_config {
        return dump(&spec);
    }
    let out = required(&a.out, "--out")?;
    prepare_output_dir(out, a.force)?;
    let ds = generate_synthetic(&spec)?;
    ds.save(out)?;
    let train_views = ds.views.len() - ds.views.len().min(spec.test_views.len());
    println!(
        "wrote {}: {} views ({} train), {} exposures, {} images, {} points, {}x{}",
        out.display(),
        ds.views.len(),
        train_views,
        ds.exposures.len(),
        ds.images.len(),
        ds.init_points.as_ref().map_or(0, Vec::len),
        ds.width,
        ds.height
    );
    Ok(())
}

const DATASET_ENTRIES: [&str; 4] = ["meta.json", "ldr", "hdr", "crf.csv"];

fn prepare_output_dir(out: &Path, force: bool) -> Result<()> {
    if !out.exists() {
        return Ok(());
    }
    if !out.is_dir() {
        return Err(Error::Config(format!("{} exists and is not a directory", out.display())));
    }
    if fs::read_dir(out)?.next().is_none() {
        return Ok(());
    }
    if !force {
        return Err(Error::Config(format!(
            "{} is not empty; pass --force to replace the dataset",
            out.display()
        )));
    }
    for name in DATASET_ENTRIES {
        let p = out.join(name);
        if p.is_dir() {
            fs::remove_dir_all(&p)?;
        } else if p.exists() {
            fs::remove_file(&p)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- train

pub fn resolve_train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg: TrainConfig = resolve_config(a.config.as_deref(), &a.overrides.set)?;
    if a.ldr_oe {
        cfg.exposure_selection = ExposureSelection::Oe;
    }
    if a.ldr_ne {
        cfg.exposure_selection = ExposureSelection::Ne;
    }
    if a.no_coarse {
        cfg.coarse_enabled = false;
    }
    if a.no_time_scaling {
        cfg.time_scaling = false;
    }
    if a.symmetric_grid {
        cfg.grid = cfg.grid.symmetric();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.coarse_iters {
        cfg.coarse_iters = n;
    }
    if let Some(n) = a.fine_iters {
        cfg.fine_iters = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = resolve_train_config(a)?;
    if a.overrides.dump_config {
        return dump(&cfg);
    }
    let data = required(&a.data, "--data")?;
    let out = required(&a.out, "--out")?;
    let ds = MultiExposureDataset::load(data)?;
    let result = train(&ds, &cfg)?;
    result.checkpoint.save(out)?;
    let log = a.log.clone().unwrap_or_else(|| out.with_extension("log.csv"));
    write_log_csv(&log, &result.log)?;
    let last = result.log.last();
    println!(
        "wrote {} ({} points, {} iterations, final loss {}) and {}",
        out.display(),
        result.checkpoint.model.gaussians.len(),
        result.checkpoint.iteration,
        last.map_or("n/a".to_string(), |r| format!("{:.5}", r.total)),
        log.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- render

/// Camera for `render --pose`: a view index into `data`, or a pose file.
pub fn resolve_pose(pose: &str, data: Option<&Path>) -> Result<Camera> {
    if let Ok(view) = pose.parse::<usize>() {
        let dir = data.ok_or_else(|| Error::Config("an index --pose needs --data".into()))?;
        let ds = MultiExposureDataset::load(dir)?;
        return ds.camera(view, 1.0);
    }
    let path = Path::new(pose);
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let p: PoseFile =
        serde_json::from_str(&text).map_err(|e| Error::InvalidCamera(format!("{}: {e}", path.display())))?;
    let m = ViewPose {
        intrinsics: p.intrinsics,
        world_to_camera: p.world_to_camera,
    }
    .matrix();
    Camera::new(p.intrinsics, m, p.width, p.height, 1.0)
}

fn cmd_render(a: &RenderArgs) -> Result<()> {
    if let Some(t) = a.exposure {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::NonPositiveExposure(t));
        }
    }
    let ckpt = ModelCheckpoint::load(&a.ckpt)?;
    let cam = resolve_pose(&a.pose, a.data.as_deref())?;
    let model = &ckpt.model;
    let needs_hdr = a.hdr || a.preview.is_some();
    let hdr = needs_hdr.then(|| model.render_hdr(&cam));
    if a.hdr {
        write_pfm(&a.out, hdr.as_ref().expect("rendered above"))?;
    } else {
        let t = a.exposure.expect("clap requires --exposure without --hdr");
        let ldr = model.render_ldr(&cam.with_exposure(t)?)?;
        save_png(&a.out, &ldr)?;
    }
    if let (Some(path), Some(hdr)) = (&a.preview, &hdr) {
        save_png(path, &reinhard_preview(hdr, 0.18))?;
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn save_png(path: &Path, img: &FloatImage) -> Result<()> {
    img.to_rgb8()
        .save_with_format(path, ::image::ImageFormat::Png)
        .map_err(|source| Error::ImageEncode {
            path: path.to_path_buf(),
            source,
        })
}

// ---------------------------------------------------------------- eval

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub image: usize,
    pub view: usize,
    pub exposure: f64,
    pub split: Split,
    pub psnr: f64,
    pub ssim: Option<f64>,
    pub hdr_log_rmse: Option<f64>,
}

/// Metrics of `ckpt` on every image of `ds`.
pub fn evaluate(ckpt: &ModelCheckpoint, ds: &MultiExposureDataset) -> Result<Vec<EvalRow>> {
    let model = &ckpt.model;
    let hdr_err: Vec<Option<f64>> = (0..ds.views.len())
        .map(|v| -> Result<Option<f64>> {
            let Some(gt) = ds.gt_hdr.as_ref().and_then(|h| h.get(v)) else {
                return Ok(None);
            };
            let pred = model.render_hdr(&ds.camera(v, 1.0)?);
            Ok(Some(hdr_log_rmse(&pred, gt)?.rmse).filter(|r| r.is_finite()))
        })
        .collect::<Result<_>>()?;
    ds.images
        .iter()
        .enumerate()
        .map(|(i, im)| {
            let pred = model.render_ldr(&ds.image_camera(i)?)?;
            let gt = im.to_float();
            let s = match ssim(&pred, &gt) {
                Ok(v) => Some(v),
                Err(Error::ImageTooSmall { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(EvalRow {
                image: i,
                view: im.view,
                exposure: ds.exposures[im.exposure],
                split: im.split,
                psnr: psnr(&pred, &gt)?,
                ssim: s,
                hdr_log_rmse: hdr_err[im.view],
            })
        })
        .collect()
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v?;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

pub fn write_eval_csv(path: &Path, rows: &[EvalRow]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let split_name = |s: Split| match s {
        Split::Train => "train",
        Split::Test => "test",
    };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["image", "view", "exposure", "split", "psnr", "ssim", "hdr_log_rmse"])?;
    for r in rows {
        w.write_record([
            r.image.to_string(),
            r.view.to_string(),
            r.exposure.to_string(),
            split_name(r.split).to_string(),
            r.psnr.to_string(),
            opt(r.ssim),
            opt(r.hdr_log_rmse),
        ])?;
    }
    for split in [Split::Train, Split::Test] {
        let part: Vec<&EvalRow> = rows.iter().filter(|r| r.split == split).collect();
        if part.is_empty() {
            continue;
        }
        w.write_record([
            format!("mean_{}", split_name(split)),
            String::new(),
            String::new(),
            split_name(split).to_string(),
            opt(mean(part.iter().map(|r| Some(r.psnr)))),
            opt(mean(part.iter().map(|r| r.ssim))),
            opt(mean(part.iter().map(|r| r.hdr_log_rmse))),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let ckpt = ModelCheckpoint::load(&a.ckpt)?;
    let ds = MultiExposureDataset::load(&a.data)?;
    let rows = evaluate(&ckpt, &ds)?;
    write_eval_csv(&a.out, &rows)?;
    println!("wrote {} ({} images)", a.out.display(), rows.len());
    Ok(())
}

// ---------------------------------------------------------------- export-crf

/// Parses `lo:hi:step` into evenly spaced sample points including both ends.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("--range expects lo:hi:step with lo < hi and step > 0, got {s:?}"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [lo, hi, step] = parts[..] else {
        return Err(bad());
    };
    if !(lo.is_finite() && hi.is_finite() && lo < hi && step > 0.0 && step.is_finite()) {
        return Err(bad());
    }
    Ok(sample_points(lo, hi, step))
}

fn sample_points(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round().max(1.0) as usize + 1;
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn cmd_export_crf(a: &ExportCrfArgs) -> Result<()> {
    let ckpt = ModelCheckpoint::load(&a.ckpt)?;
    let model = &ckpt.model;
    let xs = match &a.range {
        Some(r) => parse_range(r)?,
        None => {
            let g = model.tone.grid().map_or_else(GridConfig::default, |g| *g.config());
            sample_points(g.x_lo, g.x_hi, 0.01)
        }
    };
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["x", "g_red", "g_green", "g_blue"])?;
    for &x in &xs {
        let g = model.response(x);
        w.write_record([x.to_string(), g[0].to_string(), g[1].to_string(), g[2].to_string()])?;
    }
    w.flush()?;
    println!("wrote {} ({} samples)", a.out.display(), xs.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_overrides_nested_keys_and_rejects_unknown() {
        let cfg: TrainConfig =
            resolve_config(None, &["loss.dssim_weight=0.3".into(), "exposure_selection=oe".into()]).unwrap();
        assert_eq!(cfg.loss.dssim_weight, 0.3);
        assert_eq!(cfg.exposure_selection, ExposureSelection::Oe);
        assert!(resolve_config::<TrainConfig>(None, &["loss.nope=1".into()]).is_err());
        assert!(resolve_config::<TrainConfig>(None, &["coarse_iters".into()]).is_err());
        assert!(resolve_config::<TrainConfig>(None, &["coarse_iters=-4".into()]).is_err());
    }

    #[test]
    fn file_then_set_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("cfg.json");
        fs::write(&file, r#"{"coarse_iters": 10, "fine_iters": 20, "seed": 4}"#).unwrap();
        let args = Cli::try_parse_from([
            "hdrgs",
            "train",
            "--config",
            file.to_str().unwrap(),
            "--set",
            "fine_iters=30",
            "--seed",
            "9",
            "--symmetric-grid",
        ])
        .unwrap();
        let Command::Train(a) = args.command else { panic!() };
        let cfg = resolve_train_config(&a).unwrap();
        assert_eq!((cfg.coarse_iters, cfg.fine_iters, cfg.seed), (10, 30, 9));
        assert_eq!(cfg.grid.sparse_density, cfg.grid.dense_density);
    }

    #[test]
    fn unknown_file_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("cfg.json");
        fs::write(&file, r#"{"grid": {"x_low": -5}}"#).unwrap();
        assert!(matches!(
            resolve_config::<TrainConfig>(Some(&file), &[]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn range_includes_both_ends() {
        let xs = parse_range("-6:3:0.01").unwrap();
        assert_eq!(xs.len(), 901);
        assert_eq!((xs[0], xs[900]), (-6.0, 3.0));
        assert!(parse_range("1:0:0.1").is_err());
        assert!(parse_range("0:1:0").is_err());
        assert!(parse_range("0:1").is_err());
    }

    #[test]
    fn oe_and_ne_conflict() {
        let r = Cli::try_parse_from(["hdrgs", "train", "--ldr-oe", "--ldr-ne"]);
        assert!(r.is_err());
    }
}
