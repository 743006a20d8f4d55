//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 5 to 8 share four training runs on a five-exposure toy dataset
//! (1/16 s to 1 s in one-stop steps); its odd-numbered levels are the
//! three-exposure set {1/16, 1/4, 1}.

mod common;

use std::time::{Duration, Instant};

use clap::Parser;
use hdrgs::checkpoint::ModelCheckpoint;
use hdrgs::cli::{resolve_train_config, Cli, Command};
use hdrgs::dataset::{generate_synthetic, MultiExposureDataset, SceneSpec};
use hdrgs::exposure::ExposureScaler;
use hdrgs::geometry::Gaussian3D;
use hdrgs::image::FloatImage;
use hdrgs::loss::{hdr_log_rmse, median_ratio, psnr};
use hdrgs::model::HdrModel;
use hdrgs::pfm::{decode_pfm, encode_pfm};
use hdrgs::raster::{render_irradiance, render_irradiance_reference, RasterConfig};
use hdrgs::tone::{AsymmetricGrid, GridConfig, ToneMapper, DEFAULT_LEAK_BETA, UNIT_EXPOSURE_TARGET};
use hdrgs::train::{train, TrainConfig, TrainOutput};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const COMPOSITE_SCENES: usize = 100;
const COMPOSITE_MAX_GAUSSIANS: usize = 50;
const COMPOSITE_TOL: f64 = 1e-5;
const CONSERVATION_TOL: f64 = 1e-6;
const COMPOSITE_BUDGET: Duration = Duration::from_secs(10);
const GRADIENT_BUDGET: Duration = Duration::from_secs(60);
const EXPOSURE_BUDGET: Duration = Duration::from_secs(1);
const SCALE_OFFSET: f64 = 0.6931;
const SCALE_OFFSET_TOL: f64 = 1e-4;
const ALGEBRA_TOL: f64 = 1e-12;
const CRF_MAE_TOL: f64 = 0.02;
const CRF_RANGE: (f64, f64) = (0.05, 0.95);
const CRF_STEP: f64 = 0.01;
const TRAIN_BUDGET: Duration = Duration::from_secs(600);
const NOVEL_EXPOSURE_GAP_DB: f64 = 2.0;
const HDR_LOG_RMSE_TOL: f64 = 0.05;
const MEDIAN_RATIO_RANGE: (f64, f64) = (0.8, 1.25);
const FINE_ITERS: &str = "10000";
const DATA_SEED: u64 = 1;
const GAMMA: f64 = 2.2;
const GAIN: f64 = 0.73;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------- 1

fn compositing() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cam = common::camera(32, 32);
    let (mut worst, mut worst_conservation) = (0.0f64, 0.0f64);
    let mut terminated = 0;
    for _ in 0..COMPOSITE_SCENES {
        let n = rng.random_range(1..=COMPOSITE_MAX_GAUSSIANS);
        let scene: Vec<Gaussian3D> = (0..n)
            .map(|_| common::random_gaussian(&mut rng, 1.0, (-2.5, -0.8), (0.05, 1.0)))
            .collect();
        let tiled = render_irradiance(&scene, &cam);
        let reference = render_irradiance_reference(&scene, &cam);
        terminated += tiled
            .final_transmittance
            .iter()
            .filter(|t| **t < RasterConfig::default().min_transmittance)
            .count();
        for (a, b) in tiled.values.data().iter().zip(reference.values.data()) {
            worst = worst.max((a - b).abs());
        }
        // with unit radiance E' is the total weight Σ αᵢτᵢ
        let white: Vec<Gaussian3D> = scene
            .iter()
            .map(|g| Gaussian3D {
                radiance: Vector3::repeat(1.0),
                ..g.clone()
            })
            .collect();
        for img in [render_irradiance(&white, &cam), render_irradiance_reference(&white, &cam)] {
            for (i, &t) in img.final_transmittance.iter().enumerate() {
                let weight = img.values.data()[3 * i];
                worst_conservation = worst_conservation.max((weight + t - 1.0).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < COMPOSITE_TOL && worst_conservation < CONSERVATION_TOL && elapsed < COMPOSITE_BUDGET,
        format!(
            "{COMPOSITE_SCENES} scenes, tiled vs reference max abs {worst:.2e} (< {COMPOSITE_TOL:.0e}), \
             weight conservation {worst_conservation:.2e} (< {CONSERVATION_TOL:.0e}), \
             {terminated} pixels stopped early, {elapsed:.2?}"
        ),
    )
}

// ---------------------------------------------------------------- 2

fn gradients() -> Outcome {
    let start = Instant::now();
    let checks = common::gradient_suite();
    let elapsed = start.elapsed();
    let failed: Vec<String> = checks.iter().filter(|c| !c.passes()).map(|c| c.summary()).collect();
    let worst_rel = checks
        .iter()
        .filter(|c| matches!(c.tol, common::Tol::Rel(_)))
        .map(|c| c.worst().0)
        .fold(0.0, f64::max);
    let samples: usize = checks.iter().map(|c| c.samples.len()).sum();
    let detail = if failed.is_empty() {
        format!(
            "{} backward passes, {samples} derivatives, worst relative error {worst_rel:.2e}, {elapsed:.2?}",
            checks.len()
        )
    } else {
        failed.join("; ")
    };
    outcome(failed.is_empty() && elapsed < GRADIENT_BUDGET, detail)
}

// ---------------------------------------------------------------- 3

fn exposure_algebra() -> Outcome {
    let start = Instant::now();
    let times = [1.0 / 16.0, 0.25, 1.0];
    let sc = ExposureScaler::fit(&times).unwrap();
    let lo = sc.scale_time(times[0]).unwrap();
    let hi = sc.scale_time(times[2]).unwrap();
    let symmetry = (lo + hi).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut roundtrip, mut relation) = (0.0f64, 0.0f64);
    // any monotone response of ln(E·t)
    let g1 = |x: f64| GAIN * (x / GAMMA).exp();
    for _ in 0..1000 {
        let e = (rng.random_range(-8.0..4.0f64)).exp();
        let t = (rng.random_range(-6.0..2.0f64)).exp();
        let learned = sc.learned_from_hdr(e).unwrap();
        roundtrip = roundtrip.max(rel_err(sc.hdr_from_learned(learned), e));
        let g2 = |x: f64| g1(x / sc.r);
        let lhs = g1(e.ln() + t.ln());
        let rhs = g2(sc.scale_time(t).unwrap() + learned);
        relation = relation.max(rel_err(lhs, rhs));
    }
    let elapsed = start.elapsed();
    let pass = sc.r == 0.5
        && (sc.s - SCALE_OFFSET).abs() < SCALE_OFFSET_TOL
        && symmetry < ALGEBRA_TOL
        && roundtrip < ALGEBRA_TOL
        && relation < ALGEBRA_TOL
        && elapsed < EXPOSURE_BUDGET;
    outcome(
        pass,
        format!(
            "r = {}, s = {:.6}, |t'(min) + t'(max)| = {symmetry:.1e}, HDR round trip {roundtrip:.1e}, \
             scaling relation {relation:.1e} over 1000 samples, {elapsed:.2?}",
            sc.r, sc.s
        ),
    )
}

// ---------------------------------------------------------------- 4

fn constants() -> Outcome {
    let grid_cfg = GridConfig::default();
    let mut grid = AsymmetricGrid::new(grid_cfg).unwrap();
    grid.init_from_sigmoid();
    let mut wiggly = common::random_grid(&mut ChaCha8Rng::seed_from_u64(404));
    // even a write to the pinned ends leaves them in place
    let mut v = wiggly.values(0).to_vec();
    v[0] = 0.5;
    let last = v.len() - 1;
    v[last] = 0.5;
    wiggly.set_values(0, &v);
    let ends_pinned = [&grid, &wiggly].iter().all(|g| {
        (0..3).all(|c| g.eval(grid_cfg.x_lo, c) == 0.0 && g.eval(grid_cfg.x_hi, c) == 1.0)
    });
    let t = TrainConfig::default();
    let checks = [
        ("g(x_lo) = 0 and g(x_hi) = 1", ends_pinned),
        ("leak 0.01", DEFAULT_LEAK_BETA == 0.01 && grid_cfg.leak_beta == 0.01),
        ("unit target 0.73", UNIT_EXPOSURE_TARGET == 0.73),
        ("densities 128/64", grid_cfg.dense_density == 128 && grid_cfg.sparse_density == 64),
        ("prune threshold 0.02", t.prune_threshold == 0.02),
        ("prune start 500", t.prune_start == 500),
        ("prune interval 200", t.prune_interval == 200),
        ("coarse iterations 6000", t.coarse_iters == 6000),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    let detail = if failed.is_empty() {
        checks.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
    } else {
        format!("mismatch: {}", failed.join(", "))
    };
    outcome(failed.is_empty(), detail)
}

// ---------------------------------------------------------------- 5 to 8

fn train_config(flags: &[&str]) -> TrainConfig {
    let args = ["hdrgs", "train", "--fine-iters", FINE_ITERS].iter().chain(flags);
    let cli = Cli::try_parse_from(args).expect("valid flags");
    let Command::Train(a) = cli.command else {
        unreachable!()
    };
    resolve_train_config(&a).expect("valid config")
}

struct Run {
    out: TrainOutput,
    elapsed: Duration,
}

impl Run {
    fn model(&self) -> &HdrModel {
        &self.out.checkpoint.model
    }
}

fn run(ds: &MultiExposureDataset, cfg: &TrainConfig) -> Run {
    let start = Instant::now();
    let out = train(ds, cfg).expect("training succeeds");
    Run {
        out,
        elapsed: start.elapsed(),
    }
}

/// Mean LDR PSNR over all views at one exposure index.
fn exposure_psnr(model: &HdrModel, ds: &MultiExposureDataset, exposure: usize) -> f64 {
    let scores: Vec<f64> = ds
        .images
        .iter()
        .enumerate()
        .filter(|(_, im)| im.exposure == exposure)
        .map(|(i, im)| psnr(&model.render_ldr(&ds.image_camera(i).unwrap()).unwrap(), &im.to_float()).unwrap())
        .collect();
    scores.iter().sum::<f64>() / scores.len() as f64
}

const HELD_OUT: [usize; 2] = [1, 3];

fn held_out_psnr(model: &HdrModel, ds: &MultiExposureDataset) -> [f64; 2] {
    HELD_OUT.map(|e| exposure_psnr(model, ds, e))
}

fn mean2(v: [f64; 2]) -> f64 {
    0.5 * (v[0] + v[1])
}

/// Oracle response as a function of the tone-mapper input: with
/// `x = r·ln(E·t)` it is `gain · exp(x / (γ r))`.
fn oracle_response(x: f64, r: f64) -> f64 {
    GAIN * (x / (GAMMA * r)).exp()
}

fn crf_recovery(a: &Run) -> Outcome {
    let model = a.model();
    let Some(grid) = model.tone.grid() else {
        return outcome(false, "model has no learned grid".into());
    };
    let cfg = grid.config();
    let r = model.scaler.r;
    let n = ((cfg.x_hi - cfg.x_lo) / CRF_STEP).round() as usize;
    let mut maes = [0.0; 3];
    let mut count = 0;
    for i in 0..=n {
        let x = cfg.x_lo + (cfg.x_hi - cfg.x_lo) * i as f64 / n as f64;
        let truth = oracle_response(x, r);
        if !(CRF_RANGE.0..=CRF_RANGE.1).contains(&truth) {
            continue;
        }
        count += 1;
        for (c, m) in maes.iter_mut().enumerate() {
            *m += (grid.eval(x, c) - truth).abs();
        }
    }
    maes.iter_mut().for_each(|m| *m /= count.max(1) as f64);
    let pass = count > 0 && maes.iter().all(|&m| m < CRF_MAE_TOL) && a.elapsed < TRAIN_BUDGET;
    outcome(
        pass,
        format!(
            "per-channel MAE {:.4}/{:.4}/{:.4} (< {CRF_MAE_TOL}) over {count} samples, training {:.0?}",
            maes[0], maes[1], maes[2], a.elapsed
        ),
    )
}

fn novel_exposure(a: &[f64; 2], oracle: &[f64; 2], no_scaling: &[f64; 2]) -> Outcome {
    let within = (0..2).all(|k| (a[k] - oracle[k]).abs() <= NOVEL_EXPOSURE_GAP_DB);
    let lower = mean2(*no_scaling) < mean2(*a);
    outcome(
        within && lower,
        format!(
            "held-out PSNR t2/t4: method {:.2}/{:.2}, all-exposure oracle {:.2}/{:.2} (gap <= {NOVEL_EXPOSURE_GAP_DB} dB), \
             without time scaling {:.2}/{:.2} (must be lower)",
            a[0], a[1], oracle[0], oracle[1], no_scaling[0], no_scaling[1]
        ),
    )
}

fn coarse_ablation(a: &[f64; 2], no_coarse: &[f64; 2]) -> Outcome {
    outcome(
        mean2(*no_coarse) < mean2(*a),
        format!(
            "held-out PSNR: method {:.2}, without coarse phase {:.2} (must be lower)",
            mean2(*a),
            mean2(*no_coarse)
        ),
    )
}

/// All views stacked into one image.
fn stack(images: impl Iterator<Item = FloatImage>) -> FloatImage {
    let mut data = Vec::new();
    let (mut w, mut h) = (0, 0);
    for img in images {
        w = img.width();
        h += img.height();
        data.extend_from_slice(img.data());
    }
    FloatImage::from_vec(w, h, data).unwrap()
}

fn hdr_recovery(a: &Run, ds: &MultiExposureDataset) -> Outcome {
    let model = a.model();
    let gt = ds.gt_hdr.as_ref().expect("synthetic data carries HDR");
    let pred = stack((0..ds.views.len()).map(|v| model.render_hdr(&ds.camera(v, 1.0).unwrap())));
    let truth = stack(gt.iter().cloned());
    let err = hdr_log_rmse(&pred, &truth).unwrap();
    let ratio = median_ratio(&pred, &truth).unwrap().unwrap_or(f64::NAN);
    let pass = err.rmse < HDR_LOG_RMSE_TOL && (MEDIAN_RATIO_RANGE.0..=MEDIAN_RATIO_RANGE.1).contains(&ratio);
    outcome(
        pass,
        format!(
            "aligned log RMSE {:.4} (< {HDR_LOG_RMSE_TOL}), unaligned median ratio {ratio:.4} (in [{}, {}]), \
             {} pixels excluded",
            err.rmse, MEDIAN_RATIO_RANGE.0, MEDIAN_RATIO_RANGE.1, err.excluded
        ),
    )
}

// ---------------------------------------------------------------- 9

fn determinism() -> Outcome {
    let spec = SceneSpec {
        width: 32,
        height: 32,
        object_gaussians: 60,
        backdrop_gaussians: 36,
        seed: 9,
        ..SceneSpec::default()
    };
    let ds = generate_synthetic(&spec).unwrap();
    let cfg = TrainConfig {
        coarse_iters: 150,
        fine_iters: 150,
        prune_start: 100,
        prune_interval: 50,
        opacity_reset_interval: 100,
        seed: 3,
        ..TrainConfig::default()
    };
    let a = train(&ds, &cfg).unwrap().checkpoint;
    let b = train(&ds, &cfg).unwrap().checkpoint;
    let identical_runs = a.to_bytes() == b.to_bytes();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    a.save(&path).unwrap();
    let loaded = ModelCheckpoint::load(&path).unwrap();
    let cam = ds.image_camera(0).unwrap();
    let renders_match = loaded.model.render_ldr(&cam).unwrap() == a.model.render_ldr(&cam).unwrap()
        && loaded.model.render_hdr(&cam) == a.model.render_hdr(&cam)
        && loaded.to_bytes() == a.to_bytes();

    let hdr = &ds.gt_hdr.as_ref().unwrap()[0];
    let pfm_lossless = decode_pfm(&encode_pfm(hdr)).unwrap() == *hdr;

    let data_dir = dir.path().join("data");
    ds.save(&data_dir).unwrap();
    let dataset_lossless = MultiExposureDataset::load(&data_dir).unwrap() == ds;

    let phase_ok = matches!(a.model.tone, ToneMapper::Grid(_));
    outcome(
        identical_runs && renders_match && pfm_lossless && dataset_lossless && phase_ok,
        format!(
            "identical checkpoints {identical_runs}, reload renders identical {renders_match}, \
             PFM lossless {pfm_lossless}, dataset lossless {dataset_lossless}"
        ),
    )
}

fn report(id: usize, name: &str, o: &Outcome) -> bool {
    println!("{} {id} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn main() {
    // `cargo test -- --list` and filters are not meaningful here
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut all = true;
    all &= report(1, "compositing oracle", &compositing());
    all &= report(2, "gradient suite", &gradients());
    all &= report(3, "exposure algebra", &exposure_algebra());
    all &= report(4, "boundary constants", &constants());

    let spec = SceneSpec {
        exposure_times: SceneSpec::ev_ladder(-4.0, 1.0, 5),
        seed: DATA_SEED,
        ..SceneSpec::default()
    };
    let ds = generate_synthetic(&spec).expect("toy dataset");
    let method = run(&ds, &train_config(&["--ldr-oe"]));
    let sc = method.model().scaler;
    let fixed = format!("fixed_scaler={{\"r\":{},\"s\":{}}}", sc.r, sc.s);
    let oracle = run(&ds, &train_config(&["--set", &fixed]));
    let no_scaling = run(&ds, &train_config(&["--ldr-oe", "--no-time-scaling"]));
    let no_coarse = run(&ds, &train_config(&["--ldr-oe", "--no-coarse"]));

    let a = held_out_psnr(method.model(), &ds);
    all &= report(5, "response curve recovery", &crf_recovery(&method));
    all &= report(
        6,
        "novel exposures",
        &novel_exposure(&a, &held_out_psnr(oracle.model(), &ds), &held_out_psnr(no_scaling.model(), &ds)),
    );
    all &= report(7, "coarse phase ablation", &coarse_ablation(&a, &held_out_psnr(no_coarse.model(), &ds)));
    all &= report(8, "HDR recovery", &hdr_recovery(&method, &ds));
    all &= report(9, "determinism and persistence", &determinism());
    if !all {
        std::process::exit(1);
    }
}
