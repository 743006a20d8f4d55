//! Coarse-to-fine optimization.
//!
//! The coarse phase renders `sigmoid(E' + t')` and updates only the
//! Gaussians. At the hand-off the grid is initialized from the sigmoid, and
//! the fine phase optimizes Gaussians and grid nodes jointly under the full
//! objective. Each iteration draws one training image uniformly at random.

use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{config_hash, ModelCheckpoint, Phase};
use crate::dataset::{ExposureSelection, MultiExposureDataset};
use crate::error::{Error, Result};
use crate::exposure::ExposureScaler;
use crate::geometry::{Camera, Gaussian3D};
use crate::image::FloatImage;
use crate::loss::{total_loss, LossConfig};
use crate::model::HdrModel;
use crate::raster::{ContributionScores, GaussianGrad, Rasterizer};
use crate::tone::{AsymmetricGrid, GridConfig, ToneMapper};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningRates {
    /// Initial position rate, multiplied by the scene extent.
    pub means: f64,
    /// Final position rate, multiplied by the scene extent.
    pub means_final: f64,
    pub opacity: f64,
    pub scale: f64,
    pub rotation: f64,
    pub radiance: f64,
    /// Grid rate at the start of the fine phase.
    pub grid: f64,
    /// Grid rate at the end of the fine phase.
    pub grid_final: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            means: 1.6e-4,
            means_final: 1.6e-6,
            opacity: 0.05,
            scale: 5e-3,
            rotation: 1e-3,
            radiance: 2.5e-3,
            grid: 0.02,
            grid_final: 5e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub coarse_iters: usize,
    pub fine_iters: usize,
    /// When false the grid is active from the first iteration, starting from
    /// its linear ramp, and the whole budget runs as the fine phase.
    pub coarse_enabled: bool,
    /// When false exposures enter the tone mapper as plain `ln t`.
    pub time_scaling: bool,
    pub exposure_selection: ExposureSelection,
    /// Exposure scaling to use instead of fitting one to the training
    /// exposures, e.g. to match another model. Ignored without time scaling.
    pub fixed_scaler: Option<ExposureScaler>,
    pub lr: LearningRates,
    pub adam: AdamConfig,
    pub loss: LossConfig,
    pub grid: GridConfig,
    pub prune_threshold: f64,
    pub prune_start: usize,
    pub prune_interval: usize,
    pub opacity_reset_interval: usize,
    /// Resets only happen at iterations strictly below this one. When unset,
    /// a reset fires only if a full reset interval still fits in the coarse
    /// phase after it, so the fine phase never starts from reset opacities.
    pub opacity_reset_until: Option<usize>,
    pub opacity_reset_ceiling: f64,
    pub densify_enabled: bool,
    pub densify_grad_threshold: f64,
    pub densify_interval: usize,
    pub densify_start: usize,
    pub densify_until: usize,
    pub max_points: usize,
    pub init_opacity: f64,
    /// Points drawn inside the scene bounds when the dataset has none.
    pub random_init_points: usize,
    /// Write a log row every this many iterations.
    pub log_interval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            coarse_iters: 6000,
            fine_iters: 17000,
            coarse_enabled: true,
            time_scaling: true,
            exposure_selection: ExposureSelection::All,
            fixed_scaler: None,
            lr: LearningRates::default(),
            adam: AdamConfig::default(),
            loss: LossConfig::default(),
            grid: GridConfig::default(),
            prune_threshold: 0.02,
            prune_start: 500,
            prune_interval: 200,
            opacity_reset_interval: 3000,
            opacity_reset_until: None,
            opacity_reset_ceiling: 0.01,
            densify_enabled: false,
            densify_grad_threshold: 2e-4,
            densify_interval: 100,
            densify_start: 500,
            densify_until: 15000,
            max_points: 100_000,
            init_opacity: 0.1,
            random_init_points: 1000,
            log_interval: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn total_iters(&self) -> usize {
        self.coarse_iters + self.fine_iters
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let counts = [
            ("coarse_iters", self.coarse_iters),
            ("fine_iters", self.fine_iters),
            ("prune_interval", self.prune_interval),
            ("opacity_reset_interval", self.opacity_reset_interval),
            ("densify_interval", self.densify_interval),
            ("log_interval", self.log_interval),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be positive"));
        }
        let l = &self.lr;
        let rates = [
            ("lr.means", l.means),
            ("lr.means_final", l.means_final),
            ("lr.opacity", l.opacity),
            ("lr.scale", l.scale),
            ("lr.rotation", l.rotation),
            ("lr.radiance", l.radiance),
            ("lr.grid", l.grid),
            ("lr.grid_final", l.grid_final),
        ];
        if let Some((name, v)) = rates.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return bad(format!("{name} must be positive, got {v}"));
        }
        let a = &self.adam;
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps >= 0.0) {
            return bad("adam betas must lie in [0, 1) and eps must be non-negative".into());
        }
        if !(self.opacity_reset_ceiling > 0.0 && self.opacity_reset_ceiling < 1.0) {
            return bad("opacity_reset_ceiling must lie in (0, 1)".into());
        }
        if !(self.init_opacity > 0.0 && self.init_opacity < 1.0) {
            return bad("init_opacity must lie in (0, 1)".into());
        }
        if !(self.prune_threshold >= 0.0) {
            return bad("prune_threshold must be non-negative".into());
        }
        if let Some(f) = self.fixed_scaler {
            if !(f.r > 0.0 && f.r.is_finite() && f.s.is_finite()) {
                return bad(format!("fixed_scaler needs r > 0 and finite s, got {f:?}"));
            }
        }
        self.loss.validate()?;
        self.grid.validate()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

// ---------------------------------------------------------------- Adam

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    /// Keeps rows (of `stride` values) whose flag is set.
    pub fn retain_rows(&mut self, keep: &[bool], stride: usize) {
        for buf in [&mut self.m, &mut self.v] {
            let mut out = Vec::with_capacity(buf.len());
            for (row, &k) in buf.chunks_exact(stride).zip(keep) {
                if k {
                    out.extend_from_slice(row);
                }
            }
            *buf = out;
        }
    }

    pub fn push_zero_rows(&mut self, rows: usize, stride: usize) {
        self.m.resize(self.m.len() + rows * stride, 0.0);
        self.v.resize(self.v.len() + rows * stride, 0.0);
    }

    pub fn clear_moments(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
    }
}

/// One bias-corrected Adam update in place. Returns `false`, leaving
/// parameters and state untouched, when any gradient is non-finite.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<bool> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::ShapeMismatch(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Ok(false);
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(true)
}

/// Log-linear interpolation from `start` to `end` as `progress` goes 0 → 1.
pub fn exp_decay(start: f64, end: f64, progress: f64) -> f64 {
    let p = progress.clamp(0.0, 1.0);
    ((1.0 - p) * start.ln() + p * end.ln()).exp()
}

// ---------------------------------------------------------------- schedule

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduledEvent {
    Prune,
    OpacityReset,
}

/// Decides when pruning and opacity resets fire. Resets win ties, and no
/// prune fires until a full prune interval has passed since the last reset.
#[derive(Clone, Debug)]
pub struct Scheduler {
    prune_start: usize,
    prune_interval: usize,
    reset_interval: usize,
    reset_until: usize,
    last_reset: Option<usize>,
}

impl Scheduler {
    pub fn new(cfg: &TrainConfig) -> Self {
        let reset_interval = cfg.opacity_reset_interval.max(1);
        let reset_until = match cfg.opacity_reset_until {
            Some(u) => u,
            None if cfg.coarse_enabled => (cfg.coarse_iters + 1).saturating_sub(reset_interval),
            None => 0,
        };
        Self {
            prune_start: cfg.prune_start,
            prune_interval: cfg.prune_interval.max(1),
            reset_interval,
            reset_until,
            last_reset: None,
        }
    }

    /// Event for 1-based iteration `iter`; call once per iteration in order.
    pub fn event_at(&mut self, iter: usize) -> Option<ScheduledEvent> {
        if iter > 0 && iter % self.reset_interval == 0 && iter < self.reset_until {
            self.last_reset = Some(iter);
            return Some(ScheduledEvent::OpacityReset);
        }
        let on_grid = iter >= self.prune_start && (iter - self.prune_start) % self.prune_interval == 0;
        let settled = self.last_reset.is_none_or(|r| iter - r >= self.prune_interval);
        (on_grid && settled).then_some(ScheduledEvent::Prune)
    }
}

// ---------------------------------------------------------------- scene edits

/// Removes every Gaussian whose score is below `threshold` and resets the
/// scores. Returns the keep mask.
pub fn prune(scene: &mut Vec<Gaussian3D>, scores: &mut ContributionScores, threshold: f64) -> Vec<bool> {
    let keep: Vec<bool> = scores.values.iter().map(|&s| s >= threshold).collect();
    let mut i = 0;
    scene.retain(|_| {
        i += 1;
        keep[i - 1]
    });
    *scores = ContributionScores::new(scene.len());
    keep
}

/// Caps every opacity at `ceiling`.
pub fn reset_opacity(scene: &mut [Gaussian3D], ceiling: f64) {
    for g in scene {
        if g.opacity() > ceiling {
            g.set_opacity(ceiling);
        }
    }
}

/// Clones every Gaussian whose mean positional gradient norm exceeds
/// `threshold`, jittering the copy by half its scale. Returns the cloned
/// parents, or nothing when the result would exceed `max_points`.
pub fn densify(
    scene: &mut Vec<Gaussian3D>,
    grad_norms: &[f64],
    threshold: f64,
    max_points: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let parents: Vec<usize> = grad_norms
        .iter()
        .enumerate()
        .filter(|(_, &g)| g > threshold)
        .map(|(i, _)| i)
        .collect();
    if scene.len() + parents.len() > max_points {
        log::warn!(
            "densify skipped: {} clones would exceed the {max_points}-point cap",
            parents.len()
        );
        return Vec::new();
    }
    for &p in &parents {
        let mut g = scene[p].clone();
        let jitter = Vector3::from_fn(|k, _| 0.5 * g.log_scale[k].exp() * rng.sample::<f64, _>(StandardNormal));
        g.mean += jitter;
        scene.push(g);
    }
    parents
}

/// Initial Gaussians: one per dataset point, or uniform random points in the
/// camera-centered bounds. Scales follow the mean squared distance to the
/// three nearest neighbours; radiance starts at 0.
pub fn init_gaussians(dataset: &MultiExposureDataset, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Vec<Gaussian3D> {
    let positions: Vec<Vector3<f64>> = match &dataset.init_points {
        Some(pts) if !pts.is_empty() => pts.iter().map(|p| Vector3::from(p.position)).collect(),
        _ => {
            let extent = dataset.scene_extent();
            let centers: Vec<Vector3<f64>> = (0..dataset.views.len())
                .filter_map(|v| dataset.camera(v, 1.0).ok())
                .map(|c| c.center())
                .collect();
            let mid = centers.iter().sum::<Vector3<f64>>() / centers.len().max(1) as f64;
            (0..cfg.random_init_points)
                .map(|_| mid + Vector3::from_fn(|_, _| rng.random_range(-extent..extent)))
                .collect()
        }
    };
    let floor = 1e-4 * dataset.scene_extent();
    positions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut nearest = [f64::INFINITY; 3];
            for (j, q) in positions.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = (p - q).norm_squared();
                if d < nearest[2] {
                    nearest[2] = d;
                    nearest.sort_by(f64::total_cmp);
                }
            }
            let finite: Vec<f64> = nearest.iter().copied().filter(|d| d.is_finite()).collect();
            let mean_sq = if finite.is_empty() {
                1.0
            } else {
                finite.iter().sum::<f64>() / finite.len() as f64
            };
            let scale = mean_sq.sqrt().max(floor);
            Gaussian3D::isotropic(*p, scale, cfg.init_opacity, Vector3::zeros())
        })
        .collect()
}

// ---------------------------------------------------------------- loop

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogRow {
    pub iter: usize,
    pub phase: Phase,
    pub l1: f64,
    pub dssim: f64,
    pub smooth: f64,
    pub unit: f64,
    pub total: f64,
    pub points: usize,
}

pub fn write_log_csv(path: &Path, rows: &[LogRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["iter", "phase", "l1", "dssim", "smooth", "unit", "total", "points"])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub checkpoint: ModelCheckpoint,
    pub log: Vec<LogRow>,
}

const GROUP_STRIDES: [usize; 5] = [3, 3, 4, 1, 3];

fn gather(scene: &[Gaussian3D], group: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(scene.len() * GROUP_STRIDES[group]);
    for g in scene {
        match group {
            0 => out.extend(g.mean.iter()),
            1 => out.extend(g.log_scale.iter()),
            2 => out.extend([g.rotation.w, g.rotation.i, g.rotation.j, g.rotation.k]),
            3 => out.push(g.opacity_logit),
            _ => out.extend(g.radiance.iter()),
        }
    }
    out
}

fn gather_grads(grads: &[GaussianGrad], group: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(grads.len() * GROUP_STRIDES[group]);
    for g in grads {
        match group {
            0 => out.extend(g.mean.iter()),
            1 => out.extend(g.log_scale.iter()),
            2 => out.extend(g.rotation),
            3 => out.push(g.opacity_logit),
            _ => out.extend(g.radiance.iter()),
        }
    }
    out
}

fn scatter(scene: &mut [Gaussian3D], group: usize, values: &[f64]) {
    let s = GROUP_STRIDES[group];
    for (g, v) in scene.iter_mut().zip(values.chunks_exact(s)) {
        match group {
            0 => g.mean = Vector3::new(v[0], v[1], v[2]),
            1 => g.log_scale = Vector3::new(v[0], v[1], v[2]),
            2 => g.rotation = nalgebra::Quaternion::new(v[0], v[1], v[2], v[3]),
            3 => g.opacity_logit = v[0],
            _ => g.radiance = Vector3::new(v[0], v[1], v[2]),
        }
    }
}

const GROUP_NAMES: [&str; 5] = ["means", "scales", "rotations", "opacities", "radiance"];

struct TrainState {
    scene: Vec<Gaussian3D>,
    adam: [AdamState; 5],
    scores: ContributionScores,
    grad_accum: Vec<f64>,
    grad_count: Vec<u32>,
}

impl TrainState {
    fn retain(&mut self, keep: &[bool]) {
        for (st, &stride) in self.adam.iter_mut().zip(&GROUP_STRIDES) {
            st.retain_rows(keep, stride);
        }
        let mut k = keep.iter();
        self.grad_accum.retain(|_| *k.next().expect("mask length"));
        let mut k = keep.iter();
        self.grad_count.retain(|_| *k.next().expect("mask length"));
    }
}

/// Runs the full schedule and returns the final checkpoint with its log.
pub fn train(dataset: &MultiExposureDataset, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_1417);
    let scene = init_gaussians(dataset, cfg, &mut init_rng);
    run(dataset, cfg, scene, init_rng)
}

/// Like [`train`], starting from the given Gaussians instead of the
/// dataset's initial points.
pub fn train_from(dataset: &MultiExposureDataset, cfg: &TrainConfig, scene: Vec<Gaussian3D>) -> Result<TrainOutput> {
    if scene.is_empty() {
        return Err(Error::Config("initial scene is empty".into()));
    }
    run(dataset, cfg, scene, ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_1417))
}

fn run(
    dataset: &MultiExposureDataset,
    cfg: &TrainConfig,
    scene: Vec<Gaussian3D>,
    mut init_rng: ChaCha8Rng,
) -> Result<TrainOutput> {
    cfg.validate()?;
    dataset.validate()?;
    if dataset.views.len() < 2 {
        return Err(Error::Dataset("training needs at least two views".into()));
    }
    let train_idx = dataset.training_images(cfg.exposure_selection);
    if train_idx.is_empty() {
        return Err(Error::Dataset("no training images for the chosen exposure selection".into()));
    }
    let times = dataset.exposure_times_of(&train_idx);
    let fitted = ExposureScaler::fit(&times)?;
    let scaler = match (cfg.time_scaling, cfg.fixed_scaler) {
        (false, _) => ExposureScaler::identity(),
        (true, Some(fixed)) => fixed,
        (true, None) => fitted,
    };
    let cameras: Vec<Camera> = train_idx
        .iter()
        .map(|&i| dataset.image_camera(i))
        .collect::<Result<_>>()?;
    let shifts: Vec<f64> = cameras
        .iter()
        .map(|c| scaler.scale_time(c.exposure_time))
        .collect::<Result<_>>()?;
    let targets: Vec<FloatImage> = train_idx.iter().map(|&i| dataset.images[i].to_float()).collect();

    let mut sample_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = scene.len();
    let mut st = TrainState {
        adam: GROUP_STRIDES.map(|s| AdamState::new(n * s)),
        scores: ContributionScores::new(n),
        grad_accum: vec![0.0; n],
        grad_count: vec![0; n],
        scene,
    };
    let extent = dataset.scene_extent();
    let rast = Rasterizer::default();
    let total = cfg.total_iters();
    let fine_start = if cfg.coarse_enabled { cfg.coarse_iters + 1 } else { 1 };
    let fine_len = total + 1 - fine_start;
    let mut tone = ToneMapper::Sigmoid;
    let mut grid_adam = AdamState::default();
    let mut scheduler = Scheduler::new(cfg);
    let mut log = Vec::with_capacity(total / cfg.log_interval + 1);
    let (w, h) = (dataset.width, dataset.height);

    for iter in 1..=total {
        let phase = if iter < fine_start { Phase::Coarse } else { Phase::Fine };
        if phase == Phase::Fine && matches!(tone, ToneMapper::Sigmoid) {
            let mut grid = AsymmetricGrid::new(cfg.grid)?;
            if cfg.coarse_enabled {
                grid.init_from_sigmoid();
            }
            grid_adam = AdamState::new(3 * grid.node_count());
            tone = ToneMapper::Grid(grid);
            log::info!("iteration {iter}: grid tone mapper active");
        }

        let k = sample_rng.random_range(0..train_idx.len());
        let cam = &cameras[k];
        let shift = shifts[k];
        let irr = rast.render_with_scores(&st.scene, cam, &mut st.scores)?;
        let mut pred = FloatImage::new(w, h);
        for (i, (p, &e)) in pred.data_mut().iter_mut().zip(irr.values.data()).enumerate() {
            *p = tone.eval(e + shift, i % 3);
        }
        let (terms, grads) = total_loss(&pred, &targets[k], &tone, &cfg.loss)?;
        if !terms.total.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: iter,
                detail: format!(
                    "phase {}, image {}, exposure {} s, {} points, terms {terms:?}",
                    phase.as_str(),
                    train_idx[k],
                    cam.exposure_time,
                    st.scene.len()
                ),
            });
        }

        let mut node_grads = grads.nodes.unwrap_or_default();
        let mut d_irr = FloatImage::new(w, h);
        for (i, (d, (&e, &gp))) in d_irr
            .data_mut()
            .iter_mut()
            .zip(irr.values.data().iter().zip(grads.pred.data()))
            .enumerate()
        {
            let c = i % 3;
            let (dx, nodes) = tone.backward(e + shift, c, gp);
            *d = dx;
            if let Some(nodes) = nodes {
                for (j, v) in nodes {
                    node_grads[c][j] += v;
                }
            }
        }
        let g = rast.backward(&st.scene, cam, &d_irr)?;

        let progress = (iter - 1) as f64 / (total.max(2) - 1) as f64;
        let rates = [
            exp_decay(cfg.lr.means * extent, cfg.lr.means_final * extent, progress),
            cfg.lr.scale,
            cfg.lr.rotation,
            cfg.lr.opacity,
            cfg.lr.radiance,
        ];
        for group in 0..5 {
            let mut params = gather(&st.scene, group);
            let gg = gather_grads(&g, group);
            if adam_step(&mut params, &gg, &mut st.adam[group], rates[group], &cfg.adam)? {
                scatter(&mut st.scene, group, &params);
            } else {
                log::warn!("iteration {iter}: non-finite {} gradient, update skipped", GROUP_NAMES[group]);
            }
        }
        if let ToneMapper::Grid(grid) = &mut tone {
            let p = (iter - fine_start) as f64 / (fine_len.max(2) - 1) as f64;
            let lr = exp_decay(cfg.lr.grid, cfg.lr.grid_final, p);
            let nn = grid.node_count();
            let mut params: Vec<f64> = (0..3).flat_map(|c| grid.values(c).to_vec()).collect();
            let flat: Vec<f64> = node_grads.concat();
            if adam_step(&mut params, &flat, &mut grid_adam, lr, &cfg.adam)? {
                for c in 0..3 {
                    grid.set_values(c, &params[c * nn..(c + 1) * nn]);
                }
            } else {
                log::warn!("iteration {iter}: non-finite grid gradient, update skipped");
            }
        }

        if cfg.densify_enabled {
            for (i, gi) in g.iter().enumerate() {
                let norm = gi.mean.norm();
                if norm > 0.0 {
                    st.grad_accum[i] += norm;
                    st.grad_count[i] += 1;
                }
            }
            if iter >= cfg.densify_start && iter < cfg.densify_until && iter % cfg.densify_interval == 0 {
                let avg: Vec<f64> = st
                    .grad_accum
                    .iter()
                    .zip(&st.grad_count)
                    .map(|(&a, &c)| if c > 0 { a / c as f64 } else { 0.0 })
                    .collect();
                let parents = densify(&mut st.scene, &avg, cfg.densify_grad_threshold, cfg.max_points, &mut init_rng);
                if !parents.is_empty() {
                    for (a, &s) in st.adam.iter_mut().zip(&GROUP_STRIDES) {
                        a.push_zero_rows(parents.len(), s);
                    }
                    for &p in &parents {
                        let s = st.scores.values[p];
                        st.scores.values.push(s);
                    }
                    log::debug!("iteration {iter}: cloned {} gaussians", parents.len());
                }
                st.grad_accum = vec![0.0; st.scene.len()];
                st.grad_count = vec![0; st.scene.len()];
            }
        }

        match scheduler.event_at(iter) {
            Some(ScheduledEvent::OpacityReset) => {
                reset_opacity(&mut st.scene, cfg.opacity_reset_ceiling);
                st.adam[3].clear_moments();
                st.scores.reset();
                log::debug!("iteration {iter}: opacity reset");
            }
            Some(ScheduledEvent::Prune) => {
                let survivors = st.scores.values.iter().filter(|&&s| s >= cfg.prune_threshold).count();
                if survivors == 0 {
                    log::warn!("iteration {iter}: prune would remove every gaussian, skipped");
                    st.scores.reset();
                } else {
                    let keep = prune(&mut st.scene, &mut st.scores, cfg.prune_threshold);
                    st.retain(&keep);
                    log::debug!("iteration {iter}: pruned to {} gaussians", st.scene.len());
                }
            }
            None => {}
        }

        if iter % cfg.log_interval == 0 || iter == total {
            log.push(LogRow {
                iter,
                phase,
                l1: terms.l1,
                dssim: terms.dssim,
                smooth: terms.smooth,
                unit: terms.unit,
                total: terms.total,
                points: st.scene.len(),
            });
        }
        if iter % 1000 == 0 {
            log::info!("iteration {iter}/{total}: loss {:.5}, {} points", terms.total, st.scene.len());
        }
    }

    if let ToneMapper::Grid(grid) = &tone {
        let bad = grid.non_monotone_segments();
        if !bad.is_empty() {
            log::info!("learned response has {} non-monotone segments", bad.len());
        }
    }
    let phase = if matches!(tone, ToneMapper::Grid(_)) {
        Phase::Fine
    } else {
        Phase::Coarse
    };
    let config_json = cfg.to_json();
    let checkpoint = ModelCheckpoint {
        model: HdrModel {
            gaussians: st.scene,
            tone,
            scaler,
        },
        phase,
        iteration: total as u64,
        config_hash: config_hash(&config_json),
        config_json,
    };
    Ok(TrainOutput { checkpoint, log })
}
