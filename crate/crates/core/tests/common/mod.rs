//! Finite-difference gradient checks and scene builders shared by the
//! integration tests and the acceptance harness.
#![allow(dead_code)]

use hdrgs::geometry::{project_gaussian, project_gaussian_backward, Camera, Gaussian3D, Intrinsics};
use hdrgs::image::FloatImage;
use hdrgs::loss::{dssim_loss, l1_loss, total_loss, LossConfig};
use hdrgs::raster::{RasterConfig, Rasterizer};
use hdrgs::tone::{sigmoid_backward, sigmoid_eval, AsymmetricGrid, GridConfig, ToneMapper};
use nalgebra::{Matrix2, Quaternion, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-3;
pub const REL_TOL: f64 = 1e-3;
/// Gradients smaller than this are compared on an absolute scale.
pub const REL_FLOOR: f64 = 1e-4;
pub const GRID_ABS_TOL: f64 = 1e-6;
pub const UNIT_ABS_TOL: f64 = 1e-8;
pub const L1_ABS_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug)]
pub enum Tol {
    Rel(f64),
    Abs(f64),
}

impl Tol {
    fn error(self, analytic: f64, numeric: f64) -> f64 {
        let d = (analytic - numeric).abs();
        match self {
            Tol::Rel(_) => d / analytic.abs().max(numeric.abs()).max(REL_FLOOR),
            Tol::Abs(_) => d,
        }
    }

    fn limit(self) -> f64 {
        match self {
            Tol::Rel(t) | Tol::Abs(t) => t,
        }
    }
}

/// Analytic and numeric derivatives collected by one check.
#[derive(Debug)]
pub struct FdCheck {
    pub name: &'static str,
    pub tol: Tol,
    pub samples: Vec<(String, f64, f64)>,
}

impl FdCheck {
    fn new(name: &'static str, tol: Tol) -> Self {
        Self {
            name,
            tol,
            samples: Vec::new(),
        }
    }

    fn push(&mut self, what: impl Into<String>, analytic: f64, numeric: f64) {
        self.samples.push((what.into(), analytic, numeric));
    }

    /// Largest error and the sample that produced it.
    pub fn worst(&self) -> (f64, &str) {
        self.samples
            .iter()
            .map(|(w, a, n)| (self.tol.error(*a, *n), w.as_str()))
            .fold((0.0, ""), |acc, x| if x.0 > acc.0 || x.0.is_nan() { x } else { acc })
    }

    pub fn passes(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|(_, a, n)| self.tol.error(*a, *n) < self.tol.limit())
    }

    pub fn summary(&self) -> String {
        let (err, what) = self.worst();
        let kind = match self.tol {
            Tol::Rel(_) => "rel",
            Tol::Abs(_) => "abs",
        };
        format!(
            "{}: {} samples, worst {kind} error {err:.2e} at {what} (limit {:.0e})",
            self.name,
            self.samples.len(),
            self.tol.limit()
        )
    }

    pub fn assert_ok(&self) {
        assert!(self.passes(), "{}", self.summary());
    }
}

fn central(f: impl Fn(f64) -> f64) -> f64 {
    (f(STEP) - f(-STEP)) / (2.0 * STEP)
}

pub fn camera(w: usize, h: usize) -> Camera {
    Camera::look_at(
        Vector3::new(0.3, -0.2, -4.0),
        Vector3::zeros(),
        Vector3::new(0.0, -1.0, 0.0),
        Intrinsics::from_fov(w, h, 50.0),
        w,
        h,
        1.0,
    )
    .unwrap()
}

pub fn random_gaussian(rng: &mut ChaCha8Rng, extent: f64, log_scale: (f64, f64), opacity: (f64, f64)) -> Gaussian3D {
    Gaussian3D::new(
        Vector3::from_fn(|_, _| rng.random_range(-extent..extent)),
        Vector3::from_fn(|_, _| rng.random_range(log_scale.0..log_scale.1)),
        Quaternion::new(
            rng.random_range(0.5..1.0),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        ),
        rng.random_range(opacity.0..opacity.1),
        Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
    )
}

pub fn random_scene(rng: &mut ChaCha8Rng, n: usize) -> Vec<Gaussian3D> {
    (0..n).map(|_| random_gaussian(rng, 0.8, (-1.3, -0.6), (0.3, 0.9))).collect()
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64) -> FloatImage {
    FloatImage::from_vec(w, h, (0..w * h * 3).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// A grid whose interior nodes follow the sigmoid plus a seeded wiggle.
pub fn random_grid(rng: &mut ChaCha8Rng) -> AsymmetricGrid {
    let mut g = AsymmetricGrid::new(GridConfig::default()).unwrap();
    g.init_from_sigmoid();
    let n = g.node_count();
    for c in 0..3 {
        let v: Vec<f64> = (0..n)
            .map(|i| {
                let base = g.values(c)[i];
                if g.is_learnable(i) {
                    base + rng.random_range(-0.02..0.02)
                } else {
                    base
                }
            })
            .collect();
        g.set_values(c, &v);
    }
    g
}

fn with_node(grid: &AsymmetricGrid, c: usize, i: usize, delta: f64) -> AsymmetricGrid {
    let mut g = grid.clone();
    let mut v = g.values(c).to_vec();
    v[i] += delta;
    g.set_values(c, &v);
    g
}

/// Rasterizer without the cutoffs that make the forward pass piecewise, so
/// that central differences are smooth.
pub fn smooth_rasterizer() -> Rasterizer {
    Rasterizer::new(RasterConfig {
        min_alpha: 1e-300,
        min_transmittance: 0.0,
        ..RasterConfig::default()
    })
}

fn perturb(scene: &[Gaussian3D], i: usize, param: usize, delta: f64) -> Vec<Gaussian3D> {
    let mut s = scene.to_vec();
    let g = &mut s[i];
    match param {
        0..=2 => g.mean[param] += delta,
        3..=5 => g.log_scale[param - 3] += delta,
        6 => g.rotation.w += delta,
        7 => g.rotation.i += delta,
        8 => g.rotation.j += delta,
        9 => g.rotation.k += delta,
        10 => g.opacity_logit += delta,
        _ => g.radiance[param - 11] += delta,
    }
    s
}

const PARAM_NAMES: [&str; 14] = [
    "mean.x", "mean.y", "mean.z", "log_scale.x", "log_scale.y", "log_scale.z", "rot.w", "rot.x", "rot.y", "rot.z",
    "opacity", "radiance.r", "radiance.g", "radiance.b",
];

/// Every Gaussian parameter of a 5-Gaussian 16x16 scene against the
/// derivative of `Σ ⟨w, E'⟩`.
pub fn check_rasterizer(seed: u64) -> FdCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (16, 16);
    let cam = camera(w, h);
    let scene = random_scene(&mut rng, 5);
    let weights = random_image(&mut rng, w, h, -1.0, 1.0);
    let r = smooth_rasterizer();
    let objective = |s: &[Gaussian3D]| -> f64 {
        let e = r.render(s, &cam);
        e.values.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
    };
    let grads = r.backward(&scene, &cam, &weights).unwrap();
    let mut check = FdCheck::new("rasterizer", Tol::Rel(REL_TOL));
    for (i, g) in grads.iter().enumerate() {
        let analytic = [
            g.mean.x,
            g.mean.y,
            g.mean.z,
            g.log_scale.x,
            g.log_scale.y,
            g.log_scale.z,
            g.rotation[0],
            g.rotation[1],
            g.rotation[2],
            g.rotation[3],
            g.opacity_logit,
            g.radiance.x,
            g.radiance.y,
            g.radiance.z,
        ];
        for (p, &a) in analytic.iter().enumerate() {
            let numeric = central(|d| objective(&perturb(&scene, i, p, d)));
            check.push(format!("gaussian {i} {}", PARAM_NAMES[p]), a, numeric);
        }
    }
    check
}

/// Mean, log-scale and quaternion gradients of `⟨a, μ₂D⟩ + ⟨B, Σ₂D⟩`.
pub fn check_projection(seed: u64) -> FdCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cam = camera(32, 24);
    let mut check = FdCheck::new("projection", Tol::Rel(REL_TOL));
    let mut tried = 0;
    while check.samples.len() < 10 * 8 && tried < 100 {
        tried += 1;
        let g = random_gaussian(&mut rng, 0.8, (-1.5, -0.3), (0.3, 0.9));
        if project_gaussian(&g, &cam).unwrap().is_none() {
            continue;
        }
        let a = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let b = Matrix2::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let objective = |g: &Gaussian3D| -> f64 {
            let pg = project_gaussian(g, &cam).unwrap().expect("stays visible");
            a.dot(&pg.mean2d) + b.component_mul(&pg.cov2d).sum()
        };
        let grad = project_gaussian_backward(&g, &cam, &a, &b).unwrap();
        let analytic = [
            grad.mean.x,
            grad.mean.y,
            grad.mean.z,
            grad.log_scale.x,
            grad.log_scale.y,
            grad.log_scale.z,
            grad.rotation[0],
            grad.rotation[1],
            grad.rotation[2],
            grad.rotation[3],
        ];
        for (p, &an) in analytic.iter().enumerate() {
            let numeric = central(|d| objective(&perturb(std::slice::from_ref(&g), 0, p, d)[0]));
            check.push(format!("try {tried} {}", PARAM_NAMES[p]), an, numeric);
        }
    }
    check
}

/// Grid input and node derivatives at random interior points kept at least
/// two steps away from any node.
pub fn check_grid(seed: u64) -> FdCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = random_grid(&mut rng);
    let cfg = *grid.config();
    let mut check = FdCheck::new("grid", Tol::Abs(GRID_ABS_TOL));
    let node_gap = |x: f64| {
        (0..grid.node_count())
            .map(|i| (grid.node_position(i) - x).abs())
            .fold(f64::INFINITY, f64::min)
    };
    let mut xs = Vec::new();
    while xs.len() < 40 {
        let x = rng.random_range(cfg.x_lo..cfg.x_hi);
        if node_gap(x) > 2.0 * STEP {
            xs.push(x);
        }
    }
    // both tails
    xs.extend([cfg.x_lo - 0.7, cfg.x_lo - 3.0, cfg.x_hi + 0.4, cfg.x_hi + 2.5]);
    for &x in &xs {
        for c in 0..3 {
            let upstream = rng.random_range(-2.0..2.0);
            let b = grid.backward(x, c, upstream);
            let numeric = upstream * central(|d| grid.eval(x + d, c));
            check.push(format!("d/dx at {x:.4} ch{c}"), b.d_input, numeric);
            for (i, an) in b.node_grads {
                if an == 0.0 && !grid.is_learnable(i) {
                    continue;
                }
                let numeric = upstream * central(|d| with_node(&grid, c, i, d).eval(x, c));
                check.push(format!("node {i} at {x:.4} ch{c}"), an, numeric);
            }
        }
    }
    check
}

pub fn check_sigmoid() -> FdCheck {
    let mut check = FdCheck::new("sigmoid", Tol::Rel(REL_TOL));
    for k in -40..=40 {
        let x = k as f64 * 0.2;
        check.push(format!("x = {x:.1}"), sigmoid_backward(x, 1.0), central(|d| sigmoid_eval(x + d)));
    }
    check
}

pub fn check_smoothness(seed: u64) -> FdCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = random_grid(&mut rng);
    let (_, grads) = grid.smoothness_loss();
    let n = grid.node_count();
    let mut check = FdCheck::new("smoothness", Tol::Rel(REL_TOL));
    let x_mid_node = (0..n).find(|&i| grid.node_position(i) >= grid.config().x_mid).unwrap();
    let mut nodes: Vec<usize> = (0..30).map(|_| rng.random_range(1..n - 1)).collect();
    nodes.extend([1, x_mid_node - 1, x_mid_node, x_mid_node + 1, n - 2]);
    for &i in &nodes {
        let c = rng.random_range(0..3);
        let numeric = central(|d| with_node(&grid, c, i, d).smoothness_loss().0);
        check.push(format!("node {i} ch{c}"), grads[c][i], numeric);
    }
    check
}

pub fn check_unit(seed: u64) -> FdCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = random_grid(&mut rng);
    let (_, grads) = grid.unit_exposure_loss().unwrap();
    let zero = (0..grid.node_count()).find(|&i| grid.node_position(i) >= 0.0).unwrap();
    let mut check = FdCheck::new("unit exposure", Tol::Abs(UNIT_ABS_TOL));
    for c in 0..3 {
        for i in zero.saturating_sub(2)..=zero + 2 {
            let numeric = central(|d| with_node(&grid, c, i, d).unit_exposure_loss().unwrap().0);
            check.push(format!("node {i} ch{c}"), grads[c][i], numeric);
        }
    }
    check
}

fn pixel_samples(rng: &mut ChaCha8Rng, len: usize, count: usize) -> Vec<usize> {
    (0..count).map(|_| rng.random_range(0..len)).collect()
}

fn with_pixel(img: &FloatImage, k: usize, delta: f64) -> FloatImage {
    let mut out = img.clone();
    out.data_mut()[k] += delta;
    out
}

/// Prediction and target whose per-entry differences stay clear of ties.
fn image_pair(rng: &mut ChaCha8Rng, w: usize, h: usize) -> (FloatImage, FloatImage) {
    let target = random_image(rng, w, h, 0.0, 1.0);
    let data = target
        .data()
        .iter()
        .map(|&v| {
            let d = rng.random_range(0.01..0.2);
            if rng.random_bool(0.5) {
                v + d
            } else {
                v - d
            }
        })
        .collect();
    (FloatImage::from_vec(w, h, data).unwrap(), target)
}

pub fn check_l1(seed: u64) -> FdCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (pred, target) = image_pair(&mut rng, 16, 16);
    let (_, grad) = l1_loss(&pred, &target).unwrap();
    let mut check = FdCheck::new("L1", Tol::Abs(L1_ABS_TOL));
    for k in pixel_samples(&mut rng, pred.data().len(), 60) {
        let numeric = central(|d| l1_loss(&with_pixel(&pred, k, d), &target).unwrap().0);
        check.push(format!("entry {k}"), grad.data()[k], numeric);
    }
    check
}

pub fn check_dssim(seed: u64) -> FdCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (pred, target) = image_pair(&mut rng, 16, 16);
    let (_, grad) = dssim_loss(&pred, &target).unwrap();
    let mut check = FdCheck::new("D-SSIM", Tol::Rel(REL_TOL));
    for k in pixel_samples(&mut rng, pred.data().len(), 60) {
        let numeric = central(|d| dssim_loss(&with_pixel(&pred, k, d), &target).unwrap().0);
        check.push(format!("entry {k}"), grad.data()[k], numeric);
    }
    check
}

/// Pixel and grid-node gradients of the full objective with a grid mapper.
pub fn check_total_loss(seed: u64) -> FdCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (pred, target) = image_pair(&mut rng, 16, 16);
    let grid = random_grid(&mut rng);
    let cfg = LossConfig::default();
    let mapper = ToneMapper::Grid(grid.clone());
    let (_, grads) = total_loss(&pred, &target, &mapper, &cfg).unwrap();
    let nodes = grads.nodes.expect("grid mapper yields node gradients");
    let mut check = FdCheck::new("total loss", Tol::Rel(REL_TOL));
    for k in pixel_samples(&mut rng, pred.data().len(), 30) {
        let numeric = central(|d| total_loss(&with_pixel(&pred, k, d), &target, &mapper, &cfg).unwrap().0.total);
        check.push(format!("pixel entry {k}"), grads.pred.data()[k], numeric);
    }
    let zero = (0..grid.node_count()).find(|&i| grid.node_position(i) >= 0.0).unwrap();
    let mut idx: Vec<usize> = (0..20).map(|_| rng.random_range(1..grid.node_count() - 1)).collect();
    idx.extend([zero - 1, zero, zero + 1]);
    for i in idx {
        let c = rng.random_range(0..3);
        let numeric = central(|d| {
            let m = ToneMapper::Grid(with_node(&grid, c, i, d));
            total_loss(&pred, &target, &m, &cfg).unwrap().0.total
        });
        check.push(format!("node {i} ch{c}"), nodes[c][i], numeric);
    }
    check
}

/// Every check of the gradient suite with fixed seeds.
pub fn gradient_suite() -> Vec<FdCheck> {
    vec![
        check_rasterizer(11),
        check_projection(12),
        check_grid(13),
        check_sigmoid(),
        check_smoothness(14),
        check_unit(15),
        check_l1(16),
        check_dssim(17),
        check_total_loss(18),
    ]
}
