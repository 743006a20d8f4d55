//! Front-to-back splatting of learned radiance into per-pixel irradiance.
//!
//! The tiled renderer projects every Gaussian once, sorts the visible ones
//! by camera depth (ties keep input order), bins them into square tiles and
//! composites each pixel independently:
//!
//! `E'(p) = Σᵢ L'ᵢ αᵢ Πⱼ<ᵢ (1 − αⱼ)`
//!
//! Tiles are processed in parallel and merged in tile order, so results are
//! bit-identical from run to run regardless of thread count.

use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    evaluate_alpha, project_gaussian, project_gaussian_backward, Camera, Gaussian3D, ProjectedGaussian, ALPHA_MAX,
};
use crate::image::FloatImage;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RasterConfig {
    /// Tile edge length in pixels.
    pub tile_size: usize,
    /// Compositing stops once transmittance falls below this value.
    pub min_transmittance: f64,
    /// Splat weights `α` below this value are treated as zero; also bounds
    /// the footprint used for tile binning.
    pub min_alpha: f64,
}

/// Default `α` cutoff, one 8-bit quantization step.
pub const MIN_ALPHA: f64 = 1.0 / 255.0;

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            tile_size: 16,
            min_transmittance: 1e-4,
            min_alpha: MIN_ALPHA,
        }
    }
}

/// Learned irradiance `E'` plus the transmittance left after the last
/// composited Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct IrradianceImage {
    pub values: FloatImage,
    pub final_transmittance: Vec<f64>,
}

impl IrradianceImage {
    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn transmittance(&self, x: usize, y: usize) -> f64 {
        self.final_transmittance[y * self.width() + x]
    }
}

/// Running per-Gaussian maximum of `α·τ` over pixels and views.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContributionScores {
    pub values: Vec<f64>,
}

impl ContributionScores {
    pub fn new(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn reset(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Gradient of a scalar objective with respect to every parameter of one
/// Gaussian. `rotation` is ordered `(w, x, y, z)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GaussianGrad {
    pub mean: Vector3<f64>,
    pub log_scale: Vector3<f64>,
    pub rotation: [f64; 4],
    pub opacity_logit: f64,
    pub radiance: Vector3<f64>,
}

impl GaussianGrad {
    pub fn is_finite(&self) -> bool {
        self.mean.iter().all(|v| v.is_finite())
            && self.log_scale.iter().all(|v| v.is_finite())
            && self.rotation.iter().all(|v| v.is_finite())
            && self.opacity_logit.is_finite()
            && self.radiance.iter().all(|v| v.is_finite())
    }
}

struct Splat {
    source: usize,
    pg: ProjectedGaussian,
    /// Mahalanobis radius² beyond which `α` drops below the cutoff.
    q_cut: f64,
}

fn cutoff_radius_sq(opacity: f64, min_alpha: f64) -> f64 {
    if opacity >= min_alpha {
        2.0 * (opacity / min_alpha).ln()
    } else {
        -1.0
    }
}

struct Binned {
    splats: Vec<Splat>,
    tiles: Vec<Vec<u32>>,
    tiles_x: usize,
    width: usize,
    height: usize,
    tile: usize,
}

impl Binned {
    fn tile_bounds(&self, t: usize) -> (usize, usize, usize, usize) {
        let (tx, ty) = (t % self.tiles_x, t / self.tiles_x);
        let x0 = tx * self.tile;
        let y0 = ty * self.tile;
        (x0, y0, (x0 + self.tile).min(self.width), (y0 + self.tile).min(self.height))
    }
}

/// `(α, exp(−q/2), clamped)`, with `α = 0` outside the cutoff.
#[inline]
fn alpha_terms(s: &Splat, px: f64, py: f64) -> (f64, f64, bool) {
    let pg = &s.pg;
    let dx = px - pg.mean2d.x;
    let dy = py - pg.mean2d.y;
    let a = &pg.conic;
    let q = a[(0, 0)] * dx * dx + (a[(0, 1)] + a[(1, 0)]) * dx * dy + a[(1, 1)] * dy * dy;
    if !(q <= s.q_cut) {
        return (0.0, 0.0, false);
    }
    let gauss = (-0.5 * q).exp();
    let raw = pg.opacity * gauss;
    if raw > ALPHA_MAX {
        (ALPHA_MAX, gauss, true)
    } else {
        (raw, gauss, false)
    }
}

fn project_all(scene: &[Gaussian3D], cam: &Camera, min_alpha: f64) -> Vec<Splat> {
    scene
        .par_iter()
        .enumerate()
        .filter_map(|(source, g)| match project_gaussian(g, cam) {
            Ok(Some(pg)) => {
                let q_cut = cutoff_radius_sq(pg.opacity, min_alpha);
                (q_cut >= 0.0).then_some(Splat { source, pg, q_cut })
            }
            Ok(None) => None,
            Err(e) => {
                log::debug!("gaussian {source} skipped: {e}");
                None
            }
        })
        .collect()
}

/// Screen-space gradient accumulated for one splat.
#[derive(Clone, Copy, Default)]
struct ScreenGrad {
    radiance: [f64; 3],
    opacity: f64,
    mean2d: [f64; 2],
    /// d/dA00, d/dA01 (= d/dA10), d/dA11 of the conic.
    conic: [f64; 3],
}

impl ScreenGrad {
    fn add(&mut self, o: &ScreenGrad) {
        for c in 0..3 {
            self.radiance[c] += o.radiance[c];
            self.conic[c] += o.conic[c];
        }
        self.opacity += o.opacity;
        self.mean2d[0] += o.mean2d[0];
        self.mean2d[1] += o.mean2d[1];
    }
}

struct TileForward {
    values: Vec<[f64; 3]>,
    transmittance: Vec<f64>,
    contribution: Option<Vec<f64>>,
}

/// Tiled splatting renderer.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Rasterizer {
    pub config: RasterConfig,
}

impl Rasterizer {
    pub fn new(config: RasterConfig) -> Self {
        Self { config }
    }

    fn bin(&self, scene: &[Gaussian3D], cam: &Camera) -> Binned {
        let mut splats = project_all(scene, cam, self.config.min_alpha);
        // stable: equal depths keep input order
        splats.sort_by(|a, b| a.pg.depth.total_cmp(&b.pg.depth));
        let tile = self.config.tile_size.max(1);
        let (width, height) = (cam.width, cam.height);
        let tiles_x = width.div_ceil(tile);
        let tiles_y = height.div_ceil(tile);
        let mut tiles = vec![Vec::new(); tiles_x * tiles_y];
        for (k, s) in splats.iter().enumerate() {
            let rx = (s.q_cut * s.pg.cov2d[(0, 0)]).sqrt();
            let ry = (s.q_cut * s.pg.cov2d[(1, 1)]).sqrt();
            let (mx, my) = (s.pg.mean2d.x, s.pg.mean2d.y);
            let x0 = (mx - rx).ceil().max(0.0);
            let x1 = (mx + rx).floor().min((width - 1) as f64);
            let y0 = (my - ry).ceil().max(0.0);
            let y1 = (my + ry).floor().min((height - 1) as f64);
            if x0 > x1 || y0 > y1 {
                continue;
            }
            let (tx0, tx1) = (x0 as usize / tile, x1 as usize / tile);
            let (ty0, ty1) = (y0 as usize / tile, y1 as usize / tile);
            for ty in ty0..=ty1 {
                for tx in tx0..=tx1 {
                    tiles[ty * tiles_x + tx].push(k as u32);
                }
            }
        }
        Binned {
            splats,
            tiles,
            tiles_x,
            width,
            height,
            tile,
        }
    }

    fn forward_tile(&self, b: &Binned, t: usize, track: bool) -> TileForward {
        let (x0, y0, x1, y1) = b.tile_bounds(t);
        let list = &b.tiles[t];
        let n = (x1 - x0) * (y1 - y0);
        let mut values = Vec::with_capacity(n);
        let mut transmittance = Vec::with_capacity(n);
        let mut contribution = track.then(|| vec![0.0; list.len()]);
        let min_t = self.config.min_transmittance;
        for y in y0..y1 {
            for x in x0..x1 {
                let (px, py) = (x as f64, y as f64);
                let mut e = [0.0; 3];
                let mut trans = 1.0;
                for (local, &k) in list.iter().enumerate() {
                    let s = &b.splats[k as usize];
                    let pg = &s.pg;
                    let (alpha, _, _) = alpha_terms(s, px, py);
                    if alpha <= 0.0 {
                        continue;
                    }
                    let w = alpha * trans;
                    for c in 0..3 {
                        e[c] += pg.radiance[c] * w;
                    }
                    if let Some(contrib) = contribution.as_mut() {
                        if w > contrib[local] {
                            contrib[local] = w;
                        }
                    }
                    trans *= 1.0 - alpha;
                    if trans < min_t {
                        break;
                    }
                }
                values.push(e);
                transmittance.push(trans);
            }
        }
        TileForward {
            values,
            transmittance,
            contribution,
        }
    }

    fn forward(&self, scene: &[Gaussian3D], cam: &Camera, scores: Option<&mut ContributionScores>) -> IrradianceImage {
        let b = self.bin(scene, cam);
        let track = scores.is_some();
        let outputs: Vec<TileForward> = (0..b.tiles.len())
            .into_par_iter()
            .map(|t| self.forward_tile(&b, t, track))
            .collect();
        let mut values = FloatImage::new(b.width, b.height);
        let mut final_transmittance = vec![1.0; b.width * b.height];
        for (t, out) in outputs.iter().enumerate() {
            let (x0, y0, x1, y1) = b.tile_bounds(t);
            let mut i = 0;
            for y in y0..y1 {
                for x in x0..x1 {
                    values.set_pixel(x, y, out.values[i]);
                    final_transmittance[y * b.width + x] = out.transmittance[i];
                    i += 1;
                }
            }
        }
        if let Some(scores) = scores {
            for (t, out) in outputs.iter().enumerate() {
                if let Some(contrib) = &out.contribution {
                    for (local, &k) in b.tiles[t].iter().enumerate() {
                        let src = b.splats[k as usize].source;
                        if contrib[local] > scores.values[src] {
                            scores.values[src] = contrib[local];
                        }
                    }
                }
            }
        }
        IrradianceImage {
            values,
            final_transmittance,
        }
    }

    /// Renders the learned irradiance `E'` seen by `cam`.
    pub fn render(&self, scene: &[Gaussian3D], cam: &Camera) -> IrradianceImage {
        self.forward(scene, cam, None)
    }

    /// Renders and folds this view's per-Gaussian `max α·τ` into `scores`.
    pub fn render_with_scores(
        &self,
        scene: &[Gaussian3D],
        cam: &Camera,
        scores: &mut ContributionScores,
    ) -> Result<IrradianceImage> {
        if scores.len() != scene.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} scores for {} gaussians",
                scores.len(),
                scene.len()
            )));
        }
        Ok(self.forward(scene, cam, Some(scores)))
    }

    /// Gradients of `Σₚ ⟨grad(p), E'(p)⟩` with respect to every Gaussian
    /// parameter. Culled Gaussians receive zero gradient.
    pub fn backward(&self, scene: &[Gaussian3D], cam: &Camera, grad: &FloatImage) -> Result<Vec<GaussianGrad>> {
        if grad.dims() != (cam.width, cam.height) {
            return Err(Error::ShapeMismatch(format!(
                "gradient image {}x{} for a {}x{} camera",
                grad.width(),
                grad.height(),
                cam.width,
                cam.height
            )));
        }
        let b = self.bin(scene, cam);
        let partials: Vec<Vec<ScreenGrad>> = (0..b.tiles.len())
            .into_par_iter()
            .map(|t| self.backward_tile(&b, t, grad))
            .collect();
        let mut screen = vec![ScreenGrad::default(); b.splats.len()];
        for (t, partial) in partials.iter().enumerate() {
            for (local, &k) in b.tiles[t].iter().enumerate() {
                screen[k as usize].add(&partial[local]);
            }
        }
        let per_splat: Vec<Result<(usize, GaussianGrad)>> = b
            .splats
            .par_iter()
            .zip(screen.par_iter())
            .map(|(s, sg)| {
                let g = &scene[s.source];
                let a = &s.pg.conic;
                let d_conic = Matrix2::new(sg.conic[0], sg.conic[1], sg.conic[1], sg.conic[2]);
                let d_cov = -(a.transpose() * d_conic * a.transpose());
                let d_mean2d = Vector2::new(sg.mean2d[0], sg.mean2d[1]);
                let pgrad = project_gaussian_backward(g, cam, &d_mean2d, &d_cov)?;
                let sigma = s.pg.opacity;
                Ok((
                    s.source,
                    GaussianGrad {
                        mean: pgrad.mean,
                        log_scale: pgrad.log_scale,
                        rotation: pgrad.rotation,
                        opacity_logit: sg.opacity * sigma * (1.0 - sigma),
                        radiance: Vector3::from(sg.radiance),
                    },
                ))
            })
            .collect();
        let mut out = vec![GaussianGrad::default(); scene.len()];
        for r in per_splat {
            let (src, g) = r?;
            out[src] = g;
        }
        Ok(out)
    }

    fn backward_tile(&self, b: &Binned, t: usize, grad: &FloatImage) -> Vec<ScreenGrad> {
        let (x0, y0, x1, y1) = b.tile_bounds(t);
        let list = &b.tiles[t];
        let mut acc = vec![ScreenGrad::default(); list.len()];
        let min_t = self.config.min_transmittance;
        // (local index, alpha, gaussian term, clamped, transmittance before)
        let mut hits: Vec<(usize, f64, f64, bool, f64)> = Vec::with_capacity(list.len());
        for y in y0..y1 {
            for x in x0..x1 {
                let g_pix = grad.pixel(x, y);
                if g_pix == [0.0; 3] {
                    continue;
                }
                let (px, py) = (x as f64, y as f64);
                hits.clear();
                let mut trans = 1.0;
                for (local, &k) in list.iter().enumerate() {
                    let (alpha, gauss, clamped) = alpha_terms(&b.splats[k as usize], px, py);
                    if alpha <= 0.0 {
                        continue;
                    }
                    hits.push((local, alpha, gauss, clamped, trans));
                    trans *= 1.0 - alpha;
                    if trans < min_t {
                        break;
                    }
                }
                // back to front; `behind` is the normalized radiance composited
                // behind the current splat
                let mut behind = [0.0; 3];
                for &(local, alpha, gauss, clamped, t_before) in hits.iter().rev() {
                    let pg = &b.splats[list[local] as usize].pg;
                    let w = alpha * t_before;
                    let sg = &mut acc[local];
                    let mut d_alpha = 0.0;
                    for c in 0..3 {
                        sg.radiance[c] += g_pix[c] * w;
                        d_alpha += g_pix[c] * (pg.radiance[c] - behind[c]);
                        behind[c] = alpha * pg.radiance[c] + (1.0 - alpha) * behind[c];
                    }
                    d_alpha *= t_before;
                    if clamped {
                        continue;
                    }
                    sg.opacity += d_alpha * gauss;
                    // alpha = σ exp(-q/2)
                    let d_q = -0.5 * d_alpha * pg.opacity * gauss;
                    let dx = px - pg.mean2d.x;
                    let dy = py - pg.mean2d.y;
                    let a = &pg.conic;
                    sg.conic[0] += d_q * dx * dx;
                    sg.conic[1] += d_q * dx * dy;
                    sg.conic[2] += d_q * dy * dy;
                    // dq/dμ = -(A + Aᵀ) d
                    let ax = 2.0 * a[(0, 0)] * dx + (a[(0, 1)] + a[(1, 0)]) * dy;
                    let ay = (a[(0, 1)] + a[(1, 0)]) * dx + 2.0 * a[(1, 1)] * dy;
                    sg.mean2d[0] -= d_q * ax;
                    sg.mean2d[1] -= d_q * ay;
                }
            }
        }
        acc
    }

    /// Folds this view's `max α·τ` per Gaussian into `scores`.
    pub fn accumulate_scores(
        &self,
        scene: &[Gaussian3D],
        cam: &Camera,
        scores: &mut ContributionScores,
    ) -> Result<()> {
        self.render_with_scores(scene, cam, scores).map(|_| ())
    }
}

/// Tiled render with the default configuration.
pub fn render_irradiance(scene: &[Gaussian3D], cam: &Camera) -> IrradianceImage {
    Rasterizer::default().render(scene, cam)
}

/// Adjoint of [`render_irradiance`].
pub fn render_backward(scene: &[Gaussian3D], cam: &Camera, grad: &FloatImage) -> Result<Vec<GaussianGrad>> {
    Rasterizer::default().backward(scene, cam, grad)
}

pub fn accumulate_contribution_scores(
    scene: &[Gaussian3D],
    cam: &Camera,
    scores: &mut ContributionScores,
) -> Result<()> {
    Rasterizer::default().accumulate_scores(scene, cam, scores)
}

/// Brute-force renderer used as a test oracle: every pixel visits every
/// projected Gaussian, sorted per pixel, with no tiling and no early
/// termination. Uses the [`MIN_ALPHA`] cutoff.
pub fn render_irradiance_reference(scene: &[Gaussian3D], cam: &Camera) -> IrradianceImage {
    let splats: Vec<(usize, ProjectedGaussian)> = scene
        .iter()
        .enumerate()
        .filter_map(|(source, g)| project_gaussian(g, cam).ok().flatten().map(|pg| (source, pg)))
        .collect();
    let (w, h) = (cam.width, cam.height);
    let mut values = FloatImage::new(w, h);
    let mut final_transmittance = vec![1.0; w * h];
    let mut order: Vec<(f64, usize, f64)> = Vec::with_capacity(splats.len());
    for y in 0..h {
        for x in 0..w {
            let p = Vector2::new(x as f64, y as f64);
            order.clear();
            order.extend(splats.iter().map(|(src, pg)| {
                let a = evaluate_alpha(pg, &p);
                (pg.depth, *src, if a < MIN_ALPHA { 0.0 } else { a })
            }));
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut e = [0.0; 3];
            let mut trans = 1.0;
            for &(_, src, alpha) in &order {
                let l = &scene[src].radiance;
                for c in 0..3 {
                    e[c] += l[c] * alpha * trans;
                }
                trans *= 1.0 - alpha;
            }
            values.set_pixel(x, y, e);
            final_transmittance[y * w + x] = trans;
        }
    }
    IrradianceImage {
        values,
        final_transmittance,
    }
}
