//! Training objective and evaluation metrics.
//!
//! The reconstruction term mixes L1 and D-SSIM; the fine phase adds the grid
//! smoothness and unit-exposure regularizers:
//!
//! `L = (1 − dssim_weight)·L1 + dssim_weight·D-SSIM + smooth_weight·L_smooth + unit_weight·L_unit`
//!
//! Losses act on the unclamped tone-mapped prediction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::FloatImage;
use crate::tone::{GridConfig, ToneMapper};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;
/// Reported PSNR for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    /// D-SSIM mix weight.
    pub dssim_weight: f64,
    /// Grid smoothness weight.
    pub smooth_weight: f64,
    /// Unit-exposure weight.
    pub unit_weight: f64,
    /// Units in which grid curvature enters the objective.
    pub smooth_units: SmoothUnits,
}

/// Scale of the smoothness term inside the training objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothUnits {
    /// Second differences of node values per dense-grid step, i.e. the
    /// derivative form multiplied by `h⁴` with `h` the dense spacing.
    #[default]
    NodeIndex,
    /// Second derivatives with respect to the grid input.
    Derivative,
}

impl SmoothUnits {
    pub fn factor(self, grid: &GridConfig) -> f64 {
        match self {
            Self::NodeIndex => (1.0 / grid.dense_density as f64).powi(4),
            Self::Derivative => 1.0,
        }
    }
}

impl Default for LossConfig {
    /// Weights for synthetic scenes.
    fn default() -> Self {
        Self {
            dssim_weight: 0.2,
            smooth_weight: 0.3,
            unit_weight: 0.5,
            smooth_units: SmoothUnits::default(),
        }
    }
}

impl LossConfig {
    /// Weights for captured scenes.
    pub fn real() -> Self {
        Self {
            dssim_weight: 0.2,
            smooth_weight: 1e-3,
            unit_weight: 0.0,
            smooth_units: SmoothUnits::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.dssim_weight) {
            return Err(Error::Config(format!("dssim_weight must lie in [0, 1], got {}", self.dssim_weight)));
        }
        if !(self.smooth_weight >= 0.0 && self.unit_weight >= 0.0) {
            return Err(Error::Config("smooth_weight and unit_weight must be non-negative".into()));
        }
        Ok(())
    }
}

/// Mean absolute error and its subgradient (0 at exact ties).
pub fn l1_loss(pred: &FloatImage, target: &FloatImage) -> Result<(f64, FloatImage)> {
    pred.ensure_same_shape(target)?;
    let n = pred.data().len().max(1) as f64;
    let mut grad = FloatImage::new(pred.width(), pred.height());
    let mut sum = 0.0;
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        sum += d.abs();
        *g = if d > 0.0 {
            1.0 / n
        } else if d < 0.0 {
            -1.0 / n
        } else {
            0.0
        };
    }
    Ok((sum / n, grad))
}

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Valid-region separable correlation of a `w x h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut s = 0.0;
            for (j, kv) in k.iter().enumerate() {
                s += kv * tmp[(y + j) * ow + x];
            }
            out[y * ow + x] = s;
        }
    }
    out
}

/// Adjoint of [`filter_valid`]: scatters an `(w−10) x (h−10)` map back to `w x h`.
fn filter_valid_adjoint(map: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..oh {
        for x in 0..ow {
            let v = map[y * ow + x];
            for (j, kv) in k.iter().enumerate() {
                tmp[(y + j) * ow + x] += kv * v;
            }
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..ow {
            let v = tmp[y * ow + x];
            for (i, kv) in k.iter().enumerate() {
                out[y * w + x + i] += kv * v;
            }
        }
    }
    out
}

fn ssim_impl(pred: &FloatImage, target: &FloatImage, want_grad: bool) -> Result<(f64, Option<FloatImage>)> {
    pred.ensure_same_shape(target)?;
    let (w, h) = pred.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            window: SSIM_WINDOW,
        });
    }
    let k = gaussian_taps();
    let count = ((w + 1 - SSIM_WINDOW) * (h + 1 - SSIM_WINDOW) * 3) as f64;
    let mut total = 0.0;
    let mut grad = want_grad.then(|| FloatImage::new(w, h));
    for c in 0..3 {
        let x = pred.channel(c);
        let y = target.channel(c);
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        let mx = filter_valid(&x, w, h, &k);
        let my = filter_valid(&y, w, h, &k);
        let exx = filter_valid(&xx, w, h, &k);
        let eyy = filter_valid(&yy, w, h, &k);
        let exy = filter_valid(&xy, w, h, &k);
        let n = mx.len();
        let (mut da, mut db, mut dc) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            let (ux, uy) = (mx[i], my[i]);
            let vx = exx[i] - ux * ux;
            let vy = eyy[i] - uy * uy;
            let cxy = exy[i] - ux * uy;
            let a = 2.0 * ux * uy + SSIM_C1;
            let b = 2.0 * cxy + SSIM_C2;
            let cc = ux * ux + uy * uy + SSIM_C1;
            let d = vx + vy + SSIM_C2;
            let s = a * b / (cc * d);
            total += s;
            if want_grad {
                // partials w.r.t. the local mean, E[x²] and E[xy] of the prediction
                da[i] = 2.0 * uy * (b - a) / (cc * d) - s * (2.0 * ux / cc - 2.0 * ux / d);
                db[i] = -s / d;
                dc[i] = 2.0 * a / (cc * d);
            }
        }
        if let Some(g) = grad.as_mut() {
            let ga = filter_valid_adjoint(&da, w, h, &k);
            let gb = filter_valid_adjoint(&db, w, h, &k);
            let gc = filter_valid_adjoint(&dc, w, h, &k);
            for p in 0..w * h {
                g.data_mut()[p * 3 + c] = (ga[p] + 2.0 * x[p] * gb[p] + y[p] * gc[p]) / count;
            }
        }
    }
    Ok((total / count, grad))
}

/// Mean single-scale SSIM over valid 11x11 Gaussian windows and channels.
pub fn ssim(pred: &FloatImage, target: &FloatImage) -> Result<f64> {
    ssim_impl(pred, target, false).map(|(s, _)| s)
}

/// `(1 − SSIM) / 2` and its gradient with respect to `pred`.
pub fn dssim_loss(pred: &FloatImage, target: &FloatImage) -> Result<(f64, FloatImage)> {
    let (s, g) = ssim_impl(pred, target, true)?;
    let mut g = g.expect("gradient requested");
    g.data_mut().iter_mut().for_each(|v| *v *= -0.5);
    Ok(((1.0 - s) / 2.0, g))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LossTerms {
    pub l1: f64,
    pub dssim: f64,
    /// Curvature in derivative units, before [`SmoothUnits`] scaling.
    pub smooth: f64,
    pub unit: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossGrads {
    /// Gradient with respect to the tone-mapped prediction.
    pub pred: FloatImage,
    /// Gradient of the grid regularizers with respect to node values; `None`
    /// while the sigmoid mapper is active.
    pub nodes: Option<[Vec<f64>; 3]>,
}

/// Full objective. Grid regularizers are skipped while `mapper` is the sigmoid.
pub fn total_loss(
    pred: &FloatImage,
    target: &FloatImage,
    mapper: &ToneMapper,
    cfg: &LossConfig,
) -> Result<(LossTerms, LossGrads)> {
    let (l1, g1) = l1_loss(pred, target)?;
    let mut terms = LossTerms {
        l1,
        ..LossTerms::default()
    };
    let mut grad = g1;
    let w1 = 1.0 - cfg.dssim_weight;
    grad.data_mut().iter_mut().for_each(|v| *v *= w1);
    if cfg.dssim_weight > 0.0 {
        let (d, gd) = dssim_loss(pred, target)?;
        terms.dssim = d;
        for (g, v) in grad.data_mut().iter_mut().zip(gd.data()) {
            *g += cfg.dssim_weight * v;
        }
    }
    terms.total = w1 * terms.l1 + cfg.dssim_weight * terms.dssim;
    let nodes = match mapper.grid() {
        None => None,
        Some(grid) => {
            let (smooth, gs) = grid.smoothness_loss();
            let (unit, gu) = grid.unit_exposure_loss()?;
            let w2 = cfg.smooth_weight * cfg.smooth_units.factor(grid.config());
            terms.smooth = smooth;
            terms.unit = unit;
            terms.total += w2 * smooth + cfg.unit_weight * unit;
            let mut out: [Vec<f64>; 3] = Default::default();
            for c in 0..3 {
                out[c] = gs[c]
                    .iter()
                    .zip(&gu[c])
                    .map(|(s, u)| w2 * s + cfg.unit_weight * u)
                    .collect();
            }
            Some(out)
        }
    };
    Ok((terms, LossGrads { pred: grad, nodes }))
}

pub fn mse(pred: &FloatImage, target: &FloatImage) -> Result<f64> {
    pred.ensure_same_shape(target)?;
    let n = pred.data().len().max(1) as f64;
    Ok(pred.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
}

/// `−10 log₁₀ MSE` on `[0, 1]` images, capped at 99 dB.
pub fn psnr(pred: &FloatImage, target: &FloatImage) -> Result<f64> {
    let m = mse(pred, target)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((-10.0 * m.log10()).min(PSNR_CAP_DB))
}

/// RMSE of `ln pred − ln gt` after removing the best global log offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HdrLogError {
    pub rmse: f64,
    /// Mean of `ln pred − ln gt`: the removed global log scale.
    pub offset: f64,
    pub used: usize,
    /// Samples skipped because either value was non-positive or non-finite.
    pub excluded: usize,
}

pub fn hdr_log_rmse(pred: &FloatImage, gt: &FloatImage) -> Result<HdrLogError> {
    pred.ensure_same_shape(gt)?;
    let diffs: Vec<f64> = pred
        .data()
        .iter()
        .zip(gt.data())
        .filter(|(p, g)| **p > 0.0 && **g > 0.0 && p.is_finite() && g.is_finite())
        .map(|(p, g)| p.ln() - g.ln())
        .collect();
    let excluded = pred.data().len() - diffs.len();
    if diffs.is_empty() {
        return Ok(HdrLogError {
            rmse: f64::NAN,
            offset: f64::NAN,
            used: 0,
            excluded,
        });
    }
    let n = diffs.len() as f64;
    let offset = diffs.iter().sum::<f64>() / n;
    let rmse = (diffs.iter().map(|d| (d - offset) * (d - offset)).sum::<f64>() / n).sqrt();
    Ok(HdrLogError {
        rmse,
        offset,
        used: diffs.len(),
        excluded,
    })
}

/// Median of `pred / gt` over samples where both are positive.
pub fn median_ratio(pred: &FloatImage, gt: &FloatImage) -> Result<Option<f64>> {
    pred.ensure_same_shape(gt)?;
    let mut r: Vec<f64> = pred
        .data()
        .iter()
        .zip(gt.data())
        .filter(|(p, g)| **p > 0.0 && **g > 0.0 && p.is_finite() && g.is_finite())
        .map(|(p, g)| p / g)
        .collect();
    if r.is_empty() {
        return Ok(None);
    }
    r.sort_by(f64::total_cmp);
    let m = r.len() / 2;
    Ok(Some(if r.len() % 2 == 1 { r[m] } else { 0.5 * (r[m - 1] + r[m]) }))
}
