//! A trained scene: Gaussians, tone mapper and exposure scaling, with the
//! LDR and HDR render paths.

use crate::exposure::ExposureScaler;
use crate::geometry::{Camera, Gaussian3D};
use crate::image::FloatImage;
use crate::raster::{IrradianceImage, Rasterizer};
use crate::tone::ToneMapper;
use crate::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct HdrModel {
    pub gaussians: Vec<Gaussian3D>,
    pub tone: ToneMapper,
    pub scaler: ExposureScaler,
}

impl HdrModel {
    /// Learned irradiance `E'`, independent of exposure.
    pub fn render_learned(&self, cam: &Camera) -> IrradianceImage {
        Rasterizer::default().render(&self.gaussians, cam)
    }

    /// Unclamped `g(E' + t')` at the camera's exposure time.
    pub fn render_ldr_unclamped(&self, cam: &Camera) -> Result<FloatImage> {
        let shift = self.scaler.scale_time(cam.exposure_time)?;
        let irr = self.render_learned(cam);
        Ok(self.tone_map(&irr.values, shift))
    }

    /// Display image `clamp₀₁(g(E' + t'))`.
    pub fn render_ldr(&self, cam: &Camera) -> Result<FloatImage> {
        Ok(self.render_ldr_unclamped(cam)?.map(|v| v.clamp(0.0, 1.0)))
    }

    /// Linear HDR radiance `exp((E' + s) / r)`; the exposure time is ignored.
    pub fn render_hdr(&self, cam: &Camera) -> FloatImage {
        let irr = self.render_learned(cam);
        irr.values.map(|v| self.scaler.hdr_from_learned(v))
    }

    pub fn tone_map(&self, learned: &FloatImage, shift: f64) -> FloatImage {
        let (w, h) = learned.dims();
        let mut out = FloatImage::new(w, h);
        for (i, (o, &e)) in out.data_mut().iter_mut().zip(learned.data()).enumerate() {
            *o = self.tone.eval(e + shift, i % 3);
        }
        out
    }

    /// Tone curve per channel at tone-mapper input `x`.
    pub fn response(&self, x: f64) -> [f64; 3] {
        [self.tone.eval(x, 0), self.tone.eval(x, 1), self.tone.eval(x, 2)]
    }
}

/// Global Reinhard operator for viewing HDR renders: scales the image so its
/// log-average luminance maps to `key`, compresses with `L / (1 + L)` and
/// applies display gamma 2.2.
pub fn reinhard_preview(hdr: &FloatImage, key: f64) -> FloatImage {
    let lum = |p: &[f64]| 0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2];
    let n = (hdr.width() * hdr.height()).max(1) as f64;
    let log_avg = (hdr.data().chunks_exact(3).map(|p| (lum(p).max(0.0) + 1e-6).ln()).sum::<f64>() / n).exp();
    let scale = key / log_avg;
    hdr.map(|v| {
        let l = (v * scale).max(0.0);
        (l / (1.0 + l)).powf(1.0 / 2.2)
    })
}
