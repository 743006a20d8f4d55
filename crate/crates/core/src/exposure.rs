//! Exposure-time scaling and the closed-form map back to linear HDR.
//!
//! Log exposure times are mapped affinely, `t' = r·ln t + s`, so that the
//! training exposures sit symmetrically around zero and the gaps between them
//! shrink. With that scaling the learned irradiance relates to linear
//! radiance through `E = exp((E' + s) / r)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExposureScaler {
    pub r: f64,
    pub s: f64,
}

impl Default for ExposureScaler {
    fn default() -> Self {
        Self::identity()
    }
}

impl ExposureScaler {
    /// `r = 1, s = 0`: exposures enter the tone mapper as plain `ln t`.
    pub fn identity() -> Self {
        Self { r: 1.0, s: 0.0 }
    }

    /// Fits `r = minᵢ 2tᵢ / tᵢ₊₁` and `s = −r (ln t_max + ln t_min) / 2`.
    ///
    /// Input order does not matter; duplicates are dropped before fitting.
    pub fn fit(times: &[f64]) -> Result<Self> {
        if let Some(&bad) = times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::NonPositiveExposure(bad));
        }
        let mut sorted = times.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() < 2 {
            return Err(Error::DegenerateExposures(sorted.len()));
        }
        let r = sorted
            .windows(2)
            .map(|w| 2.0 * w[0] / w[1])
            .fold(f64::INFINITY, f64::min);
        let (t_min, t_max) = (sorted[0], sorted[sorted.len() - 1]);
        let s = -r * (t_max.ln() + t_min.ln()) / 2.0;
        if r > 1.0 {
            log::warn!("exposure scale r = {r:.4} > 1 expands closely spaced exposures");
        }
        Ok(Self { r, s })
    }

    /// `t' = r·ln t + s`.
    pub fn scale_time(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveExposure(t));
        }
        Ok(self.r * t.ln() + self.s)
    }

    /// `E = exp((E' + s) / r)`; overflow saturates at `f64::MAX`.
    pub fn hdr_from_learned(&self, learned: f64) -> f64 {
        let e = ((learned + self.s) / self.r).exp();
        if e.is_infinite() {
            f64::MAX
        } else {
            e
        }
    }

    /// `E' = r·ln E − s`, the inverse of [`hdr_from_learned`](Self::hdr_from_learned).
    pub fn learned_from_hdr(&self, hdr: f64) -> Result<f64> {
        if !(hdr > 0.0) {
            return Err(Error::NonPositiveRadiance(hdr));
        }
        Ok(self.r * hdr.ln() - self.s)
    }
}

pub fn fit_scaler(times: &[f64]) -> Result<ExposureScaler> {
    ExposureScaler::fit(times)
}

/// How exposure values are recorded in a dataset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExposureUnit {
    #[default]
    Seconds,
    /// Exposure value relative to a 1 s reference: `t = 2^EV`.
    Ev,
}

impl ExposureUnit {
    pub fn to_seconds(self, value: f64) -> f64 {
        match self {
            ExposureUnit::Seconds => value,
            ExposureUnit::Ev => value.exp2(),
        }
    }

    pub fn from_seconds(self, seconds: f64) -> f64 {
        match self {
            ExposureUnit::Seconds => seconds,
            ExposureUnit::Ev => seconds.log2(),
        }
    }
}
