//! Learnable camera response: the asymmetric piecewise-linear grid with
//! leaky tails, the fixed sigmoid used during the coarse phase, and the
//! regularizers that act on grid nodes.
//!
//! The grid covers `[x_lo, x_hi]` with a split at `x_mid`. Nodes are spaced
//! `1 / dense_density` apart below the split and `1 / sparse_density` above
//! it. The first node is pinned to 0 and the last to 1 on every channel, so
//! the leaky extensions join the interior continuously:
//!
//! ```text
//! g(x) = β (x − x_lo)                      x < x_lo
//!        linear interpolation of nodes     x_lo ≤ x ≤ x_hi
//!        −β / √(x − x_hi + 1) + β + 1      x > x_hi
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::sigmoid;

/// Target value of `g(0)` for the unit-exposure loss.
pub const UNIT_EXPOSURE_TARGET: f64 = 0.73;
/// Default leak slope.
pub const DEFAULT_LEAK_BETA: f64 = 0.01;
pub const DEFAULT_DENSE_DENSITY: u32 = 128;
pub const DEFAULT_SPARSE_DENSITY: u32 = 64;

/// Domain and node layout of an [`AsymmetricGrid`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub x_lo: f64,
    pub x_mid: f64,
    pub x_hi: f64,
    /// Nodes per unit on `[x_lo, x_mid]`.
    pub dense_density: u32,
    /// Nodes per unit on `[x_mid, x_hi]`.
    pub sparse_density: u32,
    pub leak_beta: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_lo: -6.0,
            x_mid: 0.0,
            x_hi: 3.0,
            dense_density: DEFAULT_DENSE_DENSITY,
            sparse_density: DEFAULT_SPARSE_DENSITY,
            leak_beta: DEFAULT_LEAK_BETA,
        }
    }
}

impl GridConfig {
    /// Same domain with the dense spacing used on both sides of the split.
    pub fn symmetric(self) -> Self {
        Self {
            sparse_density: self.dense_density,
            ..self
        }
    }

    fn segment_count(len: f64, density: u32) -> Result<usize> {
        let n = len * density as f64;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-9 * n.abs().max(1.0) {
            return Err(Error::GridConfig(format!(
                "region of length {len} does not hold a whole number of {density}-per-unit segments"
            )));
        }
        Ok(rounded as usize)
    }

    pub fn validate(&self) -> Result<(usize, usize)> {
        let finite = self.x_lo.is_finite() && self.x_mid.is_finite() && self.x_hi.is_finite();
        if !finite || !(self.x_lo <= self.x_mid && self.x_mid <= self.x_hi && self.x_lo < self.x_hi) {
            return Err(Error::GridConfig(format!(
                "need x_lo <= x_mid <= x_hi with x_lo < x_hi, got ({}, {}, {})",
                self.x_lo, self.x_mid, self.x_hi
            )));
        }
        if self.dense_density == 0 || self.sparse_density == 0 {
            return Err(Error::GridConfig("node densities must be positive".into()));
        }
        if !(self.leak_beta > 0.0 && self.leak_beta.is_finite()) {
            return Err(Error::GridConfig(format!("leak beta must be positive, got {}", self.leak_beta)));
        }
        let dense = Self::segment_count(self.x_mid - self.x_lo, self.dense_density)?;
        let sparse = Self::segment_count(self.x_hi - self.x_mid, self.sparse_density)?;
        Ok((dense, sparse))
    }
}

/// Per-channel piecewise-linear tone curve on a two-density node layout.
#[derive(Clone, Debug, PartialEq)]
pub struct AsymmetricGrid {
    config: GridConfig,
    dense_segments: usize,
    sparse_segments: usize,
    values: [Vec<f64>; 3],
}

/// Result of [`AsymmetricGrid::backward`]: derivative with respect to the
/// input and the upstream-weighted gradients of the two bracketing nodes.
/// Pinned boundary nodes always receive 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridBackward {
    pub d_input: f64,
    pub node_grads: [(usize, f64); 2],
}

impl AsymmetricGrid {
    /// A grid whose nodes rise linearly from 0 at `x_lo` to 1 at `x_hi`.
    pub fn new(config: GridConfig) -> Result<Self> {
        let (dense_segments, sparse_segments) = config.validate()?;
        let mut grid = Self {
            config,
            dense_segments,
            sparse_segments,
            values: Default::default(),
        };
        let span = config.x_hi - config.x_lo;
        let ramp: Vec<f64> = (0..grid.node_count())
            .map(|i| (grid.node_position(i) - config.x_lo) / span)
            .collect();
        grid.values = [ramp.clone(), ramp.clone(), ramp];
        grid.pin_boundaries();
        Ok(grid)
    }

    /// Builds a grid from explicit node values; boundary values are overridden
    /// with 0 and 1.
    pub fn from_values(config: GridConfig, values: [Vec<f64>; 3]) -> Result<Self> {
        let mut grid = Self::new(config)?;
        for (c, v) in values.into_iter().enumerate() {
            if v.len() != grid.node_count() {
                return Err(Error::ShapeMismatch(format!(
                    "channel {c} has {} node values, layout needs {}",
                    v.len(),
                    grid.node_count()
                )));
            }
            grid.values[c] = v;
        }
        grid.pin_boundaries();
        Ok(grid)
    }

    fn pin_boundaries(&mut self) {
        let last = self.node_count() - 1;
        for v in &mut self.values {
            v[0] = 0.0;
            v[last] = 1.0;
        }
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn node_count(&self) -> usize {
        self.dense_segments + self.sparse_segments + 1
    }

    pub fn values(&self, channel: usize) -> &[f64] {
        &self.values[channel]
    }

    /// Whether node `i` is optimized (every node except the two endpoints).
    pub fn is_learnable(&self, i: usize) -> bool {
        i != 0 && i + 1 != self.node_count()
    }

    /// Adds `delta` to every learnable node of `channel`.
    pub fn apply_update(&mut self, channel: usize, delta: &[f64]) {
        let n = self.node_count();
        for i in 1..n - 1 {
            self.values[channel][i] += delta[i];
        }
    }

    /// Overwrites learnable nodes of `channel`; the endpoints stay pinned.
    pub fn set_values(&mut self, channel: usize, values: &[f64]) {
        let n = self.node_count();
        self.values[channel][1..n - 1].copy_from_slice(&values[1..n - 1]);
    }

    pub fn node_position(&self, i: usize) -> f64 {
        let c = &self.config;
        if i == self.dense_segments {
            c.x_mid
        } else if i + 1 == self.node_count() {
            c.x_hi
        } else if i < self.dense_segments {
            c.x_lo + i as f64 / c.dense_density as f64
        } else {
            c.x_mid + (i - self.dense_segments) as f64 / c.sparse_density as f64
        }
    }

    /// Segment index `i` and weight `w` such that the interior value is
    /// `(1 − w)·v[i] + w·v[i+1]`. Requires `x_lo <= x <= x_hi`.
    fn locate(&self, x: f64) -> (usize, f64) {
        let c = &self.config;
        let use_dense = (x < c.x_mid || self.sparse_segments == 0) && self.dense_segments > 0;
        let i = if use_dense {
            (((x - c.x_lo) * c.dense_density as f64).floor().max(0.0) as usize).min(self.dense_segments - 1)
        } else {
            let k = ((x - c.x_mid) * c.sparse_density as f64).floor().max(0.0) as usize;
            self.dense_segments + k.min(self.sparse_segments - 1)
        };
        let (a, b) = (self.node_position(i), self.node_position(i + 1));
        let w = ((x - a) / (b - a)).clamp(0.0, 1.0);
        (i, w)
    }

    /// Evaluates the leaky tone curve on `channel`.
    pub fn eval(&self, x: f64, channel: usize) -> f64 {
        let c = &self.config;
        let beta = c.leak_beta;
        if x < c.x_lo {
            beta * (x - c.x_lo)
        } else if x > c.x_hi {
            -beta / (x - c.x_hi + 1.0).sqrt() + beta + 1.0
        } else {
            let (i, w) = self.locate(x);
            let v = &self.values[channel];
            (1.0 - w) * v[i] + w * v[i + 1]
        }
    }

    /// Adjoint of [`eval`](Self::eval) scaled by `upstream`.
    pub fn backward(&self, x: f64, channel: usize, upstream: f64) -> GridBackward {
        let c = &self.config;
        let beta = c.leak_beta;
        if x < c.x_lo {
            GridBackward {
                d_input: beta * upstream,
                node_grads: [(0, 0.0), (0, 0.0)],
            }
        } else if x > c.x_hi {
            GridBackward {
                d_input: 0.5 * beta * (x - c.x_hi + 1.0).powf(-1.5) * upstream,
                node_grads: [(0, 0.0), (0, 0.0)],
            }
        } else {
            let (i, w) = self.locate(x);
            let v = &self.values[channel];
            let h = self.node_position(i + 1) - self.node_position(i);
            let slope = (v[i + 1] - v[i]) / h;
            let gi = if self.is_learnable(i) { (1.0 - w) * upstream } else { 0.0 };
            let gj = if self.is_learnable(i + 1) { w * upstream } else { 0.0 };
            GridBackward {
                d_input: slope * upstream,
                node_grads: [(i, gi), (i + 1, gj)],
            }
        }
    }

    /// Resets every learnable node to `sigmoid(position)`.
    pub fn init_from_sigmoid(&mut self) {
        let n = self.node_count();
        for i in 1..n - 1 {
            let s = sigmoid(self.node_position(i));
            for v in &mut self.values {
                v[i] = s;
            }
        }
        self.pin_boundaries();
    }

    /// Segments whose value decreases, as `(channel, segment start index)`.
    pub fn non_monotone_segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (c, v) in self.values.iter().enumerate() {
            for i in 0..v.len() - 1 {
                if v[i + 1] < v[i] {
                    out.push((c, i));
                }
            }
        }
        out
    }

    /// Sum over channels and interior nodes of the squared discrete second
    /// derivative, with the three-point non-uniform formula where the
    /// spacing changes. Gradients are zero on the pinned endpoints.
    pub fn smoothness_loss(&self) -> (f64, [Vec<f64>; 3]) {
        let n = self.node_count();
        let mut loss = 0.0;
        let mut grads: [Vec<f64>; 3] = Default::default();
        // stencil weights per interior node
        let stencil: Vec<(f64, f64, f64)> = (1..n.saturating_sub(1))
            .map(|i| {
                let hl = self.node_position(i) - self.node_position(i - 1);
                let hr = self.node_position(i + 1) - self.node_position(i);
                let k = 2.0 / (hl + hr);
                (k / hl, -k * (1.0 / hl + 1.0 / hr), k / hr)
            })
            .collect();
        for (c, v) in self.values.iter().enumerate() {
            let mut g = vec![0.0; n];
            for (j, &(wl, wc, wr)) in stencil.iter().enumerate() {
                let i = j + 1;
                let d2 = wl * v[i - 1] + wc * v[i] + wr * v[i + 1];
                loss += d2 * d2;
                g[i - 1] += 2.0 * d2 * wl;
                g[i] += 2.0 * d2 * wc;
                g[i + 1] += 2.0 * d2 * wr;
            }
            if n > 0 {
                g[0] = 0.0;
                g[n - 1] = 0.0;
            }
            grads[c] = g;
        }
        (loss, grads)
    }

    /// `Σ_c (g_c(0) − 0.73)²` and its node gradients.
    pub fn unit_exposure_loss(&self) -> Result<(f64, [Vec<f64>; 3])> {
        let c = &self.config;
        if !(c.x_lo <= 0.0 && 0.0 <= c.x_hi) {
            return Err(Error::GridConfig(format!(
                "unit exposure needs 0 inside [{}, {}]",
                c.x_lo, c.x_hi
            )));
        }
        let n = self.node_count();
        let mut loss = 0.0;
        let mut grads: [Vec<f64>; 3] = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (ch, g) in grads.iter_mut().enumerate() {
            let r = self.eval(0.0, ch) - UNIT_EXPOSURE_TARGET;
            loss += r * r;
            let b = self.backward(0.0, ch, 2.0 * r);
            for (i, v) in b.node_grads {
                g[i] += v;
            }
        }
        Ok((loss, grads))
    }
}

/// Three-point second derivative for node spacings `h_left`, `h_right`.
pub fn second_difference(h_left: f64, h_right: f64, left: f64, center: f64, right: f64) -> f64 {
    2.0 * ((right - center) / h_right - (center - left) / h_left) / (h_left + h_right)
}

pub fn grid_eval(grid: &AsymmetricGrid, x: f64, channel: usize) -> f64 {
    grid.eval(x, channel)
}

pub fn grid_backward(grid: &AsymmetricGrid, x: f64, channel: usize, upstream: f64) -> GridBackward {
    grid.backward(x, channel, upstream)
}

pub fn sigmoid_eval(x: f64) -> f64 {
    sigmoid(x)
}

pub fn sigmoid_backward(x: f64, upstream: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s) * upstream
}

pub fn smoothness_loss(grid: &AsymmetricGrid) -> (f64, [Vec<f64>; 3]) {
    grid.smoothness_loss()
}

pub fn unit_exposure_loss(grid: &AsymmetricGrid) -> Result<(f64, [Vec<f64>; 3])> {
    grid.unit_exposure_loss()
}

pub fn init_grid_from_sigmoid(mut grid: AsymmetricGrid) -> AsymmetricGrid {
    grid.init_from_sigmoid();
    grid
}

/// The active tone mapper: the fixed sigmoid during the coarse phase, the
/// learnable grid during the fine phase.
#[derive(Clone, Debug, PartialEq)]
pub enum ToneMapper {
    Sigmoid,
    Grid(AsymmetricGrid),
}

impl ToneMapper {
    pub fn eval(&self, x: f64, channel: usize) -> f64 {
        match self {
            ToneMapper::Sigmoid => sigmoid(x),
            ToneMapper::Grid(g) => g.eval(x, channel),
        }
    }

    /// Input derivative times `upstream`, plus node gradients when a grid
    /// is active.
    pub fn backward(&self, x: f64, channel: usize, upstream: f64) -> (f64, Option<[(usize, f64); 2]>) {
        match self {
            ToneMapper::Sigmoid => (sigmoid_backward(x, upstream), None),
            ToneMapper::Grid(g) => {
                let b = g.backward(x, channel, upstream);
                (b.d_input, Some(b.node_grads))
            }
        }
    }

    pub fn grid(&self) -> Option<&AsymmetricGrid> {
        match self {
            ToneMapper::Grid(g) => Some(g),
            ToneMapper::Sigmoid => None,
        }
    }
}
