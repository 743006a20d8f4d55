//! Multi-exposure datasets: the on-disk layout and a synthetic generator with
//! known ground truth.
//!
//! A dataset directory contains
//!
//! ```text
//! meta.json            version, image size, poses, exposures, split tags
//! ldr/{view}_{exp}.png 8-bit RGB, one per (view, exposure index)
//! hdr/{view}.pfm       optional linear ground truth per view
//! crf.csv              optional ground-truth response samples
//! ```
//!
//! Exposure indices refer to the ascending list of distinct exposure times.

use std::fs;
use std::path::{Path, PathBuf};

use ::image::RgbImage;
use nalgebra::{Matrix4, Quaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exposure::ExposureUnit;
use crate::geometry::{sigmoid, Camera, Gaussian3D, Intrinsics};
use crate::image::{quantize_u8, FloatImage};
use crate::pfm::{read_pfm, write_pfm};
use crate::raster::render_irradiance_reference;

pub const META_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Test,
}

/// Which exposure levels of the training split are used for optimization.
///
/// `Oe` keeps the odd-numbered levels t₁, t₃, t₅, … (even zero-based indices)
/// and `Ne` the even-numbered levels t₂, t₄, ….
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExposureSelection {
    #[default]
    All,
    Oe,
    Ne,
}

impl ExposureSelection {
    pub fn contains(self, exposure_index: usize) -> bool {
        match self {
            ExposureSelection::All => true,
            ExposureSelection::Oe => exposure_index % 2 == 0,
            ExposureSelection::Ne => exposure_index % 2 == 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewPose {
    pub intrinsics: Intrinsics,
    /// Row-major 4x4 rigid transform.
    pub world_to_camera: [[f64; 4]; 4],
}

impl ViewPose {
    pub fn from_camera(cam: &Camera) -> Self {
        let mut m = [[0.0; 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = cam.world_to_camera[(r, c)];
            }
        }
        Self {
            intrinsics: cam.intrinsics,
            world_to_camera: m,
        }
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|r, c| self.world_to_camera[r][c])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitPoint {
    pub position: [f64; 3],
    pub color: [f64; 3],
}

/// Ground-truth response sampled at log exposure `x = ln(E·t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrfSample {
    pub x: f64,
    pub value: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdrImage {
    pub view: usize,
    pub exposure: usize,
    pub split: Split,
    pub pixels: RgbImage,
}

impl LdrImage {
    pub fn to_float(&self) -> FloatImage {
        FloatImage::from_rgb8(&self.pixels)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiExposureDataset {
    pub width: usize,
    pub height: usize,
    /// Unit used for exposure values in `meta.json`.
    pub exposure_unit: ExposureUnit,
    /// Distinct exposure times in seconds, ascending.
    pub exposures: Vec<f64>,
    pub views: Vec<ViewPose>,
    pub images: Vec<LdrImage>,
    /// Linear radiance per view.
    pub gt_hdr: Option<Vec<FloatImage>>,
    pub gt_crf: Option<Vec<CrfSample>>,
    pub init_points: Option<Vec<InitPoint>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageEntry {
    view: usize,
    exposure: usize,
    split: Split,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    version: u32,
    width: usize,
    height: usize,
    exposure_unit: ExposureUnit,
    exposures: Vec<f64>,
    views: Vec<ViewPose>,
    images: Vec<ImageEntry>,
    has_hdr: bool,
    has_crf: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    init_points: Option<Vec<InitPoint>>,
}

impl MultiExposureDataset {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Dataset("empty image size".into()));
        }
        if self.views.is_empty() || self.images.is_empty() {
            return Err(Error::Dataset("dataset has no views or images".into()));
        }
        if let Some(&t) = self.exposures.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::NonPositiveExposure(t));
        }
        if self.exposures.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Dataset("exposure times must be distinct and ascending".into()));
        }
        for (i, im) in self.images.iter().enumerate() {
            if im.view >= self.views.len() || im.exposure >= self.exposures.len() {
                return Err(Error::Dataset(format!("image {i} references a missing view or exposure")));
            }
            if im.pixels.dimensions() != (self.width as u32, self.height as u32) {
                return Err(Error::Dimension {
                    path: PathBuf::from(image_file_name(im.view, im.exposure)),
                    expected: (self.width, self.height),
                    found: (im.pixels.width() as usize, im.pixels.height() as usize),
                });
            }
        }
        for v in 0..self.views.len() {
            self.camera(v, self.exposures[0])?;
        }
        if let Some(hdr) = &self.gt_hdr {
            if hdr.len() != self.views.len() {
                return Err(Error::Dataset(format!("{} HDR images for {} views", hdr.len(), self.views.len())));
            }
            for (v, h) in hdr.iter().enumerate() {
                if h.dims() != (self.width, self.height) {
                    return Err(Error::Dimension {
                        path: PathBuf::from(format!("hdr/{v}.pfm")),
                        expected: (self.width, self.height),
                        found: h.dims(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn camera(&self, view: usize, exposure_time: f64) -> Result<Camera> {
        let pose = self
            .views
            .get(view)
            .ok_or_else(|| Error::Dataset(format!("no view {view}")))?;
        Camera::new(pose.intrinsics, pose.matrix(), self.width, self.height, exposure_time)
    }

    pub fn image_camera(&self, image: usize) -> Result<Camera> {
        let im = &self.images[image];
        self.camera(im.view, self.exposures[im.exposure])
    }

    /// Indices of training-split images whose exposure passes `selection`.
    pub fn training_images(&self, selection: ExposureSelection) -> Vec<usize> {
        self.images
            .iter()
            .enumerate()
            .filter(|(_, im)| im.split == Split::Train && selection.contains(im.exposure))
            .map(|(i, _)| i)
            .collect()
    }

    /// Distinct exposure times (seconds) among `images`.
    pub fn exposure_times_of(&self, images: &[usize]) -> Vec<f64> {
        let mut idx: Vec<usize> = images.iter().map(|&i| self.images[i].exposure).collect();
        idx.sort_unstable();
        idx.dedup();
        idx.into_iter().map(|e| self.exposures[e]).collect()
    }

    /// Spread of the camera centers, used to scale positional learning rates.
    pub fn scene_extent(&self) -> f64 {
        let centers: Vec<Vector3<f64>> = (0..self.views.len())
            .filter_map(|v| self.camera(v, 1.0).ok())
            .map(|c| c.center())
            .collect();
        if centers.is_empty() {
            return 1.0;
        }
        let mean = centers.iter().sum::<Vector3<f64>>() / centers.len() as f64;
        let radius = centers.iter().map(|c| (c - mean).norm()).fold(0.0, f64::max);
        if radius > 0.0 {
            1.1 * radius
        } else {
            1.0
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.validate()?;
        fs::create_dir_all(dir.join("ldr"))?;
        let meta = Meta {
            version: META_VERSION,
            width: self.width,
            height: self.height,
            exposure_unit: self.exposure_unit,
            exposures: self.exposures.iter().map(|&t| self.exposure_unit.from_seconds(t)).collect(),
            views: self.views.clone(),
            images: self
                .images
                .iter()
                .map(|im| ImageEntry {
                    view: im.view,
                    exposure: im.exposure,
                    split: im.split,
                })
                .collect(),
            has_hdr: self.gt_hdr.is_some(),
            has_crf: self.gt_crf.is_some(),
            init_points: self.init_points.clone(),
        };
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
        for im in &self.images {
            let path = dir.join(image_file_name(im.view, im.exposure));
            im.pixels
                .save_with_format(&path, ::image::ImageFormat::Png)
                .map_err(|source| Error::ImageEncode { path, source })?;
        }
        if let Some(hdr) = &self.gt_hdr {
            fs::create_dir_all(dir.join("hdr"))?;
            for (v, h) in hdr.iter().enumerate() {
                write_pfm(&dir.join(format!("hdr/{v}.pfm")), h)?;
            }
        }
        if let Some(crf) = &self.gt_crf {
            write_crf_csv(&dir.join("crf.csv"), crf)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("meta.json");
        let text = fs::read_to_string(&meta_path).map_err(|e| not_found_or_io(e, &meta_path))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let version = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Dataset("meta.json has no numeric version field".into()))?;
        if version != META_VERSION as u64 {
            return Err(Error::Version {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: META_VERSION,
            });
        }
        let meta: Meta = serde_json::from_value(value)?;
        let exposures: Vec<f64> = meta.exposures.iter().map(|&e| meta.exposure_unit.to_seconds(e)).collect();
        let mut images = Vec::with_capacity(meta.images.len());
        for entry in &meta.images {
            let path = dir.join(image_file_name(entry.view, entry.exposure));
            let pixels = load_png(&path, meta.width, meta.height)?;
            images.push(LdrImage {
                view: entry.view,
                exposure: entry.exposure,
                split: entry.split,
                pixels,
            });
        }
        let gt_hdr = if meta.has_hdr {
            let mut out = Vec::with_capacity(meta.views.len());
            for v in 0..meta.views.len() {
                let path = dir.join(format!("hdr/{v}.pfm"));
                let h = read_pfm(&path)?;
                if h.dims() != (meta.width, meta.height) {
                    return Err(Error::Dimension {
                        path,
                        expected: (meta.width, meta.height),
                        found: h.dims(),
                    });
                }
                out.push(h);
            }
            Some(out)
        } else {
            None
        };
        let gt_crf = if meta.has_crf {
            Some(read_crf_csv(&dir.join("crf.csv"))?)
        } else {
            None
        };
        let ds = Self {
            width: meta.width,
            height: meta.height,
            exposure_unit: meta.exposure_unit,
            exposures,
            views: meta.views,
            images,
            gt_hdr,
            gt_crf,
            init_points: meta.init_points,
        };
        ds.validate()?;
        Ok(ds)
    }
}

pub fn load_dataset(dir: &Path) -> Result<MultiExposureDataset> {
    MultiExposureDataset::load(dir)
}

pub fn save_dataset(ds: &MultiExposureDataset, dir: &Path) -> Result<()> {
    ds.save(dir)
}

fn image_file_name(view: usize, exposure: usize) -> String {
    format!("ldr/{view}_{exposure}.png")
}

fn not_found_or_io(e: std::io::Error, path: &Path) -> Error {
    if e.kind() == std::io::ErrorKind::NotFound {
        Error::MissingFile(path.to_path_buf())
    } else {
        Error::Io(e)
    }
}

fn load_png(path: &Path, width: usize, height: usize) -> Result<RgbImage> {
    let bytes = fs::read(path).map_err(|e| not_found_or_io(e, path))?;
    let img = ::image::load_from_memory_with_format(&bytes, ::image::ImageFormat::Png)
        .map_err(|source| Error::ImageDecode {
            path: path.to_path_buf(),
            source,
        })?
        .into_rgb8();
    if img.dimensions() != (width as u32, height as u32) {
        return Err(Error::Dimension {
            path: path.to_path_buf(),
            expected: (width, height),
            found: (img.width() as usize, img.height() as usize),
        });
    }
    Ok(img)
}

pub fn write_crf_csv(path: &Path, samples: &[CrfSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "c_red", "c_green", "c_blue"])?;
    for s in samples {
        w.write_record(&[
            s.x.to_string(),
            s.value[0].to_string(),
            s.value[1].to_string(),
            s.value[2].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_crf_csv(path: &Path) -> Result<Vec<CrfSample>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Dataset(format!("bad value in column {i} of {}", path.display())))
        };
        out.push(CrfSample {
            x: parse(0)?,
            value: [parse(1)?, parse(2)?, parse(3)?],
        });
    }
    Ok(out)
}

/// Response used to synthesize LDR images, a function of `ln(E·t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OracleCrf {
    /// `gain · (E·t)^(1/gamma)`.
    Gamma { gamma: f64, gain: f64 },
    /// `sigmoid(slope · (ln(E·t) − midpoint))`.
    Logistic { slope: f64, midpoint: f64 },
}

impl Default for OracleCrf {
    fn default() -> Self {
        OracleCrf::Gamma {
            gamma: 2.2,
            gain: 0.73,
        }
    }
}

impl OracleCrf {
    /// Unclamped response at `x = ln(E·t)`.
    pub fn response(&self, x: f64) -> f64 {
        match *self {
            OracleCrf::Gamma { gamma, gain } => gain * (x / gamma).exp(),
            OracleCrf::Logistic { slope, midpoint } => sigmoid(slope * (x - midpoint)),
        }
    }

    /// Clamped response to linear exposure `E·t`; zero exposure maps to 0.
    pub fn apply(&self, exposure: f64) -> f64 {
        if exposure <= 0.0 {
            return 0.0;
        }
        self.response(exposure.ln()).clamp(0.0, 1.0)
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            OracleCrf::Gamma { gamma, gain } => gamma > 0.0 && gain > 0.0,
            OracleCrf::Logistic { slope, midpoint } => slope > 0.0 && midpoint.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid oracle response {self:?}")))
        }
    }
}

/// Parameters of the synthetic ground-truth scene.
///
/// Cameras sit on a horizontal arc around `look_at`, centered on the `+x`
/// side; an opaque wall of flat Gaussians stands behind the object on the
/// `−x` side so every pixel sees some surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    /// Gaussians placed inside the object ball.
    pub object_gaussians: usize,
    /// Gaussians tiling the backdrop wall.
    pub backdrop_gaussians: usize,
    pub object_radius: f64,
    /// Distance of the wall behind `look_at`.
    pub backdrop_distance: f64,
    /// Half side length of the square wall.
    pub backdrop_half_extent: f64,
    /// Linear radiance range `[lo, hi]` of the smooth color field.
    pub radiance_range: [f64; 2],
    pub views: usize,
    pub ring_radius: f64,
    pub ring_height: f64,
    /// Angular span of the camera arc.
    pub arc_degrees: f64,
    pub look_at: [f64; 3],
    pub fov_degrees: f64,
    pub width: usize,
    pub height: usize,
    /// Seconds; stored sorted.
    pub exposure_times: Vec<f64>,
    pub exposure_unit: ExposureUnit,
    pub crf: OracleCrf,
    /// Views whose images are tagged as test.
    pub test_views: Vec<usize>,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            object_gaussians: 200,
            backdrop_gaussians: 144,
            object_radius: 1.0,
            backdrop_distance: 3.0,
            backdrop_half_extent: 7.0,
            radiance_range: [0.03, 4.0],
            views: 9,
            ring_radius: 4.0,
            ring_height: 0.8,
            arc_degrees: 40.0,
            look_at: [0.0, 0.0, 0.0],
            fov_degrees: 50.0,
            width: 64,
            height: 64,
            exposure_times: vec![1.0 / 16.0, 0.25, 1.0],
            exposure_unit: ExposureUnit::Seconds,
            crf: OracleCrf::default(),
            test_views: Vec::new(),
            seed: 0,
        }
    }
}

impl SceneSpec {
    /// `count` exposure times starting at `2^base_ev` seconds, `step_ev` stops apart.
    pub fn ev_ladder(base_ev: f64, step_ev: f64, count: usize) -> Vec<f64> {
        (0..count).map(|i| (base_ev + step_ev * i as f64).exp2()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.object_gaussians + self.backdrop_gaussians == 0 {
            return bad("scene needs at least one gaussian");
        }
        if !(self.object_radius > 0.0 && self.backdrop_distance > self.object_radius) {
            return bad("object radius must be positive and the wall must stand behind the object");
        }
        if !(self.backdrop_half_extent > 0.0) {
            return bad("backdrop extent must be positive");
        }
        if !(self.arc_degrees >= 0.0 && self.arc_degrees < 180.0) {
            return bad("camera arc must lie in [0, 180) degrees");
        }
        let [lo, hi] = self.radiance_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return bad("radiance range must satisfy 0 < lo < hi");
        }
        if self.views == 0 || self.width == 0 || self.height == 0 {
            return bad("views and image size must be positive");
        }
        if !(self.fov_degrees > 0.0 && self.fov_degrees < 180.0) {
            return bad("field of view must lie in (0, 180) degrees");
        }
        if !(self.ring_radius > self.object_radius) {
            return bad("cameras must stand outside the object");
        }
        if let Some(&t) = self.exposure_times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::NonPositiveExposure(t));
        }
        let mut t = self.exposure_times.clone();
        t.sort_by(f64::total_cmp);
        t.dedup();
        if t.len() != self.exposure_times.len() {
            return bad("exposure times must be distinct");
        }
        if t.is_empty() {
            return bad("at least one exposure time is required");
        }
        if self.test_views.iter().any(|&v| v >= self.views) {
            return bad("test view index out of range");
        }
        self.crf.validate()
    }
}

struct ColorField {
    dirs: [Vector3<f64>; 3],
    phases: [f64; 3],
    mid: f64,
    amp: f64,
}

impl ColorField {
    fn new(rng: &mut ChaCha8Rng, range: [f64; 2]) -> Self {
        let mut dirs = [Vector3::zeros(); 3];
        let mut phases = [0.0; 3];
        for c in 0..3 {
            dirs[c] = random_unit(rng);
            phases[c] = rng.random_range(0.0..std::f64::consts::TAU);
        }
        let (lo, hi) = (range[0].ln(), range[1].ln());
        Self {
            dirs,
            phases,
            mid: 0.5 * (lo + hi),
            amp: 0.5 * (hi - lo),
        }
    }

    /// Linear radiance at `p`, with `freq` controlling spatial variation.
    fn eval(&self, p: &Vector3<f64>, freq: f64) -> Vector3<f64> {
        Vector3::from_fn(|c, _| (self.mid + self.amp * (freq * p.dot(&self.dirs[c]) + self.phases[c]).sin()).exp())
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        if let Some(u) = v.try_normalize(1e-9) {
            return u;
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Quaternion<f64> {
    loop {
        let q = Quaternion::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = q.norm();
        if n > 1e-9 {
            return q / n;
        }
    }
}

/// The ground-truth scene with linear radiance in `radiance`.
pub fn synthetic_scene(spec: &SceneSpec) -> Result<Vec<Gaussian3D>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let field = ColorField::new(&mut rng, spec.radiance_range);
    let mut scene = Vec::with_capacity(spec.object_gaussians + spec.backdrop_gaussians);
    let look = Vector3::from(spec.look_at);
    for _ in 0..spec.object_gaussians {
        let r = spec.object_radius * rng.random::<f64>().cbrt();
        let mean = look + random_unit(&mut rng) * r;
        let base = rng.random_range(0.10..0.22) * spec.object_radius;
        let log_scale = Vector3::from_fn(|_, _| (base * rng.random_range(0.7..1.4)).ln());
        let rotation = random_rotation(&mut rng);
        let opacity = rng.random_range(0.6..0.95);
        let radiance = field.eval(&(mean - look), 1.5 / spec.object_radius);
        scene.push(Gaussian3D::new(mean, log_scale, rotation, opacity, radiance));
    }
    let n = spec.backdrop_gaussians;
    let side = (n as f64).sqrt().ceil().max(1.0) as usize;
    let spacing = 2.0 * spec.backdrop_half_extent / side as f64;
    for i in 0..n {
        let (u, v) = ((i % side) as f64, (i / side) as f64);
        let offset = Vector3::new(
            -spec.backdrop_distance,
            -spec.backdrop_half_extent + (u + 0.5) * spacing,
            -spec.backdrop_half_extent + (v + 0.5) * spacing,
        );
        let mean = look + offset;
        let in_plane = (0.6 * spacing * rng.random_range(0.9..1.1)).ln();
        let log_scale = Vector3::new((0.02 * spacing).ln(), in_plane, in_plane);
        let opacity = rng.random_range(0.9..0.98);
        let radiance = field.eval(&offset, 0.4);
        scene.push(Gaussian3D::new(mean, log_scale, Quaternion::identity(), opacity, radiance));
    }
    Ok(scene)
}

/// Cameras on a horizontal arc around `look_at`, world `+z` up.
pub fn ring_cameras(spec: &SceneSpec) -> Result<Vec<Camera>> {
    let look = Vector3::from(spec.look_at);
    let intr = Intrinsics::from_fov(spec.width, spec.height, spec.fov_degrees);
    (0..spec.views)
        .map(|v| {
            let a = if spec.views > 1 {
                spec.arc_degrees.to_radians() * (v as f64 / (spec.views - 1) as f64 - 0.5)
            } else {
                0.0
            };
            let eye = look + Vector3::new(spec.ring_radius * a.cos(), spec.ring_radius * a.sin(), spec.ring_height);
            Camera::look_at(eye, look, Vector3::z(), intr, spec.width, spec.height, 1.0)
        })
        .collect()
}

/// Renders the scene described by `spec` and records every view at every
/// exposure through the oracle response.
pub fn generate_synthetic(spec: &SceneSpec) -> Result<MultiExposureDataset> {
    let scene = synthetic_scene(spec)?;
    let cameras = ring_cameras(spec)?;
    let mut exposures = spec.exposure_times.clone();
    exposures.sort_by(f64::total_cmp);
    let mut images = Vec::with_capacity(cameras.len() * exposures.len());
    let mut gt_hdr = Vec::with_capacity(cameras.len());
    for (v, cam) in cameras.iter().enumerate() {
        let irr = render_irradiance_reference(&scene, cam).values;
        let split = if spec.test_views.contains(&v) {
            Split::Test
        } else {
            Split::Train
        };
        for (e, &t) in exposures.iter().enumerate() {
            let pixels = RgbImage::from_fn(spec.width as u32, spec.height as u32, |x, y| {
                let p = irr.pixel(x as usize, y as usize);
                ::image::Rgb(p.map(|v| quantize_u8(spec.crf.apply(v * t))))
            });
            images.push(LdrImage {
                view: v,
                exposure: e,
                split,
                pixels,
            });
        }
        // stored at the precision the PFM container keeps
        gt_hdr.push(irr.map(|v| v as f32 as f64));
    }
    let lo = (spec.radiance_range[0] * exposures[0]).ln() - 1.0;
    let hi = (spec.radiance_range[1] * exposures[exposures.len() - 1]).ln() + 1.0;
    let steps = ((hi - lo) / 0.01).ceil() as usize;
    let gt_crf = (0..=steps)
        .map(|i| {
            let x = lo + 0.01 * i as f64;
            let c = spec.crf.response(x).clamp(0.0, 1.0);
            CrfSample { x, value: [c; 3] }
        })
        .collect();
    let init_points = scene
        .iter()
        .map(|g| InitPoint {
            position: g.mean.into(),
            color: g.radiance.into(),
        })
        .collect();
    Ok(MultiExposureDataset {
        width: spec.width,
        height: spec.height,
        exposure_unit: spec.exposure_unit,
        exposures,
        views: cameras.iter().map(ViewPose::from_camera).collect(),
        images,
        gt_hdr: Some(gt_hdr),
        gt_crf: Some(gt_crf),
        init_points: Some(init_points),
    })
}
