//! Gaussian primitives, pinhole cameras and EWA perspective projection.
//!
//! Cameras follow the OpenCV convention: camera-space `+z` looks forward,
//! `+x` points right and `+y` points down. Pixel `(x, y)` is sampled at the
//! integer coordinate `(x, y)`, so a point on the optical axis lands exactly
//! on `(cx, cy)`.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix4, Quaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points at or in front of this camera-space depth are culled.
pub const NEAR_PLANE: f64 = 0.01;
/// Low-pass filter added to the diagonal of every projected covariance, in px².
pub const COV2D_DILATION: f64 = 0.3;
/// Upper clamp on per-pixel opacity.
pub const ALPHA_MAX: f64 = 0.99;
/// Off-screen culling radius in standard deviations of the major axis.
pub const CULL_SIGMA: f64 = 3.0;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// One scene primitive. All fields are unconstrained so the optimizer can
/// update them directly: scale is stored as a log, opacity as a logit and the
/// rotation as a raw quaternion that is normalized before use.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian3D {
    pub mean: Vector3<f64>,
    pub log_scale: Vector3<f64>,
    pub rotation: Quaternion<f64>,
    pub opacity_logit: f64,
    /// Learned log-domain radiance per color channel.
    pub radiance: Vector3<f64>,
}

impl Gaussian3D {
    /// Builds a primitive from an opacity in `(0, 1)`.
    pub fn new(
        mean: Vector3<f64>,
        log_scale: Vector3<f64>,
        rotation: Quaternion<f64>,
        opacity: f64,
        radiance: Vector3<f64>,
    ) -> Self {
        Self {
            mean,
            log_scale,
            rotation,
            opacity_logit: logit(opacity),
            radiance,
        }
    }

    /// An axis-aligned isotropic primitive.
    pub fn isotropic(mean: Vector3<f64>, scale: f64, opacity: f64, radiance: Vector3<f64>) -> Self {
        Self::new(
            mean,
            Vector3::repeat(scale.ln()),
            Quaternion::identity(),
            opacity,
            radiance,
        )
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn set_opacity(&mut self, opacity: f64) {
        self.opacity_logit = logit(opacity);
    }

    pub fn covariance(&self) -> Result<Matrix3<f64>> {
        build_covariance(&self.log_scale, &self.rotation)
    }
}

fn normalized(q: &Quaternion<f64>) -> Result<(Quaternion<f64>, f64)> {
    let n = q.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::DegenerateRotation);
    }
    Ok((q / n, n))
}

fn rotation_from_unit(q: &Quaternion<f64>) -> Matrix3<f64> {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Rotation matrix of a (not necessarily unit) quaternion.
pub fn rotation_matrix(q: &Quaternion<f64>) -> Result<Matrix3<f64>> {
    let (u, _) = normalized(q)?;
    Ok(rotation_from_unit(&u))
}

/// `R S Sᵀ Rᵀ` with `S = diag(exp(log_scale))`.
pub fn build_covariance(log_scale: &Vector3<f64>, rotation: &Quaternion<f64>) -> Result<Matrix3<f64>> {
    let r = rotation_matrix(rotation)?;
    let d = Matrix3::from_diagonal(&log_scale.map(|s| (2.0 * s).exp()));
    let cov = r * d * r.transpose();
    // exact symmetry regardless of rounding in the triple product
    Ok((cov + cov.transpose()) * 0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Square pixels with the principal point at the image center.
    pub fn from_fov(width: usize, height: usize, fov_x_degrees: f64) -> Self {
        let fx = 0.5 * width as f64 / (0.5 * fov_x_degrees.to_radians()).tan();
        Self {
            fx,
            fy: fx,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
        }
    }
}

/// Pinhole camera with a rigid world-to-camera transform and an exposure time.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub world_to_camera: Matrix4<f64>,
    pub width: usize,
    pub height: usize,
    /// Seconds.
    pub exposure_time: f64,
}

impl Camera {
    pub fn new(
        intrinsics: Intrinsics,
        world_to_camera: Matrix4<f64>,
        width: usize,
        height: usize,
        exposure_time: f64,
    ) -> Result<Self> {
        let Intrinsics { fx, fy, cx, cy } = intrinsics;
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::InvalidCamera(format!("focal lengths must be positive, got ({fx}, {fy})")));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidCamera("principal point is not finite".into()));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidCamera(format!("empty image {width}x{height}")));
        }
        if !(exposure_time > 0.0 && exposure_time.is_finite()) {
            return Err(Error::NonPositiveExposure(exposure_time));
        }
        let rot = world_to_camera.fixed_view::<3, 3>(0, 0).into_owned();
        let ortho = (rot.transpose() * rot - Matrix3::identity()).abs().max();
        if ortho > 1e-6 || (rot.determinant() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidCamera("rotation block is not a proper orthonormal matrix".into()));
        }
        let last = world_to_camera.row(3);
        if last[0] != 0.0 || last[1] != 0.0 || last[2] != 0.0 || last[3] != 1.0 {
            return Err(Error::InvalidCamera("bottom row of the transform must be (0, 0, 0, 1)".into()));
        }
        if world_to_camera.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCamera("transform is not finite".into()));
        }
        Ok(Self {
            intrinsics,
            world_to_camera,
            width,
            height,
            exposure_time,
        })
    }

    /// Camera at `eye` looking at `target`; `up` is the world up direction.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        intrinsics: Intrinsics,
        width: usize,
        height: usize,
        exposure_time: f64,
    ) -> Result<Self> {
        let forward = (target - eye).try_normalize(1e-12).ok_or_else(|| {
            Error::InvalidCamera("eye and target coincide".into())
        })?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidCamera("up vector is parallel to the view direction".into()))?;
        let down = forward.cross(&right);
        let rot = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(rot * eye);
        let mut w = Matrix4::identity();
        w.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
        w.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        Self::new(intrinsics, w, width, height, exposure_time)
    }

    pub fn with_exposure(&self, exposure_time: f64) -> Result<Self> {
        Self::new(self.intrinsics, self.world_to_camera, self.width, self.height, exposure_time)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.world_to_camera.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.world_to_camera.fixed_view::<3, 1>(0, 3).into_owned()
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + self.translation()
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation().transpose() * self.translation())
    }
}

/// Screen-space footprint of one Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedGaussian {
    pub mean2d: Vector2<f64>,
    pub cov2d: Matrix2<f64>,
    /// Inverse of `cov2d`.
    pub conic: Matrix2<f64>,
    pub depth: f64,
    pub opacity: f64,
    pub radiance: Vector3<f64>,
}

impl ProjectedGaussian {
    pub fn new(
        mean2d: Vector2<f64>,
        cov2d: Matrix2<f64>,
        depth: f64,
        opacity: f64,
        radiance: Vector3<f64>,
    ) -> Result<Self> {
        let det = cov2d.determinant();
        if !(det > 0.0 && det.is_finite()) {
            return Err(Error::SingularCovariance(det));
        }
        let conic = Matrix2::new(cov2d[(1, 1)], -cov2d[(0, 1)], -cov2d[(1, 0)], cov2d[(0, 0)]) / det;
        Ok(Self {
            mean2d,
            cov2d,
            conic,
            depth,
            opacity,
            radiance,
        })
    }

    /// Largest eigenvalue of the 2-D covariance.
    pub fn max_eigenvalue(&self) -> f64 {
        let (a, b, d) = (self.cov2d[(0, 0)], self.cov2d[(0, 1)], self.cov2d[(1, 1)]);
        let mid = 0.5 * (a + d);
        let half = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        mid + half
    }

    /// Mahalanobis distance squared from the center.
    #[inline]
    pub fn mahalanobis(&self, pixel: &Vector2<f64>) -> f64 {
        let d = pixel - self.mean2d;
        let a = &self.conic;
        a[(0, 0)] * d.x * d.x + (a[(0, 1)] + a[(1, 0)]) * d.x * d.y + a[(1, 1)] * d.y * d.y
    }
}

/// Per-pixel opacity `min(0.99, σ exp(-½ dᵀ Σ⁻¹ d))`.
#[inline]
pub fn evaluate_alpha(pg: &ProjectedGaussian, pixel: &Vector2<f64>) -> f64 {
    (pg.opacity * (-0.5 * pg.mahalanobis(pixel)).exp()).min(ALPHA_MAX)
}

struct ProjectionTerms {
    rot_unit: Quaternion<f64>,
    rot_norm: f64,
    rot: Matrix3<f64>,
    scale_sq: Vector3<f64>,
    view_rot: Matrix3<f64>,
    cam_point: Vector3<f64>,
    jacobian: Matrix2x3<f64>,
    cov_cam: Matrix3<f64>,
}

fn projection_terms(g: &Gaussian3D, cam: &Camera) -> Result<ProjectionTerms> {
    let (rot_unit, rot_norm) = normalized(&g.rotation)?;
    let rot = rotation_from_unit(&rot_unit);
    let scale_sq = g.log_scale.map(|s| (2.0 * s).exp());
    let view_rot = cam.rotation();
    let cam_point = view_rot * g.mean + cam.translation();
    let Intrinsics { fx, fy, .. } = cam.intrinsics;
    let (x, y, z) = (cam_point.x, cam_point.y, cam_point.z);
    let jacobian = Matrix2x3::new(fx / z, 0.0, -fx * x / (z * z), 0.0, fy / z, -fy * y / (z * z));
    let cov_world = rot * Matrix3::from_diagonal(&scale_sq) * rot.transpose();
    let cov_cam = view_rot * cov_world * view_rot.transpose();
    Ok(ProjectionTerms {
        rot_unit,
        rot_norm,
        rot,
        scale_sq,
        view_rot,
        cam_point,
        jacobian,
        cov_cam,
    })
}

/// Projects a Gaussian into the camera, or returns `None` when it is behind
/// the near plane or more than three standard deviations off-screen.
pub fn project_gaussian(g: &Gaussian3D, cam: &Camera) -> Result<Option<ProjectedGaussian>> {
    let terms = projection_terms(g, cam)?;
    let p = terms.cam_point;
    if !(p.z > NEAR_PLANE) {
        return Ok(None);
    }
    let Intrinsics { fx, fy, cx, cy } = cam.intrinsics;
    let mean2d = Vector2::new(fx * p.x / p.z + cx, fy * p.y / p.z + cy);
    let j = &terms.jacobian;
    let mut cov2d = j * terms.cov_cam * j.transpose();
    cov2d = (cov2d + cov2d.transpose()) * 0.5;
    cov2d[(0, 0)] += COV2D_DILATION;
    cov2d[(1, 1)] += COV2D_DILATION;
    let pg = ProjectedGaussian::new(mean2d, cov2d, p.z, g.opacity(), g.radiance)?;
    let radius = CULL_SIGMA * pg.max_eigenvalue().sqrt();
    let (w, h) = ((cam.width - 1) as f64, (cam.height - 1) as f64);
    if mean2d.x + radius < 0.0 || mean2d.x - radius > w || mean2d.y + radius < 0.0 || mean2d.y - radius > h {
        return Ok(None);
    }
    Ok(Some(pg))
}

/// Gradient of a scalar objective with respect to the geometric parameters
/// of one Gaussian. `rotation` is ordered `(w, x, y, z)` and is taken with
/// respect to the raw, unnormalized quaternion.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ProjectionGrad {
    pub mean: Vector3<f64>,
    pub log_scale: Vector3<f64>,
    pub rotation: [f64; 4],
}

/// Adjoint of [`project_gaussian`]: maps gradients on `mean2d` and the full
/// (dilated) `cov2d` matrix back to the mean, log-scale and quaternion.
pub fn project_gaussian_backward(
    g: &Gaussian3D,
    cam: &Camera,
    d_mean2d: &Vector2<f64>,
    d_cov2d: &Matrix2<f64>,
) -> Result<ProjectionGrad> {
    let t = projection_terms(g, cam)?;
    let Intrinsics { fx, fy, .. } = cam.intrinsics;
    let (x, y, z) = (t.cam_point.x, t.cam_point.y, t.cam_point.z);
    let j = &t.jacobian;

    // cov2d = J M Jᵀ (the symmetrization in the forward pass is the identity
    // on symmetric inputs; treat the incoming gradient as-is)
    let g_cov = *d_cov2d;
    let g_m = j.transpose() * g_cov * j;
    let g_j = g_cov * j * t.cov_cam.transpose() + g_cov.transpose() * j * t.cov_cam;

    // M = V Σ Vᵀ
    let g_sigma = t.view_rot.transpose() * g_m * t.view_rot;

    // Σ = R D Rᵀ
    let d = Matrix3::from_diagonal(&t.scale_sq);
    let g_r = (g_sigma + g_sigma.transpose()) * t.rot * d;
    let g_d = t.rot.transpose() * g_sigma * t.rot;
    let log_scale = Vector3::new(
        g_d[(0, 0)] * 2.0 * t.scale_sq.x,
        g_d[(1, 1)] * 2.0 * t.scale_sq.y,
        g_d[(2, 2)] * 2.0 * t.scale_sq.z,
    );

    let rotation = quaternion_backward(&t.rot_unit, t.rot_norm, &g_r);

    // camera-space point through the mean projection and the Jacobian
    let z2 = z * z;
    let z3 = z2 * z;
    let mut g_p = Vector3::new(
        d_mean2d.x * fx / z,
        d_mean2d.y * fy / z,
        -d_mean2d.x * fx * x / z2 - d_mean2d.y * fy * y / z2,
    );
    g_p.x += g_j[(0, 2)] * (-fx / z2);
    g_p.y += g_j[(1, 2)] * (-fy / z2);
    g_p.z += g_j[(0, 0)] * (-fx / z2)
        + g_j[(0, 2)] * (2.0 * fx * x / z3)
        + g_j[(1, 1)] * (-fy / z2)
        + g_j[(1, 2)] * (2.0 * fy * y / z3);

    let mean = t.view_rot.transpose() * g_p;
    Ok(ProjectionGrad {
        mean,
        log_scale,
        rotation,
    })
}

/// Chain rule from `dL/dR` through the unit-quaternion rotation formula and
/// the normalization `q / |q|`.
fn quaternion_backward(u: &Quaternion<f64>, norm: f64, g_r: &Matrix3<f64>) -> [f64; 4] {
    let (w, x, y, z) = (u.w, u.i, u.j, u.k);
    let dot = |m: Matrix3<f64>| g_r.component_mul(&m).sum();
    let gw = dot(Matrix3::new(0.0, -2.0 * z, 2.0 * y, 2.0 * z, 0.0, -2.0 * x, -2.0 * y, 2.0 * x, 0.0));
    let gx = dot(Matrix3::new(
        0.0,
        2.0 * y,
        2.0 * z,
        2.0 * y,
        -4.0 * x,
        -2.0 * w,
        2.0 * z,
        2.0 * w,
        -4.0 * x,
    ));
    let gy = dot(Matrix3::new(
        -4.0 * y,
        2.0 * x,
        2.0 * w,
        2.0 * x,
        0.0,
        2.0 * z,
        -2.0 * w,
        2.0 * z,
        -4.0 * y,
    ));
    let gz = dot(Matrix3::new(
        -4.0 * z,
        -2.0 * w,
        2.0 * x,
        2.0 * w,
        -4.0 * z,
        2.0 * y,
        2.0 * x,
        2.0 * y,
        0.0,
    ));
    let gu = [gw, gx, gy, gz];
    let uu = [w, x, y, z];
    let proj: f64 = gu.iter().zip(uu.iter()).map(|(a, b)| a * b).sum();
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = (gu[k] - uu[k] * proj) / norm;
    }
    out
}
