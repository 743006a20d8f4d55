//! Compares the analytic adjoint of the splatting pass with central
//! differences on a random scene.

use hdrgs::geometry::{Camera, Gaussian3D, Intrinsics};
use hdrgs::image::FloatImage;
use hdrgs::raster::{RasterConfig, Rasterizer};
use nalgebra::{Quaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-4;

fn main() -> hdrgs::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cam = Camera::look_at(
        Vector3::new(0.0, 0.0, -4.0),
        Vector3::zeros(),
        Vector3::new(0.0, -1.0, 0.0),
        Intrinsics::from_fov(24, 24, 50.0),
        24,
        24,
        1.0,
    )?;
    let scene: Vec<Gaussian3D> = (0..8)
        .map(|_| {
            Gaussian3D::new(
                Vector3::from_fn(|_, _| rng.random_range(-0.7..0.7)),
                Vector3::from_fn(|_, _| rng.random_range(-1.5..-0.8)),
                Quaternion::new(1.0, rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), 0.0),
                rng.random_range(0.3..0.9),
                Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
            )
        })
        .collect();
    let weights = FloatImage::from_vec(24, 24, (0..24 * 24 * 3).map(|_| rng.random_range(-1.0..1.0)).collect())?;

    // cutoffs make the forward pass piecewise; disable them for finite differences
    let raster = Rasterizer::new(RasterConfig {
        min_alpha: 1e-300,
        min_transmittance: 0.0,
        ..RasterConfig::default()
    });
    let objective = |s: &[Gaussian3D]| -> f64 {
        let img = raster.render(s, &cam);
        img.values.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
    };
    let grads = raster.backward(&scene, &cam, &weights)?;

    let params: [(&str, fn(&mut Gaussian3D, f64)); 6] = [
        ("mean.x", |g, d| g.mean.x += d),
        ("mean.z", |g, d| g.mean.z += d),
        ("log_scale.y", |g, d| g.log_scale.y += d),
        ("rotation.i", |g, d| g.rotation.i += d),
        ("opacity", |g, d| g.opacity_logit += d),
        ("radiance.g", |g, d| g.radiance.y += d),
    ];
    let analytic = |gr: &hdrgs::raster::GaussianGrad, p: usize| match p {
        0 => gr.mean.x,
        1 => gr.mean.z,
        2 => gr.log_scale.y,
        3 => gr.rotation[1],
        4 => gr.opacity_logit,
        _ => gr.radiance.y,
    };

    let mut worst: f64 = 0.0;
    for (i, gr) in grads.iter().enumerate() {
        for (p, (name, nudge)) in params.iter().enumerate() {
            let shifted = |d: f64| {
                let mut s = scene.clone();
                nudge(&mut s[i], d);
                objective(&s)
            };
            let numeric = (shifted(STEP) - shifted(-STEP)) / (2.0 * STEP);
            let a = analytic(gr, p);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4);
            worst = worst.max(rel);
            if i < 2 {
                println!("gaussian {i} {name:<12} analytic {a:+.6e}  numeric {numeric:+.6e}  rel {rel:.1e}");
            }
        }
    }
    println!("worst relative error over {} derivatives: {worst:.2e}", grads.len() * params.len());
    Ok(())
}
