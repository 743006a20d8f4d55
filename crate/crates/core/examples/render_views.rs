//! Splats the ground-truth scene of the synthetic generator from every
//! camera and writes the linear radiance as PFM plus a viewable PNG.
//!
//! The tiled renderer is checked against the brute-force reference along the
//! way.

use std::path::PathBuf;
use std::time::Instant;

use hdrgs::dataset::{ring_cameras, synthetic_scene, SceneSpec};
use hdrgs::model::reinhard_preview;
use hdrgs::pfm::write_pfm;
use hdrgs::raster::{render_irradiance_reference, Rasterizer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("hdrgs-renders"));
    std::fs::create_dir_all(&out)?;

    let spec = SceneSpec::default();
    let scene = synthetic_scene(&spec)?;
    let rasterizer = Rasterizer::default();
    println!("{} gaussians", scene.len());

    for (v, cam) in ring_cameras(&spec)?.iter().enumerate() {
        let start = Instant::now();
        let irr = rasterizer.render(&scene, cam);
        let elapsed = start.elapsed();
        let reference = render_irradiance_reference(&scene, cam);
        let diff = irr
            .values
            .data()
            .iter()
            .zip(reference.values.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let max_t = irr.final_transmittance.iter().copied().fold(0.0, f64::max);

        write_pfm(&out.join(format!("view{v}.pfm")), &irr.values)?;
        reinhard_preview(&irr.values, 0.18)
            .to_rgb8()
            .save(out.join(format!("view{v}.png")))?;
        println!("view {v}: {elapsed:>9.2?}, max |tiled - reference| {diff:.1e}, max leftover transmittance {max_t:.3}");
    }
    println!("wrote {}", out.display());
    Ok(())
}
