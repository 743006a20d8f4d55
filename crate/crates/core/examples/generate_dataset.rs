//! Synthesizes a multi-exposure dataset with ground-truth radiance and
//! response curve, then writes it to disk.
//!
//! ```text
//! cargo run --release --example generate_dataset -- [out_dir]
//! ```

use std::path::PathBuf;

use hdrgs::dataset::{generate_synthetic, MultiExposureDataset, SceneSpec};

fn main() -> hdrgs::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("hdrgs-dataset"));

    let spec = SceneSpec {
        exposure_times: SceneSpec::ev_ladder(-4.0, 1.0, 5),
        test_views: vec![2, 6],
        seed: 1,
        ..SceneSpec::default()
    };
    let ds = generate_synthetic(&spec)?;
    ds.save(&out)?;

    println!("{} views at {}x{}", ds.views.len(), ds.width, ds.height);
    println!("exposure times: {:?}", ds.exposures);
    for (e, t) in ds.exposures.iter().enumerate() {
        let mean: f64 = ds
            .images
            .iter()
            .filter(|im| im.exposure == e)
            .map(|im| {
                let f = im.to_float();
                f.data().iter().sum::<f64>() / f.data().len() as f64
            })
            .sum::<f64>()
            / ds.views.len() as f64;
        println!("  t = {t:<8} mean pixel {mean:.3}");
    }

    let back = MultiExposureDataset::load(&out)?;
    assert_eq!(back.images, ds.images);
    println!("wrote and reloaded {}", out.display());
    Ok(())
}
