//! Recovers linear radiance from a trained model and compares it, and the
//! learned response curve, with the generator's ground truth.
//!
//! Expects the output directory of the `train_toy` example.

use std::path::PathBuf;

use hdrgs::checkpoint::ModelCheckpoint;
use hdrgs::dataset::{MultiExposureDataset, OracleCrf};
use hdrgs::image::FloatImage;
use hdrgs::loss::{hdr_log_rmse, median_ratio};
use hdrgs::model::reinhard_preview;
use hdrgs::pfm::write_pfm;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("hdrgs-toy"));
    let ckpt = ModelCheckpoint::load(&dir.join("model.ckpt"))
        .map_err(|e| format!("{e}; run the train_toy example first"))?;
    let ds = MultiExposureDataset::load(&dir.join("data"))?;
    let model = &ckpt.model;
    let gt = ds.gt_hdr.as_ref().ok_or("dataset has no ground-truth radiance")?;

    // pool every view so one global scale is removed
    let mut pred_all = Vec::new();
    let mut gt_all = Vec::new();
    for (v, truth) in gt.iter().enumerate() {
        let hdr = model.render_hdr(&ds.camera(v, 1.0)?);
        if v == 0 {
            write_pfm(&dir.join("view0.pfm"), &hdr)?;
            reinhard_preview(&hdr, 0.18).to_rgb8().save(dir.join("view0.png"))?;
        }
        pred_all.extend_from_slice(hdr.data());
        gt_all.extend_from_slice(truth.data());
    }
    let n = pred_all.len() / 3;
    let pred = FloatImage::from_vec(n, 1, pred_all)?;
    let truth = FloatImage::from_vec(n, 1, gt_all)?;
    let err = hdr_log_rmse(&pred, &truth)?;
    println!(
        "log radiance RMSE {:.4} after removing a global factor of {:.4}",
        err.rmse,
        err.offset.exp()
    );
    println!("median predicted/true radiance {:.4}", median_ratio(&pred, &truth)?.unwrap_or(f64::NAN));

    // the learned curve sees r·ln(E·t) where the generator sees ln(E·t)
    let oracle = OracleCrf::default();
    let r = model.scaler.r;
    println!("\n{:>6} {:>8} {:>8}", "x", "learned", "true");
    for i in -10..=4 {
        let x = i as f64 * 0.5;
        let [red, _, _] = model.response(x);
        println!("{x:>6.1} {red:>8.4} {:>8.4}", oracle.response(x / r).min(1.0));
    }
    Ok(())
}
