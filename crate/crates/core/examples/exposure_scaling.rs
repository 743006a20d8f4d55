//! Exposure-time scaling: how a set of training exposures is mapped onto the
//! tone-mapper axis, and how learned irradiance maps back to linear radiance.

use hdrgs::dataset::{ExposureSelection, SceneSpec};
use hdrgs::exposure::ExposureScaler;

fn main() -> hdrgs::Result<()> {
    let ladder = SceneSpec::ev_ladder(-4.0, 1.0, 5);
    println!("ladder {ladder:?}");

    for (name, sel) in [
        ("all", ExposureSelection::All),
        ("odd levels", ExposureSelection::Oe),
        ("even levels", ExposureSelection::Ne),
    ] {
        let train: Vec<f64> = ladder
            .iter()
            .enumerate()
            .filter(|(i, _)| sel.contains(*i))
            .map(|(_, &t)| t)
            .collect();
        let sc = ExposureScaler::fit(&train)?;
        let shifted: Vec<String> = ladder
            .iter()
            .map(|&t| format!("{:+.3}", sc.scale_time(t).unwrap()))
            .collect();
        println!("{name:>11}: r = {:.3}, s = {:+.4}, t' over the ladder = [{}]", sc.r, sc.s, shifted.join(", "));
    }

    // two-stop spacing shrinks the axis by half
    let sc = ExposureScaler::fit(&[0.125, 0.5, 2.0, 8.0, 32.0])?;
    println!("two-stop ladder: r = {}, s = {:.4}", sc.r, sc.s);

    // E' + t' only depends on the product of radiance and exposure time
    for learned in [-1.0, 0.0, 1.0] {
        let e = sc.hdr_from_learned(learned);
        for t in [0.5, 2.0] {
            let x = learned + sc.scale_time(t)?;
            println!("E' = {learned:+}  E = {e:8.4}  t = {t:3}  E'+t' = {x:+.4}  r·ln(E·t) = {:+.4}", sc.r * (e * t).ln());
        }
    }
    Ok(())
}
