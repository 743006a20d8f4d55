//! The learnable response curve: a piecewise-linear grid with dense nodes
//! below the split point, sparse nodes above it, pinned ends and leaky tails.
//!
//! Prints the sigmoid-initialized curve next to the generator's gamma
//! response, and the two regularizers the training loop adds.

use hdrgs::dataset::OracleCrf;
use hdrgs::tone::{sigmoid_eval, AsymmetricGrid, GridConfig};

fn main() -> hdrgs::Result<()> {
    let cfg = GridConfig::default();
    let mut grid = AsymmetricGrid::new(cfg)?;
    println!(
        "domain [{}, {}] split at {}, {} nodes, leak {}",
        cfg.x_lo,
        cfg.x_hi,
        cfg.x_mid,
        grid.node_count(),
        cfg.leak_beta
    );

    let (smooth, _) = grid.smoothness_loss();
    println!("linear ramp: smoothness {smooth:.3e}");
    grid.init_from_sigmoid();
    let (smooth, _) = grid.smoothness_loss();
    let (unit, _) = grid.unit_exposure_loss()?;
    println!("sigmoid init: smoothness {smooth:.3e}, unit-exposure loss {unit:.4}");

    let gamma = OracleCrf::default();
    println!("\n{:>6} {:>8} {:>8} {:>8}", "x", "grid", "sigmoid", "gamma");
    for i in -16..=10 {
        let x = i as f64 * 0.5;
        println!(
            "{x:>6.1} {:>8.4} {:>8.4} {:>8.4}",
            grid.eval(x, 0),
            sigmoid_eval(x),
            gamma.apply(x.exp())
        );
    }

    // the tails never leave (-inf, 0] below and (1, 1 + leak] above
    for x in [cfg.x_hi + 1.0, cfg.x_hi + 100.0, 1e9] {
        println!("g({x:e}) = {:.6}", grid.eval(x, 0));
    }
    let bends = grid.non_monotone_segments();
    println!("non-monotone segments: {}", bends.len());
    Ok(())
}
