//! Moment-matching calibration in a small box of the parameter lattice.
//!
//! ```text
//! cargo run --release --example calibrate_neighborhood
//! ```

use std::path::Path;

use robust_harvest::calibration::{grid_search, IndexRestriction, ParameterGrid};
use robust_harvest::io::load_competition_sample;

fn main() -> robust_harvest::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/competition_2023.csv");
    let sample = load_competition_sample(&path, 90.0)?;
    let box_: IndexRestriction = "36:42,26:32,290:296,1:7,36:42".parse()?;
    let best = grid_search(10.0, &sample, &ParameterGrid::published(), Some(&box_))?;
    let d = &best.model.dist;
    println!("index {}", best.index);
    println!("r = {}, w_lo = {}, w_hi = {}, a = {}, b = {}", best.model.r, d.w_lo, d.w_hi, d.a, d.b);
    println!(
        "model mean {:.2} std {:.2} skew {:.3}; sample mean {:.2} std {:.2}",
        best.fitted_stats.mean, best.fitted_stats.std, best.fitted_stats.skew, best.target_stats.mean, best.target_stats.std
    );
    println!("er {:.3e} (root {:.3e}), {} candidates scored", best.er, best.er_root(), best.evaluated);
    Ok(())
}
