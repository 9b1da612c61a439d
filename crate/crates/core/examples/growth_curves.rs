//! Mean, spread and envelope of the uncertain logistic model over a season.
//!
//! ```text
//! cargo run --example growth_curves
//! ```

use robust_harvest::growth::{envelope_curves, model_stats, UncertainGrowthModel};

fn main() -> robust_harvest::Result<()> {
    // 2023 calibration with W0 = 10 g
    let model = UncertainGrowthModel::from_parts(10.0, 0.059, 29.0, 293.0, 1.0, 9.75)?;
    println!("{:>5} {:>8} {:>8} {:>7} {:>8} {:>8}", "day", "mean", "std", "skew", "lower", "upper");
    for day in (30..=210).step_by(20) {
        let t = day as f64;
        let s = model_stats(t, &model)?;
        let (lo, hi) = envelope_curves(t, &model);
        println!("{day:>5} {:>8.2} {:>8.2} {:>7.3} {:>8.2} {:>8.2}", s.mean, s.std, s.skew, lo, hi);
    }
    Ok(())
}
