//! Least-squares logistic fit to an averaged weight series.
//!
//! ```text
//! cargo run --example fit_logistic
//! ```

use std::path::Path;

use robust_harvest::calibration::fit_logistic;
use robust_harvest::io::load_weight_series;

fn main() -> robust_harvest::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/growth_2023.csv");
    let series = load_weight_series(&path)?;
    let fit = fit_logistic(&series)?;
    println!(
        "w0 = {:.3} g, w_max = {:.3} g, r = {:.5} 1/day (sse {:.2e}, {} points)",
        fit.params.w0,
        fit.params.w_max,
        fit.params.r,
        fit.sse,
        series.len()
    );
    Ok(())
}
