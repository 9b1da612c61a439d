//! Entropic lower bound on the body weight and the distortion that attains it.
//!
//! ```text
//! cargo run --example worst_case_weight
//! ```

use robust_harvest::growth::{raw_moment, UncertainGrowthModel};
use robust_harvest::robust::{entropic_bound_at, variational_objective, worst_case_distortion_at, UncertaintyAversion};

fn main() -> robust_harvest::Result<()> {
    let model = UncertainGrowthModel::from_parts(20.5, 0.079, 24.0, 123.0, 1.0, 2.5)?;
    let t = 121.0;
    println!("mean weight at day {t}: {:.4} g", raw_moment(1, t, &model)?);
    for eta in [0.0, 0.01, 0.05, 0.1, 0.5] {
        let omega = entropic_bound_at(t, eta, &model);
        let star = worst_case_distortion_at(t, eta, &model);
        let check = if eta > 0.0 {
            variational_objective(&star.values, t, 0.0, &UncertaintyAversion::Constant(eta), &model)?
        } else {
            omega
        };
        println!(
            "eta {eta:<5} omega {omega:.4} g  objective at phi* {check:.4} g  distorted mean Wmax {:.3} g",
            star.mean_max_weight()
        );
    }
    Ok(())
}
