//! Value and trajectory shifts under a larger discount and different
//! uncertainty aversions.
//!
//! ```text
//! cargo run --release --example sensitivity
//! ```

use std::path::Path;

use robust_harvest::hjb::Scheme;
use robust_harvest::io::{parse_config, parse_variants};
use robust_harvest::policy::sensitivity_suite;

fn main() -> robust_harvest::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let cfg = parse_config(&dir.join("harvest_step_coarse.cfg"))?;
    let problem = cfg.to_problem()?;
    let variants = parse_variants(&dir.join("variants.cfg"), problem.n_max)?;
    let report = sensitivity_suite(&problem, &variants, &cfg.grid, Scheme::Implicit, &[0.25, 0.5])?;
    println!("nominal max value {:.6}", report.nominal_max_value);
    for v in &report.variants {
        println!("{:<26} max value {:.6}  largest excess over nominal {:+.3e}", v.label, v.max_value, v.max_value_excess);
        for t in &v.trajectories {
            println!(
                "    from N(0) = {:.4}: final {:.4} vs nominal {:.4}",
                t.start_n, t.variant_final_n, t.nominal_final_n
            );
        }
    }
    Ok(())
}
