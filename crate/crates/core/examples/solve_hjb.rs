//! Robust value function and harvesting policy on a coarse grid.
//!
//! ```text
//! cargo run --release --example solve_hjb
//! ```

use std::path::Path;

use robust_harvest::hjb::{cfl_critical_dt, solve, Scheme};
use robust_harvest::io::parse_config;

fn main() -> robust_harvest::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/harvest_step_coarse.cfg");
    let cfg = parse_config(&path)?;
    let problem = cfg.to_problem()?;
    let dn = cfg.grid.dn(&problem);
    println!("dt = {:.4e}, explicit limit {:.4e}", cfg.grid.dt(&problem), cfl_critical_dt(&problem, dn));
    for scheme in Scheme::ALL {
        let sol = solve(&problem, &cfg.grid, scheme)?;
        let r = &sol.report;
        println!(
            "{scheme:<9} max value {:.6}  (bound {:.3})  max q {:.4e}  (cap {:.4e})  monotone {}",
            r.max_value, r.value_bound, r.max_control, r.control_bound, r.monotonicity_asserted
        );
        let j = cfg.grid.pop_steps / 2;
        println!("          value at t=0, n=0.5: {:.6}, q there: {:.4e}", sol.value.get(0, j), sol.policy.get(0, j));
    }
    Ok(())
}
