//! Backtracked population paths for several terminal levels and the
//! near-zero harvesting plateau.
//!
//! ```text
//! cargo run --release --example trajectories
//! ```

use std::path::Path;

use robust_harvest::hjb::{solve, Scheme};
use robust_harvest::io::parse_config;
use robust_harvest::policy::{backtrack_trajectory, distortion_along, find_plateau, PlateauRule};

fn main() -> robust_harvest::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/harvest_step_coarse.cfg");
    let cfg = parse_config(&path)?;
    let problem = cfg.to_problem()?;
    let sol = solve(&problem, &cfg.grid, Scheme::Implicit)?;
    for terminal in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let tr = backtrack_trajectory(&sol.value, terminal)?;
        let plateau = match find_plateau(&tr, &PlateauRule::default()) {
            Some(p) => format!(
                "plateau day {:.1} to {:.1}",
                tr.samples[p.start].t + tr.growth_offset,
                tr.samples[p.end - 1].t + tr.growth_offset
            ),
            None => "no plateau".to_string(),
        };
        println!("N(T) = {terminal}: N(0) = {:.4}, max q {:.3e}, {plateau}", tr.initial_n(), tr.max_q());
    }
    let tr = backtrack_trajectory(&sol.value, 0.5)?;
    for d in distortion_along(&tr, &[0.0, 60.0, 120.0], &problem)? {
        println!("day {:.0}: eta {:.4}, distorted mean Wmax {:.3} g", d.t, d.eta, d.mean_max_weight());
    }
    Ok(())
}
