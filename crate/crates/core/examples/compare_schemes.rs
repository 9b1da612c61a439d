//! Pairwise differences between the three discretizations without terminal reward.
//!
//! ```text
//! cargo run --release --example compare_schemes
//! ```

use std::path::Path;

use robust_harvest::hjb::compare_schemes;
use robust_harvest::io::parse_config;

fn main() -> robust_harvest::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/harvest_step_coarse.cfg");
    let mut cfg = parse_config(&path)?;
    cfg.terminal = robust_harvest::TerminalReward::zero();
    let cmp = compare_schemes(&cfg.to_problem()?, &cfg.grid)?;
    for d in &cmp.differences {
        println!("{:<18} max |diff| {:.4e}  signed mean {:+.4e}", d.label(), d.max_abs, d.signed_mean);
    }
    Ok(())
}
