//! Command-line front end. The `robust-harvest` binary is a thin wrapper
//! around [`main_from`].

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::calibration::{empirical_stats, fit_logistic, grid_search, IndexRestriction, ParameterGrid};
use crate::error::{Error, Result};
use crate::hjb::{self, cfl_margin, semi_implicit_margin, Scheme, SolveOptions};
use crate::io::{self, GridView, RunConfig, RunManifest, Strides};
use crate::policy::{backtrack_trajectory, distortion_along, find_plateau, sensitivity_suite, PlateauRule};

#[derive(Debug, Parser)]
#[command(name = "robust-harvest", version, about = "Uncertain growth calibration and robust harvesting solvers")]
pub struct Cli {
    /// Worker threads for parallel sections (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Least-squares logistic fit of a `day,avg_weight_g` series.
    FitLogistic {
        #[arg(long)]
        input: PathBuf,
    },
    /// Lattice search for the maximum-weight distribution.
    Calibrate {
        /// One-column `weight_g` file.
        #[arg(long)]
        competition: PathBuf,
        /// Sampling day, days since May 1.
        #[arg(long)]
        day: f64,
        /// Initial weight, g.
        #[arg(long)]
        w0: f64,
        /// Index box `i0:i1,j0:j1,k0:k1,l0:l1,m0:m1` to search.
        #[arg(long)]
        restrict: Option<IndexRestriction>,
        /// Search the whole lattice.
        #[arg(long)]
        full: bool,
        /// Override the lattice itself, same syntax as --restrict.
        #[arg(long)]
        grid: Option<IndexRestriction>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the HJB equation and write value and policy grids.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scheme: Scheme,
        #[arg(long)]
        out: PathBuf,
        /// Run even when the stability margin is negative.
        #[arg(long)]
        force: bool,
    },
    /// Solve with all three schemes and write pairwise differences.
    CompareSchemes {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Backtrack controlled trajectories from terminal populations.
    Trajectory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scheme: Scheme,
        #[arg(long, num_args = 1.., default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
        terminal: Vec<f64>,
        /// Growth-clock days at which to write worst-case densities.
        #[arg(long, num_args = 1..)]
        density_days: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the nominal problem against variants from a file.
    Sensitivity {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        variants: PathBuf,
        #[arg(long, default_value = "implicit")]
        scheme: Scheme,
        #[arg(long, num_args = 1.., default_values_t = [0.5])]
        terminal: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::invalid("threads", "must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Validation(e.to_string()))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::FitLogistic { input } => fit(&input),
        Command::Calibrate {
            competition,
            day,
            w0,
            restrict,
            full,
            grid,
            out,
        } => calibrate(&competition, day, w0, restrict, full, grid, out.as_deref()),
        Command::Solve {
            config,
            scheme,
            out,
            force,
        } => solve(&config, scheme, &out, force),
        Command::CompareSchemes { config, out } => compare(&config, &out),
        Command::Trajectory {
            config,
            scheme,
            terminal,
            density_days,
            out,
        } => trajectories(&config, scheme, &terminal, &density_days, &out),
        Command::Sensitivity {
            config,
            variants,
            scheme,
            terminal,
            out,
        } => sensitivity(&config, &variants, scheme, &terminal, &out),
    }
}

fn fit(input: &Path) -> Result<()> {
    let series = io::load_weight_series(input)?;
    let f = fit_logistic(&series)?;
    println!(
        "w0 = {:.6} g, w_max = {:.6} g, r = {:.6} 1/day, sse = {:.6e}",
        f.params.w0, f.params.w_max, f.params.r, f.sse
    );
    Ok(())
}

fn calibrate(
    competition: &Path,
    day: f64,
    w0: f64,
    restrict: Option<IndexRestriction>,
    full: bool,
    grid: Option<IndexRestriction>,
    out: Option<&Path>,
) -> Result<()> {
    let started = Instant::now();
    if restrict.is_none() && !full {
        return Err(Error::Validation(
            "pass --restrict to search a box of the lattice or --full for the whole lattice".into(),
        ));
    }
    let sample = io::load_competition_sample(competition, day)?;
    let lattice = match grid {
        Some(g) => ParameterGrid {
            i: g.i,
            j: g.j,
            k: g.k,
            l: g.l,
            m: g.m,
        },
        None => ParameterGrid::published(),
    };
    let res = grid_search(w0, &sample, &lattice, restrict.as_ref())?;
    let p = ParameterGrid::decode(&res.index);
    let target = empirical_stats(&sample);
    println!("index     {}", res.index);
    println!(
        "params    r = {:.3}, w_lo = {}, w_hi = {}, a = {}, b = {}",
        p.r, p.w_lo, p.w_hi, p.a, p.b
    );
    println!(
        "model     mean {:.1}  std {:.1}  skew {:.2}",
        res.fitted_stats.mean, res.fitted_stats.std, res.fitted_stats.skew
    );
    println!(
        "target    mean {:.1}  std {:.1}  skew {:.2}  ({} fish, day {day})",
        target.mean, target.std, target.skew, target.count
    );
    println!("error     Er = {:.3e}, sqrt(Er) = {:.3e}", res.er, res.er_root());
    println!("evaluated {} candidates, skipped {}", res.evaluated, res.skipped);

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let result = json!({
            "index": res.index,
            "r": p.r, "w_lo": p.w_lo, "w_hi": p.w_hi, "a": p.a, "b": p.b,
            "er": res.er,
            "er_root": res.er_root(),
            "fitted": res.fitted_stats,
            "target": res.target_stats,
            "evaluated": res.evaluated,
            "skipped": res.skipped,
        });
        let path = dir.join("calibration.json");
        std::fs::write(&path, serde_json::to_string_pretty(&result).unwrap_or_default() + "\n")?;
        let mut m = RunManifest::new("calibrate");
        m.add_input(competition)?;
        m.add_outputs(dir, &[path])?;
        m.wall_clock_seconds = started.elapsed().as_secs_f64();
        m.summary = result;
        m.write(dir)?;
    }
    Ok(())
}

fn load(config: &Path) -> Result<(RunConfig, hjb::HarvestProblem)> {
    let cfg = io::parse_config(config)?;
    let problem = cfg.to_problem()?;
    Ok((cfg, problem))
}

fn strides(cfg: &RunConfig) -> Strides {
    Strides {
        t: cfg.t_stride,
        n: cfg.n_stride,
    }
}

fn manifest_for(command: &str, config: &Path, cfg: &RunConfig) -> Result<RunManifest> {
    let mut m = RunManifest::new(command);
    m.add_input(config)?;
    m.config_echo = Some(cfg.to_config_string());
    Ok(m)
}

fn solve(config: &Path, scheme: Scheme, out: &Path, force: bool) -> Result<()> {
    let started = Instant::now();
    let (cfg, problem) = load(config)?;
    let margin = match scheme {
        Scheme::Explicit => Some(cfl_margin(&problem, &cfg.grid)),
        Scheme::SemiImplicit => Some(semi_implicit_margin(&problem, &cfg.grid)),
        Scheme::Implicit => None,
    };
    if let Some(m) = margin {
        println!("stability margin ({scheme}): {m:.6}");
    }
    let omega = Arc::new(hjb::omega_for(&problem, &cfg.grid));
    let sol = hjb::solve_with(Arc::new(problem), &cfg.grid, scheme, omega, SolveOptions { force })?;

    std::fs::create_dir_all(out)?;
    let value_path = out.join("value.csv");
    let policy_path = out.join("policy.csv");
    io::write_grid_csv(&GridView::of_value(&sol.value), "value", strides(&cfg), &value_path)?;
    io::write_grid_csv(
        &GridView::of_policy(&sol.policy, cfg.growth_offset),
        "q",
        strides(&cfg),
        &policy_path,
    )?;
    let r = sol.report;
    println!(
        "{scheme}: max value {:.6}, max control {:.6e} (bound {:.6e}), {} rows checked, {} violations",
        r.max_value, r.max_control, r.control_bound, r.rows_checked, r.violations
    );

    let mut m = manifest_for("solve", config, &cfg)?;
    m.scheme = Some(scheme.to_string());
    m.add_outputs(out, &[value_path, policy_path])?;
    m.invariants.push((scheme.to_string(), r));
    m.wall_clock_seconds = started.elapsed().as_secs_f64();
    m.write(out)?;
    Ok(())
}

fn compare(config: &Path, out: &Path) -> Result<()> {
    let started = Instant::now();
    let (cfg, problem) = load(config)?;
    let cmp = hjb::compare_schemes(&problem, &cfg.grid)?;
    std::fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for d in &cmp.differences {
        let path = out.join(format!("diff_{}.csv", d.label()));
        io::write_grid_csv(
            &GridView::of_difference(d, cfg.growth_offset),
            "value",
            strides(&cfg),
            &path,
        )?;
        files.push(path);
        println!(
            "{:<18} max |diff| {:.6e}  signed mean {:+.6e}",
            d.label(),
            d.max_abs,
            d.signed_mean
        );
        summary.push(json!({"pair": d.label(), "max_abs": d.max_abs, "signed_mean": d.signed_mean}));
    }
    let mut m = manifest_for("compare-schemes", config, &cfg)?;
    m.add_outputs(out, &files)?;
    for (s, r) in Scheme::ALL.iter().zip(cmp.reports) {
        m.invariants.push((s.to_string(), r));
    }
    m.summary = json!({"differences": summary, "max_values": cmp.max_values});
    m.wall_clock_seconds = started.elapsed().as_secs_f64();
    m.write(out)?;
    Ok(())
}

fn trajectories(config: &Path, scheme: Scheme, terminal: &[f64], density_days: &[f64], out: &Path) -> Result<()> {
    let started = Instant::now();
    let (cfg, problem) = load(config)?;
    let sol = hjb::solve(&problem, &cfg.grid, scheme)?;
    std::fs::create_dir_all(out)?;
    let times: Vec<f64> = density_days.iter().map(|d| d - problem.growth_offset).collect();
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for &n in terminal {
        let tr = backtrack_trajectory(&sol.value, n)?;
        let path = out.join(format!("trajectory_n{n}.csv"));
        io::write_trajectory_csv(&tr, cfg.t_stride, &path)?;
        files.push(path);
        let plateau = find_plateau(&tr, &PlateauRule::default());
        println!(
            "terminal {n}: initial {:.6}, max q {:.6e}, plateau {}{}",
            tr.initial_n(),
            tr.max_q(),
            plateau.map_or("none".to_string(), |p| format!(
                "days {:.2}-{:.2}",
                problem.growth_offset + tr.samples[p.start].t,
                problem.growth_offset + tr.samples[p.end - 1].t
            )),
            if tr.left_domain { ", left domain" } else { "" }
        );
        if !times.is_empty() {
            let dens = distortion_along(&tr, &times, &problem)?;
            let path = out.join(format!("density_n{n}.csv"));
            io::write_density_csv(&dens, &path)?;
            files.push(path);
        }
        summary.push(json!({
            "terminal_n": n,
            "initial_n": tr.initial_n(),
            "left_domain": tr.left_domain,
            "plateau": plateau,
        }));
    }
    let mut m = manifest_for("trajectory", config, &cfg)?;
    m.scheme = Some(scheme.to_string());
    m.add_outputs(out, &files)?;
    m.invariants.push((scheme.to_string(), sol.report));
    m.summary = json!(summary);
    m.wall_clock_seconds = started.elapsed().as_secs_f64();
    m.write(out)?;
    Ok(())
}

fn sensitivity(config: &Path, variants: &Path, scheme: Scheme, terminal: &[f64], out: &Path) -> Result<()> {
    let started = Instant::now();
    let (cfg, problem) = load(config)?;
    let vs = io::parse_variants(variants, problem.n_max)?;
    let report = sensitivity_suite(&problem, &vs, &cfg.grid, scheme, terminal)?;
    for v in &report.variants {
        println!(
            "{:<20} max value {:.6}  value change [{:+.6e}, {:+.6e}]",
            v.label, v.max_value, v.min_value_excess, v.max_value_excess
        );
        for t in &v.trajectories {
            println!(
                "    from n0 = {:.6}: final n {:.6} (nominal {:.6})",
                t.start_n, t.variant_final_n, t.nominal_final_n
            );
        }
    }
    std::fs::create_dir_all(out)?;
    let path = out.join("sensitivity.json");
    let body = serde_json::to_string_pretty(&report).map_err(|e| Error::Validation(e.to_string()))?;
    std::fs::write(&path, body + "\n")?;
    let mut m = manifest_for("sensitivity", config, &cfg)?;
    m.add_input(variants)?;
    m.scheme = Some(scheme.to_string());
    m.add_outputs(out, &[path])?;
    m.wall_clock_seconds = started.elapsed().as_secs_f64();
    m.write(out)?;
    Ok(())
}
