//! Optimal harvest rates read off a solved value function, controlled
//! population trajectories, worst-case distortions along them and
//! sensitivity runs.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hjb::{self, GridSpec, HarvestProblem, Scheme, Solution, SolveOptions, TerminalReward, ValueGrid};
use crate::robust::{locate, worst_case_distortion, DistortedDensity, UncertaintyAversion};

/// Upwind slope at node `j`, extended to `j = 0` by the first interior slope.
fn node_slope(row: &[f64], j: usize, dn: f64) -> f64 {
    let j = j.max(1);
    (row[j] - row[j - 1]) / dn
}

/// Optimal harvest rate `omega / (h + D)^2` at `(t_i, n)`, with `D` and
/// `omega` linearly interpolated in `n`. Zero at `n = 0`, clamped to
/// `[0, omega_cap / h^2]`.
pub fn optimal_control_at(value: &ValueGrid, i: usize, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let steps = value.grid.pop_steps;
    let (j, frac) = locate(n, value.dn, steps);
    if j == 0 && frac == 0.0 {
        return 0.0;
    }
    let row = value.row(i);
    let slope = if frac == 0.0 {
        node_slope(row, j, value.dn)
    } else {
        let lo = node_slope(row, j, value.dn);
        lo + frac * (node_slope(row, j + 1, value.dn) - lo)
    };
    let omega = value.omega.interpolate(i, n);
    let denom = value.problem.h + slope;
    let cap = value.problem.control_cap();
    if denom <= 0.0 {
        return cap;
    }
    (omega / (denom * denom)).clamp(0.0, cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    /// Days since the start of the horizon.
    pub t: f64,
    pub n: f64,
    /// Harvest rate, population/day.
    pub q: f64,
    /// Worst-case body weight, g.
    pub omega: f64,
}

/// Controlled population path, ordered forward in time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub terminal_n: f64,
    /// Growth-clock day of `t = 0`.
    pub growth_offset: f64,
    /// Set when the path hit `n_max` and was clamped.
    pub left_domain: bool,
}

impl Trajectory {
    pub fn initial_n(&self) -> f64 {
        self.samples[0].n
    }

    pub fn final_n(&self) -> f64 {
        self.samples[self.samples.len() - 1].n
    }

    pub fn max_q(&self) -> f64 {
        self.samples.iter().map(|s| s.q).fold(0.0, f64::max)
    }

    pub fn median_q(&self) -> f64 {
        let mut q: Vec<f64> = self.samples.iter().map(|s| s.q).collect();
        q.sort_by(f64::total_cmp);
        let m = q.len() / 2;
        if q.len() % 2 == 1 {
            q[m]
        } else {
            0.5 * (q[m - 1] + q[m])
        }
    }

    /// Population at time `t`, linear between samples.
    pub fn n_at(&self, t: f64) -> Option<f64> {
        let s = &self.samples;
        if !(t >= s[0].t && t <= s[s.len() - 1].t) {
            return None;
        }
        let k = s.partition_point(|x| x.t <= t);
        if k == 0 {
            return Some(s[0].n);
        }
        if k == s.len() {
            return Some(s[k - 1].n);
        }
        let (a, b) = (s[k - 1], s[k]);
        Some(a.n + (b.n - a.n) * (t - a.t) / (b.t - a.t))
    }
}

fn sample(value: &ValueGrid, i: usize, n: f64) -> TrajectorySample {
    TrajectorySample {
        t: value.time(i),
        n,
        q: optimal_control_at(value, i, n),
        omega: value.omega.interpolate(i, n),
    }
}

/// Integrates `dN = -q dt` backward from `(T, terminal_n)` with reverse
/// explicit Euler on the solver's time grid.
pub fn backtrack_trajectory(value: &ValueGrid, terminal_n: f64) -> Result<Trajectory> {
    let n_max = value.problem.n_max;
    if !(0.0..=n_max).contains(&terminal_n) {
        return Err(Error::invalid(
            "terminal_n",
            format!("{terminal_n} is outside [0, {n_max}]"),
        ));
    }
    let it = value.grid.time_steps;
    let mut samples = Vec::with_capacity(it + 1);
    let mut n = terminal_n;
    let mut left_domain = false;
    for i in (0..=it).rev() {
        let s = sample(value, i, n);
        samples.push(s);
        if i > 0 {
            n += value.dt * s.q;
            if n > n_max {
                n = n_max;
                left_domain = true;
            }
        }
    }
    samples.reverse();
    Ok(Trajectory {
        samples,
        terminal_n,
        growth_offset: value.problem.growth_offset,
        left_domain,
    })
}

/// Forward explicit Euler from `(0, n0)` under the feedback policy of `value`.
pub fn forward_simulate(value: &ValueGrid, n0: f64) -> Result<Trajectory> {
    let n_max = value.problem.n_max;
    if !(0.0..=n_max).contains(&n0) {
        return Err(Error::invalid("n0", format!("{n0} is outside [0, {n_max}]")));
    }
    let it = value.grid.time_steps;
    let mut samples = Vec::with_capacity(it + 1);
    let mut n = n0;
    for i in 0..=it {
        let s = sample(value, i, n);
        samples.push(s);
        n = (n - value.dt * s.q).max(0.0);
    }
    Ok(Trajectory {
        terminal_n: samples[it].n,
        samples,
        growth_offset: value.problem.growth_offset,
        left_domain: false,
    })
}

/// Worst-case distortion of the maximum-weight law at each requested time
/// (days since the start of the horizon), using the aversion at the
/// trajectory's population.
pub fn distortion_along(
    trajectory: &Trajectory,
    times: &[f64],
    problem: &HarvestProblem,
) -> Result<Vec<DistortedDensity>> {
    times
        .iter()
        .map(|&t| {
            if !(0.0..=problem.horizon).contains(&t) {
                return Err(Error::invalid(
                    "time",
                    format!("{t} is outside [0, {}]", problem.horizon),
                ));
            }
            let n = trajectory
                .n_at(t)
                .ok_or_else(|| Error::invalid("time", format!("{t} is not covered by the trajectory")))?;
            Ok(worst_case_distortion(
                problem.growth_offset + t,
                n,
                &problem.eta,
                &problem.model,
            ))
        })
        .collect()
}

/// Detector for stretches where harvesting nearly stops around a target level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauRule {
    /// `q` below this fraction of the trajectory's median counts as low.
    pub rel_threshold: f64,
    pub min_len: usize,
    pub center: f64,
    pub radius: f64,
}

impl Default for PlateauRule {
    fn default() -> Self {
        PlateauRule {
            rel_threshold: 0.05,
            min_len: 5,
            center: 0.5,
            radius: 0.05,
        }
    }
}

/// Sample range `[start, end)` of a detected plateau.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Plateau {
    pub start: usize,
    pub end: usize,
}

/// Longest run of low-harvest samples near `rule.center`, if any is at
/// least `rule.min_len` long.
pub fn find_plateau(trajectory: &Trajectory, rule: &PlateauRule) -> Option<Plateau> {
    let threshold = rule.rel_threshold * trajectory.median_q();
    let mut best: Option<Plateau> = None;
    let mut start = None;
    let samples = &trajectory.samples;
    for k in 0..=samples.len() {
        let low = samples
            .get(k)
            .is_some_and(|s| s.q < threshold && (s.n - rule.center).abs() <= rule.radius);
        match (low, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                if k - s >= rule.min_len && best.map_or(true, |b| k - s > b.end - b.start) {
                    best = Some(Plateau { start: s, end: k });
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

/// A named modification of the nominal problem.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProblemVariant {
    pub label: String,
    pub delta: Option<f64>,
    pub h: Option<f64>,
    pub eta: Option<UncertaintyAversion>,
    pub terminal: Option<TerminalReward>,
}

impl ProblemVariant {
    pub fn apply(&self, base: &HarvestProblem) -> HarvestProblem {
        let mut p = base.clone();
        if let Some(d) = self.delta {
            p.delta = d;
        }
        if let Some(h) = self.h {
            p.h = h;
        }
        if let Some(e) = &self.eta {
            p.eta = e.clone();
        }
        if let Some(t) = &self.terminal {
            p.terminal = t.clone();
        }
        p
    }

    pub fn is_nominal(&self) -> bool {
        self.delta.is_none() && self.h.is_none() && self.eta.is_none() && self.terminal.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryDelta {
    pub terminal_n: f64,
    /// Initial population of the nominal backtracked trajectory.
    pub start_n: f64,
    /// Final population when the variant's policy is run forward from `start_n`.
    pub variant_final_n: f64,
    pub nominal_final_n: f64,
    /// Largest `n_variant(t) - n_nominal(t)` along the forward runs.
    pub max_n_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantReport {
    pub label: String,
    pub max_value: f64,
    /// Largest `Phi_variant - Phi_nominal` over the grid.
    pub max_value_excess: f64,
    /// Smallest `Phi_variant - Phi_nominal` over the grid.
    pub min_value_excess: f64,
    pub trajectories: Vec<TrajectoryDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub scheme: Scheme,
    pub nominal_max_value: f64,
    pub variants: Vec<VariantReport>,
}

/// Solves the nominal problem and each variant, and compares value
/// functions and forward-simulated trajectories started from the nominal
/// backtracked initial populations.
pub fn sensitivity_suite(
    base: &HarvestProblem,
    variants: &[ProblemVariant],
    grid: &GridSpec,
    scheme: Scheme,
    terminal_targets: &[f64],
) -> Result<SensitivityReport> {
    let nominal = hjb::solve(base, grid, scheme)?;
    let starts: Vec<(f64, Trajectory)> = terminal_targets
        .iter()
        .map(|&n| {
            let back = backtrack_trajectory(&nominal.value, n)?;
            let fwd = forward_simulate(&nominal.value, back.initial_n())?;
            Ok((n, fwd))
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::with_capacity(variants.len());
    for v in variants {
        let problem = v.apply(base);
        let solution = if v.is_nominal() {
            nominal.clone()
        } else if problem.eta == base.eta {
            let omega = nominal.value.omega.clone();
            hjb::solve_with(Arc::new(problem), grid, scheme, omega, SolveOptions::default())?
        } else {
            hjb::solve(&problem, grid, scheme)?
        };
        reports.push(compare_variant(&v.label, &nominal, &solution, &starts)?);
    }
    Ok(SensitivityReport {
        scheme,
        nominal_max_value: nominal.value.max(),
        variants: reports,
    })
}

fn compare_variant(
    label: &str,
    nominal: &Solution,
    variant: &Solution,
    starts: &[(f64, Trajectory)],
) -> Result<VariantReport> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (a, b) in variant.value.values().iter().zip(nominal.value.values()) {
        let d = a - b;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let trajectories = starts
        .iter()
        .map(|(target, nom)| {
            let fwd = forward_simulate(&variant.value, nom.initial_n())?;
            let max_n_excess = fwd
                .samples
                .iter()
                .zip(&nom.samples)
                .map(|(a, b)| a.n - b.n)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(TrajectoryDelta {
                terminal_n: *target,
                start_n: nom.initial_n(),
                variant_final_n: fwd.final_n(),
                nominal_final_n: nom.final_n(),
                max_n_excess,
            })
        })
        .collect::<Result<_>>()?;
    Ok(VariantReport {
        label: label.to_string(),
        max_value: variant.value.max(),
        max_value_excess: hi,
        min_value_excess: lo,
        trajectories,
    })
}
