//! Backward-in-time finite-difference solvers for the robust harvesting
//! Hamilton–Jacobi–Bellman equation
//!
//! ```text
//! -dPhi/dt = -delta Phi + omega(t, n) / (h + dPhi/dn),   Phi(T, n) = S(n),   Phi(t, 0) = 0
//! ```
//!
//! on a uniform `(t_i, n_j)` grid. All three schemes use the upwind one-sided
//! difference `(Phi_j - Phi_{j-1}) / dn` and march from `i = I_t` down to
//! `i = 0`. The semi-implicit and implicit schemes cascade in `j` within a
//! time step, so no linear system is ever solved.
//!
//! The solver checks the discrete maximum principle on every row it produces:
//! zero boundary, nonnegativity, monotonicity in `n`, the uniform upper bound,
//! the slope bound keeping `h + slope` positive, and the control bound
//! `q <= omega_cap / h^2`. A violation aborts the solve.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::growth::UncertainGrowthModel;
use crate::robust::{omega_lattice, OmegaLattice, UncertaintyAversion};

/// Utility exponent; the schemes rely on the square-root utility.
pub const ALPHA: f64 = 0.5;

/// Relative slack for checks that hold with equality in exact arithmetic.
const ROUNDING_SLACK: f64 = 1e-12;

/// Sustainability reward on the population left at the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TerminalForm {
    Zero,
    /// `height` for `n >= threshold`, zero below.
    Step { height: f64, threshold: f64 },
    /// Piecewise-linear through `(n, S)` points starting at `(0, 0)`, held
    /// constant past the last breakpoint.
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalReward {
    pub form: TerminalForm,
    /// Declared upper bound of `S`.
    pub s_bar: f64,
}

impl TerminalReward {
    pub fn zero() -> Self {
        TerminalReward {
            form: TerminalForm::Zero,
            s_bar: 0.0,
        }
    }

    pub fn step(height: f64, threshold: f64) -> Self {
        TerminalReward {
            form: TerminalForm::Step { height, threshold },
            s_bar: height,
        }
    }

    pub fn eval(&self, n: f64) -> f64 {
        match &self.form {
            TerminalForm::Zero => 0.0,
            TerminalForm::Step { height, threshold } => {
                if n >= *threshold {
                    *height
                } else {
                    0.0
                }
            }
            TerminalForm::Table(points) => {
                let last = points[points.len() - 1];
                if n >= last.0 {
                    return last.1;
                }
                if n <= 0.0 {
                    return 0.0;
                }
                let hi = points.partition_point(|p| p.0 <= n);
                let (a, b) = (points[hi - 1], points[hi]);
                a.1 + (b.1 - a.1) * (n - a.0) / (b.0 - a.0)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::invalid("terminal", why));
        if !(self.s_bar.is_finite() && self.s_bar >= 0.0) {
            return bad(format!("s_bar must be finite and nonnegative, got {}", self.s_bar));
        }
        match &self.form {
            TerminalForm::Zero => {}
            TerminalForm::Step { height, threshold } => {
                if !(height.is_finite() && *height >= 0.0) {
                    return bad(format!("step height must be nonnegative, got {height}"));
                }
                if !(threshold.is_finite() && *threshold > 0.0) {
                    return bad(format!("step threshold must be positive so that S(0) = 0, got {threshold}"));
                }
                if *height > self.s_bar {
                    return bad(format!("step height {height} exceeds s_bar {}", self.s_bar));
                }
            }
            TerminalForm::Table(points) => {
                if points.first() != Some(&(0.0, 0.0)) {
                    return bad("table must start at (0, 0)".into());
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return bad("table breakpoints must have strictly increasing n".into());
                }
                if points.windows(2).any(|w| w[1].1 < w[0].1) {
                    return bad("table values must be non-decreasing".into());
                }
                if points.iter().any(|p| !p.1.is_finite() || p.1 > self.s_bar) {
                    return bad(format!("table values must be finite and at most s_bar {}", self.s_bar));
                }
            }
        }
        Ok(())
    }
}

/// Finite-horizon robust harvesting problem.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvestProblem {
    /// Horizon `T`, days.
    pub horizon: f64,
    /// Growth-clock time at solver time zero, days since May 1.
    pub growth_offset: f64,
    /// Discount rate, 1/day.
    pub delta: f64,
    /// Harvesting cost per unit population.
    pub h: f64,
    pub terminal: TerminalReward,
    pub eta: UncertaintyAversion,
    pub model: UncertainGrowthModel,
    /// Upper end of the truncated population domain.
    pub n_max: f64,
}

impl HarvestProblem {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("horizon", self.horizon),
            ("growth_offset", self.growth_offset),
            ("delta", self.delta),
            ("h", self.h),
            ("n_max", self.n_max),
        ] {
            ensure_finite(name, v)?;
        }
        if self.horizon <= 0.0 {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        if self.delta < 0.0 {
            return Err(Error::invalid("delta", "must be nonnegative"));
        }
        if self.h <= 0.0 {
            return Err(Error::invalid("h", "must be positive"));
        }
        if self.n_max <= 0.0 {
            return Err(Error::invalid("n_max", "must be positive"));
        }
        self.terminal.validate()?;
        self.eta.validate(self.n_max)
    }

    /// Upper bound of `omega` over the whole domain: no realization is heavier
    /// than `max(w_hi, w0)`.
    pub fn omega_cap(&self) -> f64 {
        self.model.dist.w_hi.max(self.model.w0)
    }

    /// Largest harvest rate any optimal control can take, `omega_cap / h^2`.
    pub fn control_cap(&self) -> f64 {
        self.omega_cap() / (self.h * self.h)
    }

    /// Uniform upper bound of the discrete value function for `scheme`.
    pub fn value_bound(&self, scheme: Scheme) -> f64 {
        let s_bar = self.terminal.s_bar;
        let k = self.omega_cap();
        if self.delta == 0.0 {
            return s_bar + self.horizon * k / self.h;
        }
        match scheme {
            Scheme::Explicit | Scheme::SemiImplicit => s_bar + k / (self.h * self.delta),
            Scheme::Implicit => s_bar + k / (self.delta * self.h) * (1.0 + self.delta * self.horizon),
        }
    }
}

/// Uniform mesh resolution: `time_steps` intervals on `[0, T]` and
/// `pop_steps` intervals on `[0, n_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub time_steps: usize,
    pub pop_steps: usize,
}

impl GridSpec {
    pub fn new(time_steps: usize, pop_steps: usize) -> Result<Self> {
        if time_steps < 2 || pop_steps < 2 {
            return Err(Error::invalid(
                "grid",
                format!("need at least 2 steps per axis, got ({time_steps}, {pop_steps})"),
            ));
        }
        Ok(GridSpec { time_steps, pop_steps })
    }

    pub fn dt(&self, problem: &HarvestProblem) -> f64 {
        problem.horizon / self.time_steps as f64
    }

    pub fn dn(&self, problem: &HarvestProblem) -> f64 {
        problem.n_max / self.pop_steps as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Explicit,
    SemiImplicit,
    Implicit,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Explicit, Scheme::SemiImplicit, Scheme::Implicit];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Explicit => "explicit",
            Scheme::SemiImplicit => "semi",
            Scheme::Implicit => "implicit",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Scheme::Explicit),
            "semi" | "semi-implicit" | "semi_implicit" => Ok(Scheme::SemiImplicit),
            "implicit" => Ok(Scheme::Implicit),
            other => Err(Error::Validation(format!(
                "unknown scheme `{other}` (expected explicit, semi or implicit)"
            ))),
        }
    }
}

/// Explicit-scheme stability margin `1 - (delta + omega_cap / (h^2 dn)) dt`.
pub fn cfl_margin(problem: &HarvestProblem, grid: &GridSpec) -> f64 {
    let dt = grid.dt(problem);
    let dn = grid.dn(problem);
    1.0 - (problem.delta + problem.omega_cap() / (problem.h * problem.h * dn)) * dt
}

/// Semi-implicit stability margin `1 - omega_cap dt / (h^2 dn)`; the discount
/// term is treated implicitly and drops out.
pub fn semi_implicit_margin(problem: &HarvestProblem, grid: &GridSpec) -> f64 {
    let dt = grid.dt(problem);
    let dn = grid.dn(problem);
    1.0 - problem.omega_cap() * dt / (problem.h * problem.h * dn)
}

/// Time step at which the explicit margin reaches zero.
pub fn cfl_critical_dt(problem: &HarvestProblem, dn: f64) -> f64 {
    1.0 / (problem.delta + problem.omega_cap() / (problem.h * problem.h * dn))
}

/// Constants shared by every node update of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub dt: f64,
    pub dn: f64,
    pub delta: f64,
    pub h: f64,
}

impl StepParams {
    pub fn new(problem: &HarvestProblem, grid: &GridSpec) -> Self {
        StepParams {
            dt: grid.dt(problem),
            dn: grid.dn(problem),
            delta: problem.delta,
            h: problem.h,
        }
    }
}

/// One explicit step: row `i - 1` from row `i`.
pub fn explicit_step(row_next: &[f64], omega_row: &[f64], p: &StepParams) -> Vec<f64> {
    let mut out = vec![0.0; row_next.len()];
    explicit_step_into(row_next, omega_row, p, &mut out);
    out
}

fn explicit_step_into(next: &[f64], omega: &[f64], p: &StepParams, out: &mut [f64]) {
    out[0] = 0.0;
    for j in 1..next.len() {
        let slope = (next[j] - next[j - 1]) / p.dn;
        out[j] = next[j] + p.dt * (-p.delta * next[j] + omega[j] / (p.h + slope));
    }
}

/// One semi-implicit step: the discount term is taken at the new time level.
pub fn semi_implicit_step(row_next: &[f64], omega_row: &[f64], p: &StepParams) -> Vec<f64> {
    let mut out = vec![0.0; row_next.len()];
    semi_implicit_step_into(row_next, omega_row, p, &mut out);
    out
}

fn semi_implicit_step_into(next: &[f64], omega: &[f64], p: &StepParams, out: &mut [f64]) {
    let damp = 1.0 / (1.0 + p.delta * p.dt);
    out[0] = 0.0;
    for j in 1..next.len() {
        let slope = (next[j] - next[j - 1]) / p.dn;
        out[j] = damp * (next[j] + p.dt * omega[j] / (p.h + slope));
    }
}

/// Coefficients `(C_A, C_B, C_C)` of `C_A x^2 + C_B x - C_C = 0` for the
/// implicit update of one node.
pub fn implicit_coefficients(phi_next: f64, phi_left: f64, omega: f64, p: &StepParams) -> (f64, f64, f64) {
    let ca = 1.0 + p.delta * p.dt;
    let gap = p.h * p.dn - phi_left;
    let cb = ca * gap - phi_next;
    let cc = omega * p.dt * p.dn + gap * phi_next;
    (ca, cb, cc)
}

/// Implicit update of node `(i - 1, j)` given `Phi_{i,j}` (`phi_next`) and the
/// already updated `Phi_{i-1,j-1}` (`phi_left`): the larger root of the
/// node's quadratic.
///
/// The discriminant is formed as `(C_A (h dn - phi_left) + phi_next)^2 +
/// 4 C_A omega dt dn`, a sum of nonnegative terms, and the root is evaluated in
/// whichever of the two algebraically equal forms avoids cancellation.
pub fn implicit_node_update(phi_next: f64, phi_left: f64, omega: f64, p: &StepParams) -> f64 {
    let (ca, cb, cc) = implicit_coefficients(phi_next, phi_left, omega, p);
    let s = ca * (p.h * p.dn - phi_left) + phi_next;
    let disc = s * s + 4.0 * ca * omega * p.dt * p.dn;
    let root = disc.sqrt();
    if cb > 0.0 {
        2.0 * cc / (cb + root)
    } else {
        (root - cb) / (2.0 * ca)
    }
}

fn implicit_step_into(next: &[f64], omega: &[f64], p: &StepParams, out: &mut [f64]) {
    out[0] = 0.0;
    for j in 1..next.len() {
        out[j] = implicit_node_update(next[j], out[j - 1], omega[j], p);
    }
}

/// One implicit step, cascading from `j = 1` upward.
pub fn implicit_step(row_next: &[f64], omega_row: &[f64], p: &StepParams) -> Vec<f64> {
    let mut out = vec![0.0; row_next.len()];
    implicit_step_into(row_next, omega_row, p, &mut out);
    out
}

/// Discrete value function `Phi_{i,j}` at `(i dt, j dn)`, row-major in `i`.
#[derive(Debug, Clone)]
pub struct ValueGrid {
    pub scheme: Scheme,
    pub grid: GridSpec,
    pub dt: f64,
    pub dn: f64,
    pub problem: Arc<HarvestProblem>,
    pub omega: Arc<OmegaLattice>,
    values: Vec<f64>,
}

/// Optimal harvest rates colocated with a [`ValueGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrid {
    pub grid: GridSpec,
    pub dt: f64,
    pub dn: f64,
    values: Vec<f64>,
}

macro_rules! grid_accessors {
    ($t:ty) => {
        impl $t {
            #[inline]
            pub fn get(&self, i: usize, j: usize) -> f64 {
                self.values[i * (self.grid.pop_steps + 1) + j]
            }

            pub fn row(&self, i: usize) -> &[f64] {
                let w = self.grid.pop_steps + 1;
                &self.values[i * w..(i + 1) * w]
            }

            pub fn values(&self) -> &[f64] {
                &self.values
            }

            pub fn time(&self, i: usize) -> f64 {
                i as f64 * self.dt
            }

            pub fn pop(&self, j: usize) -> f64 {
                j as f64 * self.dn
            }

            pub fn max(&self) -> f64 {
                self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    };
}

grid_accessors!(ValueGrid);
grid_accessors!(PolicyGrid);

impl PolicyGrid {
    /// Builds a policy grid from raw row-major values.
    pub fn from_values(grid: GridSpec, dt: f64, dn: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != (grid.time_steps + 1) * (grid.pop_steps + 1) {
            return Err(Error::Validation("policy values do not match grid size".into()));
        }
        Ok(PolicyGrid { grid, dt, dn, values })
    }
}

impl ValueGrid {
    /// Builds a value grid from raw row-major values, e.g. after reading one
    /// back from disk.
    pub fn from_values(
        scheme: Scheme,
        grid: GridSpec,
        problem: Arc<HarvestProblem>,
        omega: Arc<OmegaLattice>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != (grid.time_steps + 1) * (grid.pop_steps + 1) {
            return Err(Error::Validation("value grid size does not match the mesh".into()));
        }
        Ok(ValueGrid {
            scheme,
            grid,
            dt: grid.dt(&problem),
            dn: grid.dn(&problem),
            problem,
            omega,
            values,
        })
    }

    /// Upwind slope `(Phi_{i,j} - Phi_{i,j-1}) / dn` at node `j >= 1`.
    pub fn slope(&self, i: usize, j: usize) -> f64 {
        (self.get(i, j) - self.get(i, j - 1)) / self.dn
    }
}

/// Summary of the invariant checks performed during a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub rows_checked: usize,
    pub nodes_checked: usize,
    pub min_value: f64,
    pub max_value: f64,
    pub value_bound: f64,
    /// Largest `Phi_{i,j-1} - Phi_{i,j}`; nonpositive for a monotone solution.
    pub max_monotonicity_defect: f64,
    /// Monotonicity in `n` is only guaranteed, and only asserted, when
    /// `omega` is non-decreasing in `n` on every row.
    pub monotonicity_asserted: bool,
    /// Smallest `h + upwind slope` over the grid.
    pub min_slope_margin: f64,
    pub max_control: f64,
    pub control_bound: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveOptions {
    /// Run explicit or semi-implicit schemes even when their stability margin
    /// is negative.
    pub force: bool,
}

/// Value function, policy and the checks that were run on them.
#[derive(Debug, Clone)]
pub struct Solution {
    pub value: ValueGrid,
    pub policy: PolicyGrid,
    pub report: InvariantReport,
}

/// Computes the `omega` lattice a solve on `grid` needs.
pub fn omega_for(problem: &HarvestProblem, grid: &GridSpec) -> OmegaLattice {
    omega_lattice(
        &problem.model,
        &problem.eta,
        problem.growth_offset,
        grid.dt(problem),
        grid.time_steps,
        grid.dn(problem),
        grid.pop_steps,
    )
}

/// Solves the HJB equation with `scheme`.
pub fn solve(problem: &HarvestProblem, grid: &GridSpec, scheme: Scheme) -> Result<Solution> {
    problem.validate()?;
    let omega = Arc::new(omega_for(problem, grid));
    solve_with(Arc::new(problem.clone()), grid, scheme, omega, SolveOptions::default())
}

/// Solves with a precomputed `omega` lattice, shared across schemes.
pub fn solve_with(
    problem: Arc<HarvestProblem>,
    grid: &GridSpec,
    scheme: Scheme,
    omega: Arc<OmegaLattice>,
    opts: SolveOptions,
) -> Result<Solution> {
    problem.validate()?;
    let grid = GridSpec::new(grid.time_steps, grid.pop_steps)?;
    if omega.time_steps != grid.time_steps || omega.pop_steps != grid.pop_steps {
        return Err(Error::Validation("omega lattice does not match the grid".into()));
    }
    let margin = match scheme {
        Scheme::Explicit => Some(cfl_margin(&problem, &grid)),
        Scheme::SemiImplicit => Some(semi_implicit_margin(&problem, &grid)),
        Scheme::Implicit => None,
    };
    if let Some(m) = margin {
        if m < 0.0 && !opts.force {
            return Err(Error::StabilityViolated {
                scheme: scheme.name(),
                margin: m,
            });
        }
    }

    let p = StepParams::new(&problem, &grid);
    let (it, width) = (grid.time_steps, grid.pop_steps + 1);
    let mut values = vec![0.0; (it + 1) * width];
    let mut policy = vec![0.0; (it + 1) * width];

    let terminal = &mut values[it * width..];
    for (j, v) in terminal.iter_mut().enumerate() {
        *v = problem.terminal.eval(j as f64 * p.dn);
    }
    terminal[0] = 0.0;

    let mut checker = Checker::new(&problem, scheme, p, omega_nondecreasing(&omega));
    checker.check_row(it, &values[it * width..])?;
    checker.fill_policy(it, &values[it * width..], omega.row(it), &mut policy[it * width..])?;

    for i in (1..=it).rev() {
        let (head, tail) = values.split_at_mut(i * width);
        let next = &tail[..width];
        let out = &mut head[(i - 1) * width..];
        let om = omega.row(i - 1);
        match scheme {
            Scheme::Explicit => explicit_step_into(next, om, &p, out),
            Scheme::SemiImplicit => semi_implicit_step_into(next, om, &p, out),
            Scheme::Implicit => implicit_step_into(next, om, &p, out),
        }
        checker.check_row(i - 1, out)?;
        checker.fill_policy(i - 1, out, om, &mut policy[(i - 1) * width..i * width])?;
    }

    let report = checker.report;
    Ok(Solution {
        value: ValueGrid {
            scheme,
            grid,
            dt: p.dt,
            dn: p.dn,
            problem,
            omega,
            values,
        },
        policy: PolicyGrid {
            grid,
            dt: p.dt,
            dn: p.dn,
            values: policy,
        },
        report,
    })
}

/// True when every row of `omega` is non-decreasing in `n`.
pub fn omega_nondecreasing(omega: &OmegaLattice) -> bool {
    (0..=omega.time_steps).all(|i| {
        omega
            .row(i)
            .windows(2)
            .all(|w| w[0] <= w[1] + ROUNDING_SLACK * w[1].abs())
    })
}

struct Checker {
    p: StepParams,
    report: InvariantReport,
}

impl Checker {
    fn new(problem: &HarvestProblem, scheme: Scheme, p: StepParams, monotone: bool) -> Self {
        Checker {
            p,
            report: InvariantReport {
                rows_checked: 0,
                nodes_checked: 0,
                min_value: f64::INFINITY,
                max_value: f64::NEG_INFINITY,
                value_bound: problem.value_bound(scheme),
                max_monotonicity_defect: f64::NEG_INFINITY,
                monotonicity_asserted: monotone,
                min_slope_margin: f64::INFINITY,
                max_control: 0.0,
                control_bound: problem.control_cap(),
                violations: 0,
            },
        }
    }

    fn fail(&mut self, check: &'static str, i: usize, j: usize, detail: String) -> Error {
        self.report.violations += 1;
        Error::InvariantViolation { check, i, j, detail }
    }

    fn check_row(&mut self, i: usize, row: &[f64]) -> Result<()> {
        let bound = self.report.value_bound;
        if row[0] != 0.0 {
            return Err(self.fail("boundary", i, 0, format!("Phi = {}", row[0])));
        }
        for j in 0..row.len() {
            let v = row[j];
            if !(v >= 0.0) {
                return Err(self.fail("nonnegativity", i, j, format!("Phi = {v}")));
            }
            if v > bound * (1.0 + ROUNDING_SLACK) {
                return Err(self.fail("upper bound", i, j, format!("Phi = {v} > {bound}")));
            }
            self.report.min_value = self.report.min_value.min(v);
            self.report.max_value = self.report.max_value.max(v);
            if j > 0 {
                let defect = row[j - 1] - v;
                self.report.max_monotonicity_defect = self.report.max_monotonicity_defect.max(defect);
                if self.report.monotonicity_asserted && defect > ROUNDING_SLACK * v.abs().max(1.0) {
                    return Err(self.fail(
                        "monotonicity",
                        i,
                        j,
                        format!("Phi_(j-1) = {} > Phi_j = {v}", row[j - 1]),
                    ));
                }
                if !(row[j - 1] < v + self.p.h * self.p.dn) {
                    return Err(self.fail(
                        "slope bound",
                        i,
                        j,
                        format!("Phi_(j-1) = {} >= Phi_j + h dn = {}", row[j - 1], v + self.p.h * self.p.dn),
                    ));
                }
            }
        }
        self.report.rows_checked += 1;
        self.report.nodes_checked += row.len();
        Ok(())
    }

    fn fill_policy(&mut self, i: usize, row: &[f64], omega: &[f64], out: &mut [f64]) -> Result<()> {
        let cap = self.report.control_bound;
        out[0] = 0.0;
        for j in 1..row.len() {
            let denom = self.p.h + (row[j] - row[j - 1]) / self.p.dn;
            self.report.min_slope_margin = self.report.min_slope_margin.min(denom);
            let q = omega[j] / (denom * denom);
            if !(q <= cap * (1.0 + ROUNDING_SLACK)) {
                return Err(self.fail("control bound", i, j, format!("q = {q} > {cap}")));
            }
            self.report.max_control = self.report.max_control.max(q);
            out[j] = q.clamp(0.0, cap);
        }
        Ok(())
    }
}

/// Pairwise difference of two schemes' value functions.
#[derive(Debug, Clone)]
pub struct SchemeDifference {
    pub first: Scheme,
    pub second: Scheme,
    pub grid: GridSpec,
    pub dt: f64,
    pub dn: f64,
    /// `Phi_first - Phi_second`, row-major.
    pub values: Vec<f64>,
    pub max_abs: f64,
    pub signed_mean: f64,
}

impl SchemeDifference {
    pub fn between(a: &ValueGrid, b: &ValueGrid) -> Result<Self> {
        if a.grid != b.grid {
            return Err(Error::Validation("cannot compare value grids on different meshes".into()));
        }
        let values: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
        let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let signed_mean = values.iter().sum::<f64>() / values.len() as f64;
        Ok(SchemeDifference {
            first: a.scheme,
            second: b.scheme,
            grid: a.grid,
            dt: a.dt,
            dn: a.dn,
            values,
            max_abs,
            signed_mean,
        })
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.first, self.second)
    }
}

/// Differences explicit−semi, explicit−implicit and semi−implicit.
#[derive(Debug, Clone)]
pub struct SchemeComparison {
    pub differences: Vec<SchemeDifference>,
    /// Largest value of each scheme's solution, in `Scheme::ALL` order.
    pub max_values: [f64; 3],
    pub reports: [InvariantReport; 3],
}

pub fn compare_schemes(problem: &HarvestProblem, grid: &GridSpec) -> Result<SchemeComparison> {
    problem.validate()?;
    let omega = Arc::new(omega_for(problem, grid));
    compare_schemes_with(Arc::new(problem.clone()), grid, omega)
}

pub fn compare_schemes_with(
    problem: Arc<HarvestProblem>,
    grid: &GridSpec,
    omega: Arc<OmegaLattice>,
) -> Result<SchemeComparison> {
    let solve_one = |s| solve_with(problem.clone(), grid, s, omega.clone(), SolveOptions::default());
    let e = solve_one(Scheme::Explicit)?;
    let s = solve_one(Scheme::SemiImplicit)?;
    let i = solve_one(Scheme::Implicit)?;
    Ok(SchemeComparison {
        differences: vec![
            SchemeDifference::between(&e.value, &s.value)?,
            SchemeDifference::between(&e.value, &i.value)?,
            SchemeDifference::between(&s.value, &i.value)?,
        ],
        max_values: [e.value.max(), s.value.max(), i.value.max()],
        reports: [e.report, s.report, i.report],
    })
}
