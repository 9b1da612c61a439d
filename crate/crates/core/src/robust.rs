//! Entropic lower bound of the average body weight and the worst-case
//! distortion of the maximum-weight law that attains it.
//!
//! For an aversion level `eta > 0`,
//! `omega = -(1/eta) ln E[exp(-eta W)]`, where `W = W(t, W_max)` and the
//! expectation is over the beta law. The same value is the infimum over
//! likelihood ratios `phi` (with `E[phi] = 1`) of the distorted mean plus the
//! relative entropy scaled by `1/eta`; the exponential tilt attains it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{beta_density, MaxWeightDistribution, UncertainGrowthModel};

/// Below this aversion the bound is replaced by its `eta -> 0` limit, the mean.
pub const ETA_EPS: f64 = 1e-10;

/// Tolerance on `E[phi] = 1` for a candidate distortion.
const FEASIBILITY_TOL: f64 = 1e-8;

/// State-dependent uncertainty aversion `eta(n) >= 0`, in 1/g.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UncertaintyAversion {
    /// `eta(n) = mu`.
    Constant(f64),
    /// `eta(n) = mu (1 - n / n_max)`.
    LinearDecreasing { mu: f64, n_max: f64 },
    /// `eta(n) = intercept + slope * n`.
    Affine { intercept: f64, slope: f64 },
    /// Piecewise-linear through `(n, eta)` points sorted by `n`, held constant
    /// outside the first and last breakpoints.
    Table(Vec<(f64, f64)>),
}

impl UncertaintyAversion {
    /// `(1 - 9n/10) / 10`, the first "larger uncertainty" variant.
    pub fn sensitivity_decreasing() -> Self {
        UncertaintyAversion::Affine {
            intercept: 0.1,
            slope: -0.09,
        }
    }

    /// `(1 + n) / 10`, the second "larger uncertainty" variant.
    pub fn sensitivity_increasing() -> Self {
        UncertaintyAversion::Affine {
            intercept: 0.1,
            slope: 0.1,
        }
    }

    pub fn eval(&self, n: f64) -> f64 {
        match self {
            UncertaintyAversion::Constant(mu) => *mu,
            UncertaintyAversion::LinearDecreasing { mu, n_max } => mu * (1.0 - n / n_max),
            UncertaintyAversion::Affine { intercept, slope } => intercept + slope * n,
            UncertaintyAversion::Table(points) => {
                let (first, last) = (points[0], points[points.len() - 1]);
                if n <= first.0 {
                    return first.1;
                }
                if n >= last.0 {
                    return last.1;
                }
                let hi = points.partition_point(|p| p.0 <= n);
                let (a, b) = (points[hi - 1], points[hi]);
                a.1 + (b.1 - a.1) * (n - a.0) / (b.0 - a.0)
            }
        }
    }

    /// `(intercept, slope)` when `eta` is affine in `n`.
    pub fn affine_coefficients(&self) -> Option<(f64, f64)> {
        match self {
            UncertaintyAversion::Constant(mu) => Some((*mu, 0.0)),
            UncertaintyAversion::LinearDecreasing { mu, n_max } => Some((*mu, -mu / n_max)),
            UncertaintyAversion::Affine { intercept, slope } => Some((*intercept, *slope)),
            UncertaintyAversion::Table(_) => None,
        }
    }

    /// Checks `eta >= 0` and finiteness on `[0, n_max]`.
    pub fn validate(&self, n_max: f64) -> Result<()> {
        let bad = |why: String| Err(Error::invalid("eta", why));
        match self {
            UncertaintyAversion::Table(points) => {
                if points.is_empty() {
                    return bad("table needs at least one breakpoint".into());
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return bad("table breakpoints must have strictly increasing n".into());
                }
                if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite() || p.1 < 0.0) {
                    return bad("table values must be finite and nonnegative".into());
                }
            }
            UncertaintyAversion::LinearDecreasing { n_max: m, .. } if !(*m > 0.0) => {
                return bad(format!("n_max must be positive, got {m}"));
            }
            _ => {
                for n in [0.0, n_max] {
                    let v = self.eval(n);
                    if !v.is_finite() || v < 0.0 {
                        return bad(format!("eta({n}) = {v} is not a nonnegative number"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `-(1/eta) ln sum_k p_k exp(-eta w_k)` for realization weights `w` and
/// probability weights `p`, or the weighted mean when `eta < ETA_EPS`.
pub(crate) fn entropic_value(w: &[f64], p: &[f64], eta: f64) -> f64 {
    if eta < ETA_EPS {
        return w.iter().zip(p).map(|(w, p)| p * w).sum();
    }
    let w_min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    // ln(sum p e^{-eta (w - w_min)}) via log1p for accuracy at small eta
    let mass: f64 = p.iter().sum();
    let excess: f64 = w
        .iter()
        .zip(p)
        .map(|(w, p)| p * (-eta * (w - w_min)).exp_m1())
        .sum();
    w_min - (excess + (mass - 1.0)).ln_1p() / eta
}

/// Entropic lower bound `omega(t, n)` in grams at growth time `t`.
pub fn entropic_bound(t: f64, n: f64, eta: &UncertaintyAversion, model: &UncertainGrowthModel) -> f64 {
    entropic_bound_at(t, eta.eval(n), model)
}

/// Entropic bound for a given aversion value.
pub fn entropic_bound_at(t: f64, eta: f64, model: &UncertainGrowthModel) -> f64 {
    let w = model.node_weights(t);
    entropic_value(&w, &model.quadrature().weights, eta)
}

/// Distorted mean plus `1/eta` times the relative entropy of `phi`, for a
/// likelihood ratio `phi` given at the quadrature nodes.
pub fn variational_objective(
    phi: &[f64],
    t: f64,
    n: f64,
    eta: &UncertaintyAversion,
    model: &UncertainGrowthModel,
) -> Result<f64> {
    let quad = model.quadrature();
    if phi.len() != quad.len() {
        return Err(Error::Validation(format!(
            "distortion has {} values, quadrature has {} nodes",
            phi.len(),
            quad.len()
        )));
    }
    if let Some(k) = phi.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Validation(format!("distortion value {k} is negative or non-finite")));
    }
    let total: f64 = phi.iter().zip(&quad.weights).map(|(f, p)| f * p).sum();
    if (total - 1.0).abs() > FEASIBILITY_TOL {
        return Err(Error::Validation(format!(
            "distortion integrates to {total}, expected 1"
        )));
    }
    let w = model.node_weights(t);
    let distorted_mean: f64 = phi.iter().zip(&w).zip(&quad.weights).map(|((f, w), p)| f * w * p).sum();
    let divergence: f64 = phi
        .iter()
        .zip(&quad.weights)
        .map(|(&f, p)| {
            let f_ln_f = if f == 0.0 { 0.0 } else { f * f.ln() };
            p * (f_ln_f - f + 1.0)
        })
        .sum();
    let eta = eta.eval(n);
    if eta < ETA_EPS {
        return Ok(if divergence <= 1e-15 { distorted_mean } else { f64::INFINITY });
    }
    Ok(distorted_mean + divergence / eta)
}

/// Worst-case likelihood ratio on the quadrature nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortedDensity {
    /// Growth time at which the distortion was evaluated.
    pub t: f64,
    pub eta: f64,
    /// Maximum-weight nodes, g.
    pub nodes: Vec<f64>,
    /// `phi*` at each node (dimensionless).
    pub values: Vec<f64>,
    pub base: MaxWeightDistribution,
    base_weights: Vec<f64>,
}

impl DistortedDensity {
    /// Distorted density `phi* p` at each node, 1/g.
    pub fn density(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.values)
            .map(|(&w, f)| f * beta_density(w, &self.base))
            .collect()
    }

    /// `E[phi*]` under the base law; one up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().zip(&self.base_weights).map(|(f, p)| f * p).sum()
    }

    /// Mean of the maximum weight under the distorted law, g.
    pub fn mean_max_weight(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.base_weights)
            .zip(&self.nodes)
            .map(|((f, p), w)| f * p * w)
            .sum()
    }
}

/// Exponential tilt `exp(-eta W) / E[exp(-eta W)]` at growth time `t`.
pub fn worst_case_distortion(
    t: f64,
    n: f64,
    eta: &UncertaintyAversion,
    model: &UncertainGrowthModel,
) -> DistortedDensity {
    worst_case_distortion_at(t, eta.eval(n), model)
}

pub fn worst_case_distortion_at(t: f64, eta: f64, model: &UncertainGrowthModel) -> DistortedDensity {
    let quad = model.quadrature();
    let values = if eta < ETA_EPS {
        vec![1.0; quad.len()]
    } else {
        let w = model.node_weights(t);
        let w_min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let tilt: Vec<f64> = w.iter().map(|w| (-eta * (w - w_min)).exp()).collect();
        let z: f64 = tilt.iter().zip(&quad.weights).map(|(e, p)| e * p).sum();
        tilt.into_iter().map(|e| e / z).collect()
    };
    DistortedDensity {
        t,
        eta,
        nodes: quad.nodes.clone(),
        values,
        base: model.dist.clone(),
        base_weights: quad.weights.clone(),
    }
}

/// `omega` sampled on a uniform `(t_i, n_j)` lattice, row-major in `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaLattice {
    pub time_steps: usize,
    pub pop_steps: usize,
    /// Growth time of row 0.
    pub t0: f64,
    pub dt: f64,
    pub dn: f64,
    values: Vec<f64>,
}

impl OmegaLattice {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.pop_steps + 1) + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.pop_steps + 1;
        &self.values[i * w..(i + 1) * w]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn zeros(time_steps: usize, pop_steps: usize, t0: f64, dt: f64, dn: f64) -> Self {
        Self::from_fn(time_steps, pop_steps, t0, dt, dn, |_, _| 0.0)
    }

    /// Lattice filled from `f(t, n)`, with `t` on the growth clock.
    pub fn from_fn(
        time_steps: usize,
        pop_steps: usize,
        t0: f64,
        dt: f64,
        dn: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity((time_steps + 1) * (pop_steps + 1));
        for i in 0..=time_steps {
            for j in 0..=pop_steps {
                values.push(f(t0 + i as f64 * dt, j as f64 * dn));
            }
        }
        OmegaLattice {
            time_steps,
            pop_steps,
            t0,
            dt,
            dn,
            values,
        }
    }

    /// Linear interpolation in `n` on row `i`.
    pub fn interpolate(&self, i: usize, n: f64) -> f64 {
        let (j, frac) = locate(n, self.dn, self.pop_steps);
        let row = self.row(i);
        if frac == 0.0 {
            return row[j];
        }
        row[j] + frac * (row[j + 1] - row[j])
    }
}

/// Bracketing cell `(j, frac)` of `n` on a uniform grid with `steps` cells,
/// clamped to the grid; `frac` is snapped to zero at nodes.
pub(crate) fn locate(n: f64, dn: f64, steps: usize) -> (usize, f64) {
    let x = (n / dn).clamp(0.0, steps as f64);
    let nearest = x.round();
    if (x - nearest).abs() < 1e-9 {
        return (nearest as usize, 0.0);
    }
    let j = (x.floor() as usize).min(steps.saturating_sub(1));
    (j, x - j as f64)
}

/// Largest `eta * spread` for which the multiplicative recurrence is used.
const RECURRENCE_EXPONENT_LIMIT: f64 = 600.0;

/// Evaluates `omega(t0 + i dt, j dn)` on the whole lattice.
///
/// Affine aversions take a fast path: along a row, `exp(-eta_j (W - W_min))`
/// is advanced by a fixed per-node factor, so each lattice point costs a
/// multiply-add per quadrature node instead of an exponential.
pub fn omega_lattice(
    model: &UncertainGrowthModel,
    eta: &UncertaintyAversion,
    t0: f64,
    dt: f64,
    time_steps: usize,
    dn: f64,
    pop_steps: usize,
) -> OmegaLattice {
    let width = pop_steps + 1;
    let weights = &model.quadrature().weights;
    let mut values = vec![0.0; (time_steps + 1) * width];
    let etas: Vec<f64> = (0..width).map(|j| eta.eval(j as f64 * dn)).collect();
    let eta_max = etas.iter().cloned().fold(0.0, f64::max);
    let coeffs = eta.affine_coefficients();

    values.par_chunks_mut(width).enumerate().for_each(|(i, row)| {
        let w = model.node_weights(t0 + i as f64 * dt);
        let w_min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let w_max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        match coeffs {
            Some((c0, c1)) if eta_max * (w_max - w_min) <= RECURRENCE_EXPONENT_LIMIT => {
                affine_row(row, &w, weights, w_min, c0, c1 * dn, &etas);
            }
            _ => {
                for (out, &e) in row.iter_mut().zip(&etas) {
                    *out = entropic_value(&w, weights, e);
                }
            }
        }
    });
    OmegaLattice {
        time_steps,
        pop_steps,
        t0,
        dt,
        dn,
        values,
    }
}

/// Direct evaluation of every lattice point; reference for the fast path.
pub fn omega_lattice_direct(
    model: &UncertainGrowthModel,
    eta: &UncertaintyAversion,
    t0: f64,
    dt: f64,
    time_steps: usize,
    dn: f64,
    pop_steps: usize,
) -> OmegaLattice {
    let width = pop_steps + 1;
    let weights = &model.quadrature().weights;
    let mut values = vec![0.0; (time_steps + 1) * width];
    values.par_chunks_mut(width).enumerate().for_each(|(i, row)| {
        let w = model.node_weights(t0 + i as f64 * dt);
        for (j, out) in row.iter_mut().enumerate() {
            *out = entropic_value(&w, weights, eta.eval(j as f64 * dn));
        }
    });
    OmegaLattice {
        time_steps,
        pop_steps,
        t0,
        dt,
        dn,
        values,
    }
}

fn affine_row(row: &mut [f64], w: &[f64], p: &[f64], w_min: f64, c0: f64, step: f64, etas: &[f64]) {
    let mean: f64 = w.iter().zip(p).map(|(w, p)| p * w).sum();
    let spread: Vec<f64> = w.iter().map(|w| w - w_min).collect();
    let mut tilt: Vec<f64> = spread.iter().map(|d| (-c0 * d).exp()).collect();
    let factor: Vec<f64> = spread.iter().map(|d| (-step * d).exp()).collect();
    for (j, out) in row.iter_mut().enumerate() {
        if j > 0 {
            tilt.iter_mut().zip(&factor).for_each(|(t, f)| *t *= f);
        }
        let e = etas[j];
        *out = if e < ETA_EPS {
            mean
        } else {
            w_min - weighted_sum(&tilt, p).ln() / e
        };
    }
}

/// Four-lane dot product; fixed summation order keeps results reproducible.
fn weighted_sum(x: &[f64], p: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (xc, pc) = (x.chunks_exact(4), p.chunks_exact(4));
    let (xr, pr) = (xc.remainder(), pc.remainder());
    for (a, b) in xc.zip(pc) {
        acc[0] += a[0] * b[0];
        acc[1] += a[1] * b[1];
        acc[2] += a[2] * b[2];
        acc[3] += a[3] * b[3];
    }
    let tail: f64 = xr.iter().zip(pr).map(|(a, b)| a * b).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::{envelope_curves, raw_moment};

    fn model_2023() -> UncertainGrowthModel {
        UncertainGrowthModel::from_parts(20.5, 0.079, 24.0, 123.0, 1.0, 2.5).unwrap()
    }

    #[test]
    fn zero_aversion_gives_mean() {
        let m = model_2023();
        let eta = UncertaintyAversion::Constant(0.0);
        let mean = raw_moment(1, 151.0, &m).unwrap();
        assert!((entropic_bound(151.0, 0.3, &eta, &m) - mean).abs() < 1e-12);
        let d = worst_case_distortion(151.0, 0.3, &eta, &m);
        assert!(d.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn huge_aversion_approaches_lightest_curve() {
        let m = UncertainGrowthModel::from_parts(10.0, 0.059, 29.0, 293.0, 1.0, 9.75).unwrap();
        let om = entropic_bound(90.0, 0.0, &UncertaintyAversion::Constant(1e6), &m);
        let (lo, _) = envelope_curves(90.0, &m);
        assert!((om - lo).abs() < 0.5, "{om} vs {lo}");
    }

    #[test]
    fn bound_lies_between_lightest_curve_and_mean() {
        let m = model_2023();
        for t in [61.0, 100.0, 180.0] {
            let (lo, _) = envelope_curves(t, &m);
            let mean = raw_moment(1, t, &m).unwrap();
            for mu in [1e-4, 0.01, 0.1, 1.0] {
                let om = entropic_bound_at(t, mu, &m);
                assert!(lo <= om && om <= mean + 1e-12, "t={t} mu={mu}");
            }
        }
    }

    #[test]
    fn tilt_integrates_to_one_and_decreases() {
        let m = model_2023();
        let eta = UncertaintyAversion::Constant(0.1);
        for t in [61.0, 121.0, 180.0] {
            let d = worst_case_distortion(t, 0.0, &eta, &m);
            assert!((d.total_mass() - 1.0).abs() < 1e-8);
            assert!(d.values.windows(2).all(|v| v[1] < v[0]));
            let dens = d.density();
            let dw = m.dist.width() / m.quad_points as f64;
            assert!((dens.iter().sum::<f64>() * dw - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn distorted_mean_below_base_mean() {
        let m = model_2023();
        let base: f64 = m.quadrature().integrate(|w| w);
        let d = worst_case_distortion_at(150.0, 0.05, &m);
        assert!(d.mean_max_weight() < base);
    }

    #[test]
    fn plug_in_identity() {
        let m = model_2023();
        let eta = UncertaintyAversion::Constant(0.1);
        let d = worst_case_distortion(151.0, 0.5, &eta, &m);
        let obj = variational_objective(&d.values, 151.0, 0.5, &eta, &m).unwrap();
        let om = entropic_bound(151.0, 0.5, &eta, &m);
        assert!((obj - om).abs() < 1e-8, "{obj} vs {om}");
    }

    #[test]
    fn constant_distortion_gives_mean() {
        let m = model_2023();
        let eta = UncertaintyAversion::Constant(0.1);
        let ones = vec![1.0; m.quad_points];
        let obj = variational_objective(&ones, 120.0, 0.0, &eta, &m).unwrap();
        assert!((obj - raw_moment(1, 120.0, &m).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn infeasible_distortions_rejected() {
        let m = model_2023();
        let eta = UncertaintyAversion::Constant(0.1);
        let mut phi = vec![1.0; m.quad_points];
        phi[3] = -0.1;
        assert!(variational_objective(&phi, 100.0, 0.0, &eta, &m).is_err());
        let twice = vec![2.0; m.quad_points];
        assert!(variational_objective(&twice, 100.0, 0.0, &eta, &m).is_err());
        assert!(variational_objective(&[1.0; 3], 100.0, 0.0, &eta, &m).is_err());
    }

    #[test]
    fn aversion_forms() {
        let lin = UncertaintyAversion::LinearDecreasing { mu: 0.1, n_max: 1.0 };
        assert!((lin.eval(0.25) - 0.075).abs() < 1e-15);
        assert!((UncertaintyAversion::sensitivity_decreasing().eval(1.0) - 0.01).abs() < 1e-15);
        assert!((UncertaintyAversion::sensitivity_increasing().eval(1.0) - 0.2).abs() < 1e-15);
        let tab = UncertaintyAversion::Table(vec![(0.0, 0.2), (0.5, 0.1), (1.0, 0.1)]);
        assert!((tab.eval(0.25) - 0.15).abs() < 1e-15);
        assert_eq!(tab.eval(2.0), 0.1);
        assert!(tab.validate(1.0).is_ok());
        assert!(UncertaintyAversion::Affine { intercept: 0.1, slope: -0.2 }.validate(1.0).is_err());
        assert!(UncertaintyAversion::Table(vec![(0.5, 0.1), (0.2, 0.1)]).validate(1.0).is_err());
    }

    #[test]
    fn fast_lattice_matches_direct() {
        let m = model_2023();
        for eta in [
            UncertaintyAversion::LinearDecreasing { mu: 0.1, n_max: 1.0 },
            UncertaintyAversion::sensitivity_increasing(),
            UncertaintyAversion::Constant(0.1),
        ] {
            let fast = omega_lattice(&m, &eta, 61.0, 0.5, 240, 0.01, 100);
            let slow = omega_lattice_direct(&m, &eta, 61.0, 0.5, 240, 0.01, 100);
            for i in 0..=240 {
                for j in 0..=100 {
                    let (a, b) = (fast.get(i, j), slow.get(i, j));
                    assert!(((a - b) / b).abs() < 1e-11, "{eta:?} ({i},{j}) {a} {b}");
                }
            }
        }
    }

    #[test]
    fn lattice_interpolation_is_exact_at_nodes() {
        let m = model_2023();
        let eta = UncertaintyAversion::LinearDecreasing { mu: 0.1, n_max: 1.0 };
        let lat = omega_lattice(&m, &eta, 61.0, 1.0, 10, 0.1, 10);
        for j in 0..=10 {
            assert_eq!(lat.interpolate(3, j as f64 * 0.1), lat.get(3, j));
        }
        let mid = lat.interpolate(3, 0.05);
        assert!((mid - 0.5 * (lat.get(3, 0) + lat.get(3, 1))).abs() < 1e-12);
    }
}
