//! Logistic growth curves and the uncertain logistic model.
//!
//! The uncertain model shares the initial weight and growth rate across
//! individuals and draws the maximum body weight from a beta law on a finite
//! support `(w_lo, w_hi)`. All integrals against that law use the midpoint
//! rule on `quad_points` equally spaced nodes, and the beta normalization
//! constant is computed with the same rule so the discrete weights sum to one.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Number of midpoint nodes used for integrals over the maximum-weight law.
pub const DEFAULT_QUAD_POINTS: usize = 1000;

/// Relative variance below which the spread is treated as cancellation noise.
const VARIANCE_NOISE: f64 = 1e-12;

/// Deterministic logistic growth triple: initial weight (g), maximum weight (g)
/// and growth rate (1/day).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub w0: f64,
    pub w_max: f64,
    pub r: f64,
}

impl LogisticParams {
    pub fn new(w0: f64, w_max: f64, r: f64) -> Result<Self> {
        ensure_finite("w0", w0)?;
        ensure_finite("w_max", w_max)?;
        ensure_finite("r", r)?;
        if !(w0 > 0.0 && w0 < w_max) {
            return Err(Error::invalid("w0", format!("need 0 < w0 < w_max, got w0={w0}, w_max={w_max}")));
        }
        if r <= 0.0 {
            return Err(Error::invalid("r", format!("growth rate must be positive, got {r}")));
        }
        Ok(LogisticParams { w0, w_max, r })
    }
}

/// Closed-form logistic curve. Defined for any positive `w0`, `w_max`; when
/// `w_max < w0` the curve decreases toward `w_max`.
#[inline]
pub(crate) fn logistic_curve(t: f64, w0: f64, w_max: f64, r: f64) -> f64 {
    w_max / (1.0 + (w_max / w0 - 1.0) * (-r * t).exp())
}

/// Body weight at time `t` (days) on the logistic curve.
///
/// Negative `t` is accepted and extrapolates the curve backwards.
pub fn logistic_weight(t: f64, p: &LogisticParams) -> Result<f64> {
    ensure_finite("t", t)?;
    Ok(logistic_curve(t, p.w0, p.w_max, p.r))
}

/// Right-hand side of the logistic equation, `r w (1 - w / w_max)`.
pub fn logistic_rhs(w: f64, p: &LogisticParams) -> f64 {
    p.r * w * (1.0 - w / p.w_max)
}

/// Beta law of the maximum body weight on `(w_lo, w_hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxWeightDistribution {
    pub w_lo: f64,
    pub w_hi: f64,
    pub a: f64,
    pub b: f64,
    /// Normalization constant `C` of `C (w - w_lo)^(a-1) (w_hi - w)^(b-1)`, 1/g.
    pub norm_c: f64,
    /// Same constant for the density written in the unit variable
    /// `s = (w - w_lo) / (w_hi - w_lo)`; avoids overflow for large supports.
    scaled_c: f64,
    resolution: usize,
}

impl MaxWeightDistribution {
    /// Builds the law normalized with the default midpoint resolution.
    pub fn new(w_lo: f64, w_hi: f64, a: f64, b: f64) -> Result<Self> {
        Self::with_resolution(w_lo, w_hi, a, b, DEFAULT_QUAD_POINTS)
    }

    pub fn with_resolution(w_lo: f64, w_hi: f64, a: f64, b: f64, resolution: usize) -> Result<Self> {
        for (name, v) in [("w_lo", w_lo), ("w_hi", w_hi), ("a", a), ("b", b)] {
            ensure_finite(name, v)?;
        }
        if !(w_lo > 0.0 && w_lo < w_hi) {
            return Err(Error::invalid(
                "support",
                format!("need 0 < w_lo < w_hi, got ({w_lo}, {w_hi})"),
            ));
        }
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::invalid("shape", format!("need a, b > 0, got a={a}, b={b}")));
        }
        if resolution == 0 {
            return Err(Error::invalid("resolution", "need at least one node"));
        }
        let q = resolution as f64;
        let unnormalized: f64 = (0..resolution)
            .map(|k| unit_kernel((k as f64 + 0.5) / q, a, b))
            .sum::<f64>()
            / q;
        let len = w_hi - w_lo;
        // density(w) = scaled_c * kernel(s) / len
        let scaled_c = 1.0 / unnormalized;
        let norm_c = scaled_c / len.powf(a + b - 1.0);
        Ok(MaxWeightDistribution {
            w_lo,
            w_hi,
            a,
            b,
            norm_c,
            scaled_c,
            resolution,
        })
    }

    /// Re-normalizes the same law for another midpoint resolution.
    pub fn normalized_at(&self, resolution: usize) -> Result<Self> {
        Self::with_resolution(self.w_lo, self.w_hi, self.a, self.b, resolution)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn width(&self) -> f64 {
        self.w_hi - self.w_lo
    }

    /// Midpoint node `k` of a `q`-node rule on the support.
    #[inline]
    pub fn node(&self, k: usize, q: usize) -> f64 {
        self.w_lo + (k as f64 + 0.5) * self.width() / q as f64
    }
}

#[inline]
fn unit_kernel(s: f64, a: f64, b: f64) -> f64 {
    s.powf(a - 1.0) * (1.0 - s).powf(b - 1.0)
}

/// Density of the maximum-weight law; zero outside the open support.
pub fn beta_density(w: f64, dist: &MaxWeightDistribution) -> f64 {
    if !(w > dist.w_lo && w < dist.w_hi) {
        return 0.0;
    }
    let len = dist.width();
    dist.scaled_c * unit_kernel((w - dist.w_lo) / len, dist.a, dist.b) / len
}

/// Midpoint quadrature over the maximum-weight support: nodes and
/// probability weights `p(node) * dw`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    fn midpoint(dist: &MaxWeightDistribution, q: usize) -> Self {
        let dw = dist.width() / q as f64;
        let nodes: Vec<f64> = (0..q).map(|k| dist.node(k, q)).collect();
        let weights = nodes.iter().map(|&w| beta_density(w, dist) * dw).collect();
        Quadrature { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_k weight_k * f(node_k)`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&w, &p)| p * f(w))
            .sum()
    }
}

/// Logistic growth with a beta-distributed maximum body weight.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainGrowthModel {
    pub w0: f64,
    pub r: f64,
    pub dist: MaxWeightDistribution,
    pub quad_points: usize,
    quad: Quadrature,
}

impl UncertainGrowthModel {
    pub fn new(w0: f64, r: f64, dist: MaxWeightDistribution, quad_points: usize) -> Result<Self> {
        ensure_finite("w0", w0)?;
        ensure_finite("r", r)?;
        if w0 <= 0.0 {
            return Err(Error::invalid("w0", format!("must be positive, got {w0}")));
        }
        if r <= 0.0 {
            return Err(Error::invalid("r", format!("must be positive, got {r}")));
        }
        if quad_points == 0 {
            return Err(Error::invalid("quad_points", "must be positive"));
        }
        let dist = if dist.resolution() == quad_points {
            dist
        } else {
            dist.normalized_at(quad_points)?
        };
        let quad = Quadrature::midpoint(&dist, quad_points);
        Ok(UncertainGrowthModel {
            w0,
            r,
            dist,
            quad_points,
            quad,
        })
    }

    /// Convenience constructor from the five calibrated numbers plus `w0`.
    pub fn from_parts(w0: f64, r: f64, w_lo: f64, w_hi: f64, a: f64, b: f64) -> Result<Self> {
        let dist = MaxWeightDistribution::new(w_lo, w_hi, a, b)?;
        Self::new(w0, r, dist, DEFAULT_QUAD_POINTS)
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    /// Weight at growth time `t` of the realization with maximum weight `w_max`.
    #[inline]
    pub fn weight_at(&self, t: f64, w_max: f64) -> f64 {
        logistic_curve(t, self.w0, w_max, self.r)
    }

    /// Realization weights at every quadrature node.
    pub fn node_weights(&self, t: f64) -> Vec<f64> {
        let decay = (-self.r * t).exp();
        self.quad
            .nodes
            .iter()
            .map(|&wm| wm / (1.0 + (wm / self.w0 - 1.0) * decay))
            .collect()
    }

    fn first_three_moments(&self, t: f64) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for (w, p) in self.node_weights(t).into_iter().zip(&self.quad.weights) {
            let w2 = w * w;
            acc[0] += p * w;
            acc[1] += p * w2;
            acc[2] += p * w2 * w;
        }
        acc
    }
}

/// `m`-th raw moment of the body weight at growth time `t`.
pub fn raw_moment(m: u32, t: f64, model: &UncertainGrowthModel) -> Result<f64> {
    ensure_finite("t", t)?;
    if m == 0 {
        return Err(Error::invalid("m", "moment order must be at least 1"));
    }
    let exp = m as i32;
    Ok(model
        .node_weights(t)
        .into_iter()
        .zip(&model.quad.weights)
        .map(|(w, p)| p * w.powi(exp))
        .sum())
}

/// Summary statistics of a body-weight population, modeled or observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub mean: f64,
    pub std: f64,
    /// Population skewness; NaN when `skew_defined` is false.
    pub skew: f64,
    pub median: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub count: usize,
    /// Set when a negative variance from cancellation was clamped to zero.
    pub std_clamped: bool,
    pub skew_defined: bool,
}

impl StatsSummary {
    /// A target known only by its mean and standard deviation.
    pub fn from_mean_std(mean: f64, std: f64) -> Self {
        StatsSummary {
            mean,
            std,
            skew: f64::NAN,
            median: None,
            min: None,
            max: None,
            count: 0,
            std_clamped: false,
            skew_defined: false,
        }
    }

    /// Mean, std and skewness from the first three raw moments.
    pub(crate) fn from_raw_moments(m1: f64, m2: f64, m3: f64, count: usize) -> Self {
        let var = m2 - m1 * m1;
        let noise = VARIANCE_NOISE * m2.abs();
        let (var, std_clamped) = if var < -noise { (0.0, true) } else { (var, false) };
        if var <= noise {
            return StatsSummary {
                mean: m1,
                std: 0.0,
                skew: f64::NAN,
                median: None,
                min: None,
                max: None,
                count,
                std_clamped,
                skew_defined: false,
            };
        }
        let std = var.sqrt();
        let skew = (m3 - 3.0 * m1 * var - m1 * m1 * m1) / (std * std * std);
        StatsSummary {
            mean: m1,
            std,
            skew,
            median: None,
            min: None,
            max: None,
            count,
            std_clamped,
            skew_defined: true,
        }
    }
}

/// Mean, standard deviation and skewness of the modeled weight at growth time `t`.
pub fn model_stats(t: f64, model: &UncertainGrowthModel) -> Result<StatsSummary> {
    ensure_finite("t", t)?;
    let [m1, m2, m3] = model.first_three_moments(t);
    Ok(StatsSummary::from_raw_moments(m1, m2, m3, 0))
}

/// Lightest and heaviest realizations at growth time `t`: the curves with
/// `w_max = w_lo` and `w_max = w_hi`.
pub fn envelope_curves(t: f64, model: &UncertainGrowthModel) -> (f64, f64) {
    (
        model.weight_at(t, model.dist.w_lo),
        model.weight_at(t, model.dist.w_hi),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_2023_w10() -> UncertainGrowthModel {
        UncertainGrowthModel::from_parts(10.0, 0.059, 29.0, 293.0, 1.0, 9.75).unwrap()
    }

    #[test]
    fn logistic_initial_and_inflection() {
        let p = LogisticParams::new(10.0, 100.0, 0.05).unwrap();
        assert_eq!(logistic_weight(0.0, &p).unwrap(), 10.0);
        let t_half = 9f64.ln() / 0.05;
        assert!((logistic_weight(t_half, &p).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn logistic_2023_row_at_day_90() {
        // 83.2 / (1 + (83.2/20.5 - 1) exp(-2.448)) evaluated independently
        let p = LogisticParams::new(20.5, 83.2, 0.0272).unwrap();
        let expected = 83.2 / (1.0 + (83.2 / 20.5 - 1.0) * (-2.448f64).exp());
        let got = logistic_weight(90.0, &p).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 65.8).abs() < 0.05, "{got}");
    }

    #[test]
    fn logistic_rejects_bad_inputs() {
        assert!(LogisticParams::new(10.0, 5.0, 0.1).is_err());
        assert!(LogisticParams::new(10.0, 50.0, 0.0).is_err());
        assert!(LogisticParams::new(f64::NAN, 50.0, 0.1).is_err());
        let p = LogisticParams::new(10.0, 50.0, 0.1).unwrap();
        assert!(logistic_weight(f64::INFINITY, &p).is_err());
    }

    #[test]
    fn rhs_fixed_points_and_finite_difference() {
        let p = LogisticParams::new(10.0, 100.0, 0.05).unwrap();
        assert_eq!(logistic_rhs(0.0, &p), 0.0);
        assert_eq!(logistic_rhs(100.0, &p), 0.0);
        let h = 1e-4;
        let fd = (logistic_weight(30.0 + h, &p).unwrap() - logistic_weight(30.0 - h, &p).unwrap()) / (2.0 * h);
        let rhs = logistic_rhs(logistic_weight(30.0, &p).unwrap(), &p);
        assert!(((fd - rhs) / rhs).abs() < 1e-6);
    }

    #[test]
    fn uniform_density_and_normalization() {
        let d = MaxWeightDistribution::new(1e-300, 1.0, 1.0, 1.0).unwrap();
        assert!((beta_density(0.3, &d) - 1.0).abs() < 1e-12);
        assert_eq!(beta_density(1.5, &d), 0.0);
        assert_eq!(beta_density(1.0, &d), 0.0);

        let d = MaxWeightDistribution::new(24.0, 123.0, 1.0, 2.5).unwrap();
        let dw = d.width() / 1000.0;
        let total: f64 = (0..1000).map(|k| beta_density(d.node(k, 1000), &d) * dw).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn symmetric_beta_has_centered_mean() {
        let d = MaxWeightDistribution::new(1e-12, 1.0, 4.0, 4.0).unwrap();
        let m = UncertainGrowthModel::new(0.5, 1.0, d, 1000).unwrap();
        let mean = m.quadrature().integrate(|w| w);
        assert!((mean - 0.5).abs() < 1e-9);
    }

    #[test]
    fn norm_constant_matches_unscaled_form() {
        let d = MaxWeightDistribution::new(29.0, 293.0, 1.0, 9.75).unwrap();
        let w = 80.0;
        let direct = d.norm_c * (w - d.w_lo).powf(d.a - 1.0) * (d.w_hi - w).powf(d.b - 1.0);
        assert!(((direct - beta_density(w, &d)) / direct).abs() < 1e-10);
    }

    #[test]
    fn moments_2023_w10_match_published_fit() {
        let m = model_2023_w10();
        let s = model_stats(90.0, &m).unwrap();
        assert_eq!(format!("{:.1}", s.mean), "52.2");
        assert_eq!(format!("{:.1}", s.std), "21.0");
        assert_eq!(format!("{:.2}", s.skew), "1.43");
        let m1 = raw_moment(1, 90.0, &m).unwrap();
        let m2 = raw_moment(2, 90.0, &m).unwrap();
        assert!(((m2 - m1 * m1).sqrt() - s.std).abs() < 1e-9);
    }

    #[test]
    fn moments_2017_table_w0() {
        let m = UncertainGrowthModel::from_parts(9.8, 0.075, 24.0, 187.0, 2.0, 8.25).unwrap();
        let s = model_stats(97.0, &m).unwrap();
        assert_eq!(format!("{:.1}", s.mean), "55.6");
        assert_eq!(format!("{:.1}", s.std), "19.1");
        assert_eq!(format!("{:.2}", s.skew), "0.84");
    }

    #[test]
    fn start_of_growth_is_degenerate() {
        let m = model_2023_w10();
        for k in 1..=4 {
            let got = raw_moment(k, 0.0, &m).unwrap();
            assert!((got / 10f64.powi(k as i32) - 1.0).abs() < 1e-12);
        }
        let s = model_stats(0.0, &m).unwrap();
        assert!((s.mean - 10.0).abs() < 1e-12);
        assert_eq!(s.std, 0.0);
        assert!(!s.skew_defined && s.skew.is_nan());
        assert!(raw_moment(0, 10.0, &m).is_err());
    }

    #[test]
    fn envelope_limits_and_containment() {
        let m = model_2023_w10();
        assert_eq!(envelope_curves(0.0, &m), (10.0, 10.0));
        let (lo, hi) = envelope_curves(5000.0, &m);
        assert!((lo - 29.0).abs() < 1e-9 && (hi - 293.0).abs() < 1e-9);
        for t in (0..=200).step_by(5).map(f64::from) {
            let (lo, hi) = envelope_curves(t, &m);
            let mean = raw_moment(1, t, &m).unwrap();
            assert!(lo <= mean + 1e-12 && mean <= hi + 1e-12, "t={t}");
        }
    }

    #[test]
    fn weight_increases_with_max_weight() {
        let m = model_2023_w10();
        for t in [1.0, 30.0, 90.0, 180.0] {
            let sweep: Vec<f64> = (0..=300).map(|k| m.weight_at(t, 29.0 + k as f64 * 0.88)).collect();
            assert!(sweep.windows(2).all(|w| w[1] > w[0]), "t={t}");
        }
    }

    #[test]
    fn support_below_initial_weight_is_allowed() {
        // 2019 fit with w0 = 10 has w_lo = 2 g
        let m = UncertainGrowthModel::from_parts(10.0, 0.052, 2.0, 151.0, 4.75, 7.75).unwrap();
        assert!(m.weight_at(500.0, 3.0) < 10.0);
        let s = model_stats(95.0, &m).unwrap();
        assert_eq!(format!("{:.1}", s.mean), "56.4");
    }
}
