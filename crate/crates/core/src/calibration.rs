//! Fitting growth models to body-weight data.
//!
//! Two procedures live here: a least-squares fit of the deterministic logistic
//! curve to a series of averaged weights, and a moment-matching grid search
//! that picks the uncertain-model parameters whose modeled mean and standard
//! deviation best match a one-day catch sample.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::growth::{
    logistic_curve, model_stats, LogisticParams, MaxWeightDistribution, StatsSummary,
    UncertainGrowthModel, DEFAULT_QUAD_POINTS,
};
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Averaged body weights over a season. Days count from May 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSeries {
    observations: Vec<(f64, f64)>,
}

impl WeightSeries {
    pub fn new(observations: Vec<(f64, f64)>) -> Result<Self> {
        for (idx, &(day, w)) in observations.iter().enumerate() {
            if !day.is_finite() || !w.is_finite() {
                return Err(Error::Validation(format!("observation {idx}: non-finite value")));
            }
            if w <= 0.0 {
                return Err(Error::Validation(format!("observation {idx}: weight must be positive, got {w}")));
            }
            if idx > 0 && day <= observations[idx - 1].0 {
                return Err(Error::Validation(format!("observation {idx}: days must be strictly increasing")));
            }
        }
        Ok(WeightSeries { observations })
    }

    pub fn observations(&self) -> &[(f64, f64)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Individual fish weights caught on a single competition day.
#[derive(Debug, Clone, PartialEq)]
pub struct CompetitionSample {
    pub day: f64,
    weights: Vec<f64>,
}

impl CompetitionSample {
    pub fn new(day: f64, weights: Vec<f64>) -> Result<Self> {
        ensure_finite("day", day)?;
        if weights.len() < 2 {
            return Err(Error::Validation(format!(
                "competition sample needs at least 2 weights, got {}",
                weights.len()
            )));
        }
        if let Some(idx) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Validation(format!(
                "weight {idx} must be positive and finite, got {}",
                weights[idx]
            )));
        }
        Ok(CompetitionSample { day, weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Result of a least-squares logistic fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFit {
    pub params: LogisticParams,
    /// Sum of squared residuals, g^2.
    pub sse: f64,
}

fn logistic_sse(series: &WeightSeries, w0: f64, w_max: f64, r: f64) -> f64 {
    series
        .observations
        .iter()
        .map(|&(t, y)| {
            let e = logistic_curve(t, w0, w_max, r) - y;
            e * e
        })
        .sum()
}

/// Least-squares fit of `(w0, w_max, r)` to an averaged weight series.
///
/// Runs a derivative-free simplex descent in log-parameters from eight fixed
/// starting points and keeps the best converged result.
pub fn fit_logistic(series: &WeightSeries) -> Result<LogisticFit> {
    if series.len() < 3 {
        return Err(Error::Validation(format!(
            "need at least 3 observations to fit 3 parameters, got {}",
            series.len()
        )));
    }
    let ys: Vec<f64> = series.observations.iter().map(|o| o.1).collect();
    let y_max = ys.iter().cloned().fold(f64::MIN, f64::max);
    let y_min = ys.iter().cloned().fold(f64::MAX, f64::min);
    if y_max - y_min <= 1e-12 * y_max {
        return Err(Error::NoSigmoidSignal);
    }
    let first = ys[0];

    let objective = |theta: &[f64]| {
        let (w0, w_max, r) = (theta[0].exp(), theta[1].exp(), theta[2].exp());
        let v = logistic_sse(series, w0, w_max, r);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let opts = NelderMeadOptions {
        initial_step: 0.1,
        diameter_tol: 1e-10,
        max_iter: 20_000,
        max_restarts: 8,
    };

    let mut best: Option<(f64, [f64; 3], bool)> = None;
    for w0 in [first, 0.5 * first] {
        for w_max in [1.1 * y_max, 2.0 * y_max] {
            for r in [0.01f64, 0.05] {
                let start = [w0.ln(), w_max.ln(), r.ln()];
                let out = nelder_mead(&objective, &start, &opts);
                let theta = [out.x[0], out.x[1], out.x[2]];
                let better = match &best {
                    None => true,
                    Some((f, _, conv)) => (out.converged && !conv) || (out.converged == *conv && out.fx < *f),
                };
                if better {
                    best = Some((out.fx, theta, out.converged));
                }
            }
        }
    }
    let (sse, theta, converged) = best.expect("at least one start");
    let (w0, w_max, r) = (theta[0].exp(), theta[1].exp(), theta[2].exp());
    let params = LogisticParams { w0, w_max, r };
    if !converged {
        return Err(Error::NoConvergence { best: params, residual: sse });
    }
    let params = LogisticParams::new(w0, w_max, r)?;
    Ok(LogisticFit { params, sse })
}

/// Sample statistics with population (biased) moment estimators.
pub fn empirical_stats(sample: &CompetitionSample) -> StatsSummary {
    let xs = &sample.weights;
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut c2, mut c3) = (0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        c2 += d * d;
        c3 += d * d * d;
    }
    let var = c2 / n;
    let std = var.sqrt();
    let (skew, skew_defined) = if std > 0.0 {
        ((c3 / n) / (std * std * std), true)
    } else {
        (f64::NAN, false)
    };
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };
    StatsSummary {
        mean,
        std,
        skew,
        median: Some(median),
        min: sorted.first().copied(),
        max: sorted.last().copied(),
        count: xs.len(),
        std_clamped: false,
        skew_defined,
    }
}

/// Squared relative errors of the mean and standard deviation, summed.
pub fn error_metric(target: &StatsSummary, fitted: &StatsSummary) -> Result<f64> {
    if target.mean == 0.0 {
        return Err(Error::ZeroTarget("mean"));
    }
    if target.std == 0.0 {
        return Err(Error::ZeroTarget("std"));
    }
    let dm = (target.mean - fitted.mean) / target.mean;
    let ds = (target.std - fitted.std) / target.std;
    Ok(dm * dm + ds * ds)
}

/// Integer coordinates of one candidate on the calibration lattice.
///
/// Field order defines the lexicographic tie-break of the grid search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidateIndex {
    pub i: u32,
    pub j: u32,
    pub k: u32,
    pub l: u32,
    pub m: u32,
}

impl CandidateIndex {
    pub fn new(i: u32, j: u32, k: u32, l: u32, m: u32) -> Self {
        CandidateIndex { i, j, k, l, m }
    }
}

impl fmt::Display for CandidateIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(i={}, j={}, k={}, l={}, m={})", self.i, self.j, self.k, self.l, self.m)
    }
}

/// Decoded candidate parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateParams {
    pub r: f64,
    pub w_lo: f64,
    pub w_hi: f64,
    pub a: f64,
    pub b: f64,
}

/// Inclusive bounds of each lattice axis.
///
/// The lattice decodes to `r = 0.020 + 0.001 i`, `w_lo = j`, `w_hi = k`,
/// `a = 0.25 l`, `b = 0.25 m`, with `k > j` required for a non-empty support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterGrid {
    pub i: RangeInclusive<u32>,
    pub j: RangeInclusive<u32>,
    pub k: RangeInclusive<u32>,
    pub l: RangeInclusive<u32>,
    pub m: RangeInclusive<u32>,
}

impl Default for ParameterGrid {
    fn default() -> Self {
        Self::published()
    }
}

impl ParameterGrid {
    /// The lattice swept for the published fits.
    pub fn published() -> Self {
        ParameterGrid {
            i: 0..=40,
            j: 1..=50,
            k: 1..=300,
            l: 1..=40,
            m: 1..=40,
        }
    }

    pub fn contains(&self, idx: &CandidateIndex) -> bool {
        self.i.contains(&idx.i)
            && self.j.contains(&idx.j)
            && self.k.contains(&idx.k)
            && self.l.contains(&idx.l)
            && self.m.contains(&idx.m)
    }

    pub fn decode(idx: &CandidateIndex) -> CandidateParams {
        CandidateParams {
            r: 0.020 + 0.001 * idx.i as f64,
            w_lo: idx.j as f64,
            w_hi: idx.k as f64,
            a: 0.25 * idx.l as f64,
            b: 0.25 * idx.m as f64,
        }
    }

    /// Index of a decoded parameter tuple, if it lies on the lattice.
    pub fn encode(p: &CandidateParams) -> Option<CandidateIndex> {
        fn snap(v: f64) -> Option<u32> {
            let n = v.round();
            ((v - n).abs() < 1e-9 && n >= 0.0).then_some(n as u32)
        }
        Some(CandidateIndex {
            i: snap((p.r - 0.020) / 0.001)?,
            j: snap(p.w_lo)?,
            k: snap(p.w_hi)?,
            l: snap(p.a / 0.25)?,
            m: snap(p.b / 0.25)?,
        })
    }

    /// Number of admissible (`k > j`) candidates.
    pub fn size(&self) -> u64 {
        let per_jk: u64 = self
            .j
            .clone()
            .map(|j| {
                let lo = (*self.k.start()).max(j + 1);
                (*self.k.end() + 1).saturating_sub(lo) as u64
            })
            .sum();
        axis_len(&self.i) * per_jk * axis_len(&self.l) * axis_len(&self.m)
    }

    fn intersect(&self, r: &IndexRestriction) -> Option<ParameterGrid> {
        fn cut(a: &RangeInclusive<u32>, b: &RangeInclusive<u32>) -> Option<RangeInclusive<u32>> {
            let lo = (*a.start()).max(*b.start());
            let hi = (*a.end()).min(*b.end());
            (lo <= hi).then_some(lo..=hi)
        }
        Some(ParameterGrid {
            i: cut(&self.i, &r.i)?,
            j: cut(&self.j, &r.j)?,
            k: cut(&self.k, &r.k)?,
            l: cut(&self.l, &r.l)?,
            m: cut(&self.m, &r.m)?,
        })
    }
}

fn axis_len(r: &RangeInclusive<u32>) -> u64 {
    if r.is_empty() {
        0
    } else {
        (*r.end() - *r.start()) as u64 + 1
    }
}

/// Sub-box of the lattice, written `i0:i1,j0:j1,k0:k1,l0:l1,m0:m1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexRestriction {
    pub i: RangeInclusive<u32>,
    pub j: RangeInclusive<u32>,
    pub k: RangeInclusive<u32>,
    pub l: RangeInclusive<u32>,
    pub m: RangeInclusive<u32>,
}

impl IndexRestriction {
    pub fn singleton(idx: CandidateIndex) -> Self {
        IndexRestriction {
            i: idx.i..=idx.i,
            j: idx.j..=idx.j,
            k: idx.k..=idx.k,
            l: idx.l..=idx.l,
            m: idx.m..=idx.m,
        }
    }

    /// Box of `radius` steps per axis around `idx`, floored at zero.
    pub fn around(idx: CandidateIndex, radius: u32) -> Self {
        let span = |c: u32| c.saturating_sub(radius)..=c + radius;
        IndexRestriction {
            i: span(idx.i),
            j: span(idx.j),
            k: span(idx.k),
            l: span(idx.l),
            m: span(idx.m),
        }
    }
}

impl FromStr for IndexRestriction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(Error::Validation(format!(
                "restriction needs 5 comma-separated ranges i0:i1,j0:j1,k0:k1,l0:l1,m0:m1, got `{s}`"
            )));
        }
        let mut ranges = Vec::with_capacity(5);
        for part in parts {
            let (a, b) = part.split_once(':').unwrap_or((part, part));
            let parse = |v: &str| {
                v.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Validation(format!("bad index `{v}` in restriction `{s}`")))
            };
            let (a, b) = (parse(a)?, parse(b)?);
            if a > b {
                return Err(Error::EmptyRestriction);
            }
            ranges.push(a..=b);
        }
        let mut it = ranges.into_iter();
        Ok(IndexRestriction {
            i: it.next().unwrap(),
            j: it.next().unwrap(),
            k: it.next().unwrap(),
            l: it.next().unwrap(),
            m: it.next().unwrap(),
        })
    }
}

impl fmt::Display for IndexRestriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = |r: &RangeInclusive<u32>| format!("{}:{}", r.start(), r.end());
        write!(f, "{},{},{},{},{}", r(&self.i), r(&self.j), r(&self.k), r(&self.l), r(&self.m))
    }
}

impl From<&ParameterGrid> for IndexRestriction {
    fn from(g: &ParameterGrid) -> Self {
        IndexRestriction {
            i: g.i.clone(),
            j: g.j.clone(),
            k: g.k.clone(),
            l: g.l.clone(),
            m: g.m.clone(),
        }
    }
}

/// Outcome of scoring one lattice point.
#[derive(Debug, Clone)]
pub enum CandidateEval {
    Evaluated { model: UncertainGrowthModel, er: f64 },
    /// Empty support (`w_lo >= w_hi`); not an error, the point is just not a model.
    Skipped,
}

/// Builds the candidate model and scores it against `target` at `day`.
pub fn evaluate_candidate(
    idx: &CandidateIndex,
    w0: f64,
    day: f64,
    target: &StatsSummary,
    grid: &ParameterGrid,
) -> Result<CandidateEval> {
    if !grid.contains(idx) {
        return Err(Error::Validation(format!("candidate {idx} outside the parameter grid")));
    }
    if !(day > 0.0) {
        return Err(Error::invalid("day", format!("must be positive, got {day}")));
    }
    if idx.k <= idx.j {
        return Ok(CandidateEval::Skipped);
    }
    let p = ParameterGrid::decode(idx);
    let dist = MaxWeightDistribution::new(p.w_lo, p.w_hi, p.a, p.b)?;
    let model = UncertainGrowthModel::new(w0, p.r, dist, DEFAULT_QUAD_POINTS)?;
    let fitted = model_stats(day, &model)?;
    let er = error_metric(target, &fitted)?;
    Ok(CandidateEval::Evaluated { model, er })
}

/// Winner of a calibration sweep.
#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub index: CandidateIndex,
    pub model: UncertainGrowthModel,
    /// Sum of squared relative errors of mean and std.
    pub er: f64,
    pub fitted_stats: StatsSummary,
    pub target_stats: StatsSummary,
    pub day: f64,
    pub evaluated: u64,
    pub skipped: u64,
}

impl CalibrationResult {
    /// Euclidean norm of the two relative errors, `sqrt(er)`.
    ///
    /// Published calibration tables quote the metric in this form.
    pub fn er_root(&self) -> f64 {
        self.er.sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
struct Best {
    er: f64,
    idx: CandidateIndex,
}

fn better(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            let ord = x.er.total_cmp(&y.er).then(x.idx.cmp(&y.idx));
            Some(if ord.is_le() { x } else { y })
        }
    }
}

/// Moment-matching search over the lattice (or a sub-box of it) against the
/// statistics of a catch sample.
pub fn grid_search(
    w0: f64,
    sample: &CompetitionSample,
    grid: &ParameterGrid,
    restriction: Option<&IndexRestriction>,
) -> Result<CalibrationResult> {
    let target = empirical_stats(sample);
    grid_search_stats(w0, sample.day, &target, grid, restriction)
}

/// Same as [`grid_search`] with the target statistics given directly.
///
/// The minimum is taken over `(er, index)` in lexicographic order, so the
/// result does not depend on how rayon splits the work.
pub fn grid_search_stats(
    w0: f64,
    day: f64,
    target: &StatsSummary,
    grid: &ParameterGrid,
    restriction: Option<&IndexRestriction>,
) -> Result<CalibrationResult> {
    ensure_finite("w0", w0)?;
    if w0 <= 0.0 {
        return Err(Error::invalid("w0", "must be positive"));
    }
    if !(day > 0.0) {
        return Err(Error::invalid("day", format!("must be positive, got {day}")));
    }
    if target.mean == 0.0 {
        return Err(Error::ZeroTarget("mean"));
    }
    if target.std == 0.0 {
        return Err(Error::ZeroTarget("std"));
    }
    let search = match restriction {
        Some(r) => grid.intersect(r).ok_or(Error::EmptyRestriction)?,
        None => grid.clone(),
    };
    if search.size() == 0 {
        return Err(Error::EmptyRestriction);
    }

    let outer: Vec<(u32, u32, u32)> = search
        .i
        .clone()
        .flat_map(|i| search.j.clone().flat_map(move |j| std::iter::once((i, j))))
        .flat_map(|(i, j)| search.l.clone().map(move |l| (i, j, l)))
        .collect();

    let (best, evaluated, skipped) = outer
        .par_iter()
        .map(|&(i, j, l)| -> Result<(Option<Best>, u64, u64)> {
            let mut local = None;
            let (mut n_eval, mut n_skip) = (0u64, 0u64);
            for k in search.k.clone() {
                for m in search.m.clone() {
                    let idx = CandidateIndex { i, j, k, l, m };
                    match evaluate_candidate(&idx, w0, day, target, &search)? {
                        CandidateEval::Evaluated { er, .. } => {
                            n_eval += 1;
                            local = better(local, Some(Best { er, idx }));
                        }
                        CandidateEval::Skipped => n_skip += 1,
                    }
                }
            }
            Ok((local, n_eval, n_skip))
        })
        .try_reduce(
            || (None, 0, 0),
            |a, b| Ok((better(a.0, b.0), a.1 + b.1, a.2 + b.2)),
        )?;

    let best = best.ok_or(Error::EmptyRestriction)?;
    let model = match evaluate_candidate(&best.idx, w0, day, target, &search)? {
        CandidateEval::Evaluated { model, .. } => model,
        CandidateEval::Skipped => unreachable!("winner was evaluated"),
    };
    let fitted_stats = model_stats(day, &model)?;
    Ok(CalibrationResult {
        index: best.idx,
        model,
        er: best.er,
        fitted_stats,
        target_stats: *target,
        day,
        evaluated,
        skipped,
    })
}
