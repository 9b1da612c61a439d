use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use robust_harvest::calibration::{
    evaluate_candidate, fit_logistic, grid_search_stats, CandidateEval, CandidateIndex, IndexRestriction,
    ParameterGrid, WeightSeries,
};
use robust_harvest::growth::{
    beta_density, envelope_curves, logistic_rhs, logistic_weight, model_stats, raw_moment, LogisticParams,
    MaxWeightDistribution, UncertainGrowthModel,
};
use robust_harvest::hjb::{
    implicit_coefficients, implicit_node_update, omega_for, omega_nondecreasing, GridSpec, HarvestProblem, Scheme,
    StepParams, TerminalReward,
};
use robust_harvest::io::{read_grid_csv, write_grid_csv, GridView, RunConfig, Strides};
use robust_harvest::policy::{backtrack_trajectory, Trajectory};
use robust_harvest::robust::{entropic_bound_at, worst_case_distortion_at, UncertaintyAversion};
use robust_harvest::StatsSummary;

fn reference_model() -> UncertainGrowthModel {
    UncertainGrowthModel::from_parts(20.5, 0.079, 24.0, 123.0, 1.0, 2.5).unwrap()
}

fn reference_problem(terminal: TerminalReward) -> HarvestProblem {
    HarvestProblem {
        horizon: 120.0,
        growth_offset: 61.0,
        delta: 0.04,
        h: 100.0,
        terminal,
        eta: UncertaintyAversion::LinearDecreasing { mu: 0.1, n_max: 1.0 },
        model: reference_model(),
        n_max: 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beta_density_integrates_to_one(l in 1u32..=40, m in 1u32..=40, j in 1u32..=50, width in 1u32..=250) {
        let (lo, hi) = (j as f64, (j + width) as f64);
        let d = MaxWeightDistribution::new(lo, hi, 0.25 * l as f64, 0.25 * m as f64).unwrap();
        let q = 1000;
        let dw = (hi - lo) / q as f64;
        let total: f64 = (0..q).map(|k| beta_density(lo + (k as f64 + 0.5) * dw, &d) * dw).sum();
        prop_assert!((total - 1.0).abs() <= 1e-8, "{}", total);
    }

    #[test]
    fn logistic_is_monotone(w0 in 1.0f64..30.0, gap in 1.0f64..200.0, r in 0.005f64..0.1, t in 0.0f64..300.0) {
        let p = LogisticParams::new(w0, w0 + gap, r).unwrap();
        let q = LogisticParams::new(w0, w0 + gap + 1.0, r).unwrap();
        let w = logistic_weight(t, &p).unwrap();
        prop_assert!(logistic_weight(t + 1.0, &p).unwrap() > w);
        if t > 0.0 {
            prop_assert!(logistic_weight(t, &q).unwrap() > w);
        }
    }

    #[test]
    fn logistic_solves_its_ode(w0 in 1.0f64..30.0, gap in 1.0f64..200.0, r in 0.005f64..0.1, t in 1.0f64..300.0) {
        let p = LogisticParams::new(w0, w0 + gap, r).unwrap();
        let eps = 1e-3;
        let d = (logistic_weight(t + eps, &p).unwrap() - logistic_weight(t - eps, &p).unwrap()) / (2.0 * eps);
        let w = logistic_weight(t, &p).unwrap();
        let rhs = logistic_rhs(w, &p);
        // rounding floor of the difference quotient near saturation
        let floor = 4.0 * f64::EPSILON * w / eps;
        prop_assert!((d - rhs).abs() <= 1e-6 * rhs.abs() + floor, "{} vs {}", d, rhs);
    }

    #[test]
    fn moments_and_envelopes(t in 0.0f64..400.0, a in 0.25f64..10.0, b in 0.25f64..10.0, w0 in 2.0f64..40.0) {
        let model = UncertainGrowthModel::from_parts(w0, 0.05, 20.0, 180.0, a, b).unwrap();
        let m1 = raw_moment(1, t, &model).unwrap();
        let m2 = raw_moment(2, t, &model).unwrap();
        prop_assert!(m2 >= m1 * m1 * (1.0 - 1e-12));
        let (lo, hi) = envelope_curves(t, &model);
        prop_assert!(lo <= m1 * (1.0 + 1e-12) && m1 <= hi * (1.0 + 1e-12), "{} {} {}", lo, m1, hi);
    }

    #[test]
    fn omega_decreases_with_aversion(t in 61.0f64..181.0, e in 1e-4f64..1.0) {
        let model = reference_model();
        let mean = raw_moment(1, t, &model).unwrap();
        let ladder = [0.0, e / 4.0, e / 2.0, e, 2.0 * e];
        let values: Vec<f64> = ladder.iter().map(|&x| entropic_bound_at(t, x, &model)).collect();
        prop_assert!((values[0] - mean).abs() <= 1e-12 * mean);
        for w in values.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-14));
        }
        let star = worst_case_distortion_at(t, e, &model);
        prop_assert!(star.mean_max_weight() <= model.dist_mean() + 1e-12);
    }

    #[test]
    fn discriminant_forms_agree(
        phi_next in 0.0f64..100.0,
        phi_left in 0.0f64..100.0,
        omega in 0.0f64..200.0,
        dt in 1e-4f64..20.0,
        dn in 1e-4f64..0.5,
        delta in 0.0f64..0.2,
        h in 1.0f64..200.0,
    ) {
        let p = StepParams { dt, dn, delta, h };
        let (ca, cb, cc) = implicit_coefficients(phi_next, phi_left, omega, &p);
        let direct = cb * cb + 4.0 * ca * cc;
        let s = ca * (h * dn - phi_left) + phi_next;
        let rewritten = s * s + 4.0 * ca * omega * dt * dn;
        prop_assert!(rewritten >= 0.0);
        let scale = (cb * cb).max(4.0 * ca * cc.abs()).max(s * s).max(1e-300);
        prop_assert!((direct - rewritten).abs() <= 1e-12 * scale, "{} vs {}", direct, rewritten);

        let x = implicit_node_update(phi_next, phi_left, omega, &p);
        let oracle = (-cb + direct.max(0.0).sqrt()) / (2.0 * ca);
        prop_assert!(x >= 0.0);
        prop_assert!((x - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()), "{} vs {}", x, oracle);
    }

    #[test]
    fn implicit_update_is_monotone(
        phi_next in 0.0f64..60.0,
        phi_left in 0.0f64..60.0,
        omega in 0.0f64..150.0,
        bump in 1e-6f64..1.0,
    ) {
        let p = StepParams { dt: 0.005, dn: 0.002, delta: 0.04, h: 100.0 };
        let base = implicit_node_update(phi_next, phi_left, omega, &p);
        prop_assert!(implicit_node_update(phi_next + bump, phi_left, omega, &p) >= base);
        prop_assert!(implicit_node_update(phi_next, phi_left + bump, omega, &p) >= base);
    }

    #[test]
    fn grid_csv_round_trips(values in proptest::collection::vec(-1e300f64..1e300, 12)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let view = GridView { time_steps: 2, pop_steps: 3, t0: 61.0, dt: 40.0, dn: 1.0 / 3.0, values: &values };
        write_grid_csv(&view, "value", Strides::default(), &path).unwrap();
        let back = read_grid_csv(&path, "value").unwrap();
        prop_assert_eq!(back.values, values);
    }

    #[test]
    fn config_echo_round_trips(
        w0 in 1.0f64..30.0,
        r in 0.01f64..0.1,
        delta in 0.0f64..0.2,
        h in 1.0f64..500.0,
        mu in 0.0f64..1.0,
        height in 0.0f64..100.0,
        threshold in 0.01f64..1.0,
        steps in 2usize..100_000,
    ) {
        let text = format!(
            "w0 = {w0}\nr = {r}\nw_lo = 24\nw_hi = 123\na = 1\nb = 2.5\nhorizon = 120\ndelta = {delta}\n\
             h = {h}\nn_max = 1\nterminal = step {height} {threshold}\nmu = {mu}\ntime_steps = {steps}\npop_steps = 50\n"
        );
        let cfg = RunConfig::parse_str(&text, "generated").unwrap();
        let again = RunConfig::parse_str(&cfg.to_config_string(), "echo").unwrap();
        prop_assert_eq!(cfg, again);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn logistic_fit_is_a_fixed_point(w0 in 5.0f64..25.0, w_max in 60.0f64..150.0, r in 0.015f64..0.06) {
        let p = LogisticParams::new(w0, w_max, r).unwrap();
        let obs: Vec<(f64, f64)> = (0..=12).map(|k| {
            let d = 31.0 + 12.0 * k as f64;
            (d, logistic_weight(d, &p).unwrap())
        }).collect();
        let fit = fit_logistic(&WeightSeries::new(obs).unwrap()).unwrap();
        prop_assert!(fit.sse < 1e-10, "sse {}", fit.sse);
        prop_assert!((fit.params.w_max - w_max).abs() < 1e-3 * w_max);
    }
}

trait DistMean {
    fn dist_mean(&self) -> f64;
}

impl DistMean for UncertainGrowthModel {
    fn dist_mean(&self) -> f64 {
        let q = self.quadrature();
        q.nodes.iter().zip(&q.weights).map(|(w, p)| w * p).sum()
    }
}

#[test]
fn omega_increases_in_population_for_decreasing_aversion() {
    let problem = reference_problem(TerminalReward::zero());
    let grid = GridSpec::new(240, 50).unwrap();
    assert!(problem.model.w0 < problem.model.dist.w_lo);
    assert!(omega_nondecreasing(&omega_for(&problem, &grid)));
}

#[test]
fn grid_search_does_not_depend_on_workers() {
    let target = StatsSummary::from_mean_std(52.2, 21.0);
    let grid = ParameterGrid::published();
    let restrict = IndexRestriction::around(CandidateIndex::new(39, 29, 293, 4, 39), 2);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| grid_search_stats(10.0, 90.0, &target, &grid, Some(&restrict)).unwrap())
    };
    let (a, b, c) = (run(1), run(2), run(5));
    assert_eq!(a.index, b.index);
    assert_eq!(a.index, c.index);
    assert_eq!(a.er.to_bits(), c.er.to_bits());
}

#[test]
fn optimum_beats_random_candidates() {
    use rand::{Rng, SeedableRng};
    let target = StatsSummary::from_mean_std(55.6, 19.1);
    let grid = ParameterGrid::published();
    let restrict: IndexRestriction = "30:36,4:10,174:180,13:19,35:40".parse().unwrap();
    let best = grid_search_stats(10.0, 97.0, &target, &grid, Some(&restrict)).unwrap();
    let recomputed = robust_harvest::calibration::error_metric(&target, &model_stats(97.0, &best.model).unwrap()).unwrap();
    assert_eq!(recomputed.to_bits(), best.er.to_bits());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let idx = CandidateIndex::new(
            rng.gen_range(30..=36),
            rng.gen_range(4..=10),
            rng.gen_range(174..=180),
            rng.gen_range(13..=19),
            rng.gen_range(35..=40),
        );
        if let CandidateEval::Evaluated { er, .. } = evaluate_candidate(&idx, 10.0, 97.0, &target, &grid).unwrap() {
            assert!(best.er <= er, "{idx}: {er} < {}", best.er);
        }
    }
}

#[test]
fn mesh_refinement_converges() {
    let problem = reference_problem(TerminalReward::zero());
    let probes = [0.2, 0.4, 0.6, 0.8, 1.0];
    let mut rows = Vec::new();
    for k in 0..4 {
        let grid = GridSpec::new(600 << k, 25 << k).unwrap();
        let sol = robust_harvest::hjb::solve(&problem, &grid, Scheme::Implicit).unwrap();
        let per = grid.pop_steps as f64;
        rows.push(probes.iter().map(|n| sol.value.get(0, (n * per).round() as usize)).collect::<Vec<_>>());
    }
    let changes: Vec<f64> = rows
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    assert!(changes.windows(2).all(|c| c[1] < c[0]), "{changes:?}");
}

fn coarse_solution() -> &'static robust_harvest::hjb::Solution {
    static CELL: OnceLock<robust_harvest::hjb::Solution> = OnceLock::new();
    CELL.get_or_init(|| {
        let problem = reference_problem(TerminalReward::step(50.0, 0.5));
        robust_harvest::hjb::solve(&problem, &GridSpec::new(2400, 100).unwrap(), Scheme::Implicit).unwrap()
    })
}

fn check_trajectory(tr: &Trajectory, cap: f64) -> Result<(), TestCaseError> {
    for w in tr.samples.windows(2) {
        prop_assert!(w[1].n <= w[0].n);
    }
    for s in &tr.samples {
        prop_assert!((0.0..=1.0).contains(&s.n));
        prop_assert!(s.q >= 0.0 && s.q <= cap);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn backtracked_paths_stay_admissible(n in 0.0f64..=1.0) {
        let sol = coarse_solution();
        let tr = backtrack_trajectory(&sol.value, n).unwrap();
        check_trajectory(&tr, 123.0 / 1e4)?;
        prop_assert_eq!(tr.final_n(), n);
        let qmax = tr.max_q();
        for w in tr.samples.windows(2) {
            let next = w[0].n - sol.value.dt * w[0].q;
            prop_assert!((next - w[1].n).abs() <= 2.0 * sol.value.dt * qmax + 1e-12);
        }
    }
}

#[test]
fn shared_omega_matches_fresh_solve() {
    let problem = reference_problem(TerminalReward::step(50.0, 0.5));
    let grid = GridSpec::new(480, 20).unwrap();
    let omega = Arc::new(omega_for(&problem, &grid));
    let a = robust_harvest::hjb::solve(&problem, &grid, Scheme::SemiImplicit).unwrap();
    let b = robust_harvest::hjb::solve_with(
        Arc::new(problem),
        &grid,
        Scheme::SemiImplicit,
        omega,
        Default::default(),
    )
    .unwrap();
    assert_eq!(a.value.values(), b.value.values());
    assert_eq!(a.policy, b.policy);
}
