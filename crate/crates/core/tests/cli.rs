use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use robust_harvest::calibration::empirical_stats;
use robust_harvest::io::{load_competition_sample, parse_config, RunConfig};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-harvest")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_config(dir: &Path, tweak: impl Fn(String) -> String) -> PathBuf {
    let text = std::fs::read_to_string(fixture("harvest_step_coarse.cfg")).unwrap();
    let text = text
        .replace("time_steps = 4800", "time_steps = 1200")
        .replace("pop_steps = 100", "pop_steps = 40");
    let path = dir.join("small.cfg");
    std::fs::write(&path, tweak(text)).unwrap();
    path
}

#[test]
fn synthetic_competition_fixtures_match_summaries() {
    let cases = [
        ("competition_2017.csv", 97.0, 234, 55.6, 19.1, 0.8, 52.8, 20.5, 132.0),
        ("competition_2018.csv", 96.0, 189, 57.3, 18.5, 1.2, 54.5, 16.0, 152.0),
        ("competition_2019.csv", 95.0, 227, 56.4, 18.2, 0.9, 54.0, 20.0, 119.5),
        ("competition_2023.csv", 90.0, 297, 52.2, 21.0, 1.4, 46.5, 11.0, 163.0),
    ];
    for (file, day, n, mean, std, skew, median, min, max) in cases {
        let s = empirical_stats(&load_competition_sample(&fixture(file), day).unwrap());
        assert_eq!(s.count, n);
        assert_eq!(format!("{:.1}", s.mean), format!("{mean:.1}"), "{file}");
        assert_eq!(format!("{:.1}", s.std), format!("{std:.1}"), "{file}");
        // one printed digit: within half a unit of the last place
        assert!((s.skew - skew).abs() <= 0.05 + 1e-4, "{file}: {}", s.skew);
        assert_eq!(format!("{:.1}", s.median.unwrap()), format!("{median:.1}"), "{file}");
        assert_eq!(s.min, Some(min));
        assert_eq!(s.max, Some(max));
    }
}

#[test]
fn fit_logistic_recovers_growth_fixture() {
    let o = run(&["fit-logistic", "--input", fixture("growth_2023.csv").to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    let field = |key: &str| -> f64 {
        let rest = &out[out.find(&format!("{key} = ")).unwrap() + key.len() + 3..];
        rest.split_whitespace().next().unwrap().trim_end_matches(',').parse().unwrap()
    };
    assert!((field("w0") - 20.5).abs() < 1e-4, "{out}");
    assert!((field("w_max") - 83.2).abs() < 1e-4, "{out}");
    assert!((field("r") - 0.0272).abs() < 1e-7, "{out}");
}

#[test]
fn calibrate_prints_the_published_row() {
    let o = run(&[
        "calibrate",
        "--competition",
        fixture("competition_2023.csv").to_str().unwrap(),
        "--day",
        "90",
        "--w0",
        "10",
        "--restrict",
        "36:42,26:32,290:296,1:7,36:42",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("r = 0.059, w_lo = 29, w_hi = 293, a = 1, b = 9.75"), "{out}");
    assert!(out.contains("mean 52.2  std 21.0  skew 1.43"), "{out}");
}

#[test]
fn calibrate_needs_a_search_box() {
    let o = run(&[
        "calibrate",
        "--competition",
        fixture("competition_2023.csv").to_str().unwrap(),
        "--day",
        "90",
        "--w0",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let bad = run(&[
        "calibrate",
        "--competition",
        fixture("competition_2023.csv").to_str().unwrap(),
        "--day",
        "90",
        "--w0",
        "10",
        "--restrict",
        "5:1,1:1,1:1,1:1,1:1",
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn unstable_explicit_solve_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |t| t.replace("time_steps = 1200", "time_steps = 20"));
    let o = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--scheme",
        "explicit",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("stability margin (explicit): -"), "{}", stdout(&o));
}

#[test]
fn solve_writes_grids_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |t| t);
    let out = dir.path().join("out");
    let o = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--scheme",
        "semi",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let value = std::fs::read_to_string(out.join("value.csv")).unwrap();
    assert!(value.starts_with("t_day,n,value\n"));
    // 1200 / 20 + 1 time rows, 40 + 1 population nodes
    assert_eq!(value.lines().count(), 1 + 61 * 41);
    let policy = std::fs::read_to_string(out.join("policy.csv")).unwrap();
    assert!(policy.starts_with("t_day,n,q\n"));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["scheme"], "semi");
    let echo = manifest["config_echo"].as_str().unwrap();
    assert_eq!(RunConfig::parse_str(echo, "echo").unwrap(), parse_config(&cfg).unwrap());
    let digest = manifest["outputs"]["value.csv"].as_str().unwrap();
    assert_eq!(digest, robust_harvest::io::sha256_file(&out.join("value.csv")).unwrap());
}

#[test]
fn compare_schemes_reports_three_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |t| t);
    let out = dir.path().join("cmp");
    let o = run(&["compare-schemes", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    for pair in ["explicit-semi", "explicit-implicit", "semi-implicit"] {
        assert!(text.contains(pair), "{text}");
        assert!(out.join(format!("diff_{pair}.csv")).exists());
    }
    assert!(out.join("manifest.json").exists());
}

#[test]
fn trajectory_and_sensitivity_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |t| t);
    let out = dir.path().join("traj");
    let o = run(&[
        "trajectory",
        "--config",
        cfg.to_str().unwrap(),
        "--scheme",
        "implicit",
        "--terminal",
        "0.2",
        "0.5",
        "--density-days",
        "61",
        "121",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let tr = std::fs::read_to_string(out.join("trajectory_n0.5.csv")).unwrap();
    assert!(tr.starts_with("t_day,n,q,omega_g\n"));
    let dens = std::fs::read_to_string(out.join("density_n0.2.csv")).unwrap();
    assert!(dens.starts_with("t_day,wmax_g,density_per_g\n"));
    assert_eq!(dens.lines().count(), 1 + 2 * 1000);

    let sens = dir.path().join("sens");
    let o = run(&[
        "sensitivity",
        "--config",
        cfg.to_str().unwrap(),
        "--variants",
        fixture("variants.cfg").to_str().unwrap(),
        "--out",
        sens.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sens.join("sensitivity.json")).unwrap()).unwrap();
    let variants = report["variants"].as_array().unwrap();
    assert_eq!(variants.len(), 4);
    assert_eq!(variants[0]["max_value_excess"], 0.0);
    for v in &variants[1..] {
        assert!(v["max_value_excess"].as_f64().unwrap() <= 0.0, "{v}");
    }
    assert!(sens.join("manifest.json").exists());
}

#[test]
fn bad_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |t| t.replace("delta = 0.04", "delta = 0.04\ndelta = 0.05"));
    let o = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--scheme",
        "implicit",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("small.cfg:15: duplicate key delta (first set on line 14)"), "{err}");
}
