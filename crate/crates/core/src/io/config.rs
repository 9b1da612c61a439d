use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::growth::{MaxWeightDistribution, UncertainGrowthModel, DEFAULT_QUAD_POINTS};
use crate::hjb::{GridSpec, HarvestProblem, TerminalForm, TerminalReward, ALPHA};
use crate::policy::ProblemVariant;
use crate::robust::UncertaintyAversion;

const SECTIONS: &[(&str, &[&str])] = &[
    ("model", &["w0", "r", "w_lo", "w_hi", "a", "b", "quad_points"]),
    (
        "problem",
        &[
            "horizon",
            "growth_offset",
            "delta",
            "h",
            "alpha",
            "n_max",
            "terminal",
            "s_bar",
            "eta",
            "mu",
        ],
    ),
    ("grid", &["time_steps", "pop_steps"]),
    ("output", &["dir", "t_stride", "n_stride"]),
];

const VARIANT_KEYS: &[&str] = &["delta", "h", "eta", "mu", "terminal", "s_bar"];

/// Everything a solver run needs, decoded from a `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub w0: f64,
    pub r: f64,
    pub w_lo: f64,
    pub w_hi: f64,
    pub a: f64,
    pub b: f64,
    pub quad_points: usize,
    pub horizon: f64,
    pub growth_offset: f64,
    pub delta: f64,
    pub h: f64,
    pub n_max: f64,
    pub terminal: TerminalReward,
    pub eta: UncertaintyAversion,
    pub grid: GridSpec,
    pub dir: Option<String>,
    pub t_stride: usize,
    pub n_stride: usize,
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Raw entries of one section (or of the whole file for flat files).
struct Table<'a> {
    origin: &'a str,
    entries: HashMap<String, Entry>,
}

impl Table<'_> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Config {
            path: self.origin.to_string(),
            line,
            msg: msg.into(),
        }
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn required(&self, key: &str) -> Result<&Entry> {
        self.raw(key).ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    fn parse<T: std::str::FromStr>(&self, e: &Entry, key: &str) -> Result<T> {
        e.value
            .parse()
            .map_err(|_| self.err(e.line, format!("cannot parse `{}` as a value for {key}", e.value)))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let e = self.required(key)?;
        self.parse(e, key)
    }

    fn opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key).map(|e| self.parse(e, key)).transpose()
    }
}

fn split_lines<'a>(
    origin: &'a str,
    text: &str,
    section_allowed: impl Fn(&str) -> Option<Vec<&'static str>>,
    flat_keys: &[&str],
) -> Result<Vec<(Option<String>, Table<'a>)>> {
    let mut tables: Vec<(Option<String>, Table<'a>)> = vec![(
        None,
        Table {
            origin,
            entries: HashMap::new(),
        },
    )];
    let mut allowed: Vec<&str> = flat_keys.to_vec();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Config {
            path: origin.to_string(),
            line,
            msg,
        };
        if let Some(inner) = content.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| err(format!("malformed section header `{content}`")))?
                .trim();
            allowed = section_allowed(name).ok_or_else(|| err(format!("unknown section [{name}]")))?;
            tables.push((
                Some(name.to_string()),
                Table {
                    origin,
                    entries: HashMap::new(),
                },
            ));
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !allowed.contains(&key) {
            let section = tables.last().and_then(|t| t.0.clone());
            return Err(err(match section {
                Some(s) => format!("unknown key {key} in [{s}]"),
                None => format!("unknown key {key}"),
            }));
        }
        let table = &mut tables.last_mut().unwrap().1;
        if let Some(prev) = table.entries.get(key) {
            return Err(err(format!("duplicate key {key} (first set on line {})", prev.line)));
        }
        table.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    Ok(tables)
}

fn parse_numbers(t: &Table<'_>, e: &Entry, key: &str, words: &[&str]) -> Result<Vec<f64>> {
    words
        .iter()
        .map(|w| {
            w.parse::<f64>()
                .map_err(|_| t.err(e.line, format!("cannot parse `{w}` as a number in {key}")))
        })
        .collect()
}

fn pairs(t: &Table<'_>, e: &Entry, key: &str, nums: Vec<f64>) -> Result<Vec<(f64, f64)>> {
    if nums.is_empty() || nums.len() % 2 != 0 {
        return Err(t.err(e.line, format!("{key} table needs `n value` pairs")));
    }
    Ok(nums.chunks(2).map(|c| (c[0], c[1])).collect())
}

fn parse_terminal(t: &Table<'_>, s_bar: Option<f64>) -> Result<Option<TerminalReward>> {
    let Some(e) = t.raw("terminal") else {
        return Ok(None);
    };
    let words: Vec<&str> = e.value.split_whitespace().collect();
    let nums = parse_numbers(t, e, "terminal", words.get(1..).unwrap_or(&[]))?;
    let form = match (words.first().copied(), nums.as_slice()) {
        (Some("zero"), []) => TerminalForm::Zero,
        (Some("step"), &[height, threshold]) => TerminalForm::Step { height, threshold },
        (Some("table"), _) => TerminalForm::Table(pairs(t, e, "terminal", nums)?),
        _ => {
            return Err(t.err(
                e.line,
                format!("terminal must be `zero`, `step HEIGHT THRESHOLD` or `table n S ...`, got `{}`", e.value),
            ))
        }
    };
    let implied = match &form {
        TerminalForm::Zero => 0.0,
        TerminalForm::Step { height, .. } => *height,
        TerminalForm::Table(points) => points.iter().map(|p| p.1).fold(0.0, f64::max),
    };
    Ok(Some(TerminalReward {
        form,
        s_bar: s_bar.unwrap_or(implied),
    }))
}

fn parse_eta(t: &Table<'_>, n_max: f64, default_form: bool) -> Result<Option<UncertaintyAversion>> {
    let mu: Option<f64> = t.opt("mu")?;
    let (words, line): (Vec<&str>, usize) = match t.raw("eta") {
        Some(e) => (e.value.split_whitespace().collect(), e.line),
        None if default_form => (vec!["linear-decreasing"], 0),
        None => {
            return match mu {
                Some(_) => Err(Error::MissingKey("eta".into())),
                None => Ok(None),
            }
        }
    };
    let entry = Entry {
        value: words.join(" "),
        line,
    };
    let nums = parse_numbers(t, &entry, "eta", words.get(1..).unwrap_or(&[]))?;
    let scale = |inline: &[f64]| -> Result<f64> {
        match (inline, mu) {
            ([m], _) => Ok(*m),
            ([], Some(m)) => Ok(m),
            ([], None) => Err(Error::MissingKey("mu".into())),
            _ => Err(t.err(line, "too many numbers after the eta form")),
        }
    };
    let eta = match words.first().copied() {
        Some("constant") => UncertaintyAversion::Constant(scale(&nums)?),
        Some("linear-decreasing") => UncertaintyAversion::LinearDecreasing {
            mu: scale(&nums)?,
            n_max,
        },
        Some("affine") => match nums.as_slice() {
            &[intercept, slope] => UncertaintyAversion::Affine { intercept, slope },
            _ => return Err(t.err(line, "affine eta needs `affine INTERCEPT SLOPE`")),
        },
        Some("table") => UncertaintyAversion::Table(pairs(t, &entry, "eta", nums)?),
        _ => {
            return Err(t.err(
                line,
                format!(
                    "eta must be constant, linear-decreasing, affine or table, got `{}`",
                    entry.value
                ),
            ))
        }
    };
    Ok(Some(eta))
}

impl RunConfig {
    pub fn parse_str(text: &str, origin: &str) -> Result<Self> {
        let all: Vec<&str> = SECTIONS.iter().flat_map(|s| s.1.iter().copied()).collect();
        let tables = split_lines(
            origin,
            text,
            |name| SECTIONS.iter().find(|s| s.0 == name).map(|s| s.1.to_vec()),
            &all,
        )?;
        let mut merged = Table {
            origin,
            entries: HashMap::new(),
        };
        for (_, t) in tables {
            for (k, e) in t.entries {
                if let Some(prev) = merged.entries.get(&k) {
                    return Err(merged.err(e.line, format!("duplicate key {k} (first set on line {})", prev.line)));
                }
                merged.entries.insert(k, e);
            }
        }
        let t = &merged;

        if let Some(e) = t.raw("alpha") {
            let alpha: f64 = t.parse(e, "alpha")?;
            if alpha != ALPHA {
                return Err(t.err(e.line, format!("only alpha = {ALPHA} is supported, got {alpha}")));
            }
        }
        let n_max = t.f64("n_max")?;
        let terminal = parse_terminal(t, t.opt("s_bar")?)?.ok_or_else(|| Error::MissingKey("terminal".into()))?;
        let eta = parse_eta(t, n_max, true)?.expect("default eta form");
        let cfg = RunConfig {
            w0: t.f64("w0")?,
            r: t.f64("r")?,
            w_lo: t.f64("w_lo")?,
            w_hi: t.f64("w_hi")?,
            a: t.f64("a")?,
            b: t.f64("b")?,
            quad_points: t.opt("quad_points")?.unwrap_or(DEFAULT_QUAD_POINTS),
            horizon: t.f64("horizon")?,
            growth_offset: t.opt("growth_offset")?.unwrap_or(0.0),
            delta: t.f64("delta")?,
            h: t.f64("h")?,
            n_max,
            terminal,
            eta,
            grid: GridSpec::new(
                t.parse(t.required("time_steps")?, "time_steps")?,
                t.parse(t.required("pop_steps")?, "pop_steps")?,
            )?,
            dir: t.raw("dir").map(|e| e.value.clone()),
            t_stride: t.opt("t_stride")?.unwrap_or(1),
            n_stride: t.opt("n_stride")?.unwrap_or(1),
        };
        if cfg.t_stride == 0 || cfg.n_stride == 0 {
            return Err(Error::invalid("stride", "output strides must be at least 1"));
        }
        cfg.to_problem()?;
        Ok(cfg)
    }

    pub fn to_model(&self) -> Result<UncertainGrowthModel> {
        let dist = MaxWeightDistribution::with_resolution(self.w_lo, self.w_hi, self.a, self.b, self.quad_points)?;
        UncertainGrowthModel::new(self.w0, self.r, dist, self.quad_points)
    }

    pub fn to_problem(&self) -> Result<HarvestProblem> {
        let problem = HarvestProblem {
            horizon: self.horizon,
            growth_offset: self.growth_offset,
            delta: self.delta,
            h: self.h,
            terminal: self.terminal.clone(),
            eta: self.eta.clone(),
            model: self.to_model()?,
            n_max: self.n_max,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[model]");
        for (k, v) in [
            ("w0", self.w0),
            ("r", self.r),
            ("w_lo", self.w_lo),
            ("w_hi", self.w_hi),
            ("a", self.a),
            ("b", self.b),
        ] {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        let _ = writeln!(s, "quad_points = {}", self.quad_points);
        let _ = writeln!(s, "\n[problem]");
        for (k, v) in [
            ("horizon", self.horizon),
            ("growth_offset", self.growth_offset),
            ("delta", self.delta),
            ("h", self.h),
            ("alpha", ALPHA),
            ("n_max", self.n_max),
        ] {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        let _ = writeln!(s, "terminal = {}", terminal_text(&self.terminal.form));
        let _ = writeln!(s, "s_bar = {:?}", self.terminal.s_bar);
        let _ = writeln!(s, "eta = {}", eta_text(&self.eta));
        let _ = writeln!(s, "\n[grid]");
        let _ = writeln!(s, "time_steps = {}", self.grid.time_steps);
        let _ = writeln!(s, "pop_steps = {}", self.grid.pop_steps);
        let _ = writeln!(s, "\n[output]");
        if let Some(d) = &self.dir {
            let _ = writeln!(s, "dir = {d}");
        }
        let _ = writeln!(s, "t_stride = {}", self.t_stride);
        let _ = writeln!(s, "n_stride = {}", self.n_stride);
        s
    }
}

fn pair_text(points: &[(f64, f64)]) -> String {
    points
        .iter()
        .map(|(n, v)| format!("{n:?} {v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn terminal_text(form: &TerminalForm) -> String {
    match form {
        TerminalForm::Zero => "zero".into(),
        TerminalForm::Step { height, threshold } => format!("step {height:?} {threshold:?}"),
        TerminalForm::Table(points) => format!("table {}", pair_text(points)),
    }
}

fn eta_text(eta: &UncertaintyAversion) -> String {
    match eta {
        UncertaintyAversion::Constant(mu) => format!("constant {mu:?}"),
        UncertaintyAversion::LinearDecreasing { mu, .. } => format!("linear-decreasing {mu:?}"),
        UncertaintyAversion::Affine { intercept, slope } => format!("affine {intercept:?} {slope:?}"),
        UncertaintyAversion::Table(points) => format!("table {}", pair_text(points)),
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::parse_str(&text, &path.display().to_string())
}

/// Parses a variants file: one `[label]` section per variant, each holding
/// overrides among `delta`, `h`, `eta`, `mu`, `terminal` and `s_bar`. An empty
/// section is the nominal problem.
pub fn parse_variants_str(text: &str, origin: &str, n_max: f64) -> Result<Vec<ProblemVariant>> {
    let tables = split_lines(origin, text, |_| Some(VARIANT_KEYS.to_vec()), &[])?;
    let mut out = Vec::new();
    for (label, t) in tables {
        let Some(label) = label else { continue };
        let variant = ProblemVariant {
            label,
            delta: t.opt("delta")?,
            h: t.opt("h")?,
            eta: parse_eta(&t, n_max, false)?,
            terminal: parse_terminal(&t, t.opt("s_bar")?)?,
        };
        out.push(variant);
    }
    if out.is_empty() {
        return Err(Error::Validation(format!("{origin}: no [variant] sections")));
    }
    Ok(out)
}

pub fn parse_variants(path: &Path, n_max: f64) -> Result<Vec<ProblemVariant>> {
    let text = std::fs::read_to_string(path)?;
    parse_variants_str(&text, &path.display().to_string(), n_max)
}
