use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::calibration::{CompetitionSample, WeightSeries};
use crate::error::{Error, Result};
use crate::hjb::{InvariantReport, PolicyGrid, SchemeDifference, ValueGrid};
use crate::policy::Trajectory;
use crate::robust::DistortedDensity;

fn csv_err(path: &Path, row: usize, msg: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        row,
        msg: msg.into(),
    }
}

fn reader(path: &Path, expected: &[&str]) -> Result<::csv::Reader<File>> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(::csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, 0, e.to_string()))?;
    let header = rdr.headers().map_err(|e| csv_err(path, 0, e.to_string()))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(csv_err(
            path,
            0,
            format!(
                "unexpected header `{}` (expected `{}`)",
                header.iter().collect::<Vec<_>>().join(","),
                expected.join(",")
            ),
        ));
    }
    Ok(rdr)
}

/// Reads every data row as numbers; row indices in errors count data rows from 1.
fn numeric_rows(path: &Path, expected: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = reader(path, expected)?;
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| csv_err(path, row, e.to_string()))?;
        let nums = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| csv_err(path, row, format!("`{f}` is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(nums);
    }
    Ok(rows)
}

/// Reads a `day,avg_weight_g` file.
pub fn load_weight_series(path: &Path) -> Result<WeightSeries> {
    let rows = numeric_rows(path, &["day", "avg_weight_g"])?;
    if rows.len() < 3 {
        return Err(csv_err(path, rows.len(), format!("need at least 3 rows, found {}", rows.len())));
    }
    for (k, r) in rows.iter().enumerate() {
        if !(r[1] > 0.0) {
            return Err(csv_err(path, k + 1, format!("weight {} is not positive", r[1])));
        }
        if k > 0 && !(r[0] > rows[k - 1][0]) {
            return Err(csv_err(path, k + 1, "days must be strictly increasing"));
        }
    }
    WeightSeries::new(rows.into_iter().map(|r| (r[0], r[1])).collect())
}

/// Reads a one-column `weight_g` file; `day` is the sampling day.
pub fn load_competition_sample(path: &Path, day: f64) -> Result<CompetitionSample> {
    let rows = numeric_rows(path, &["weight_g"])?;
    if rows.is_empty() {
        return Err(csv_err(path, 0, "no weights"));
    }
    if rows.len() < 2 {
        return Err(csv_err(path, 1, "need at least 2 weights"));
    }
    for (k, r) in rows.iter().enumerate() {
        if !(r[0] > 0.0) {
            return Err(csv_err(path, k + 1, format!("weight {} is not positive", r[0])));
        }
    }
    CompetitionSample::new(day, rows.into_iter().map(|r| r[0]).collect())
}

/// Every `stride`-th index of `0..=last`, always including `last`.
fn strided(last: usize, stride: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=last).step_by(stride.max(1)).collect();
    if v.last() != Some(&last) {
        v.push(last);
    }
    v
}

/// Output thinning for large grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Strides {
    pub t: usize,
    pub n: usize,
}

impl Default for Strides {
    fn default() -> Self {
        Strides { t: 1, n: 1 }
    }
}

/// A grid of values in row-major `(i, j)` order with uniform spacing.
pub struct GridView<'a> {
    pub time_steps: usize,
    pub pop_steps: usize,
    /// Growth-clock day of row 0.
    pub t0: f64,
    pub dt: f64,
    pub dn: f64,
    pub values: &'a [f64],
}

impl<'a> GridView<'a> {
    pub fn of_value(v: &'a ValueGrid) -> Self {
        GridView {
            time_steps: v.grid.time_steps,
            pop_steps: v.grid.pop_steps,
            t0: v.problem.growth_offset,
            dt: v.dt,
            dn: v.dn,
            values: v.values(),
        }
    }

    pub fn of_policy(p: &'a PolicyGrid, t0: f64) -> Self {
        GridView {
            time_steps: p.grid.time_steps,
            pop_steps: p.grid.pop_steps,
            t0,
            dt: p.dt,
            dn: p.dn,
            values: p.values(),
        }
    }

    pub fn of_difference(d: &'a SchemeDifference, t0: f64) -> Self {
        GridView {
            time_steps: d.grid.time_steps,
            pop_steps: d.grid.pop_steps,
            t0,
            dt: d.dt,
            dn: d.dn,
            values: &d.values,
        }
    }
}

/// Writes `t_day,n,<column>` rows in `(i, j)` ascending order with 17
/// significant digits, so every value reads back to the same double.
pub fn write_grid_csv(view: &GridView<'_>, column: &str, strides: Strides, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t_day,n,{column}")?;
    let width = view.pop_steps + 1;
    let js = strided(view.pop_steps, strides.n);
    for i in strided(view.time_steps, strides.t) {
        let t = view.t0 + i as f64 * view.dt;
        for &j in &js {
            let n = j as f64 * view.dn;
            writeln!(w, "{t:.16e},{n:.16e},{:.16e}", view.values[i * width + j])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Grid read back from CSV: distinct `t` and `n` coordinates and row-major values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTable {
    pub times: Vec<f64>,
    pub pops: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn read_grid_csv(path: &Path, column: &str) -> Result<GridTable> {
    let rows = numeric_rows(path, &["t_day", "n", column])?;
    let mut times: Vec<f64> = Vec::new();
    let mut pops: Vec<f64> = Vec::new();
    for r in &rows {
        if times.last() != Some(&r[0]) {
            times.push(r[0]);
        }
        if times.len() == 1 {
            pops.push(r[1]);
        }
    }
    if times.len() * pops.len() != rows.len() {
        return Err(csv_err(path, rows.len(), "rows do not form a rectangular grid"));
    }
    Ok(GridTable {
        times,
        pops,
        values: rows.into_iter().map(|r| r[2]).collect(),
    })
}

/// Writes `t_day,n,q,omega_g`, with `t_day` on the growth clock.
pub fn write_trajectory_csv(trajectory: &Trajectory, stride: usize, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t_day,n,q,omega_g")?;
    for k in strided(trajectory.samples.len() - 1, stride) {
        let s = trajectory.samples[k];
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            trajectory.growth_offset + s.t,
            s.n,
            s.q,
            s.omega
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `t_day,wmax_g,density_per_g` for each density in turn.
pub fn write_density_csv(densities: &[DistortedDensity], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t_day,wmax_g,density_per_g")?;
    for d in densities {
        for (wmax, p) in d.nodes.iter().zip(d.density()) {
            writeln!(w, "{:.16e},{wmax:.16e},{p:.16e}", d.t)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let k = f.read(&mut buf)?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Provenance record written next to every run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub scheme: Option<String>,
    pub config_echo: Option<String>,
    /// Input file name to sha256 digest.
    pub inputs: BTreeMap<String, String>,
    /// Output file name to sha256 digest.
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
    pub invariants: Vec<(String, InvariantReport)>,
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            scheme: None,
            config_echo: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            wall_clock_seconds: 0.0,
            invariants: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Records digests of `files` inside `dir`.
    pub fn add_outputs(&mut self, dir: &Path, files: &[PathBuf]) -> Result<()> {
        for f in files {
            let name = f.strip_prefix(dir).unwrap_or(f).display().to_string();
            self.outputs.insert(name, sha256_file(f)?);
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Validation(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
