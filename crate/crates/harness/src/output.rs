//! Per-run CSV traces, manifests and atomic file writes.

use std::path::Path;

use serde::Serialize;

use robust_bandits::trace::RegretTrace;

use crate::bounds::BoundCurve;
use crate::config::ExperimentConfig;
use crate::HarnessError;

pub const CSV_HEADER: [&str; 6] =
    ["t", "regret_per_agent_mean", "regret_per_agent_max", "group_regret", "bound_primary", "bound_secondary"];

/// Rows are emitted at every `t ≤ DENSE_UNTIL`, then geometrically.
pub const DENSE_UNTIL: u64 = 1000;
pub const GEOMETRIC_RATIO: f64 = 1.02;

/// `%.9g`-style rendering: nine significant digits, trailing zeros dropped,
/// exponent form outside `[1e-4, 1e9)`.
pub fn format_g9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let prec = (8 - exp) as usize;
    strip_zeros(&format!("{x:.prec$}")).to_string()
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds at which rows are written: every `t ≤ 1000`, then `×1.02`
/// steps, always ending at `horizon`.
pub fn time_grid(horizon: u64) -> Vec<u64> {
    let mut grid: Vec<u64> = (1..=horizon.min(DENSE_UNTIL)).collect();
    let mut t = horizon.min(DENSE_UNTIL);
    while t < horizon {
        let next = ((t as f64) * GEOMETRIC_RATIO).ceil() as u64;
        t = next.max(t + 1).min(horizon);
        grid.push(t);
    }
    grid
}

/// Which envelopes ride along with a trace.
#[derive(Debug, Clone, Copy)]
pub struct Envelopes {
    pub primary: BoundCurve,
    pub secondary: BoundCurve,
    pub d: usize,
    pub alpha: f64,
    pub m: usize,
}

/// Renders a trace as CSV text.
pub fn render_csv(trace: &RegretTrace, env: &Envelopes) -> Result<String, HarnessError> {
    let grid = time_grid(trace.len());
    let per_agent = trace.cumulative_at(&grid);
    let group = trace.group_at(&grid);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for ((&t, &r), &g) in grid.iter().zip(&per_agent).zip(&group) {
        let p = env.primary.eval(env.d, t as f64, env.alpha, env.m as f64);
        let s = env.secondary.eval(env.d, t as f64, env.alpha, env.m as f64);
        // Every good agent plays the same arms, so mean and max coincide.
        w.write_record([t.to_string(), format_g9(r), format_g9(r), format_g9(g), format_g9(p), format_g9(s)])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Csv(e.to_string())
}

/// A parsed numeric CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<Vec<f64>, HarnessError> {
        let j = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::Csv(format!("missing column {name}")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn parse_csv(text: &str) -> Result<Table, HarnessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|x| x.parse::<f64>().map_err(|_| HarnessError::Csv(format!("not a number: {x:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn read_csv(path: &Path) -> Result<Table, HarnessError> {
    parse_csv(&read_text(path)?)
}

pub fn read_text(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.display().to_string(), e))
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let io = |e| HarnessError::Io(path.display().to_string(), e);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunInfo {
    pub seed: u64,
    pub library_version: String,
    pub git_revision: String,
    pub elapsed_seconds: f64,
    pub csv: String,
    pub status: String,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    run: &'a RunInfo,
    config: &'a ExperimentConfig,
}

pub fn render_manifest(info: &RunInfo, config: &ExperimentConfig) -> String {
    toml::to_string(&Manifest { run: info, config }).expect("manifest serializes")
}

/// `git rev-parse HEAD` in the working directory, or `"unknown"`.
pub fn git_revision() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}
