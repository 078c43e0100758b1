//! Plain-text persistence for trajectories, estimates and run configs.
//!
//! Trajectory files look like
//!
//! ```text
//! # seed=42
//! i,z1,z2,z3,s,forced
//! 0,0.0000000000000000e0,...,0.0000000000000000e0,0
//! ```
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::simulator::{Record, Trajectory};

const SEED_PREFIX: &str = "# seed=";

fn fmt_f64(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("writing to a String");
}

/// Renders a trajectory in file format.
pub fn trajectory_to_string(traj: &Trajectory) -> String {
    let dim = traj.state_dim();
    let mut out = String::with_capacity(traj.records().len() * (dim + 2) * 24);
    writeln!(out, "{SEED_PREFIX}{}", traj.seed()).unwrap();
    out.push('i');
    for j in 1..=dim {
        write!(out, ",z{j}").unwrap();
    }
    out.push_str(",s,forced\n");
    for (i, r) in traj.records().iter().enumerate() {
        write!(out, "{i}").unwrap();
        for &v in &r.z {
            out.push(',');
            fmt_f64(&mut out, v);
        }
        out.push(',');
        fmt_f64(&mut out, r.s);
        writeln!(out, ",{}", u8::from(r.forced)).unwrap();
    }
    out
}

pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(trajectory_to_string(traj).as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(path)?;
    parse_trajectory(&text, path)
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_finite(field: &str, path: &Path, line: usize, column: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_error(path, line, format!("column {column}: not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(parse_error(path, line, format!("column {column}: non-finite value {v}")));
    }
    Ok(v)
}

/// Parses trajectory text; `path` is only used in error messages.
pub fn parse_trajectory(text: &str, path: &Path) -> Result<Trajectory> {
    let mut seed = 0u64;
    let mut header: Option<Vec<String>> = None;
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(v) = line.strip_prefix(SEED_PREFIX) {
                seed = v
                    .trim()
                    .parse()
                    .map_err(|_| parse_error(path, line_no, format!("bad seed {v:?}")))?;
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let Some(cols) = &header else {
            let cols: Vec<String> = fields.iter().map(|f| f.trim().to_string()).collect();
            let d = cols.len().saturating_sub(3);
            let ok = cols.len() >= 4
                && cols[0] == "i"
                && cols[cols.len() - 2] == "s"
                && cols[cols.len() - 1] == "forced"
                && (1..=d).all(|j| cols[j] == format!("z{j}"));
            if !ok {
                return Err(parse_error(
                    path,
                    line_no,
                    format!("expected header i,z1,...,zd,s,forced, got {line:?}"),
                ));
            }
            header = Some(cols);
            continue;
        };
        if fields.len() != cols.len() {
            return Err(parse_error(
                path,
                line_no,
                format!("expected {} columns, found {}", cols.len(), fields.len()),
            ));
        }
        let i: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("bad record index {:?}", fields[0])))?;
        if i != records.len() {
            return Err(parse_error(
                path,
                line_no,
                format!("record index {i}, expected {}", records.len()),
            ));
        }
        let d = cols.len() - 3;
        let z = (0..d)
            .map(|j| parse_finite(fields[1 + j], path, line_no, &cols[1 + j]))
            .collect::<Result<Vec<f64>>>()?;
        let s = parse_finite(fields[d + 1], path, line_no, "s")?;
        let forced = match fields[d + 2].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(parse_error(
                    path,
                    line_no,
                    format!("forced must be 0 or 1, got {other:?}"),
                ))
            }
        };
        if i == 0 && (s != 0.0 || forced) {
            return Err(parse_error(path, line_no, "record 0 must have s = 0 and forced = 0"));
        }
        if i > 0 && s <= 0.0 {
            return Err(parse_error(path, line_no, format!("sojourn must be positive, got {s}")));
        }
        records.push(Record { z, s, forced });
    }
    if header.is_none() {
        return Err(parse_error(path, 1, "missing header"));
    }
    if records.is_empty() {
        return Err(Error::EmptyTrajectory(path.to_path_buf()));
    }
    Trajectory::new(records, seed)
}

/// Renders `s,f_hat[,f_true]` rows.
pub fn estimate_to_string(grid: &[f64], f_hat: &[f64], f_true: Option<&[f64]>) -> String {
    let mut out = String::new();
    out.push_str(if f_true.is_some() { "s,f_hat,f_true\n" } else { "s,f_hat\n" });
    for (j, (&s, &f)) in grid.iter().zip(f_hat).enumerate() {
        fmt_f64(&mut out, s);
        out.push(',');
        fmt_f64(&mut out, f);
        if let Some(t) = f_true {
            out.push(',');
            fmt_f64(&mut out, t[j]);
        }
        out.push('\n');
    }
    out
}

pub fn write_estimate(path: &Path, grid: &[f64], f_hat: &[f64], f_true: Option<&[f64]>) -> Result<()> {
    if grid.len() != f_hat.len() || f_true.is_some_and(|t| t.len() != grid.len()) {
        return Err(Error::Configuration("estimate columns differ in length".into()));
    }
    fs::write(path, estimate_to_string(grid, f_hat, f_true))?;
    Ok(())
}

/// Rows of an estimate file: `(s, f_hat, f_true)`.
pub fn read_estimate(path: &Path) -> Result<Vec<(f64, f64, Option<f64>)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let width = match lines.next().map(|(_, l)| l.trim()) {
        Some("s,f_hat") => 2,
        Some("s,f_hat,f_true") => 3,
        other => {
            return Err(parse_error(path, 1, format!("unexpected header {other:?}")));
        }
    };
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(parse_error(
                path,
                idx + 1,
                format!("expected {width} columns, found {}", fields.len()),
            ));
        }
        let s = parse_finite(fields[0], path, idx + 1, "s")?;
        let f = parse_finite(fields[1], path, idx + 1, "f_hat")?;
        let t = if width == 3 {
            Some(parse_finite(fields[2], path, idx + 1, "f_true")?)
        } else {
            None
        };
        rows.push((s, f, t));
    }
    Ok(rows)
}

/// Which built-in model a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Bench,
    /// Unit-interval toy model; `base_rate` is its constant hazard.
    Interval,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bench" => Ok(Self::Bench),
            "interval" => Ok(Self::Interval),
            other => Err(Error::Configuration(format!(
                "unknown model {other:?} (expected bench or interval)"
            ))),
        }
    }
}

/// Parameters of one command run. Every field has a flag of the same name
/// (with `-` for `_`) and a config-file key.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub n_jumps: usize,
    pub seed: u64,
    pub sigma2: f64,
    pub epsilon: f64,
    pub base_rate: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub r1: f64,
    pub r2: f64,
    pub grid: usize,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub truth: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Bench,
            n_jumps: 50_000,
            seed: 0,
            sigma2: 1e-4,
            epsilon: 0.1,
            base_rate: 5.0,
            alpha: 1.0 / 3.0,
            horizon: 0.8,
            r1: 0.05,
            r2: 0.75,
            grid: 128,
            input: None,
            out: None,
            truth: false,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Configuration(format!("bad value for {key}: {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Configuration(format!("bad value for {key}: {value:?}"))),
    }
}

impl RunConfig {
    /// Sets one parameter by key; `-` and `_` are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "model" => self.model = value.parse()?,
            "n_jumps" => self.n_jumps = parse_value(&key, value)?,
            "seed" => self.seed = parse_value(&key, value)?,
            "sigma2" => self.sigma2 = parse_value(&key, value)?,
            "epsilon" => self.epsilon = parse_value(&key, value)?,
            "base_rate" => self.base_rate = parse_value(&key, value)?,
            "alpha" => self.alpha = parse_value(&key, value)?,
            "horizon" => self.horizon = parse_value(&key, value)?,
            "r1" => self.r1 = parse_value(&key, value)?,
            "r2" => self.r2 = parse_value(&key, value)?,
            "grid" => self.grid = parse_value(&key, value)?,
            "input" => self.input = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "truth" => self.truth = parse_bool(&key, value)?,
            _ => return Err(Error::Configuration(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file on top of `self`. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(parse_error(path, idx + 1, format!("expected key=value, got {line:?}")));
            };
            self.set(key, value)
                .map_err(|e| parse_error(path, idx + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)?;
        self.apply_text(&text, path)
    }
}
