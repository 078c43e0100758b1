//! Estimation of the sojourn density from one observed trajectory.
//!
//! For a source region `A` and target cells `B_k`, the matched transitions
//! are the indices `i` with `Z_i ∈ A` and `Z_{i+1} ∈ B_k`. Their sojourns
//! `S_{i+1}` drive a counting process `N`, an at-risk process `Y`, the
//! Nelson–Aalen cumulative rate `L̂ = ∫ Y⁺ dN` and its kernel-smoothed
//! derivative `l̂`. The empirical survivor `p̂` weights each cell and
//! `f̂(A, s) = Σ_k l̂(A, B_k, s) p̂(A, B_k, s)`.

mod kernel;
mod region;
mod step;

pub use kernel::Kernel;
pub use region::{build_partition, region_exit_time, Membership, PartitionSpec, Region};
pub use step::{Continuity, StepFunction};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::simulator::Trajectory;

/// Estimation settings.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub kernel: Kernel,
    /// Bandwidth exponent: `b = h^(-alpha)` with `h` matched transitions.
    pub alpha: f64,
    /// Events with sojourn above this time are ignored by the smoother.
    pub horizon_t: f64,
    /// Evaluation window `[r1, r2]` inside `(0, horizon_t)`.
    pub window: (f64, f64),
    pub grid_points: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Epanechnikov,
            alpha: 1.0 / 3.0,
            horizon_t: 0.8,
            window: (0.05, 0.75),
            grid_points: 128,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let (r1, r2) = self.window;
        if !(0.0 < r1 && r1 < r2 && r2 < self.horizon_t && self.horizon_t.is_finite()) {
            return Err(Error::Configuration(format!(
                "need 0 < r1 < r2 < horizon, got r1 = {r1}, r2 = {r2}, horizon = {}",
                self.horizon_t
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Configuration(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.grid_points == 0 {
            return Err(Error::Configuration("grid needs at least one point".into()));
        }
        self.kernel.validate()
    }

    /// Uniform grid over the window; a single point sits at `r1`.
    pub fn grid(&self) -> Vec<f64> {
        let (r1, r2) = self.window;
        let n = self.grid_points;
        if n == 1 {
            return vec![r1];
        }
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    r2
                } else {
                    r1 + (r2 - r1) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

/// Sojourns `S_{i+1}` of the transitions `A → B`, in trajectory order.
pub fn matched_sojourns(traj: &Trajectory, a: &Region, b: &Region) -> Vec<f64> {
    traj.transitions()
        .filter(|(from, _, to)| a.contains(from) && b.contains(to))
        .map(|(_, s, _)| s)
        .collect()
}

/// Number of `i < n` with `Z_i ∈ A`.
pub fn visits(traj: &Trajectory, a: &Region) -> usize {
    traj.transitions().filter(|(from, _, _)| a.contains(from)).count()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Distinct values with multiplicities.
fn tally(sorted: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut times = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for &s in sorted {
        if times.last() == Some(&s) {
            *counts.last_mut().unwrap() += 1;
        } else {
            times.push(s);
            counts.push(1);
        }
    }
    (times, counts)
}

/// `N(t) = #{matched i : S_{i+1} ≤ t}`, right-continuous.
pub fn counting_n(traj: &Trajectory, a: &Region, b: &Region) -> StepFunction {
    let (times, counts) = tally(&sorted(matched_sojourns(traj, a, b)));
    let values = counts
        .iter()
        .scan(0usize, |acc, &c| {
            *acc += c;
            Some(*acc as f64)
        })
        .collect();
    StepFunction::new(times, values, 0.0, Continuity::Right).expect("tally yields sorted times")
}

/// `Y(t) = #{matched i : S_{i+1} ≥ t}`, left-continuous.
pub fn at_risk_y(traj: &Trajectory, a: &Region, b: &Region) -> StepFunction {
    let events = sorted(matched_sojourns(traj, a, b));
    let total = events.len();
    let (times, counts) = tally(&events);
    let values = counts
        .iter()
        .scan(total, |left, &c| {
            *left -= c;
            Some(*left as f64)
        })
        .collect();
    StepFunction::new(times, values, total as f64, Continuity::Left)
        .expect("tally yields sorted times")
}

/// Generalized inverse: `0` for `0`, else `1 / y`.
#[inline]
pub fn y_plus(y: usize) -> f64 {
    if y == 0 {
        0.0
    } else {
        1.0 / y as f64
    }
}

fn check_horizon(a: &Region, horizon_t: f64) -> Result<()> {
    let Some(t_star) = a.exit_time_bound() else {
        return Err(Error::Configuration(format!(
            "region {} has no exit-time bound t*(A)",
            a.label()
        )));
    };
    if !(horizon_t > 0.0 && horizon_t < t_star) {
        return Err(Error::Configuration(format!(
            "horizon {horizon_t} must lie in (0, t*({}) = {t_star})",
            a.label()
        )));
    }
    Ok(())
}

/// Matched events up to the horizon, in trajectory order, with `Y⁺(S)`.
fn weighted_events(traj: &Trajectory, a: &Region, b: &Region, horizon_t: f64) -> Vec<(f64, f64)> {
    let y = at_risk_y(traj, a, b);
    matched_sojourns(traj, a, b)
        .into_iter()
        .filter(|&s| s <= horizon_t)
        .map(|s| (s, y_plus(y.eval(s) as usize)))
        .collect()
}

/// Nelson–Aalen estimate `L̂(t) = ∫₀ᵗ Y⁺ dN` on `[0, horizon_t]`.
///
/// Each event adds `Y⁺(S)` individually, in increasing order of `S`.
pub fn nelson_aalen(
    traj: &Trajectory,
    a: &Region,
    b: &Region,
    horizon_t: f64,
) -> Result<StepFunction> {
    check_horizon(a, horizon_t)?;
    let y = at_risk_y(traj, a, b);
    let events = sorted(matched_sojourns(traj, a, b));
    let mut times: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut acc = 0.0;
    for s in events.into_iter().take_while(|&s| s <= horizon_t) {
        acc += y_plus(y.eval(s) as usize);
        if times.last() == Some(&s) {
            *values.last_mut().unwrap() = acc;
        } else {
            times.push(s);
            values.push(acc);
        }
    }
    StepFunction::new(times, values, 0.0, Continuity::Right)
}

fn check_bandwidth(bandwidth: f64) -> Result<()> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::Configuration(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    Ok(())
}

/// Kernel-smoothed rate `l̂(s) = (1/b) Σ K((s - S)/b) Y⁺(S)` over matched
/// events `S ≤ horizon_t`, evaluated at `points`.
pub fn smoothed_l_at(
    traj: &Trajectory,
    a: &Region,
    b: &Region,
    config: &EstimatorConfig,
    bandwidth: f64,
    points: &[f64],
) -> Result<Vec<f64>> {
    check_bandwidth(bandwidth)?;
    check_horizon(a, config.horizon_t)?;
    let events = weighted_events(traj, a, b, config.horizon_t);
    Ok(points
        .iter()
        .map(|&s| {
            let mut acc = 0.0;
            for &(event, weight) in &events {
                acc += config.kernel.eval((s - event) / bandwidth) * weight;
            }
            acc / bandwidth
        })
        .collect())
}

/// [`smoothed_l_at`] on the configured grid.
pub fn smoothed_l(
    traj: &Trajectory,
    a: &Region,
    b: &Region,
    config: &EstimatorConfig,
    bandwidth: f64,
) -> Result<Vec<f64>> {
    smoothed_l_at(traj, a, b, config, bandwidth, &config.grid())
}

/// Plug-in variance of `l̂`: `(1/b²) Σ K((s - S)/b)² (Y⁺(S))²`.
pub fn smoothed_l_variance_at(
    traj: &Trajectory,
    a: &Region,
    b: &Region,
    config: &EstimatorConfig,
    bandwidth: f64,
    points: &[f64],
) -> Result<Vec<f64>> {
    check_bandwidth(bandwidth)?;
    check_horizon(a, config.horizon_t)?;
    let events = weighted_events(traj, a, b, config.horizon_t);
    Ok(points
        .iter()
        .map(|&s| {
            let acc: f64 = events
                .iter()
                .map(|&(event, weight)| {
                    let k = config.kernel.eval((s - event) / bandwidth);
                    k * k * weight * weight
                })
                .sum();
            acc / (bandwidth * bandwidth)
        })
        .collect())
}

/// `p̂(A, B, t) = #{i : Z_i ∈ A, Z_{i+1} ∈ B, S_{i+1} > t} / #{i < n : Z_i ∈ A}`.
pub fn empirical_survivor(traj: &Trajectory, a: &Region, b: &Region, t: f64) -> Result<f64> {
    let n_visits = visits(traj, a);
    if n_visits == 0 {
        return Err(Error::UndefinedEstimator(format!(
            "no visit to {} before the last record",
            a.label()
        )));
    }
    let survivors = matched_sojourns(traj, a, b).into_iter().filter(|&s| s > t).count();
    Ok(survivors as f64 / n_visits as f64)
}

/// `h^(-alpha)` with `h` the number of matched `A → B` transitions (all of
/// them, regardless of any horizon).
pub fn bandwidth_rule(traj: &Trajectory, a: &Region, b: &Region, alpha: f64) -> Result<f64> {
    bandwidth_from_count(matched_sojourns(traj, a, b).len(), alpha).ok_or_else(|| {
        Error::UndefinedEstimator(format!(
            "no transition from {} to {}",
            a.label(),
            b.label()
        ))
    })
}

pub fn bandwidth_from_count(h: usize, alpha: f64) -> Option<f64> {
    (h > 0).then(|| (h as f64).powf(-alpha))
}

/// Per-cell provenance of a density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub label: String,
    pub matched: usize,
    /// `None` for cells without matched transitions (they contribute 0).
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateMeta {
    pub n_transitions: usize,
    pub visits: usize,
    pub region: String,
    pub horizon_t: f64,
    pub seed: u64,
    pub cells: Vec<CellSummary>,
}

/// `f̂(A, s)` on a grid, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: EstimateMeta,
}

impl DensityEstimate {
    /// Linear interpolation on the grid; `None` outside it.
    pub fn interpolate(&self, s: f64) -> Option<f64> {
        let (first, last) = (*self.grid.first()?, *self.grid.last()?);
        if !(s >= first && s <= last) {
            return None;
        }
        let j = self.grid.partition_point(|&g| g <= s);
        if j == 0 || j == self.grid.len() {
            return Some(self.values[j.saturating_sub(1)]);
        }
        let (g0, g1) = (self.grid[j - 1], self.grid[j]);
        let w = (s - g0) / (g1 - g0);
        Some(self.values[j - 1] * (1.0 - w) + self.values[j] * w)
    }
}

/// Sums products in ascending order so the result does not depend on the
/// order of the partition cells.
pub fn order_free_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// `f̂(A, s) = Σ_k l̂(A, B_k, s) p̂(A, B_k, s)` at arbitrary points.
pub fn estimate_density_at(
    traj: &Trajectory,
    a: &Region,
    partition: &PartitionSpec,
    config: &EstimatorConfig,
    points: &[f64],
) -> Result<(Vec<f64>, EstimateMeta)> {
    config.validate()?;
    check_horizon(a, config.horizon_t)?;
    if partition.is_empty() {
        return Err(Error::Configuration("empty partition".into()));
    }
    partition.check_covers(traj)?;
    let n_visits = visits(traj, a);
    if n_visits == 0 {
        return Err(Error::UndefinedEstimator(format!(
            "no visit to {} before the last record",
            a.label()
        )));
    }

    let per_cell: Vec<(CellSummary, Vec<f64>)> = partition
        .cells()
        .par_iter()
        .map(|cell| -> Result<_> {
            let matched = matched_sojourns(traj, a, cell).len();
            let bandwidth = bandwidth_from_count(matched, config.alpha);
            let products = match bandwidth {
                None => vec![0.0; points.len()],
                Some(bw) => {
                    let l = smoothed_l_at(traj, a, cell, config, bw, points)?;
                    l.into_iter()
                        .zip(points)
                        .map(|(l, &s)| Ok(l * empirical_survivor(traj, a, cell, s)?))
                        .collect::<Result<Vec<f64>>>()?
                }
            };
            Ok((
                CellSummary {
                    label: cell.label().to_string(),
                    matched,
                    bandwidth,
                },
                products,
            ))
        })
        .collect::<Result<_>>()?;

    let values = (0..points.len())
        .map(|j| order_free_sum(per_cell.iter().map(|(_, p)| p[j]).collect()))
        .collect();
    let meta = EstimateMeta {
        n_transitions: traj.n_transitions(),
        visits: n_visits,
        region: a.label().to_string(),
        horizon_t: config.horizon_t,
        seed: traj.seed(),
        cells: per_cell.into_iter().map(|(c, _)| c).collect(),
    };
    Ok((values, meta))
}

/// `f̂(A, ·)` on the configured grid.
pub fn estimate_density(
    traj: &Trajectory,
    a: &Region,
    partition: &PartitionSpec,
    config: &EstimatorConfig,
) -> Result<DensityEstimate> {
    let grid = config.grid();
    let (values, meta) = estimate_density_at(traj, a, partition, config, &grid)?;
    Ok(DensityEstimate { grid, values, meta })
}

/// How the estimation horizon is chosen across the cells `A_l` of a
/// partitioned compact set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HorizonMode {
    /// One horizon for all cells; it must be below `min_l t*(A_l)`.
    Common,
    /// Cells whose `t*(A_l)` is below the configured horizon use
    /// `0.99·t*(A_l)` instead, with `r2` pulled in by the same amount.
    #[default]
    PerCell,
}

/// Piecewise estimate `Σ_l f̂(A_l, s) 1{x ∈ A_l}` over source cells.
#[derive(Debug)]
pub struct DensityMap {
    pub cells: Vec<Region>,
    pub estimates: Vec<Result<DensityEstimate>>,
}

impl DensityMap {
    /// Interpolated estimate for the cell containing `x`; `None` if no cell
    /// contains it, its estimate failed, or `s` is off its grid.
    pub fn evaluate(&self, x: &[f64], s: f64) -> Option<f64> {
        let l = self.cells.iter().position(|c| c.contains(x))?;
        self.estimates[l].as_ref().ok()?.interpolate(s)
    }
}

fn cell_config(cell: &Region, config: &EstimatorConfig, mode: HorizonMode) -> Result<EstimatorConfig> {
    let t_star = cell.exit_time_bound().ok_or_else(|| {
        Error::Configuration(format!("cell {} has no exit-time bound", cell.label()))
    })?;
    if config.horizon_t < t_star || mode == HorizonMode::Common {
        return Ok(config.clone());
    }
    let horizon_t = 0.99 * t_star;
    let shift = config.horizon_t - horizon_t;
    let adjusted = EstimatorConfig {
        horizon_t,
        window: (config.window.0, config.window.1 - shift),
        ..config.clone()
    };
    adjusted.validate()?;
    Ok(adjusted)
}

/// Estimates `f̂(A_l, ·)` for every source cell. Cell failures (no visits,
/// horizon too long) are reported per cell; only a violated common horizon
/// fails the whole call.
pub fn estimate_density_map(
    traj: &Trajectory,
    source_cells: Vec<Region>,
    partition: &PartitionSpec,
    config: &EstimatorConfig,
    mode: HorizonMode,
) -> Result<DensityMap> {
    if mode == HorizonMode::Common {
        let min_t_star = source_cells
            .iter()
            .map(|c| c.exit_time_bound().unwrap_or(0.0))
            .fold(f64::INFINITY, f64::min);
        if !(config.horizon_t < min_t_star) {
            return Err(Error::Configuration(format!(
                "common horizon {} is not below min t*(A_l) = {min_t_star}",
                config.horizon_t
            )));
        }
    }
    let estimates = source_cells
        .par_iter()
        .map(|cell| {
            let cfg = cell_config(cell, config, mode)?;
            estimate_density(traj, cell, partition, &cfg)
        })
        .collect();
    Ok(DensityMap {
        cells: source_cells,
        estimates,
    })
}
