//! Reference quantities for validating the simulator and the estimators.
//!
//! For a source `x`, target `y` and elapsed time `t ≤ t*(x)`:
//!
//! ```text
//! fQ̃(x, t, y) = f(x, t) Q̃(x, t, y)
//! H(x, y, t)  = ∫_t^{t*(x)} fQ̃(x, s, y) ds + G(x, t*(x)) Q̃(x, t*(x), y)
//! λ̃(x, y, t)  = fQ̃(x, t, y) / H(x, y, t)
//! G̃(x, y, t)  = H(x, y, t) / H(x, y, 0)
//! ```
//!
//! `λ̃` is the rate of the sojourn given both endpoints and `G̃` its survival
//! function. The Monte Carlo oracles average these over stationary pairs of
//! consecutive post-jump locations.

use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{empirical_survivor, Region};
use crate::model::{self, Model, State};
use crate::quadrature::Quadrature;
use crate::simulator::{chain_rng, simulate_chain, Trajectory};
use crate::stats::{batch_ratio, RatioEstimate};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub quad_tol: f64,
    /// Transitions kept after burn-in by the Monte Carlo oracles.
    pub mc_samples: usize,
    pub burn_in: usize,
    pub batches: usize,
    pub seed: u64,
    /// Equal panels the elapsed-time range is cut into before adapting.
    pub initial_panels: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            quad_tol: 1e-10,
            mc_samples: 1_000_000,
            burn_in: 1000,
            batches: 20,
            seed: 0x5eed,
            initial_panels: 64,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.quad_tol > 0.0) {
            return Err(Error::Configuration("quad_tol must be positive".into()));
        }
        if self.mc_samples < 1000 {
            return Err(Error::Configuration(format!(
                "mc_samples must be at least 1000, got {}",
                self.mc_samples
            )));
        }
        if self.batches < 2 {
            return Err(Error::Configuration("need at least two batches".into()));
        }
        Ok(())
    }

    fn quadrature(&self) -> Quadrature {
        Quadrature::with_abs_tol(self.quad_tol).with_initial_panels(self.initial_panels)
    }

    fn model_quadrature(&self) -> Quadrature {
        Quadrature::with_abs_tol(self.quad_tol)
    }
}

fn finite_exit_time<M: Model + ?Sized>(model: &M, x: &[f64], t: f64) -> Result<f64> {
    if !model.contains(x) {
        return Err(Error::Domain(format!("{x:?} is not in {}", model.name())));
    }
    let t_star = model.exit_time(x);
    if !t_star.is_finite() {
        return Err(Error::UndefinedOracle(format!(
            "infinite exit time from {x:?}"
        )));
    }
    if !(t >= 0.0 && t <= t_star + model::TIME_TOL) {
        return Err(Error::Horizon {
            t,
            exit_time: t_star,
        });
    }
    Ok(t_star)
}

/// `fQ̃(x, t, y) = f(x, t) Q̃(x, t, y)`.
pub fn f_q<M: Model + ?Sized>(
    model: &M,
    x: &[f64],
    t: f64,
    y: &[f64],
    config: &OracleConfig,
) -> Result<f64> {
    let q = model.kernel_density(x, t, y)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    Ok(model::sojourn_density_with(model, x, t, &config.model_quadrature())? * q)
}

/// `GQ̃(x, t*(x), y)`.
pub fn g_q_at_exit<M: Model + ?Sized>(
    model: &M,
    x: &[f64],
    y: &[f64],
    config: &OracleConfig,
) -> Result<f64> {
    let t_star = finite_exit_time(model, x, 0.0)?;
    let q = model.kernel_density(x, t_star, y)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    Ok(model::survival_with(model, x, t_star, &config.model_quadrature())? * q)
}

fn integral_f_q<M: Model + ?Sized>(
    model: &M,
    x: &[f64],
    y: &[f64],
    from: f64,
    to: f64,
    quad: &Quadrature,
    config: &OracleConfig,
) -> Result<f64> {
    let peaks = model.kernel_peak_times(x, y);
    Ok(quad
        .try_integrate_with_breaks(|s| f_q(model, x, s, y, config), from, to, &peaks)?
        .value)
}

/// `H(x, y, t) = ∫_t^{t*} fQ̃ ds + GQ̃(x, t*, y)`.
pub fn h_fn<M: Model + ?Sized>(
    model: &M,
    x: &[f64],
    y: &[f64],
    t: f64,
    config: &OracleConfig,
) -> Result<f64> {
    let t_star = finite_exit_time(model, x, t)?;
    let t = t.min(t_star);
    let tail = integral_f_q(model, x, y, t, t_star, &config.quadrature(), config)?;
    Ok(tail + g_q_at_exit(model, x, y, config)?)
}

/// `(H(x, y, 0), [H(x, y, t) for t in times])` from one sweep down from
/// `t*`, integrating only between consecutive times.
pub fn h_profile<M: Model + ?Sized>(
    model: &M,
    x: &[f64],
    y: &[f64],
    times: &[f64],
    config: &OracleConfig,
) -> Result<(f64, Vec<f64>)> {
    let t_star = finite_exit_time(model, x, 0.0)?;
    for &t in times {
        finite_exit_time(model, x, t)?;
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&i, &j| times[j].total_cmp(&times[i]));
    let segment = |from: f64, to: f64| {
        let share = (to - from) / t_star;
        let panels = ((config.initial_panels as f64 * share).ceil() as usize).max(4);
        let quad = Quadrature::with_abs_tol(config.quad_tol).with_initial_panels(panels);
        integral_f_q(model, x, y, from, to, &quad, config)
    };
    let mut h = g_q_at_exit(model, x, y, config)?;
    let mut upper = t_star;
    let mut out = vec![0.0; times.len()];
    for i in order {
        let t = times[i].min(t_star);
        if t < upper {
            h += segment(t, upper)?;
            upper = t;
        }
        out[i] = h;
    }
    if upper > 0.0 {
        h += segment(0.0, upper)?;
    }
    Ok((h, out))
}

/// `λ̃(x, y, t) = fQ̃(x, t, y) / H(x, y, t)`.
pub fn lambda_tilde<M: Model + ?Sized>(
    model: &M,
    x: &[f64],
    y: &[f64],
    t: f64,
    config: &OracleConfig,
) -> Result<f64> {
    let h = h_fn(model, x, y, t, config)?;
    if !(h > 0.0) {
        return Err(Error::UndefinedOracle(format!(
            "H(x, y, {t}) = {h} for x = {x:?}, y = {y:?}"
        )));
    }
    Ok(f_q(model, x, t, y, config)? / h)
}

/// `G̃(x, y, t) = H(x, y, t) / H(x, y, 0)`.
pub fn g_tilde<M: Model + ?Sized>(
    model: &M,
    x: &[f64],
    y: &[f64],
    t: f64,
    config: &OracleConfig,
) -> Result<f64> {
    let h0 = h_fn(model, x, y, 0.0, config)?;
    if !(h0 > 0.0) {
        return Err(Error::UndefinedOracle(format!(
            "H(x, y, 0) = {h0} for x = {x:?}, y = {y:?}"
        )));
    }
    Ok(h_fn(model, x, y, t, config)? / h0)
}

/// `exp(-∫₀ᵗ λ̃(x, y, s) ds)`, integrating the rate itself.
///
/// The range is cut into panels; inside a panel `[a, b]` the denominator is
/// carried as `H(a) - ∫_a^s fQ̃`, so each rate evaluation costs one short
/// integral instead of a full `H`.
pub fn g_tilde_from_rate<M: Model + ?Sized>(
    model: &M,
    x: &[f64],
    y: &[f64],
    t: f64,
    config: &OracleConfig,
) -> Result<f64> {
    let t_star = finite_exit_time(model, x, t)?;
    let t = t.min(t_star);
    let local = Quadrature::with_abs_tol(config.quad_tol);
    let mut cuts: Vec<f64> = (0..=config.initial_panels)
        .map(|i| t * i as f64 / config.initial_panels as f64)
        .collect();
    cuts.extend(model.kernel_peak_times(x, y).into_iter().filter(|&p| p > 0.0 && p < t));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut h_start = h_fn(model, x, y, 0.0, config)?;
    let mut log_survival = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h_a = h_start;
        let rate = local.try_integrate(
            |s| {
                let consumed = integral_f_q(model, x, y, a, s, &local, config)?;
                let h = h_a - consumed;
                if !(h > 0.0) {
                    return Err(Error::UndefinedOracle(format!(
                        "H vanished at s = {s} for x = {x:?}, y = {y:?}"
                    )));
                }
                Ok(f_q(model, x, s, y, config)? / h)
            },
            a,
            b,
        )?;
        log_survival += rate.value;
        h_start -= integral_f_q(model, x, y, a, b, &local, config)?;
    }
    Ok((-log_survival).exp())
}

/// `m₂ = m exp(-∫₀^{T} M)` with `T` the largest exit time, when the model
/// supplies both `m` and an envelope.
pub fn h_lower_bound<M: Model + ?Sized>(model: &M, sup_exit_time: f64) -> Result<Option<f64>> {
    let (Some(m), Some(env)) = (model.density_lower_bound(), model.hazard_envelope()) else {
        return Ok(None);
    };
    let integral = Quadrature::default()
        .integrate(|s| env.rate(s), 0.0, sup_exit_time)?
        .value;
    Ok(Some(m * (-integral).exp()))
}

/// Exact sojourn density of the benchmark process from the origin:
/// `(5 + t) exp(-t (5 + t/2))`.
pub fn bench_exact_f(t: f64) -> f64 {
    (5.0 + t) * (-t * (5.0 + t / 2.0)).exp()
}

/// Stationary-regime pairs `(Z_i, Z_{i+1})` in `A × B` after burn-in.
fn stationary_pairs<'a>(traj: &'a Trajectory, a: &Region, b: &Region, burn_in: usize) -> Vec<(&'a [f64], &'a [f64])> {
    traj.transitions()
        .skip(burn_in)
        .filter(|(from, _, to)| a.contains(from) && b.contains(to))
        .map(|(from, _, to)| (from, to))
        .collect()
}

fn check_oracle_horizon(a: &Region, times: &[f64]) -> Result<()> {
    let t_star = a.exit_time_bound().ok_or_else(|| {
        Error::Configuration(format!("region {} has no exit-time bound", a.label()))
    })?;
    if let Some(&bad) = times.iter().find(|&&t| !(t >= 0.0 && t < t_star)) {
        return Err(Error::Configuration(format!(
            "time {bad} must lie in [0, t*({}) = {t_star})",
            a.label()
        )));
    }
    Ok(())
}

/// Monte Carlo reference for the cell-averaged rate
/// `l̃(A, B, t) = ∫ λ̃ G̃ dν̃ / ∫ G̃ dν̃` at each of `times`.
///
/// Pairs come from one long chain started at `x0` (seed and length from
/// `config`); standard errors use batch means over the pairs.
pub fn l_tilde_mc<M: Model + ?Sized>(
    model: &M,
    a: &Region,
    b: &Region,
    times: &[f64],
    x0: &[f64],
    config: &OracleConfig,
) -> Result<Vec<RatioEstimate>> {
    config.validate()?;
    check_oracle_horizon(a, times)?;
    let traj = simulate_chain(model, x0, config.burn_in + config.mc_samples, config.seed)?;
    l_tilde_from_pairs(model, &stationary_pairs(&traj, a, b, config.burn_in), times, config)?
        .ok_or_else(|| {
            Error::UndefinedOracle(format!(
                "no stationary pair in {} × {}",
                a.label(),
                b.label()
            ))
        })
}

fn l_tilde_from_pairs<M: Model + ?Sized>(
    model: &M,
    pairs: &[(&[f64], &[f64])],
    times: &[f64],
    config: &OracleConfig,
) -> Result<Option<Vec<RatioEstimate>>> {
    if pairs.is_empty() {
        return Ok(None);
    }
    // Per pair and time: λ̃ G̃ = fQ̃(t) / H(0) and G̃ = H(t) / H(0).
    let terms: Vec<Vec<(f64, f64)>> = pairs
        .par_iter()
        .map(|&(x, y)| {
            let (h0, ht) = h_profile(model, x, y, times, config)?;
            if !(h0 > 0.0) {
                return Err(Error::UndefinedOracle(format!(
                    "H(x, y, 0) = {h0} for x = {x:?}, y = {y:?}"
                )));
            }
            times
                .iter()
                .zip(ht)
                .map(|(&t, h)| Ok((f_q(model, x, t, y, config)? / h0, h / h0)))
                .collect()
        })
        .collect::<Result<_>>()?;
    let estimates = (0..times.len())
        .map(|j| {
            let num: Vec<f64> = terms.iter().map(|v| v[j].0).collect();
            let den: Vec<f64> = terms.iter().map(|v| v[j].1).collect();
            batch_ratio(&num, &den, config.batches).unwrap_or(RatioEstimate {
                value: f64::NAN,
                std_error: f64::INFINITY,
                terms: num.len(),
            })
        })
        .collect();
    Ok(Some(estimates))
}

/// `P(S₁ > t, Z₁ ∈ B | Z₀ ∈ A)` over the transitions of `traj` after
/// `burn_in`, with a batch-means standard error. With `burn_in = 0` the
/// value is exactly the empirical survivor `p̂(A, B, t)`.
pub fn h_tilde_from_trajectory(
    traj: &Trajectory,
    a: &Region,
    b: &Region,
    t: f64,
    burn_in: usize,
    batches: usize,
) -> Result<RatioEstimate> {
    let (num, den): (Vec<f64>, Vec<f64>) = traj
        .transitions()
        .skip(burn_in)
        .filter(|(from, _, _)| a.contains(from))
        .map(|(_, s, to)| (if s > t && b.contains(to) { 1.0 } else { 0.0 }, 1.0))
        .unzip();
    let mut est = batch_ratio(&num, &den, batches).ok_or_else(|| {
        Error::UndefinedOracle(format!("no visit to {} after burn-in", a.label()))
    })?;
    if burn_in == 0 {
        // Same counts as p̂; use its exact integer ratio.
        est.value = empirical_survivor(traj, a, b, t)?;
    }
    Ok(est)
}

/// Long-run `H̃(A, B, t) = P_ν(S₁ > t, Z₁ ∈ B | Z₀ ∈ A)` from an oracle chain.
pub fn h_tilde_mc<M: Model + ?Sized>(
    model: &M,
    a: &Region,
    b: &Region,
    t: f64,
    x0: &[f64],
    config: &OracleConfig,
) -> Result<RatioEstimate> {
    config.validate()?;
    check_oracle_horizon(a, &[t])?;
    let traj = simulate_chain(model, x0, config.burn_in + config.mc_samples, config.seed)?;
    h_tilde_from_trajectory(&traj, a, b, t, config.burn_in, config.batches)
}

/// A source/target/time triple for pointwise identities.
#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub x: State,
    pub y: State,
    pub t: f64,
}

/// Triples with `y ~ Q(Φ(x, s), ·)` for `s` uniform on `(0, t*(x)]` and `t`
/// uniform on `[0, s]`, so that `y` is a plausible successor of `x` and the
/// sojourn survival past `t` is not negligible.
pub fn random_triples<M: Model + ?Sized>(
    model: &M,
    states: &[State],
    count: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<Triple>> {
    if states.is_empty() {
        return Err(Error::Configuration("no states to draw triples from".into()));
    }
    (0..count)
        .map(|i| {
            let x = states[i % states.len()].clone();
            let t_star = model.exit_time(&x);
            let s = if t_star.is_finite() {
                t_star * (1.0 - rng.random::<f64>())
            } else {
                1.0 - rng.random::<f64>()
            };
            let y = model.sample_kernel(&x, s, rng)?;
            let t = s * rng.random::<f64>();
            Ok(Triple { x, y, t })
        })
        .collect()
}

/// One named check of the invariant suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            residual,
            tolerance,
            passed: residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleReport {
    pub model: String,
    pub checks: Vec<Check>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {}: residual {:.3e} (tolerance {:.1e})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.residual,
                c.tolerance
            )?;
        }
        Ok(())
    }
}

/// `max |∫₀^{t*} f(ξ, s) ds + G(ξ, t*) - 1|` over `states` (finite exit times).
pub fn conservation_residual<M: Model + ?Sized>(model: &M, states: &[State]) -> Result<f64> {
    let quad = model::default_quadrature();
    let mut worst = 0.0f64;
    for xi in states {
        let t_star = model.exit_time(xi);
        if !t_star.is_finite() {
            continue;
        }
        let mass = quad
            .try_integrate(|s| model::sojourn_density_with(model, xi, s, &quad), 0.0, t_star)?
            .value;
        let tail = model::survival_with(model, xi, t_star, &quad)?;
        worst = worst.max((mass + tail - 1.0).abs());
    }
    Ok(worst)
}

/// Relative error of `-d/dt log G` against `λ̄` by central differences.
fn log_survival_slope_residual<M: Model + ?Sized>(model: &M, states: &[State]) -> Result<f64> {
    let mut worst = 0.0f64;
    for xi in states {
        let t_star = model.exit_time(xi).min(1e3);
        for k in 1..=9 {
            let t = t_star * k as f64 / 10.0;
            let h = 1e-4 * t_star;
            let up = model::survival(model, xi, t + h)?.ln();
            let down = model::survival(model, xi, t - h)?.ln();
            let slope = -(up - down) / (2.0 * h);
            let rate = model::hazard_along_flow(model, xi, t)?;
            worst = worst.max((slope - rate).abs() / rate.abs().max(1.0));
        }
    }
    Ok(worst)
}

fn monotone_survival_residual<M: Model + ?Sized>(model: &M, states: &[State]) -> Result<f64> {
    let mut worst = 0.0f64;
    for xi in states {
        let t_star = model.exit_time(xi).min(1e3);
        let mut prev = 1.0;
        for k in 0..100 {
            let g = model::survival(model, xi, t_star * k as f64 / 99.0)?;
            worst = worst.max(g - prev);
            prev = g;
        }
    }
    Ok(worst)
}

fn semigroup_residual<M: Model + ?Sized>(model: &M, states: &[State], rng: &mut dyn RngCore) -> f64 {
    let mut worst = 0.0f64;
    for xi in states {
        let t_star = model.exit_time(xi).min(1e3);
        let t = t_star * rng.random::<f64>() * 0.5;
        let s = t_star * rng.random::<f64>() * 0.5;
        let two_step = model.flow(&model.flow(xi, t), s);
        let one_step = model.flow(xi, t + s);
        for (a, b) in two_step.iter().zip(&one_step) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

fn envelope_residual<M: Model + ?Sized>(model: &M, states: &[State]) -> Option<f64> {
    let env = model.hazard_envelope()?;
    let mut worst = 0.0f64;
    for xi in states {
        let t_star = model.exit_time(xi).min(1e3);
        for k in 0..=50 {
            let u = t_star * k as f64 / 50.0;
            worst = worst.max(model.hazard(&model.flow(xi, u)) - env.rate(u));
        }
    }
    Some(worst)
}

/// Runs every pointwise identity on `states` and `triples`.
pub fn run_invariant_suite<M: Model + ?Sized>(
    model: &M,
    states: &[State],
    triples: &[Triple],
    config: &OracleConfig,
) -> Result<OracleReport> {
    let mut checks = Vec::new();
    let mut rng = chain_rng(config.seed, 7);

    let bad_exit = states
        .iter()
        .filter(|x| !(model.exit_time(x) > 0.0))
        .count();
    checks.push(Check::new("exit time positive", bad_exit as f64, 0.0));
    checks.push(Check::new(
        "flow semigroup",
        semigroup_residual(model, states, &mut rng),
        1e-10,
    ));
    if let Some(r) = envelope_residual(model, states) {
        checks.push(Check::new("hazard below envelope", r.max(0.0), 1e-12));
    }
    let mut outside = 0usize;
    for xi in states {
        let t_star = model.exit_time(xi).min(1e3);
        for _ in 0..10 {
            let s = t_star * (1.0 - rng.random::<f64>());
            if !model.contains(&model.sample_kernel(xi, s, &mut rng)?) {
                outside += 1;
            }
        }
    }
    checks.push(Check::new("kernel sampler stays inside", outside as f64, 0.0));
    checks.push(Check::new(
        "conservation ∫f + G(t*) = 1",
        conservation_residual(model, states)?,
        1e-8,
    ));
    checks.push(Check::new(
        "-d/dt log G = hazard along flow",
        log_survival_slope_residual(model, states)?,
        1e-4,
    ));
    checks.push(Check::new(
        "survival nonincreasing",
        monotone_survival_residual(model, states)?.max(0.0),
        0.0,
    ));

    if !triples.is_empty() {
        let rows: Vec<(f64, f64, f64, f64)> = triples
            .par_iter()
            .map(|tr| {
                let h = h_fn(model, &tr.x, &tr.y, tr.t, config)?;
                let fq = f_q(model, &tr.x, tr.t, &tr.y, config)?;
                let lambda = lambda_tilde(model, &tr.x, &tr.y, tr.t, config)?;
                let ratio = g_tilde(model, &tr.x, &tr.y, tr.t, config)?;
                let integrated = g_tilde_from_rate(model, &tr.x, &tr.y, tr.t, config)?;
                let g0 = g_tilde(model, &tr.x, &tr.y, 0.0, config)?;
                Ok((
                    (lambda * h - fq).abs(),
                    ((ratio - integrated) / ratio).abs(),
                    h,
                    (g0 - 1.0).abs(),
                ))
            })
            .collect::<Result<_>>()?;
        let max = |f: fn(&(f64, f64, f64, f64)) -> f64| rows.iter().map(f).fold(0.0, f64::max);
        checks.push(Check::new("λ̃·H = fQ̃", max(|r| r.0), 1e-10));
        checks.push(Check::new("G̃ = exp(-∫λ̃) (relative)", max(|r| r.1), 1e-6));
        checks.push(Check::new("G̃(x, y, 0) = 1", max(|r| r.3), 1e-14));
        let sup_exit = states
            .iter()
            .map(|x| model.exit_time(x))
            .fold(0.0, f64::max);
        if let Some(m2) = h_lower_bound(model, sup_exit)? {
            let min_h = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
            checks.push(Check::new("H ≥ m₂", (m2 - min_h).max(0.0), 0.0));
        }
    }

    Ok(OracleReport {
        model: model.name().to_string(),
        checks,
    })
}

/// `max |f(origin, t) - bench_exact_f(t)|` over `points` evenly spaced on
/// `[0, 0.99]`, using the model's own sojourn density.
pub fn bench_exact_residual<M: Model + ?Sized>(model: &M, points: usize) -> Result<f64> {
    let origin = [0.0, 0.0, std::f64::consts::PI];
    let mut worst = 0.0f64;
    for k in 0..points {
        let t = 0.99 * k as f64 / (points - 1) as f64;
        let f = model::sojourn_density(model, &origin, t)?;
        worst = worst.max((f - bench_exact_f(t)).abs());
    }
    Ok(worst)
}
