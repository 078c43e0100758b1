//! The PDMP abstraction: local characteristics plus the sojourn-time law
//! they induce along the flow.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;

/// A point of the state space, as fixed-length coordinates.
pub type State = Vec<f64>;

/// Absolute slack, in time units, when comparing against an exit time.
pub const TIME_TOL: f64 = 1e-12;

/// Locally integrable upper bound `M(t)` on the hazard along any flow line.
///
/// Kept piecewise constant so that thinning against it stays exact.
#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    Constant(f64),
    /// `rates[i]` holds on `[breaks[i], breaks[i + 1])`; the last rate extends
    /// to infinity. `breaks[0]` must be `0`.
    Piecewise { breaks: Vec<f64>, rates: Vec<f64> },
}

impl Envelope {
    pub fn rate(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant(r) => *r,
            Envelope::Piecewise { breaks, rates } => {
                let idx = breaks.partition_point(|&b| b <= t).max(1) - 1;
                rates[idx.min(rates.len() - 1)]
            }
        }
    }

    /// End of the constant piece containing `t`.
    pub fn piece_end(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant(_) => f64::INFINITY,
            Envelope::Piecewise { breaks, .. } => {
                let idx = breaks.partition_point(|&b| b <= t);
                breaks.get(idx).copied().unwrap_or(f64::INFINITY)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Envelope::Constant(r) if r.is_finite() && *r >= 0.0 => Ok(()),
            Envelope::Constant(r) => Err(Error::Configuration(format!(
                "envelope rate must be finite and nonnegative, got {r}"
            ))),
            Envelope::Piecewise { breaks, rates } => {
                let ok = !breaks.is_empty()
                    && breaks.len() == rates.len()
                    && breaks[0] == 0.0
                    && breaks.windows(2).all(|w| w[0] < w[1])
                    && rates.iter().all(|r| r.is_finite() && *r >= 0.0);
                if ok {
                    Ok(())
                } else {
                    Err(Error::Configuration(
                        "piecewise envelope needs increasing breaks from 0 and one finite rate per break"
                            .into(),
                    ))
                }
            }
        }
    }
}

/// Local characteristics of a piecewise-deterministic Markov process.
///
/// Implementations must be pure: every method is a deterministic function of
/// its arguments (the sampler only of its arguments and the RNG stream).
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    fn state_dim(&self) -> usize;

    /// Deterministic flow `Φ(ξ, t)`.
    fn flow(&self, xi: &[f64], t: f64) -> State;

    /// Jump rate `λ` on the closure of the state space.
    fn hazard(&self, x: &[f64]) -> f64;

    /// Density of `Q(Φ(source, elapsed), ·)` at `target` with respect to the
    /// model's reference measure.
    fn kernel_density(&self, source: &[f64], elapsed: f64, target: &[f64]) -> Result<f64>;

    /// Draws a post-jump location from `Q(Φ(source, elapsed), ·)`.
    fn sample_kernel(&self, source: &[f64], elapsed: f64, rng: &mut dyn RngCore) -> Result<State>;

    /// Deterministic exit time `t*(ξ)`; `f64::INFINITY` when the flow never
    /// reaches the boundary.
    fn exit_time(&self, xi: &[f64]) -> f64;

    /// Membership in the open state space.
    fn contains(&self, xi: &[f64]) -> bool;

    fn hazard_envelope(&self) -> Option<&Envelope> {
        None
    }

    /// Uniform lower bound `m` on the kernel density.
    fn density_lower_bound(&self) -> Option<f64> {
        None
    }

    /// Elapsed times at which `kernel_density(source, ·, target)` may have a
    /// sharp peak. Integrals over elapsed time split there.
    fn kernel_peak_times(&self, _source: &[f64], _target: &[f64]) -> Vec<f64> {
        Vec::new()
    }
}

/// Quadrature settings shared by every time integral of the sojourn law.
pub fn default_quadrature() -> Quadrature {
    Quadrature::with_abs_tol(1e-10)
}

fn check_time<M: Model + ?Sized>(model: &M, xi: &[f64], t: f64) -> Result<f64> {
    if xi.len() != model.state_dim() || !model.contains(xi) {
        return Err(Error::Domain(format!("{xi:?} is not in {}", model.name())));
    }
    let exit_time = model.exit_time(xi);
    if !(t >= 0.0) {
        return Err(Error::Configuration(format!("time must be nonnegative, got {t}")));
    }
    if t > exit_time + TIME_TOL {
        return Err(Error::Horizon { t, exit_time });
    }
    Ok(exit_time)
}

/// `λ(Φ(ξ, t))`.
pub fn hazard_along_flow<M: Model + ?Sized>(model: &M, xi: &[f64], t: f64) -> Result<f64> {
    check_time(model, xi, t)?;
    let rate = model.hazard(&model.flow(xi, t));
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::Domain(format!("hazard {rate} at {xi:?}, t = {t}")));
    }
    Ok(rate)
}

/// `∫₀ᵗ λ(Φ(ξ, s)) ds` by adaptive quadrature.
pub fn cumulative_hazard<M: Model + ?Sized>(
    model: &M,
    xi: &[f64],
    t: f64,
    quad: &Quadrature,
) -> Result<f64> {
    check_time(model, xi, t)?;
    let r = quad.integrate(|s| model.hazard(&model.flow(xi, s)), 0.0, t)?;
    Ok(r.value)
}

/// Survival function `G(ξ, t) = exp(-∫₀ᵗ λ̄(ξ, s) ds)`.
pub fn survival<M: Model + ?Sized>(model: &M, xi: &[f64], t: f64) -> Result<f64> {
    survival_with(model, xi, t, &default_quadrature())
}

pub fn survival_with<M: Model + ?Sized>(
    model: &M,
    xi: &[f64],
    t: f64,
    quad: &Quadrature,
) -> Result<f64> {
    Ok((-cumulative_hazard(model, xi, t, quad)?).exp())
}

/// Sojourn density `f(ξ, t) = λ̄(ξ, t) G(ξ, t)`.
pub fn sojourn_density<M: Model + ?Sized>(model: &M, xi: &[f64], t: f64) -> Result<f64> {
    sojourn_density_with(model, xi, t, &default_quadrature())
}

pub fn sojourn_density_with<M: Model + ?Sized>(
    model: &M,
    xi: &[f64],
    t: f64,
    quad: &Quadrature,
) -> Result<f64> {
    let rate = hazard_along_flow(model, xi, t)?;
    Ok(rate * survival_with(model, xi, t, quad)?)
}

/// Exit time found by bisection on `inside(t)`, the membership of `Φ(ξ, t)`.
///
/// The bracket grows geometrically from `initial_step` until the flow leaves
/// or `t_max` is passed, in which case the exit time is infinite.
pub fn exit_time_by_bisection<F>(inside: F, initial_step: f64, t_max: f64, tol: f64) -> f64
where
    F: Fn(f64) -> bool,
{
    let mut lo = 0.0;
    let mut hi = initial_step;
    while inside(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > t_max {
            return f64::INFINITY;
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
