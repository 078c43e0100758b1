//! Embedded-chain simulation: sojourn times from the truncated survival law,
//! post-jump locations from the kernel.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{cumulative_hazard, default_quadrature, Model, State, TIME_TOL};

/// One post-jump record: location `z`, the sojourn `s` that ended at it, and
/// whether that jump was forced by the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub z: State,
    pub s: f64,
    pub forced: bool,
}

/// Observed embedded chain `(Z_i, S_i)`, `i = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    records: Vec<Record>,
    seed: u64,
}

impl Trajectory {
    /// Checks the structural invariants that do not need a model.
    pub fn new(records: Vec<Record>, seed: u64) -> Result<Self> {
        let Some(first) = records.first() else {
            return Err(Error::Configuration(
                "a trajectory needs at least record 0".into(),
            ));
        };
        if first.s != 0.0 || first.forced {
            return Err(Error::Configuration(
                "record 0 must have s = 0 and forced = false".into(),
            ));
        }
        let dim = first.z.len();
        for (i, r) in records.iter().enumerate().skip(1) {
            if r.z.len() != dim {
                return Err(Error::Configuration(format!(
                    "record {i} has dimension {}, expected {dim}",
                    r.z.len()
                )));
            }
            if !(r.s > 0.0 && r.s.is_finite()) {
                return Err(Error::Configuration(format!(
                    "record {i} has non-positive sojourn {}",
                    r.s
                )));
            }
        }
        Ok(Self { records, seed })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state_dim(&self) -> usize {
        self.records[0].z.len()
    }

    /// Number of jumps `n` (records minus one).
    pub fn n_transitions(&self) -> usize {
        self.records.len() - 1
    }

    /// `(Z_i, S_{i+1}, Z_{i+1})` for `i = 0..n`.
    pub fn transitions(&self) -> impl Iterator<Item = (&[f64], f64, &[f64])> + '_ {
        self.records
            .windows(2)
            .map(|w| (w[0].z.as_slice(), w[1].s, w[1].z.as_slice()))
    }

    /// Jump times `T_i`, the prefix sums of the sojourns.
    pub fn jump_times(&self) -> Vec<f64> {
        self.records
            .iter()
            .scan(0.0, |t, r| {
                *t += r.s;
                Some(*t)
            })
            .collect()
    }

    /// Checks every invariant that depends on the model: membership of all
    /// locations, sojourns bounded by the exit time, and the forced flag.
    pub fn validate<M: Model + ?Sized>(&self, model: &M) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if !model.contains(&r.z) {
                return Err(Error::Domain(format!("record {i} at {:?}", r.z)));
            }
        }
        for (i, w) in self.records.windows(2).enumerate() {
            let exit_time = model.exit_time(&w[0].z);
            let r = &w[1];
            if r.s > exit_time + TIME_TOL {
                return Err(Error::Horizon {
                    t: r.s,
                    exit_time,
                });
            }
            let at_boundary = (r.s - exit_time).abs() <= TIME_TOL;
            if at_boundary != r.forced {
                return Err(Error::Configuration(format!(
                    "record {}: forced = {} but s = {} vs exit time {exit_time}",
                    i + 1,
                    r.forced,
                    r.s
                )));
            }
        }
        Ok(())
    }
}

/// Deterministic per-chain generator: ChaCha8 keyed by `seed`, on `stream`.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How sojourn times are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SojournMethod {
    /// Thinning when the model has an envelope, otherwise inversion.
    #[default]
    Auto,
    /// Lewis–Shedler thinning against the hazard envelope.
    Thinning,
    /// Bisection on `Λ(t) = -ln U` with the cumulative hazard by quadrature.
    Inversion,
}

const INVERSION_TOL: f64 = 1e-10;
const MAX_THINNING_PROPOSALS: usize = 100_000_000;

/// Draws `(S, forced)` from `P(S > t) = exp(-Λ(t)) 1{t < t*(ξ)}`.
pub fn sample_sojourn<M: Model + ?Sized>(
    model: &M,
    xi: &[f64],
    rng: &mut dyn RngCore,
) -> Result<(f64, bool)> {
    sample_sojourn_with(model, xi, SojournMethod::Auto, rng)
}

pub fn sample_sojourn_with<M: Model + ?Sized>(
    model: &M,
    xi: &[f64],
    method: SojournMethod,
    rng: &mut dyn RngCore,
) -> Result<(f64, bool)> {
    if !model.contains(xi) {
        return Err(Error::Domain(format!("{xi:?} is not in {}", model.name())));
    }
    match (method, model.hazard_envelope().is_some()) {
        (SojournMethod::Thinning, false) => Err(Error::Configuration(format!(
            "model {} has no hazard envelope to thin against",
            model.name()
        ))),
        (SojournMethod::Thinning, true) | (SojournMethod::Auto, true) => thinning(model, xi, rng),
        _ => inversion(model, xi, rng),
    }
}

fn thinning<M: Model + ?Sized>(model: &M, xi: &[f64], rng: &mut dyn RngCore) -> Result<(f64, bool)> {
    let envelope = model.hazard_envelope().expect("checked by caller");
    let t_star = model.exit_time(xi);
    let mut t = 0.0;
    for _ in 0..MAX_THINNING_PROPOSALS {
        let rate = envelope.rate(t);
        let end = envelope.piece_end(t).min(t_star);
        let candidate = if rate > 0.0 {
            let e: f64 = rng.sample(Exp1);
            t + e / rate
        } else {
            f64::INFINITY
        };
        if candidate >= end {
            if end >= t_star {
                if t_star.is_infinite() {
                    return Err(Error::Configuration(format!(
                        "zero envelope tail with infinite exit time in {}",
                        model.name()
                    )));
                }
                return Ok((t_star, true));
            }
            // Memoryless restart at the next envelope piece.
            t = end;
            continue;
        }
        if candidate <= 0.0 {
            continue;
        }
        t = candidate;
        let hazard = model.hazard(&model.flow(xi, t));
        if hazard > rate * (1.0 + 1e-12) {
            return Err(Error::Configuration(format!(
                "hazard {hazard} exceeds envelope {rate} at t = {t} from {xi:?}"
            )));
        }
        let u: f64 = rng.random();
        if u * rate < hazard {
            return Ok((t, false));
        }
    }
    Err(Error::Sampling(format!(
        "no jump after {MAX_THINNING_PROPOSALS} thinning proposals from {xi:?}"
    )))
}

fn inversion<M: Model + ?Sized>(model: &M, xi: &[f64], rng: &mut dyn RngCore) -> Result<(f64, bool)> {
    let quad = default_quadrature();
    let t_star = model.exit_time(xi);
    let target = loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let target = -u.ln();
        if target > 0.0 {
            break target;
        }
    };
    let hi = if t_star.is_finite() {
        if target >= cumulative_hazard(model, xi, t_star, &quad)? {
            return Ok((t_star, true));
        }
        t_star
    } else {
        let mut hi = 1.0_f64;
        while cumulative_hazard(model, xi, hi, &quad)? < target {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Configuration(format!(
                    "cumulative hazard of {} never reaches {target} and no envelope is available",
                    model.name()
                )));
            }
        }
        hi
    };
    let (mut lo, mut hi) = (0.0, hi);
    while hi - lo > INVERSION_TOL {
        let mid = 0.5 * (lo + hi);
        if cumulative_hazard(model, xi, mid, &quad)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi), false))
}

/// Draws `Z ~ Q(Φ(ξ, s), ·)`.
pub fn sample_postjump<M: Model + ?Sized>(
    model: &M,
    xi: &[f64],
    s: f64,
    rng: &mut dyn RngCore,
) -> Result<State> {
    let t_star = model.exit_time(xi);
    if !(s > 0.0 && s <= t_star + TIME_TOL) {
        return Err(Error::Horizon {
            t: s,
            exit_time: t_star,
        });
    }
    let z = model.sample_kernel(xi, s, rng)?;
    if !model.contains(&z) {
        return Err(Error::Sampling(format!(
            "kernel of {} produced {z:?} outside the state space",
            model.name()
        )));
    }
    Ok(z)
}

/// Simulates `n_jumps` transitions of the embedded chain from `x0`.
pub fn simulate_chain<M: Model + ?Sized>(
    model: &M,
    x0: &[f64],
    n_jumps: usize,
    seed: u64,
) -> Result<Trajectory> {
    simulate_chain_with(model, x0, n_jumps, seed, SojournMethod::Auto)
}

pub fn simulate_chain_with<M: Model + ?Sized>(
    model: &M,
    x0: &[f64],
    n_jumps: usize,
    seed: u64,
    method: SojournMethod,
) -> Result<Trajectory> {
    if n_jumps == 0 {
        return Err(Error::Configuration("n_jumps must be at least 1".into()));
    }
    if x0.len() != model.state_dim() || !model.contains(x0) {
        return Err(Error::Domain(format!("initial state {x0:?}")));
    }
    let mut rng = chain_rng(seed, 0);
    let mut records = Vec::with_capacity(n_jumps + 1);
    records.push(Record {
        z: x0.to_vec(),
        s: 0.0,
        forced: false,
    });
    let mut current = x0.to_vec();
    for _ in 0..n_jumps {
        let (s, forced) = sample_sojourn_with(model, &current, method, &mut rng)?;
        let z = sample_postjump(model, &current, s, &mut rng)?;
        records.push(Record {
            z: z.clone(),
            s,
            forced,
        });
        current = z;
    }
    Trajectory::new(records, seed)
}

/// Independent chains, one per seed, simulated in parallel.
pub fn simulate_chains<M: Model + ?Sized>(
    model: &M,
    x0: &[f64],
    n_jumps: usize,
    seeds: &[u64],
) -> Result<Vec<Trajectory>> {
    seeds
        .par_iter()
        .map(|&seed| simulate_chain(model, x0, n_jumps, seed))
        .collect()
}
