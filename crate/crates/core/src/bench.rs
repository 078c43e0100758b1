//! Bacterium-in-a-disk benchmark process.
//!
//! State `(x₁, x₂, θ)`: a position in the open unit disk and a heading in
//! `(0, 2π)`. The position moves in a straight line at unit speed, jumps
//! occur at rate `base_rate + ‖x‖₂` or on hitting the unit circle, and each
//! jump relocates the position by a disk-truncated Gaussian of variance
//! `sigma2` around the pre-jump position while redrawing the heading
//! uniformly. The reference measure is Lebesgue on disk × angle interval.

use std::f64::consts::{PI, TAU};

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimators::{PartitionSpec, Region};
use crate::model::{Envelope, Model, State};
use crate::quadrature::Quadrature;

/// Parameters of the benchmark process.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchParams {
    pub sigma2: f64,
    pub base_rate: f64,
    /// Half-width of the square `A = ]-ε, ε[²`.
    pub epsilon: f64,
    pub max_rejection_attempts: usize,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            sigma2: 1e-4,
            base_rate: 5.0,
            epsilon: 0.1,
            max_rejection_attempts: 1_000_000,
        }
    }
}

impl BenchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Configuration(format!(
                "sigma2 must be positive, got {}",
                self.sigma2
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < std::f64::consts::FRAC_1_SQRT_2) {
            return Err(Error::Configuration(format!(
                "epsilon must lie in (0, 1/sqrt(2)), got {}",
                self.epsilon
            )));
        }
        if !(self.base_rate >= 0.0 && self.base_rate.is_finite()) {
            return Err(Error::Configuration(format!(
                "base_rate must be nonnegative, got {}",
                self.base_rate
            )));
        }
        if self.max_rejection_attempts == 0 {
            return Err(Error::Configuration(
                "max_rejection_attempts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Distance from `p` (with `‖p‖ ≤ 1`) to the unit circle along `(cos θ, sin θ)`.
fn ray_to_circle(p: [f64; 2], cos: f64, sin: f64) -> f64 {
    let dot = p[0] * cos + p[1] * sin;
    let norm2 = p[0] * p[0] + p[1] * p[1];
    let disc = (1.0 - norm2 + dot * dot).max(0.0);
    (-dot + disc.sqrt()).max(0.0)
}

/// Exit time from position `x` with heading `theta`: the positive root of
/// `‖x + t·(cos θ, sin θ)‖₂ = 1`.
pub fn bench_exit_time(x: [f64; 2], theta: f64) -> Result<f64> {
    if !(x[0] * x[0] + x[1] * x[1] < 1.0) {
        return Err(Error::Domain(format!("position {x:?} is not inside the unit disk")));
    }
    Ok(ray_to_circle(x, theta.cos(), theta.sin()))
}

/// The benchmark process.
#[derive(Debug, Clone)]
pub struct BenchModel {
    params: BenchParams,
    envelope: Envelope,
    normalizer_quad: Quadrature,
}

pub fn build_bench_model(params: BenchParams) -> Result<BenchModel> {
    params.validate()?;
    Ok(BenchModel {
        envelope: Envelope::Constant(params.base_rate + 1.0),
        normalizer_quad: Quadrature::with_abs_tol(1e-12).with_initial_panels(4),
        params,
    })
}

impl BenchModel {
    pub fn params(&self) -> &BenchParams {
        &self.params
    }

    /// `K_x`: mass of the untruncated Gaussian kernel over disk × angle interval.
    ///
    /// In polar coordinates around `p` the radial integral is closed-form, so
    /// `K_p = 2πσ² ∫₀^{2π} (1 - exp(-r(φ)² / 2σ²)) dφ` with `r(φ)` the distance
    /// to the circle in direction `φ`.
    pub fn kernel_normalizer(&self, p: [f64; 2]) -> Result<f64> {
        let s2 = self.params.sigma2;
        let norm = p[0].hypot(p[1]);
        // Every ray is longer than 40σ: the integrand is exactly 1 in f64.
        if 1.0 - norm > 40.0 * s2.sqrt() {
            return Ok(TAU * s2 * TAU);
        }
        let mut breaks = Vec::new();
        if norm > 0.0 {
            // Rays leaving near the closest boundary point are the short ones.
            let out = p[1].atan2(p[0]).rem_euclid(TAU);
            breaks.extend([out, (out + PI / 2.0) % TAU, (out + 3.0 * PI / 2.0) % TAU]);
        }
        let inner = self.normalizer_quad.try_integrate_with_breaks(
            |phi| {
                let r = ray_to_circle(p, phi.cos(), phi.sin());
                Ok(-(-r * r / (2.0 * s2)).exp_m1())
            },
            0.0,
            TAU,
            &breaks,
        )?;
        Ok(TAU * s2 * inner.value)
    }

    pub fn region_a(&self) -> Region {
        let e = self.params.epsilon;
        Region::open_box("A", &[-e, -e], &[e, e])
            .with_exit_time_bound(1.0 - e * std::f64::consts::SQRT_2)
    }

    pub fn disk(&self) -> Region {
        Region::new("D", 2.0, |x: &[f64]| x[0] * x[0] + x[1] * x[1] < 1.0)
            .with_bounds(vec![(-1.0, 1.0), (-1.0, 1.0)])
    }

    /// `{A, D ∖ A}`.
    pub fn partition(&self) -> PartitionSpec {
        let a = self.region_a();
        let rest = a.complement_within("D\\A", &self.disk());
        PartitionSpec::new(vec![a, rest])
    }

    /// Full-state sampling box for the square `A` (positions × headings).
    pub fn region_a_box(&self) -> Vec<(f64, f64)> {
        let e = self.params.epsilon;
        vec![(-e, e), (-e, e), (0.0, TAU)]
    }
}

impl Model for BenchModel {
    fn name(&self) -> &str {
        "bench"
    }

    fn state_dim(&self) -> usize {
        3
    }

    fn flow(&self, xi: &[f64], t: f64) -> State {
        let (sin, cos) = xi[2].sin_cos();
        vec![xi[0] + t * cos, xi[1] + t * sin, xi[2]]
    }

    fn hazard(&self, x: &[f64]) -> f64 {
        self.params.base_rate + x[0].hypot(x[1])
    }

    fn kernel_density(&self, source: &[f64], elapsed: f64, target: &[f64]) -> Result<f64> {
        if !self.contains(target) {
            return Ok(0.0);
        }
        let from = self.flow(source, elapsed);
        let p = [from[0], from[1]];
        let d2 = (target[0] - p[0]).powi(2) + (target[1] - p[1]).powi(2);
        let gauss = (-d2 / (2.0 * self.params.sigma2)).exp();
        if gauss == 0.0 {
            return Ok(0.0);
        }
        Ok(gauss / self.kernel_normalizer(p)?)
    }

    fn sample_kernel(&self, source: &[f64], elapsed: f64, rng: &mut dyn RngCore) -> Result<State> {
        let from = self.flow(source, elapsed);
        let sigma = self.params.sigma2.sqrt();
        let mut position = None;
        for _ in 0..self.params.max_rejection_attempts {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            let y = [from[0] + sigma * dx, from[1] + sigma * dy];
            if y[0] * y[0] + y[1] * y[1] < 1.0 {
                position = Some(y);
                break;
            }
        }
        let Some(y) = position else {
            return Err(Error::Sampling(format!(
                "no relocation inside the disk after {} attempts from {from:?}",
                self.params.max_rejection_attempts
            )));
        };
        let theta = loop {
            let u: f64 = rng.random();
            let theta = TAU * u;
            if theta > 0.0 && theta < TAU {
                break theta;
            }
        };
        Ok(vec![y[0], y[1], theta])
    }

    fn exit_time(&self, xi: &[f64]) -> f64 {
        ray_to_circle([xi[0], xi[1]], xi[2].cos(), xi[2].sin())
    }

    fn contains(&self, xi: &[f64]) -> bool {
        xi.len() == 3
            && xi[0] * xi[0] + xi[1] * xi[1] < 1.0
            && xi[2] > 0.0
            && xi[2] < TAU
    }

    fn hazard_envelope(&self) -> Option<&Envelope> {
        Some(&self.envelope)
    }

    fn kernel_peak_times(&self, source: &[f64], target: &[f64]) -> Vec<f64> {
        let (sin, cos) = source[2].sin_cos();
        let along = (target[0] - source[0]) * cos + (target[1] - source[1]) * sin;
        let t_star = self.exit_time(source);
        vec![along.clamp(0.0, t_star)]
    }
}
