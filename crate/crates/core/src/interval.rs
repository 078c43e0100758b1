//! A one-dimensional toy process on `(0, 1)`: unit-speed drift to the right,
//! jump rate `base + slope·x`, uniform relocation.
//!
//! With `slope = 0` the conditional rate given both endpoints is exactly
//! `base`; with `base = slope = 0` every jump is forced at the boundary.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::model::{Envelope, Model, State};

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalModel {
    base: f64,
    slope: f64,
    envelope: Envelope,
}

impl IntervalModel {
    /// Panics when the rate `base + slope·x` can go negative on `[0, 1]`.
    pub fn new(base: f64, slope: f64) -> Self {
        assert!(
            base >= 0.0 && base + slope >= 0.0,
            "hazard must be nonnegative on [0, 1]"
        );
        Self {
            base,
            slope,
            envelope: Envelope::Constant(base + slope.max(0.0)),
        }
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }
}

impl Model for IntervalModel {
    fn name(&self) -> &str {
        "interval"
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn flow(&self, xi: &[f64], t: f64) -> State {
        vec![xi[0] + t]
    }

    fn hazard(&self, x: &[f64]) -> f64 {
        self.base + self.slope * x[0]
    }

    fn kernel_density(&self, _source: &[f64], _elapsed: f64, target: &[f64]) -> Result<f64> {
        Ok(if self.contains(target) { 1.0 } else { 0.0 })
    }

    fn sample_kernel(&self, _source: &[f64], _elapsed: f64, rng: &mut dyn RngCore) -> Result<State> {
        for _ in 0..64 {
            let u: f64 = rng.random();
            if u > 0.0 {
                return Ok(vec![u]);
            }
        }
        Err(Error::Sampling("uniform draw stuck at 0".into()))
    }

    fn exit_time(&self, xi: &[f64]) -> f64 {
        1.0 - xi[0]
    }

    fn contains(&self, xi: &[f64]) -> bool {
        xi.len() == 1 && xi[0] > 0.0 && xi[0] < 1.0
    }

    fn hazard_envelope(&self) -> Option<&Envelope> {
        Some(&self.envelope)
    }

    fn density_lower_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}
