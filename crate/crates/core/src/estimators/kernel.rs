use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;

/// Smoothing kernel: continuous, even, supported on `[-1, 1]`, unit mass.
#[derive(Clone, Default)]
pub enum Kernel {
    /// `0.75 (1 - u²)`.
    #[default]
    Epanechnikov,
    /// `(15/16) (1 - u²)²`.
    Biweight,
    /// `1 - |u|`.
    Triangular,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Epanechnikov => f.write_str("Epanechnikov"),
            Kernel::Biweight => f.write_str("Biweight"),
            Kernel::Triangular => f.write_str("Triangular"),
            Kernel::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Kernel {
    /// Zero outside `(-1, 1)`.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        if !(u.abs() < 1.0) {
            return 0.0;
        }
        match self {
            Kernel::Epanechnikov => 0.75 * (1.0 - u * u),
            Kernel::Biweight => {
                let v = 1.0 - u * u;
                0.9375 * v * v
            }
            Kernel::Triangular => 1.0 - u.abs(),
            Kernel::Custom(k) => k(u),
        }
    }

    /// Checks `K(±1) = 0`, evenness, nonnegativity and `∫K = 1` (within 1e-10).
    pub fn validate(&self) -> Result<()> {
        let raw = |u: f64| match self {
            Kernel::Custom(k) => k(u),
            _ => self.eval(u),
        };
        if raw(1.0).abs() > 1e-12 || raw(-1.0).abs() > 1e-12 {
            return Err(Error::Configuration("kernel must vanish at ±1".into()));
        }
        for i in 0..=64 {
            let u = i as f64 / 64.0;
            let (p, m) = (self.eval(u), self.eval(-u));
            if !(p >= 0.0) || (p - m).abs() > 1e-12 {
                return Err(Error::Configuration(format!(
                    "kernel must be even and nonnegative (K({u}) = {p}, K(-{u}) = {m})"
                )));
            }
        }
        let mass = self.mass()?;
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::Configuration(format!(
                "kernel integrates to {mass}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn mass(&self) -> Result<f64> {
        let quad = Quadrature::with_abs_tol(1e-13);
        Ok(quad
            .try_integrate_with_breaks(|u| Ok(self.eval(u)), -1.0, 1.0, &[0.0])?
            .value)
    }
}
