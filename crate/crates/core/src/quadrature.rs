//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Intervals are kept in a max-heap keyed by their local error estimate
//! (`|K15 - G7|`); the worst interval is bisected until the summed error
//! falls below the requested tolerance. Optional breakpoints and an initial
//! uniform panel count let callers seed the partition for narrow peaks that
//! a single 15-point rule could step over.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Tolerances and limits for [`Quadrature::integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
    /// Number of equal panels the range is cut into before adapting.
    pub initial_panels: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 0.0,
            max_intervals: 4000,
            initial_panels: 1,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    // Bisecting further cannot improve this panel (roundoff floor or width limit).
    settled: bool,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gauss_kronrod<F>(f: &mut F, a: f64, b: f64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = kronrod.abs();
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        kronrod += w * (f1 + f2);
        abs_sum += w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    let floor = 50.0 * f64::EPSILON * abs_sum * half.abs();
    let width_floor = (b - a).abs() <= 1e-14 * (a.abs() + b.abs()).max(1e-300);
    if !value.is_finite() {
        return Err(Error::Numerical {
            achieved: f64::INFINITY,
            requested: 0.0,
        });
    }
    Ok(Panel {
        a,
        b,
        value,
        error: error.max(floor),
        settled: error <= floor || width_floor,
    })
}

impl Quadrature {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    pub fn with_initial_panels(mut self, panels: usize) -> Self {
        self.initial_panels = panels.max(1);
        self
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F>(&self, mut f: F, a: f64, b: f64) -> Result<Integral>
    where
        F: FnMut(f64) -> f64,
    {
        self.try_integrate_with_breaks(|x| Ok(f(x)), a, b, &[])
    }

    /// Integrates a fallible integrand; the first integrand error aborts.
    pub fn try_integrate<F>(&self, f: F, a: f64, b: f64) -> Result<Integral>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        self.try_integrate_with_breaks(f, a, b, &[])
    }

    /// Integrates over `[a, b]` with the partition seeded at `breaks`
    /// (points outside the open interval are ignored). Reversed bounds give
    /// the negated integral.
    pub fn try_integrate_with_breaks<F>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        breaks: &[f64],
    ) -> Result<Integral>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Configuration(format!(
                "integration bounds must be finite, got [{a}, {b}]"
            )));
        }
        if a == b {
            return Ok(Integral {
                value: 0.0,
                error: 0.0,
                evaluations: 0,
            });
        }
        if a > b {
            let r = self.try_integrate_with_breaks(f, b, a, breaks)?;
            return Ok(Integral {
                value: -r.value,
                ..r
            });
        }

        let mut cuts: Vec<f64> = Vec::with_capacity(self.initial_panels + breaks.len() + 1);
        let n = self.initial_panels.max(1);
        for i in 0..=n {
            cuts.push(if i == n {
                b
            } else {
                a + (b - a) * (i as f64) / (n as f64)
            });
        }
        cuts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut heap = BinaryHeap::with_capacity(cuts.len() * 4);
        let mut done: Vec<Panel> = Vec::new();
        let mut evaluations = 0;
        for w in cuts.windows(2) {
            let p = gauss_kronrod(&mut f, w[0], w[1])?;
            evaluations += 15;
            if p.settled {
                done.push(p);
            } else {
                heap.push(p);
            }
        }

        let total = |heap: &BinaryHeap<Panel>, done: &[Panel]| {
            let v: f64 = heap.iter().chain(done).map(|p| p.value).sum();
            let e: f64 = heap.iter().chain(done).map(|p| p.error).sum();
            (v, e)
        };

        let (mut value, mut error) = total(&heap, &done);
        let mut count = heap.len() + done.len();
        while error > self.abs_tol.max(self.rel_tol * value.abs()) {
            let Some(worst) = heap.pop() else { break };
            if count >= self.max_intervals {
                heap.push(worst);
                break;
            }
            let mid = 0.5 * (worst.a + worst.b);
            let left = gauss_kronrod(&mut f, worst.a, mid)?;
            let right = gauss_kronrod(&mut f, mid, worst.b)?;
            evaluations += 30;
            count += 1;
            value += left.value + right.value - worst.value;
            error += left.error + right.error - worst.error;
            for p in [left, right] {
                if p.settled {
                    done.push(p);
                } else {
                    heap.push(p);
                }
            }
        }

        // Re-sum in a fixed order so results do not carry incremental drift.
        let mut panels: Vec<Panel> = heap.into_vec();
        panels.extend(done);
        panels.sort_by(|p, q| p.a.total_cmp(&q.a));
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let requested = self.abs_tol.max(self.rel_tol * value.abs());
        if error > requested {
            return Err(Error::Numerical {
                achieved: error,
                requested,
            });
        }
        Ok(Integral {
            value,
            error,
            evaluations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = Quadrature::default();
        let r = q.integrate(|x| 3.0 * x * x + 2.0 * x + 1.0, 0.0, 2.0).unwrap();
        assert!((r.value - 14.0).abs() < 1e-13);
    }

    #[test]
    fn reversed_bounds_negate() {
        let q = Quadrature::default();
        let fwd = q.integrate(f64::exp, 0.0, 1.0).unwrap().value;
        let rev = q.integrate(f64::exp, 1.0, 0.0).unwrap().value;
        assert_eq!(fwd, -rev);
        assert!((fwd - (std::f64::consts::E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn narrow_peak_needs_seeding() {
        let sigma = 0.01_f64;
        let peak = |x: f64| (-(x - 0.437).powi(2) / (2.0 * sigma * sigma)).exp();
        let exact = sigma * (2.0 * std::f64::consts::PI).sqrt();
        let seeded = Quadrature::default()
            .try_integrate_with_breaks(|x| Ok(peak(x)), 0.0, 1.0, &[0.437])
            .unwrap();
        assert!((seeded.value - exact).abs() < 1e-10, "{}", seeded.value);
    }

    #[test]
    fn sqrt_endpoint_singularity_converges() {
        let r = Quadrature::default().integrate(f64::sqrt, 0.0, 1.0).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn non_convergence_reports_achieved_error() {
        let q = Quadrature {
            max_intervals: 2,
            ..Quadrature::default()
        };
        let err = q
            .integrate(|x: f64| (1.0 / x.max(1e-300)).sin(), 1e-6, 1.0)
            .unwrap_err();
        match err {
            Error::Numerical {
                achieved,
                requested,
            } => assert!(achieved > requested),
            other => panic!("unexpected {other:?}"),
        }
    }
}
