//! Shared fixtures and a deliberately naive re-derivation of the estimators.
//!
//! Nothing here calls into `pdmp_core::estimators` beyond `Region` and the
//! kernel function, so agreement with the library is a real check.

#![allow(dead_code)]

use std::f64::consts::TAU;

use pdmp_core::estimators::{Kernel, PartitionSpec, Region};
use pdmp_core::simulator::{chain_rng, Record, Trajectory};
use rand::Rng;

/// Cells `(0,1)`, `(1,2)`, `(2,3)` on the line; `A` is the first with
/// `t*(A)` fixed at 0.95.
pub fn line_cells() -> (Region, PartitionSpec) {
    let a = Region::open_box("A", &[0.0], &[1.0]).with_exit_time_bound(0.95);
    let b = Region::open_box("B", &[1.0], &[2.0]);
    let c = Region::open_box("C", &[2.0], &[3.0]);
    (a.clone(), PartitionSpec::new(vec![a, b, c]))
}

/// Synthetic trajectory on the line cells. Sojourns sit on a 0.01 grid so
/// ties are common; the state is the cell index plus a uniform offset.
pub fn random_line_trajectory(seed: u64, max_events: usize) -> Trajectory {
    let mut rng = chain_rng(seed, 99);
    let n = rng.random_range(1..=max_events);
    let mut records = vec![Record { z: vec![0.5], s: 0.0, forced: false }];
    for _ in 0..n {
        let cell = rng.random_range(0..3) as f64;
        let z = cell + 0.01 + 0.98 * rng.random::<f64>();
        let s = rng.random_range(1..=100) as f64 / 100.0;
        records.push(Record { z: vec![z], s, forced: false });
    }
    Trajectory::new(records, seed).unwrap()
}

pub fn bench_states(count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = chain_rng(seed, 5);
    (0..count)
        .map(|_| {
            let r = 0.95 * rng.random::<f64>().sqrt();
            let phi = TAU * rng.random::<f64>();
            let theta = TAU * (1.0 - rng.random::<f64>());
            vec![r * phi.cos(), r * phi.sin(), theta.min(TAU - 1e-9)]
        })
        .collect()
}

pub mod naive {
    use super::*;

    fn pairs(traj: &Trajectory) -> Vec<(Vec<f64>, f64, Vec<f64>)> {
        let r = traj.records();
        (0..r.len() - 1)
            .map(|i| (r[i].z.clone(), r[i + 1].s, r[i + 1].z.clone()))
            .collect()
    }

    pub fn n(traj: &Trajectory, a: &Region, b: &Region, t: f64) -> usize {
        pairs(traj)
            .iter()
            .filter(|(x, s, y)| a.contains(x) && b.contains(y) && *s <= t)
            .count()
    }

    pub fn y(traj: &Trajectory, a: &Region, b: &Region, t: f64) -> usize {
        pairs(traj)
            .iter()
            .filter(|(x, s, y)| a.contains(x) && b.contains(y) && *s >= t)
            .count()
    }

    fn inv(k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            1.0 / k as f64
        }
    }

    /// `Σ 1/Y(S)` over events `S ≤ t`, in increasing `S`.
    pub fn l_cum(traj: &Trajectory, a: &Region, b: &Region, t: f64) -> f64 {
        let mut events: Vec<f64> = pairs(traj)
            .iter()
            .filter(|(x, _, y)| a.contains(x) && b.contains(y))
            .map(|p| p.1)
            .filter(|&s| s <= t)
            .collect();
        events.sort_by(f64::total_cmp);
        let mut acc = 0.0;
        for s in events {
            acc += inv(y(traj, a, b, s));
        }
        acc
    }

    /// Matched events up to `horizon` in trajectory order with `1/Y(S)`,
    /// each `Y` counted from scratch.
    fn weighted(traj: &Trajectory, a: &Region, b: &Region, horizon: f64) -> Vec<(f64, f64)> {
        pairs(traj)
            .into_iter()
            .filter(|(x, s, yv)| a.contains(x) && b.contains(yv) && *s <= horizon)
            .map(|(_, s, _)| (s, inv(y(traj, a, b, s))))
            .collect()
    }

    /// Kernel smoother over events in trajectory order.
    pub fn l_smooth(
        traj: &Trajectory,
        a: &Region,
        b: &Region,
        kernel: &Kernel,
        horizon: f64,
        bandwidth: f64,
        points: &[f64],
    ) -> Vec<f64> {
        let events = weighted(traj, a, b, horizon);
        points
            .iter()
            .map(|&s| {
                let mut acc = 0.0;
                for &(si, w) in &events {
                    acc += kernel.eval((s - si) / bandwidth) * w;
                }
                acc / bandwidth
            })
            .collect()
    }

    pub fn p(traj: &Trajectory, a: &Region, b: &Region, t: f64) -> Option<f64> {
        let all = pairs(traj);
        let visits = all.iter().filter(|(x, _, _)| a.contains(x)).count();
        if visits == 0 {
            return None;
        }
        let hits = all
            .iter()
            .filter(|(x, s, y)| a.contains(x) && b.contains(y) && *s > t)
            .count();
        Some(hits as f64 / visits as f64)
    }

    pub fn bandwidth(traj: &Trajectory, a: &Region, b: &Region, alpha: f64) -> Option<f64> {
        let h = pairs(traj)
            .iter()
            .filter(|(x, _, y)| a.contains(x) && b.contains(y))
            .count();
        (h > 0).then(|| (h as f64).powf(-alpha))
    }

    /// `Σ_k l̂ p̂`, products summed in ascending order.
    pub fn f(
        traj: &Trajectory,
        a: &Region,
        cells: &[Region],
        kernel: &Kernel,
        alpha: f64,
        horizon: f64,
        points: &[f64],
    ) -> Option<Vec<f64>> {
        p(traj, a, a, 0.0)?;
        let per_cell: Vec<Vec<f64>> = cells
            .iter()
            .map(|b| match bandwidth(traj, a, b, alpha) {
                None => vec![0.0; points.len()],
                Some(bw) => l_smooth(traj, a, b, kernel, horizon, bw, points)
                    .into_iter()
                    .zip(points)
                    .map(|(l, &s)| l * p(traj, a, b, s).unwrap())
                    .collect(),
            })
            .collect();
        Some(
            (0..points.len())
                .map(|j| {
                    let mut terms: Vec<f64> = per_cell.iter().map(|c| c[j]).collect();
                    terms.sort_by(f64::total_cmp);
                    terms.into_iter().sum()
                })
                .collect(),
        )
    }
}
