use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::simulator::Trajectory;

pub type Membership = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// A measurable set of states with a known diameter.
///
/// `bounds` is an optional bounding box over the leading coordinates, needed
/// to grid the region; `exit_time_bound` is `t*(A) = inf_{ξ∈A} t*(ξ)`.
#[derive(Clone)]
pub struct Region {
    label: String,
    diameter: f64,
    membership: Membership,
    bounds: Option<Vec<(f64, f64)>>,
    exit_time_bound: Option<f64>,
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Region")
            .field("label", &self.label)
            .field("diameter", &self.diameter)
            .field("bounds", &self.bounds)
            .field("exit_time_bound", &self.exit_time_bound)
            .finish_non_exhaustive()
    }
}

impl Region {
    pub fn new<F>(label: impl Into<String>, diameter: f64, membership: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            diameter,
            membership: Arc::new(membership),
            bounds: None,
            exit_time_bound: None,
        }
    }

    /// Open box `∏ ]lo_j, hi_j[` over the first `lo.len()` coordinates.
    pub fn open_box(label: impl Into<String>, lo: &[f64], hi: &[f64]) -> Self {
        assert_eq!(lo.len(), hi.len(), "box corners must have equal length");
        let diameter = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt();
        let (l, h) = (lo.to_vec(), hi.to_vec());
        let bounds = lo.iter().copied().zip(hi.iter().copied()).collect();
        Self::new(label, diameter, move |x: &[f64]| {
            l.iter()
                .zip(&h)
                .zip(x)
                .all(|((&a, &b), &v)| a < v && v < b)
        })
        .with_bounds(bounds)
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn with_exit_time_bound(mut self, t_star: f64) -> Self {
        self.exit_time_bound = Some(t_star);
        self
    }

    /// `universe ∖ self`.
    pub fn complement_within(&self, label: impl Into<String>, universe: &Region) -> Region {
        let inner = Arc::clone(&self.membership);
        let outer = Arc::clone(&universe.membership);
        Region {
            label: label.into(),
            diameter: universe.diameter,
            membership: Arc::new(move |x: &[f64]| outer(x) && !inner(x)),
            bounds: universe.bounds.clone(),
            exit_time_bound: None,
        }
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        (self.membership)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn bounds(&self) -> Option<&[(f64, f64)]> {
        self.bounds.as_deref()
    }

    pub fn exit_time_bound(&self) -> Option<f64> {
        self.exit_time_bound
    }
}

/// Non-overlapping target cells `B_1, …, B_p`.
#[derive(Debug, Clone)]
pub struct PartitionSpec {
    cells: Vec<Region>,
}

impl PartitionSpec {
    pub fn new(cells: Vec<Region>) -> Self {
        Self { cells }
    }

    pub fn cells(&self) -> &[Region] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Index of the cell with the largest diameter (first one on ties).
    pub fn largest(&self) -> Option<usize> {
        self.cells
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (i, c)| match best {
                Some((_, d)) if d >= c.diameter => best,
                _ => Some((i, c.diameter)),
            })
            .map(|(i, _)| i)
    }

    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        self.cells.iter().position(|c| c.contains(x))
    }

    /// Every post-jump location of `traj` must lie in exactly one cell.
    pub fn check_covers(&self, traj: &Trajectory) -> Result<()> {
        for (i, r) in traj.records().iter().enumerate().skip(1) {
            let hits = self.cells.iter().filter(|c| c.contains(&r.z)).count();
            if hits != 1 {
                return Err(Error::Configuration(format!(
                    "record {i} at {:?} lies in {hits} partition cells",
                    r.z
                )));
            }
        }
        Ok(())
    }
}

/// Grids the bounding box of `region` with cubes of side `resolution` and
/// intersects each with the region.
///
/// Cells are half-open except along the upper face of the box, so every
/// point of the region lands in exactly one of them. Cells may be empty.
pub fn build_partition(region: &Region, resolution: f64) -> Result<Vec<Region>> {
    let Some(bounds) = region.bounds() else {
        return Err(Error::Configuration(format!(
            "region {} has no bounding box to grid",
            region.label()
        )));
    };
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::Configuration(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let bounds: Vec<(f64, f64)> = bounds.to_vec();
    let counts: Vec<usize> = bounds
        .iter()
        .map(|(lo, hi)| (((hi - lo) / resolution).ceil() as usize).max(1))
        .collect();
    let total: usize = counts.iter().product();
    let locate = {
        let bounds = bounds.clone();
        let counts = counts.clone();
        Arc::new(move |x: &[f64]| -> Option<Vec<usize>> {
            bounds
                .iter()
                .zip(&counts)
                .zip(x)
                .map(|(((lo, hi), &n), &v)| {
                    if v < *lo || v > *hi {
                        return None;
                    }
                    let idx = ((v - lo) / resolution).floor() as usize;
                    Some(idx.min(n - 1))
                })
                .collect()
        })
    };

    let mut cells = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let index: Vec<usize> = counts
            .iter()
            .map(|&n| {
                let i = rem % n;
                rem /= n;
                i
            })
            .collect();
        let cell_bounds: Vec<(f64, f64)> = bounds
            .iter()
            .zip(&index)
            .map(|(&(lo, hi), &i)| {
                let a = lo + i as f64 * resolution;
                (a, (a + resolution).min(hi))
            })
            .collect();
        let diameter = cell_bounds
            .iter()
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt();
        let label = format!(
            "{}[{}]",
            region.label(),
            index.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
        );
        let parent = Arc::clone(&region.membership);
        let locate = Arc::clone(&locate);
        let want = index.clone();
        cells.push(
            Region::new(label, diameter, move |x: &[f64]| {
                parent(x) && locate(x).is_some_and(|idx| idx == want)
            })
            .with_bounds(cell_bounds),
        );
    }
    Ok(cells)
}

/// Radical-inverse (Halton) point `i` in base `base`.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Estimates `t*(A)` as the infimum of the exit time over `n_points` Halton
/// points of `domain_box` (full state dimension) that fall in `region`, less
/// a 1% safety margin.
pub fn region_exit_time<M: Model + ?Sized>(
    model: &M,
    region: &Region,
    domain_box: &[(f64, f64)],
    n_points: usize,
) -> Result<f64> {
    if domain_box.len() != model.state_dim() || domain_box.len() > PRIMES.len() {
        return Err(Error::Configuration(format!(
            "sampling box has {} coordinates, model has {}",
            domain_box.len(),
            model.state_dim()
        )));
    }
    let mut inf = f64::INFINITY;
    let mut hits = 0usize;
    let mut x = vec![0.0; domain_box.len()];
    for i in 1..=n_points as u64 {
        for (j, (lo, hi)) in domain_box.iter().enumerate() {
            x[j] = lo + (hi - lo) * radical_inverse(i, PRIMES[j]);
        }
        if region.contains(&x) && model.contains(&x) {
            hits += 1;
            inf = inf.min(model.exit_time(&x));
        }
    }
    if hits == 0 {
        return Err(Error::UndefinedEstimator(format!(
            "no sample point of the box falls in region {}",
            region.label()
        )));
    }
    Ok(inf * 0.99)
}
