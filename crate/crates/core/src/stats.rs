//! Small statistical helpers used by the oracles and the test suites.

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Asymptotic 1% critical value of the two-sample KS statistic.
pub fn ks_two_sample_critical_1pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.628 * ((n + m) / (n * m)).sqrt()
}

/// Ratio estimate `Σ num / Σ den` with a batch-means standard error.
///
/// Terms are split into `batches` contiguous groups (chain order); the
/// standard error is the spread of the per-batch ratios over `√batches`.
/// Batches with zero denominator are dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    pub value: f64,
    pub std_error: f64,
    pub terms: usize,
}

pub fn batch_ratio(num: &[f64], den: &[f64], batches: usize) -> Option<RatioEstimate> {
    assert_eq!(num.len(), den.len());
    let total_den: f64 = den.iter().sum();
    if num.is_empty() || total_den == 0.0 {
        return None;
    }
    let value = num.iter().sum::<f64>() / total_den;
    let batches = batches.clamp(1, num.len());
    let size = num.len().div_ceil(batches);
    let ratios: Vec<f64> = num
        .chunks(size)
        .zip(den.chunks(size))
        .filter_map(|(n, d)| {
            let sd: f64 = d.iter().sum();
            (sd > 0.0).then(|| n.iter().sum::<f64>() / sd)
        })
        .collect();
    let k = ratios.len() as f64;
    let std_error = if ratios.len() > 1 {
        let mean = ratios.iter().sum::<f64>() / k;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        f64::INFINITY
    };
    Some(RatioEstimate {
        value,
        std_error,
        terms: num.len(),
    })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
