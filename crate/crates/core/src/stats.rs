//! Mergeable replica statistics and the small set of tests the estimators need.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::scalar::Real;

/// Default confidence level for reported intervals.
pub const DEFAULT_CI_LEVEL: f64 = 0.99;

/// Running count, mean, centred second moment, min and max of a stream of observations.
///
/// Two accumulators merge with the pairwise update of Chan et al., so replicas can be
/// reduced in any order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchStats<F: Real> {
    count: u64,
    mean: F,
    m2: F,
    min: F,
    max: F,
}

impl<F: Real> Default for BatchStats<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> BatchStats<F> {
    pub fn new() -> Self {
        Self { count: 0, mean: F::zero(), m2: F::zero(), min: F::infinity(), max: F::neg_infinity() }
    }

    pub fn from_slice(xs: &[F]) -> Self {
        let mut s = Self::new();
        for &x in xs {
            s.push(x);
        }
        s
    }

    pub fn push(&mut self, x: F) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / F::of(self.count as f64);
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let na = F::of(self.count as f64);
        let nb = F::of(other.count as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        Self {
            count: self.count + other.count,
            mean: (na * self.mean + nb * other.mean) / n,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n,
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    pub fn merge_in(&mut self, other: &Self) {
        *self = self.merge(other);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> F {
        self.mean
    }

    pub fn min(&self) -> F {
        self.min
    }

    pub fn max(&self) -> F {
        self.max
    }

    /// Unbiased sample variance; `None` below two observations.
    pub fn variance(&self) -> Option<F> {
        (self.count >= 2).then(|| self.m2 / F::of((self.count - 1) as f64))
    }

    pub fn std_dev(&self) -> Option<F> {
        self.variance().map(|v| v.sqrt())
    }

    /// Standard error of the mean.
    pub fn se(&self) -> Option<F> {
        self.variance().map(|v| (v / F::of(self.count as f64)).sqrt())
    }

    /// Two-sided Student-t interval for the mean.
    pub fn ci(&self, level: f64) -> Option<(F, F)> {
        let se = self.se()?;
        let half = F::of(t_quantile(level, self.count - 1)) * se;
        Some((self.mean - half, self.mean + half))
    }

    /// Mean and SE as `f64`, SE zero when undefined.
    pub fn mean_se_f64(&self) -> (f64, f64) {
        (self.mean.to_f64_lossy(), self.se().map(|s| s.to_f64_lossy()).unwrap_or(0.0))
    }
}

/// Two-sided standard normal quantile for confidence `level`.
pub fn z_quantile(level: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(0.5 + level / 2.0)
}

/// Two-sided Student-t quantile with `dof` degrees of freedom.
pub fn t_quantile(level: f64, dof: u64) -> f64 {
    if dof == 0 {
        return f64::INFINITY;
    }
    StudentsT::new(0.0, 1.0, dof as f64).expect("positive dof").inverse_cdf(0.5 + level / 2.0)
}

/// Standard errors combined in quadrature.
pub fn combined_se(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jackknife {
    pub value: f64,
    pub se: f64,
}

/// Delete-one-block jackknife for a statistic of the whole sample.
pub fn block_jackknife(samples: &[f64], blocks: usize, statistic: impl Fn(&[f64]) -> f64) -> Jackknife {
    let value = statistic(samples);
    let blocks = blocks.min(samples.len());
    if blocks < 2 {
        return Jackknife { value, se: f64::NAN };
    }
    let size = samples.len() / blocks;
    let mut leave_out = Vec::with_capacity(blocks);
    let mut rest = Vec::with_capacity(samples.len());
    for b in 0..blocks {
        let (lo, hi) = (b * size, if b + 1 == blocks { samples.len() } else { (b + 1) * size });
        rest.clear();
        rest.extend_from_slice(&samples[..lo]);
        rest.extend_from_slice(&samples[hi..]);
        leave_out.push(statistic(&rest));
    }
    let g = blocks as f64;
    let mean = leave_out.iter().sum::<f64>() / g;
    let var = leave_out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (g - 1.0) / g;
    Jackknife { value, se: var.sqrt() }
}

/// Unbiased sample variance of a slice.
pub fn sample_variance(xs: &[f64]) -> f64 {
    BatchStats::from_slice(xs).variance().unwrap_or(f64::NAN)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub critical: f64,
    pub reject: bool,
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic critical value
/// `c(alpha) * sqrt((n + m) / (n m))`, `c(alpha) = sqrt(-ln(alpha / 2) / 2)`.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> KsTest {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let critical = c * ((n + m) / (n * m)).sqrt();
    KsTest { statistic: d, critical, reject: d > critical }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    LinearFit { slope, intercept, slope_se }
}

/// `log(mean(exp(v)))` without overflow.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|v| (v - m).exp()).sum();
    m + (s / values.len() as f64).ln()
}
