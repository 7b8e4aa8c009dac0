//! Running moments and Monte Carlo estimates.

#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

/// Mean of `n` samples with its standard error `sample_std / √n`.
///
/// `std_error` is `None` when fewer than two samples were seen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleEstimate {
    pub mean: f64,
    pub std_error: Option<f64>,
    pub n: u64,
}

impl EnsembleEstimate {
    /// Standard error, treating an undefined one as zero.
    pub fn se_or_zero(&self) -> f64 {
        self.std_error.unwrap_or(0.0)
    }

    /// `|mean - target| ≤ k·SE`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se_or_zero()
    }
}

/// Welford accumulator; `merge` uses Chan's pairwise update so partial sums
/// can be combined in any fixed tree.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample_variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| self.m2 / (self.n - 1) as f64)
    }

    pub fn estimate(&self) -> EnsembleEstimate {
        EnsembleEstimate {
            mean: self.mean,
            std_error: self.sample_variance().map(|v| (v.max(0.0) / self.n as f64).sqrt()),
            n: self.n,
        }
    }
}

impl Extend<f64> for Accumulator {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.push(x);
        }
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::new();
        acc.extend(iter);
        acc
    }
}
