//! Wiener paths on uniform grids and Itô-identity estimators.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

use crate::rng::{standard_normal, RngPolicy};
use crate::stats::{Accumulator, EnsembleEstimate};
use crate::{Error, Result};

/// One Brownian realization `W(t_k)` on the grid `t_k = k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    dt: f64,
    grid: Vec<f64>,
    values: Vec<f64>,
    seed: RngPolicy,
}

impl BrownianPath {
    /// Build a path from explicit values on a uniform grid (`values[0]` must
    /// be 0). Used for zero-noise paths and externally supplied noise.
    pub fn from_values(dt: f64, values: Vec<f64>, seed: RngPolicy) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid("path step must be positive"));
        }
        if values.len() < 2 {
            return Err(Error::invalid("path needs at least one step"));
        }
        if values[0] != 0.0 {
            return Err(Error::invalid("Brownian path must start at W(0) = 0"));
        }
        let grid = (0..values.len()).map(|k| k as f64 * dt).collect();
        Ok(BrownianPath { dt, grid, values, seed })
    }

    /// The path `W ≡ 0`.
    pub fn zero(dt: f64, n_steps: usize) -> Result<Self> {
        Self::from_values(dt, alloc::vec![0.0; n_steps + 1], RngPolicy::new(0, 0))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> RngPolicy {
        self.seed
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    /// Grid index of `t`, which must sit on the grid to within 1e-9·dt.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = (t / self.dt).round();
        if k < 0.0 || k as usize >= self.grid.len() || (k * self.dt - t).abs() > 1e-9 * self.dt {
            return Err(Error::invalid(format!("time {t} is not on the path grid")));
        }
        Ok(k as usize)
    }

    pub fn value_at(&self, t: f64) -> Result<f64> {
        Ok(self.values[self.index_of(t)?])
    }

    /// Keep every `factor`-th grid point: the same realization seen with step
    /// `factor·dt`.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_steps().is_multiple_of(factor) {
            return Err(Error::invalid(format!(
                "cannot coarsen {} steps by {factor}",
                self.n_steps()
            )));
        }
        let values = self.values.iter().step_by(factor).copied().collect();
        Self::from_values(self.dt * factor as f64, values, self.seed)
    }
}

/// Sample `W` on `{0, dt, …, n_steps·dt}` from the stream selected by `rng`.
pub fn sample_path(dt: f64, n_steps: usize, rng: RngPolicy) -> Result<BrownianPath> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be at least 1"));
    }
    let mut source = rng.rng();
    let scale = dt.sqrt();
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut w = 0.0;
    values.push(w);
    for _ in 0..n_steps {
        w += scale * standard_normal(&mut source);
        values.push(w);
    }
    BrownianPath::from_values(dt, values, rng)
}

/// Monte Carlo estimate of `E[exp(α W_t)]`, which should approach
/// `exp(α² t / 2)`.
pub fn ito_exponential_expectation(alpha: f64, t: f64, n_paths: usize, rng: RngPolicy) -> Result<EnsembleEstimate> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t must be non-negative"));
    }
    if n_paths < 2 {
        return Err(Error::invalid("need at least two paths for a variance estimate"));
    }
    let mut source = rng.rng();
    let scale = t.sqrt();
    let mut acc = Accumulator::new();
    for _ in 0..n_paths {
        let w = scale * standard_normal(&mut source);
        acc.push((alpha * w).exp());
    }
    Ok(acc.estimate())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_zero_on_uniform_grid() {
        let p = sample_path(0.01, 100, RngPolicy::new(1, 0)).unwrap();
        assert_eq!(p.values()[0], 0.0);
        assert_eq!(p.grid().len(), 101);
        assert!((p.horizon() - 1.0).abs() < 1e-12);
        assert!(p.grid().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn deterministic_per_stream() {
        let a = sample_path(0.01, 50, RngPolicy::new(9, 2)).unwrap();
        let b = sample_path(0.01, 50, RngPolicy::new(9, 2)).unwrap();
        assert_eq!(a, b);
        let c = sample_path(0.01, 50, RngPolicy::new(9, 3)).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(sample_path(0.0, 10, RngPolicy::new(0, 0)).is_err());
        assert!(sample_path(-1.0, 10, RngPolicy::new(0, 0)).is_err());
        assert!(sample_path(0.1, 0, RngPolicy::new(0, 0)).is_err());
        assert!(ito_exponential_expectation(1.0, 1.0, 1, RngPolicy::new(0, 0)).is_err());
    }

    #[test]
    fn zero_alpha_is_exact() {
        let e = ito_exponential_expectation(0.0, 2.0, 100, RngPolicy::new(3, 0)).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_error, Some(0.0));
    }

    #[test]
    fn coarsening_keeps_the_realization() {
        let p = sample_path(0.01, 64, RngPolicy::new(5, 1)).unwrap();
        let q = p.coarsen(4).unwrap();
        assert_eq!(q.n_steps(), 16);
        assert_eq!(q.values()[3], p.values()[12]);
        assert!(p.coarsen(3).is_err());
        assert_eq!(p.value_at(0.32).unwrap(), p.values()[32]);
        assert!(p.value_at(0.325).is_err());
    }

    #[test]
    fn increment_variance_matches_dt() {
        let dt = 0.02;
        let mut acc = Accumulator::new();
        for s in 0..400 {
            let p = sample_path(dt, 50, RngPolicy::new(11, s)).unwrap();
            acc.extend(p.increments());
        }
        let var = acc.sample_variance().unwrap();
        // 20 000 increments: relative SE of the variance is sqrt(2/n) = 1%.
        assert!((var / dt - 1.0).abs() < 0.05, "{var}");
    }
}
