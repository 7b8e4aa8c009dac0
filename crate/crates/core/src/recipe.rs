//! The time-substitution rule: a noise-free probability `f(t)` becomes the
//! stochastic expectation `E[f(t - σW_t/2)]`, with `t - σW_t/2` distributed
//! as `Normal(t, σ²t/4)`.
//!
//! The Gaussian puts some mass on negative arguments. Closed-form `f` are
//! evaluated there as written; the mass `Φ(-2√t/σ)` is reported so callers
//! can judge whether it matters.

use crate::quadrature::gaussian_expectation;
use crate::{Error, Flagged, Result, Warning};
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

/// A substituted expectation with its negative-argument diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecipeValue {
    pub value: f64,
    /// Probability that `t - σW_t/2 < 0`.
    pub negative_tail_mass: f64,
}

/// `P(t - σW_t/2 < 0) = Φ(-2√t/σ)`.
pub fn negative_tail_mass(sigma: f64, t: f64) -> f64 {
    if sigma == 0.0 || t == 0.0 {
        return 0.0;
    }
    // Φ(-x) = erfc(x/√2)/2
    0.5 * libm::erfc(2.0 * t.sqrt() / sigma.abs() / core::f64::consts::SQRT_2)
}

/// `E[f(t - σW_t/2)]` by Gauss-Hermite quadrature of the given order.
pub fn recipe_transform<F: FnMut(f64) -> f64>(f: F, sigma: f64, t: f64, order: usize) -> Result<RecipeValue> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t must be non-negative"));
    }
    let value = gaussian_expectation(f, t, sigma, order)?;
    Ok(RecipeValue {
        value,
        negative_tail_mass: negative_tail_mass(sigma, t),
    })
}

/// `E[W_t^k]`: zero for odd `k`, `(k-1)!!·t^{k/2}` for even `k`.
pub fn wt_moments(k: u32, t: f64) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let double_fact: f64 = (1..k).step_by(2).map(f64::from).product();
    double_fact * t.powi((k / 2) as i32)
}

/// `Γ(1 - σ²Γ/8)`, flagged when it is not positive.
pub fn corrected_decay_rate(gamma: f64, sigma: f64) -> Result<Flagged<f64>> {
    if !(gamma >= 0.0) {
        return Err(Error::invalid("gamma must be >= 0"));
    }
    let factor = 1.0 - sigma * sigma * gamma / 8.0;
    let mut out = Flagged::clean(gamma * factor);
    if gamma > 0.0 && factor <= 0.0 {
        out.warnings.push(Warning::NonPositiveRate { gamma, sigma });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        assert_eq!(wt_moments(2, 3.0), 3.0);
        assert_eq!(wt_moments(3, 3.0), 0.0);
        assert_eq!(wt_moments(4, 2.0), 12.0);
        assert_eq!(wt_moments(0, 5.0), 1.0);
        assert_eq!(wt_moments(8, 1.0), 105.0);
    }

    #[test]
    fn rates() {
        assert_eq!(corrected_decay_rate(0.1, 0.0).unwrap().value, 0.1);
        assert!((corrected_decay_rate(0.1, 1.0).unwrap().value - 0.09875).abs() < 1e-15);
        let root = corrected_decay_rate(8.0, 1.0).unwrap();
        assert_eq!(root.value, 0.0);
        assert!(!root.is_clean());
    }

    #[test]
    fn zero_noise_is_identity() {
        let r = recipe_transform(|u| (-0.3 * u).exp() * u.cos(), 0.0, 2.0, 64).unwrap();
        assert!((r.value - (-0.6f64).exp() * 2.0f64.cos()).abs() < 1e-15);
        assert_eq!(r.negative_tail_mass, 0.0);
    }

    #[test]
    fn tail_mass() {
        // Φ(-2) = 0.0227501319...
        assert!((negative_tail_mass(1.0, 1.0) - 0.022750131948179).abs() < 1e-12);
        assert!(negative_tail_mass(1.0, 10.0) < 1e-9);
    }
}
