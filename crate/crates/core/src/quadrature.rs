//! Gauss-Hermite expectations over Gaussian variables and adaptive
//! Gauss-Kronrod integration on finite intervals.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

use crate::{Error, Result};

pub const DEFAULT_HERMITE_ORDER: usize = 64;

/// Physicists' Gauss-Hermite rule: `∫ e^{-x²} g(x) dx ≈ Σ wᵢ g(xᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes by Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("quadrature order must be at least 1"));
        }
        let n = order;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let pim4 = PI.powf(-0.25);
        let nf = n as f64;
        let mut z = 0.0;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            let mut converged = false;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::numeric("Gauss-Hermite root iteration did not converge"));
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[n / 2] = 0.0;
        }
        x.reverse();
        w.reverse();
        Ok(GaussHermite { nodes: x, weights: w })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[g(X)]` for `X ~ Normal(mean, std²)`.
    pub fn expect_normal<F: FnMut(f64) -> f64>(&self, mean: f64, std: f64, mut g: F) -> Result<f64> {
        let scale = core::f64::consts::SQRT_2 * std;
        let mut sum = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let u = mean + scale * x;
            let v = g(u);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand { node: u });
            }
            sum += w * v;
        }
        Ok(sum / PI.sqrt())
    }

    /// `E[f(t - σW_t/2)]` with `W_t ~ Normal(0, t)`.
    pub fn time_substituted<F: FnMut(f64) -> f64>(&self, f: F, t: f64, sigma: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::invalid("t must be non-negative"));
        }
        // t - σW/2 ~ Normal(t, σ²t/4)
        self.expect_normal(t, 0.5 * sigma.abs() * t.sqrt(), f)
    }
}

/// `E[f(t - σW_t/2)]` by Gauss-Hermite quadrature of the given order.
///
/// Exact for polynomial `f` of degree below `2·order`.
pub fn gaussian_expectation<F: FnMut(f64) -> f64>(f: F, t: f64, sigma: f64, quadrature_order: usize) -> Result<f64> {
    GaussHermite::new(quadrature_order)?.time_substituted(f, t, sigma)
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteIntegrand { node: x })
        }
    };
    let fc = eval(c)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = eval(c - dx)? + eval(c + dx)?;
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Ok((kronrod * h, ((kronrod - gauss) * h).abs()))
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]` to absolute
/// tolerance `tol`. Requests below the rounding floor `100·ε·|∫f|` are
/// treated as that floor.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MAX_INTERVALS: usize = 4000;
    if a == b {
        return Ok(0.0);
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("quadrature tolerance must be positive"));
    }
    let (v, e) = gk15(&mut f, a, b)?;
    let mut pending: Vec<(f64, f64, f64, f64)> = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    let target = |total: f64| tol.max(100.0 * f64::EPSILON * total.abs());
    while err > target(total) {
        if pending.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureNotConverged { error_estimate: err });
        }
        // bisect the interval with the largest error
        let (idx, _) = pending
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, s)| if s.3 > best.1 { (i, s.3) } else { best });
        let (lo, hi, v0, e0) = pending.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::QuadratureNotConverged { error_estimate: err });
        }
        let (v1, e1) = gk15(&mut f, lo, mid)?;
        let (v2, e2) = gk15(&mut f, mid, hi)?;
        total += v1 + v2 - v0;
        err += e1 + e2 - e0;
        pending.push((lo, mid, v1, e1));
        pending.push((mid, hi, v2, e2));
        if err <= target(total) {
            // recompute from scratch to shed accumulated cancellation
            total = pending.iter().map(|s| s.2).sum();
            err = pending.iter().map(|s| s.3).sum();
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial(k: u32) -> f64 {
        (1..=k).rev().step_by(2).map(f64::from).product()
    }

    #[test]
    fn rule_integrates_gaussian_moments() {
        let gh = GaussHermite::new(64).unwrap();
        let total: f64 = gh.weights().iter().sum();
        assert!((total - PI.sqrt()).abs() < 1e-13);
        assert!(gh.nodes().windows(2).all(|w| w[0] < w[1]));
        for k in 0..=10u32 {
            let m = gh.expect_normal(0.0, 1.0, |x| x.powi(k as i32)).unwrap();
            let exact = if k % 2 == 1 {
                0.0
            } else {
                double_factorial(k.saturating_sub(1))
            };
            assert!((m - exact).abs() < 1e-11 * exact.max(1.0), "k={k}: {m}");
        }
    }

    #[test]
    fn low_orders_are_exact_for_their_degree() {
        for order in 1..=8 {
            let gh = GaussHermite::new(order).unwrap();
            for k in 0..(2 * order) as i32 {
                let m = gh.expect_normal(0.0, 1.0, |x| x.powi(k)).unwrap();
                let exact = if k % 2 == 1 {
                    0.0
                } else {
                    double_factorial((k - 1).max(0) as u32)
                };
                assert!((m - exact).abs() < 1e-10 * exact.max(1.0), "order {order} k {k}");
            }
        }
        assert!(GaussHermite::new(0).is_err());
    }

    #[test]
    fn substituted_expectations() {
        // constant
        let c = gaussian_expectation(|_| 2.5, 3.0, 0.7, 64).unwrap();
        assert!((c - 2.5).abs() < 1e-13);
        // E[(t - σW/2)²] = t² + σ²t/4
        let q = gaussian_expectation(|u| u * u, 1.0, 1.0, 64).unwrap();
        assert!((q - 1.25).abs() < 1e-13);
        // E[cos Ω(t - σW/2)] = exp(-Ω²σ²t/8) cos Ωt
        let v = gaussian_expectation(|u| (2.0 * u).cos(), 1.0, 1.0, 64).unwrap();
        let exact = (-0.5f64).exp() * 2.0f64.cos();
        assert!((v - exact).abs() < 1e-12);
        assert!((v + 0.252405815308).abs() < 1e-11);
    }

    #[test]
    fn non_finite_node_is_reported() {
        let err = gaussian_expectation(|u| 1.0 / (u - 1.0).max(0.0), 1.0, 1.0, 8).unwrap_err();
        assert!(matches!(err, Error::NonFiniteIntegrand { .. }));
    }

    #[test]
    fn adaptive_kronrod() {
        let v = integrate_adaptive(|x| x.sin(), 0.0, PI, 1e-13).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
        let v = integrate_adaptive(|x| 1.0 / (1.0 + x * x), -50.0, 50.0, 1e-12).unwrap();
        assert!((v - 2.0 * 50f64.atan()).abs() < 1e-11);
        let v = integrate_adaptive(|x| x.sqrt(), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }
}
