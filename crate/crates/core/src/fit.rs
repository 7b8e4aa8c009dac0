//! Least-squares fits used to read rates, powers and line shapes off
//! simulated curves.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

use crate::{Error, Result};

/// Coefficients of a weighted linear least-squares problem with their
/// standard errors (from the residual variance).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residual_rms: f64,
}

/// Minimize `Σ wᵢ (yᵢ - Σ_j X_ij β_j)²`.
pub fn least_squares(design: &DMatrix<f64>, y: &[f64], weights: Option<&[f64]>) -> Result<LinearFit> {
    let (n, p) = design.shape();
    if y.len() != n || n < p || p == 0 {
        return Err(Error::invalid(format!(
            "need at least {p} points for {p} parameters, got {}",
            y.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != n || w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::invalid("weights must be positive and match the data"));
        }
    }
    let sw = |i: usize| weights.map_or(1.0, |w| w[i].sqrt());
    let a = DMatrix::from_fn(n, p, |i, j| design[(i, j)] * sw(i));
    let b = DVector::from_fn(n, |i, _| y[i] * sw(i));
    let svd = a.clone().svd(true, true);
    let beta = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::numeric(format!("least squares failed: {e}")))?;
    let resid = &b - &a * &beta;
    let rss = resid.norm_squared();
    let dof = (n - p).max(1) as f64;
    let s2 = rss / dof;
    let ata = a.transpose() * &a;
    let cov = ata
        .try_inverse()
        .ok_or_else(|| Error::numeric("singular normal matrix"))?
        * s2;
    Ok(LinearFit {
        coefficients: beta.iter().copied().collect(),
        std_errors: (0..p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect(),
        residual_rms: (rss / n as f64).sqrt(),
    })
}

/// Fit `y = A e^{-rate·t}` by weighted regression of `ln y` on `t`.
/// Returns `(rate, A, se(rate))`. With `std_errors` given, points are
/// weighted by `(y/se)²`, the inverse variance of `ln y`.
pub fn exponential_rate(t: &[f64], y: &[f64], std_errors: Option<&[f64]>) -> Result<(f64, f64, f64)> {
    if y.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("exponential fit needs positive data"));
    }
    let design = DMatrix::from_fn(t.len(), 2, |i, j| if j == 0 { 1.0 } else { t[i] });
    let logy: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let weights: Option<Vec<f64>> = match std_errors {
        Some(se) => {
            if se.len() != y.len() {
                return Err(Error::invalid("standard errors do not match the data"));
            }
            Some(
                y.iter()
                    .zip(se)
                    .map(|(v, s)| if *s > 0.0 { (v / s).powi(2) } else { 1e30 })
                    .collect(),
            )
        }
        None => None,
    };
    let fit = least_squares(&design, &logy, weights.as_deref())?;
    Ok((-fit.coefficients[1], fit.coefficients[0].exp(), fit.std_errors[1]))
}

/// Fit `y = A t^p` on positive data; returns `(p, A)`.
pub fn power_law(t: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if t.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("power-law fit needs positive data"));
    }
    let design = DMatrix::from_fn(t.len(), 2, |i, j| if j == 0 { 1.0 } else { t[i].ln() });
    let logy: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let fit = least_squares(&design, &logy, None)?;
    Ok((fit.coefficients[1], fit.coefficients[0].exp()))
}

/// Fit `y = Σ_{k=1}^{degree} a_k t^k` (no constant term).
pub fn polynomial_through_origin(t: &[f64], y: &[f64], degree: usize) -> Result<LinearFit> {
    if degree == 0 {
        return Err(Error::invalid("degree must be at least 1"));
    }
    // scale t to keep the design well conditioned
    let scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let design = DMatrix::from_fn(t.len(), degree, |i, j| (t[i] / scale).powi(j as i32 + 1));
    let mut fit = least_squares(&design, y, None)?;
    for j in 0..degree {
        let f = scale.powi(j as i32 + 1);
        fit.coefficients[j] /= f;
        fit.std_errors[j] /= f;
    }
    Ok(fit)
}

/// Result of [`levenberg_marquardt`].
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearFit {
    pub params: Vec<f64>,
    pub residual_rms: f64,
    pub iterations: usize,
}

/// Minimize `Σ (yᵢ - model(p, xᵢ))²` by Levenberg-Marquardt with a forward
/// difference Jacobian.
pub fn levenberg_marquardt<F>(model: F, x: &[f64], y: &[f64], p0: &[f64]) -> Result<NonlinearFit>
where
    F: Fn(&[f64], f64) -> f64,
{
    let n = x.len();
    let np = p0.len();
    if y.len() != n || n < np || np == 0 {
        return Err(Error::invalid("not enough data for the requested parameters"));
    }
    let residuals = |p: &[f64]| -> DVector<f64> { DVector::from_fn(n, |i, _| y[i] - model(p, x[i])) };
    let mut p = p0.to_vec();
    let mut r = residuals(&p);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for it in 0..500 {
        iterations = it + 1;
        let mut jac = DMatrix::zeros(n, np);
        for j in 0..np {
            let h = 1e-7 * p[j].abs().max(1e-8);
            let mut q = p.clone();
            q[j] += h;
            for i in 0..n {
                jac[(i, j)] = (model(&q, x[i]) - model(&p, x[i])) / h;
            }
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for j in 0..np {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rt = residuals(&trial);
            let ct = rt.norm_squared();
            if ct.is_finite() && ct < cost {
                let rel = (cost - ct) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-14 {
                    return Ok(NonlinearFit {
                        params: p,
                        residual_rms: (cost / n as f64).sqrt(),
                        iterations,
                    });
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("nonlinear fit diverged"));
    }
    Ok(NonlinearFit {
        params: p,
        residual_rms: (cost / n as f64).sqrt(),
        iterations,
    })
}
