//! Closed-form Weisskopf-Wigner results with their stochastic corrections,
//! and the golden-rule function `F[A, t]`.

use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

use crate::linalg::{c, expm, CMatrix, I};
use crate::quadrature::integrate_adaptive;
use crate::system::WWParams;
use crate::{Error, Flagged, Result, Warning};

/// A decay channel `|m⟩` with energy `E_m` and coupling `V_ms`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayChannel {
    pub e_m: f64,
    pub v_ms: Complex64,
}

impl DecayChannel {
    pub fn new(e_m: f64, v_ms: Complex64) -> Result<Self> {
        if !e_m.is_finite() || !v_ms.re.is_finite() || !v_ms.im.is_finite() {
            return Err(Error::invalid("decay channel entries must be finite"));
        }
        Ok(DecayChannel { e_m, v_ms })
    }

    /// `E_s - E_m + M`.
    pub fn detuning(&self, ww: &WWParams) -> Result<f64> {
        Ok(ww.e_s() - self.e_m + ww.m_scalar()?)
    }
}

/// Which transition-probability formula to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionMode {
    /// Includes the `σ²Γ` corrections to the rate and the oscillation
    /// frequency.
    Exact,
    /// Leading order in `V`: transient damped by
    /// `exp[-σ²(E_m-E_s)²t/8 - Γt/2]`.
    LeadingOrder,
}

fn non_positive_rate(gamma: f64, sigma: f64) -> Option<Warning> {
    (sigma * sigma * gamma / 8.0 >= 1.0).then_some(Warning::NonPositiveRate { gamma, sigma })
}

/// `E[|C_s(t)|²] = exp[-Γ(1 - σ²Γ/8)t]`.
pub fn survival_expectation(ww: &WWParams, sigma: f64, t: f64) -> Result<Flagged<f64>> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t must be non-negative"));
    }
    let gamma = ww.gamma_scalar()?;
    let value = (-gamma * (1.0 - sigma * sigma * gamma / 8.0) * t).exp();
    let mut out = Flagged::clean(value);
    out.warnings.extend(non_positive_rate(gamma, sigma));
    Ok(out)
}

/// `exp[-(iM + Γ/2)t]`; entry `(a, A)` is `E[C_{s_a}(t)]` for initial state
/// `s_A`.
pub fn survival_expectation_degenerate(ww: &WWParams, t: f64) -> Result<CMatrix> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t must be non-negative"));
    }
    let gen = (ww.m() * I + ww.gamma() * c(0.5, 0.0)) * c(-t, 0.0);
    expm(&gen)
}

/// `E[|C_m(t)|²]` for a decay channel of a non-degenerate level.
///
/// With `δ = E_s - E_m + M` and `L = |V_ms|²/(δ² + Γ²/4)`, the exact form is
///
/// `L·(e^{-Γ(1-σ²Γ/8)t} + 1 - 2e^{-Γ(1-σ²Γ/16)t/2 - σ²δ²t/8} cos[δ(1-σ²Γ/8)t])`.
pub fn transition_expectation(
    ww: &WWParams,
    channel: &DecayChannel,
    sigma: f64,
    t: f64,
    mode: TransitionMode,
) -> Result<f64> {
    let gamma = ww.gamma_scalar()?;
    let delta = channel.detuning(ww)?;
    let den = delta * delta + 0.25 * gamma * gamma;
    if den == 0.0 {
        return Ok(channel.v_ms.norm_sqr() * t * t);
    }
    let l = channel.v_ms.norm_sqr() / den;
    let s2 = sigma * sigma;
    let body = match mode {
        TransitionMode::Exact => {
            (-gamma * (1.0 - s2 * gamma / 8.0) * t).exp() + 1.0
                - 2.0
                    * (-0.5 * gamma * (1.0 - s2 * gamma / 16.0) * t - s2 * delta * delta * t / 8.0).exp()
                    * (delta * (1.0 - s2 * gamma / 8.0) * t).cos()
        }
        TransitionMode::LeadingOrder => {
            let bare = channel.e_m - ww.e_s();
            (-gamma * t).exp() + 1.0 - 2.0 * (-s2 * bare * bare * t / 8.0 - 0.5 * gamma * t).exp() * (delta * t).cos()
        }
    };
    Ok(l * body)
}

/// `|V_ms|²/[(E_s - E_m + M)² + Γ²/4]`, independent of `σ`.
pub fn lorentzian_profile(ww: &WWParams, channel: &DecayChannel) -> Result<f64> {
    let gamma = ww.gamma_scalar()?;
    let delta = channel.detuning(ww)?;
    let den = delta * delta + 0.25 * gamma * gamma;
    if den == 0.0 {
        return Err(Error::numeric("Lorentzian diverges on resonance with zero width"));
    }
    Ok(channel.v_ms.norm_sqr() / den)
}

/// Mass and width recovered from an occupation spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineShapeFit {
    /// Fitted line center minus `E_s`.
    pub mass: f64,
    /// Fitted full width at half maximum.
    pub gamma: f64,
    pub residual_rms: f64,
}

/// Least-squares fit of `M` and `Γ` in the [`TransitionMode::Exact`]
/// occupation profile at time `t` to measured occupations of `channels`.
/// The couplings fix the numerator; only the center and width are free.
pub fn fit_line_shape(
    e_s: f64,
    channels: &[DecayChannel],
    occupations: &[f64],
    sigma: f64,
    t: f64,
    guess: (f64, f64),
) -> Result<LineShapeFit> {
    if channels.len() != occupations.len() || channels.len() < 3 {
        return Err(Error::invalid("need at least three channels with one occupation each"));
    }
    let model = |p: &[f64], k: f64| -> f64 {
        let ww = match WWParams::scalar(e_s, p[0], p[1].abs()) {
            Ok(w) => w,
            Err(_) => return f64::NAN,
        };
        transition_expectation(&ww, &channels[k as usize], sigma, t, TransitionMode::Exact).unwrap_or(f64::NAN)
    };
    let index: alloc::vec::Vec<f64> = (0..channels.len()).map(|k| k as f64).collect();
    let fit = crate::fit::levenberg_marquardt(model, &index, occupations, &[guess.0, guess.1])?;
    Ok(LineShapeFit {
        mass: fit.params[0],
        gamma: fit.params[1].abs(),
        residual_rms: fit.residual_rms,
    })
}

/// `F[0, t] = (2π/Γt)(1 - e^{-Γt})`, tending to `2π` as `Γt → 0`.
pub fn golden_rule_f_closed(t: f64, gamma: f64) -> f64 {
    let x = gamma * t;
    if x == 0.0 {
        2.0 * PI
    } else {
        -2.0 * PI * (-x).exp_m1() / x
    }
}

/// `2σ(π/2t)^{1/2} exp(-2t/σ²)`, bounding `|F[σ²/8t, t] - F[0, t]|`.
pub fn golden_rule_correction_bound(sigma: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !(sigma > 0.0) {
        return Err(Error::invalid("the correction bound needs sigma > 0 and t > 0"));
    }
    Ok(2.0 * sigma * (PI / (2.0 * t)).sqrt() * (-2.0 * t / (sigma * sigma)).exp())
}

/// `F[A, t] = ∫ du [(1 + e^{-Γt}) - 2e^{-A(u² + c²) - Γt/2} cos u] / (u² + c²)`
/// with `c = Γt/2`, to absolute tolerance `tol`.
///
/// The even integrand is integrated on `[0, L]`, `L = 10·max(1, Γt, 1/√A)`,
/// in chunks of width π. Beyond `L` the non-oscillating part is integrated
/// analytically; the cosine part is chunked further until its remaining
/// contribution, estimated by parts, is below `tol`.
#[allow(non_snake_case)]
pub fn golden_rule_F(a: f64, t: f64, gamma: f64, tol: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid("t must be positive"));
    }
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::invalid("A must be finite and >= 0"));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid("gamma must be positive"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let gt = gamma * t;
    let cc = 0.5 * gt;
    let c2 = cc * cc;
    let h = (-0.5 * gt).exp();
    let one_minus_h_sq = (-0.5 * gt).exp_m1().powi(2);
    // numerator written as a sum of non-negative terms to avoid cancellation
    let integrand = |u: f64| {
        let r = u * u + c2;
        let g = (-a * r).exp();
        let s = (0.5 * u).sin();
        let num = one_minus_h_sq + 2.0 * h * (-(-a * r).exp_m1() + g * 2.0 * s * s);
        num / r
    };
    let mut l = 10.0 * 1f64.max(gt);
    if a > 0.0 {
        l = l.max(10.0 / a.sqrt());
    }
    let chunks = (l / PI).ceil() as usize;
    let l = chunks as f64 * PI;
    // budget: half for [0, L] (doubled by symmetry), half for the tails
    let chunk_tol = tol / (8.0 * chunks as f64);
    let mut inner = 0.0;
    for k in 0..chunks {
        let lo = k as f64 * PI;
        inner += integrate_adaptive(integrand, lo, lo + PI, chunk_tol)?;
    }
    let tail_flat = (1.0 + (-gt).exp()) * (0.5 * PI - (l / cc).atan()) / cc;

    // ∫_L^∞ q(u) cos u du with q = e^{-A(u²+c²)}/(u²+c²)
    let q = |u: f64| (-a * (u * u + c2)).exp() / (u * u + c2);
    let dq = |u: f64| {
        let r = u * u + c2;
        -q(u) * (2.0 * a * u + 2.0 * u / r)
    };
    let weight = 4.0 * h;
    let mut osc = 0.0;
    let mut u = l;
    const MAX_TAIL_CHUNKS: usize = 2_000_000;
    let mut n = 0;
    while weight * dq(u).abs() > 0.25 * tol {
        if n >= MAX_TAIL_CHUNKS {
            return Err(Error::QuadratureNotConverged {
                error_estimate: weight * dq(u).abs(),
            });
        }
        osc += integrate_adaptive(
            |x| q(x) * x.cos(),
            u,
            u + PI,
            tol / (8.0 * (n + 1) as f64 * (n + 2) as f64),
        )?;
        u += PI;
        n += 1;
    }
    osc += -q(u) * u.sin() - dq(u) * u.cos();
    let value = 2.0 * (inner + tail_flat) - weight * osc;
    if !value.is_finite() {
        return Err(Error::numeric("golden-rule integral is not finite"));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gaussian_expectation;

    fn ww(gamma: f64) -> WWParams {
        WWParams::scalar(0.0, 0.0, gamma).unwrap()
    }

    #[test]
    fn survival_values() {
        let w = ww(0.1);
        assert!((survival_expectation(&w, 0.0, 10.0).unwrap().value - 0.367879441171).abs() < 1e-11);
        assert_eq!(survival_expectation(&w, 1.0, 0.0).unwrap().value, 1.0);
        let s = survival_expectation(&w, 1.0, 10.0).unwrap();
        assert!((s.value - (-0.9875f64).exp()).abs() < 1e-15);
        assert!((s.value - 0.372504).abs() < 5e-6);
        assert!(s.is_clean());
        let flagged = survival_expectation(&w, 10.0, 1.0).unwrap();
        assert!(!flagged.is_clean());
    }

    #[test]
    fn survival_matches_substitution() {
        let w = ww(0.1);
        for &(sigma, t) in &[(0.5, 2.0), (1.0, 10.0), (2.0, 7.0)] {
            let direct = survival_expectation(&w, sigma, t).unwrap().value;
            let sub = gaussian_expectation(|u| (-0.1 * u).exp(), t, sigma, 64).unwrap();
            assert!((direct - sub).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_survival() {
        let w = WWParams::scalar(0.0, 0.3, 0.1).unwrap();
        let m = survival_expectation_degenerate(&w, 2.0).unwrap();
        assert!((m[(0, 0)] - c(-0.1, -0.6).exp()).norm() < 1e-14);
        let id = survival_expectation_degenerate(&w, 0.0).unwrap();
        assert!((id[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn transition_limits() {
        let w = WWParams::scalar(0.0, 0.01, 0.1).unwrap();
        let ch = DecayChannel::new(0.05, c(0.02, 0.0)).unwrap();
        for mode in [TransitionMode::Exact, TransitionMode::LeadingOrder] {
            assert!(transition_expectation(&w, &ch, 1.0, 0.0, mode).unwrap().abs() < 1e-17);
            let late0 = transition_expectation(&w, &ch, 0.0, 600.0, mode).unwrap();
            let late1 = transition_expectation(&w, &ch, 1.0, 600.0, mode).unwrap();
            let lor = lorentzian_profile(&w, &ch).unwrap();
            assert!((late0 / lor - 1.0).abs() < 1e-10);
            assert!((late1 / lor - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn transition_matches_substitution() {
        let w = WWParams::scalar(0.0, 0.004, 0.1).unwrap();
        for &e_m in &[-0.3, 0.0, 0.02, 0.4] {
            let ch = DecayChannel::new(e_m, c(0.0126, 0.003)).unwrap();
            for &(sigma, t) in &[(1.0, 3.0), (1.0, 10.0), (0.5, 25.0)] {
                let direct = transition_expectation(&w, &ch, sigma, t, TransitionMode::Exact).unwrap();
                let sub = gaussian_expectation(
                    |u| transition_expectation(&w, &ch, 0.0, u, TransitionMode::Exact).unwrap(),
                    t,
                    sigma,
                    64,
                )
                .unwrap();
                assert!((direct - sub).abs() < 1e-8, "e_m {e_m} sigma {sigma} t {t}");
            }
        }
    }

    #[test]
    fn lorentzian_shape() {
        let w = WWParams::scalar(1.0, 0.1, 0.2).unwrap();
        let peak = lorentzian_profile(&w, &DecayChannel::new(1.1, c(0.03, 0.0)).unwrap()).unwrap();
        assert!((peak - 4.0 * 0.0009 / 0.04).abs() < 1e-15);
        let half = lorentzian_profile(&w, &DecayChannel::new(1.2, c(0.03, 0.0)).unwrap()).unwrap();
        assert!((half / peak - 0.5).abs() < 1e-12);
        let w0 = WWParams::scalar(0.0, 0.0, 0.0).unwrap();
        assert!(lorentzian_profile(&w0, &DecayChannel::new(0.0, c(0.1, 0.0)).unwrap()).is_err());
    }

    #[test]
    fn line_shape_fit_recovers_parameters() {
        let w = WWParams::scalar(0.0, 0.003, 0.1).unwrap();
        let channels: alloc::vec::Vec<DecayChannel> = (-60..=60)
            .map(|k| DecayChannel::new(k as f64 * 0.01, c(0.0126, 0.0)).unwrap())
            .collect();
        let y: alloc::vec::Vec<f64> = channels
            .iter()
            .map(|ch| transition_expectation(&w, ch, 1.0, 50.0, TransitionMode::Exact).unwrap())
            .collect();
        let fit = fit_line_shape(0.0, &channels, &y, 1.0, 50.0, (0.0, 0.12)).unwrap();
        assert!((fit.mass - 0.003).abs() < 1e-7, "{fit:?}");
        assert!((fit.gamma - 0.1).abs() < 1e-7, "{fit:?}");
    }

    #[test]
    fn f_closed_form_and_quadrature() {
        assert!((golden_rule_f_closed(10.0, 0.1) - 3.971730607598).abs() < 1e-11);
        assert!((golden_rule_f_closed(1e-9, 1e-3) - 2.0 * PI).abs() < 1e-9);
        for &gt in &[0.1, 1.0, 3.0] {
            let f = golden_rule_F(0.0, gt / 0.1, 0.1, 1e-10).unwrap();
            assert!((f - golden_rule_f_closed(gt / 0.1, 0.1)).abs() < 1e-8, "Γt = {gt}: {f}");
        }
    }

    #[test]
    fn correction_bound_values() {
        let b = golden_rule_correction_bound(1.0, 10.0).unwrap();
        assert!((b / 1.634e-9 - 1.0).abs() < 1e-3, "{b}");
        assert!(golden_rule_correction_bound(1.0, 1e4).unwrap() == 0.0);
        let a = 1.0 / 80.0;
        let f_a = golden_rule_F(a, 10.0, 0.1, 1e-12).unwrap();
        let f_0 = golden_rule_F(0.0, 10.0, 0.1, 1e-12).unwrap();
        assert!((f_a - f_0).abs() <= b + 1e-11);
    }
}
