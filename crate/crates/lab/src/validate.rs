//! Invariant suites behind `sse-lab validate`.

use std::f64::consts::PI;

use sse_decay::brownian::{ito_exponential_expectation, sample_path};
use sse_decay::ensemble::{compare_estimates, compare_to_oracle, ComparisonReport, Engine, ExperimentPlan, Observable};
use sse_decay::expectation::{lindblad_integrate_with_step, DensityMatrix};
use sse_decay::linalg::{c, CMatrix, Hamiltonian};
use sse_decay::quadrature::integrate_adaptive;
use sse_decay::recipe::{recipe_transform, wt_moments};
use sse_decay::rng::standard_normal;
use sse_decay::system::{build_flat_bath, compute_ww_params};
use sse_decay::trajectory::{linear_sde_em, linear_sde_exact, pathwise_cm, ExponentialLinearSde, StateVector};
use sse_decay::ww::{
    golden_rule_F, golden_rule_correction_bound, golden_rule_f_closed, survival_expectation, transition_expectation,
    DecayChannel, TransitionMode,
};
use sse_decay::{Accumulator, NoiseParams, Result, RngPolicy, SystemSpec, WWParams};

use crate::parallel::run_ensemble_parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Ito,
    Lindblad,
    Appendix,
    GoldenRule,
    Recipe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

pub fn run_suite(suite: Suite, seed: u64, workers: usize) -> Result<Vec<Check>> {
    match suite {
        Suite::Ito => ito(seed),
        Suite::Lindblad => lindblad(seed, workers),
        Suite::Appendix => appendix(seed),
        Suite::GoldenRule => golden_rule(),
        Suite::Recipe => recipe(),
    }
}

fn ito(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (k, &(alpha, t)) in [(1.0, 1.0), (2.0, 0.5)].iter().enumerate() {
        let e = ito_exponential_expectation(alpha, t, 100_000, RngPolicy::new(seed, k as u64))?;
        let exact = (alpha * alpha * t / 2.0).exp();
        out.push(Check::new(
            format!("E[exp({alpha} W_{t})]"),
            e.within(exact, 3.0),
            format!("{:.6} ± {:.6} vs {exact:.6}", e.mean, e.se_or_zero()),
        ));
    }
    let t: f64 = 1.0;
    let mut rng = RngPolicy::new(seed, 100).rng();
    let mut acc = [Accumulator::new(); 4];
    for _ in 0..100_000 {
        let w = t.sqrt() * standard_normal(&mut rng);
        for (k, a) in acc.iter_mut().enumerate() {
            a.push(w.powi(k as i32 + 1));
        }
    }
    for (k, a) in acc.iter().enumerate() {
        let e = a.estimate();
        let exact = wt_moments(k as u32 + 1, t);
        out.push(Check::new(
            format!("E[W_1^{}]", k + 1),
            e.within(exact, 3.0),
            format!("{:.6} ± {:.6} vs {exact}", e.mean, e.se_or_zero()),
        ));
    }
    let dt = 0.01;
    let mut inc = Accumulator::new();
    for p in 0..1000 {
        let path = sample_path(dt, 100, RngPolicy::new(seed, 1000 + p))?;
        inc.extend(path.increments());
    }
    let var = inc.sample_variance().unwrap_or(0.0);
    let n = inc.count() as f64;
    let se = dt * (2.0 / (n - 1.0)).sqrt();
    out.push(Check::new(
        "Var[dW] = dt",
        (var - dt).abs() <= 3.0 * se,
        format!("{var:.6e} vs {dt:.6e} (SE {se:.1e})"),
    ));
    Ok(out)
}

/// Ensemble `E[ρ]` from both unravelings and from the master equation for
/// `H = diag(0, 1)`, `σ = 1`, starting from `(|0⟩ + |1⟩)/√2`.
pub struct UnravelingComparison {
    pub sse_vs_lindblad: ComparisonReport,
    pub imaginary_vs_lindblad: ComparisonReport,
    pub sse_vs_imaginary: ComparisonReport,
}

pub fn unraveling_comparison(n_traj: u64, seed: u64, workers: usize) -> Result<UnravelingComparison> {
    let spec = SystemSpec::new(vec![0.0, 1.0], CMatrix::zeros(2, 2), vec![0], 0)?;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let psi0 = vec![c(r, 0.0), c(r, 0.0)];
    let mut plan = ExperimentPlan::new(spec, NoiseParams::new(1.0)?, 0.001, 5.0, n_traj, seed);
    plan.observables = vec![Observable::DensityMatrix];
    plan.record_every = 250;
    plan.initial_state = Some(psi0.clone());
    let sse = run_ensemble_parallel(plan.clone(), Engine::NonlinearSse, workers)?;
    let imag = run_ensemble_parallel(plan, Engine::ImaginaryNoise, workers)?;

    let h = Hamiltonian::diagonal(&[0.0, 1.0])?;
    let rho0 = DensityMatrix::pure(&StateVector::new(psi0, 0.0)?);
    let grid: Vec<f64> = sse.times[1..].to_vec();
    let mut exact = vec![rho0.clone()];
    exact.extend(lindblad_integrate_with_step(&rho0, &h, 1.0, &grid, 1e-3)?);

    let mut oracle = Vec::new();
    let mut sse_est = Vec::new();
    let mut imag_est = Vec::new();
    for (j, name) in sse.columns.iter().enumerate() {
        let (i, k, part) = parse_rho_column(name);
        for (row, rho) in exact.iter().enumerate() {
            let z = rho.rho[(i, k)];
            oracle.push(if part == "re" { z.re } else { z.im });
            sse_est.push(sse.rows[row][j]);
            imag_est.push(imag.rows[row][j]);
        }
    }
    Ok(UnravelingComparison {
        sse_vs_lindblad: compare_to_oracle(&sse_est, &oracle)?,
        imaginary_vs_lindblad: compare_to_oracle(&imag_est, &oracle)?,
        sse_vs_imaginary: compare_estimates(&sse_est, &imag_est)?,
    })
}

fn parse_rho_column(name: &str) -> (usize, usize, &str) {
    let body = name.strip_prefix("rho").expect("density column");
    let mut it = body.split('_');
    let i = it.next().unwrap().parse().unwrap();
    let k = it.next().unwrap().parse().unwrap();
    (i, k, it.next().unwrap())
}

fn report_check(name: &str, r: &ComparisonReport) -> Check {
    Check::new(
        name,
        r.pass,
        format!(
            "max|z| = {:.2}, fraction |z|>3 = {:.3}, {} points",
            r.max_abs_z,
            r.fraction_over_3,
            r.z.len()
        ),
    )
}

fn lindblad(seed: u64, workers: usize) -> Result<Vec<Check>> {
    let c = unraveling_comparison(10_000, seed, workers)?;
    Ok(vec![
        report_check("nonlinear SSE vs Lindblad", &c.sse_vs_lindblad),
        report_check("imaginary noise vs Lindblad", &c.imaginary_vs_lindblad),
        report_check("nonlinear SSE vs imaginary noise", &c.sse_vs_imaginary),
    ])
}

/// RMS over paths of `|EM - exact|` at `t = 1` for `32·2^j` steps,
/// `j = 0..4`, against a reference grid of `2^16` steps.
pub fn strong_order_errors(sde: &ExponentialLinearSde, n_paths: u64, seed: u64) -> Result<Vec<f64>> {
    let fine = 1usize << 16;
    let mut sq = [0.0; 4];
    for p in 0..n_paths {
        let path = sample_path(1.0 / fine as f64, fine, RngPolicy::new(seed, p))?;
        let exact = linear_sde_exact(sde, &path, 1.0)?.value;
        let spec = sde.to_spec();
        for (j, s) in sq.iter_mut().enumerate() {
            let coarse = path.coarsen(fine / (32 << j))?;
            let em = linear_sde_em(&spec, &coarse);
            *s += (em.last().copied().unwrap_or_default() - exact).norm_sqr();
        }
    }
    Ok(sq.iter().map(|s| (s / n_paths as f64).sqrt()).collect())
}

/// `|exact - pathwise_cm|` at `t` and the trapezoid error scale
/// `|exact_h - exact_2h|` for each decay channel in `channels`.
pub fn exact_solution_vs_pathwise(
    spec: &SystemSpec,
    ww: &WWParams,
    sigma: f64,
    channels: &[usize],
    pathwise_params: bool,
    seed: u64,
) -> Result<Vec<(usize, f64, f64)>> {
    let mut out = Vec::new();
    for &m in channels {
        let path = sample_path(1e-4, 20_000, RngPolicy::new(seed, m as u64))?;
        let half = path.coarsen(2)?;
        let sde = if pathwise_params {
            ExponentialLinearSde::pathwise_exact_channel(spec, ww, sigma, m)?
        } else {
            ExponentialLinearSde::decay_channel(spec, ww, sigma, m)?
        };
        let t = path.horizon();
        let fine = linear_sde_exact(&sde, &path, t)?.value;
        let coarse = linear_sde_exact(&sde, &half, t)?.value;
        let closed = pathwise_cm(spec, ww, sigma, m, &path, t)?;
        out.push((m, (fine - closed).norm(), (fine - coarse).norm()));
    }
    Ok(out)
}

fn appendix(seed: u64) -> Result<Vec<Check>> {
    let bath = build_flat_bath(0.1, 201, 0.01, 0.0)?.value;
    let ww = compute_ww_params(&bath.spec, 1e-9)?;
    let mut out = Vec::new();
    let sde = ExponentialLinearSde::decay_channel(&bath.spec, &ww, 1.0, 151)?;
    let errs = strong_order_errors(&sde, 100, seed)?;
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        out.push(Check::new(
            "EM strong order 0.5",
            (1.2..=1.7).contains(&ratio),
            format!("RMS error {:.3e} -> {:.3e}, ratio {ratio:.3}", w[0], w[1]),
        ));
    }
    let channels = [101, 111, 151, 201];
    for (sigma, pathwise_params, label) in [
        (0.0, false, "decay-channel coefficients, sigma = 0"),
        (1.0, true, "pathwise-residual coefficients, sigma = 1"),
    ] {
        for (m, diff, quad) in exact_solution_vs_pathwise(&bath.spec, &ww, sigma, &channels, pathwise_params, seed)? {
            out.push(Check::new(
                format!("{label}, level {m}"),
                diff <= 2.0 * quad + 1e-14,
                format!("|exact - closed form| = {diff:.2e}, quadrature scale {quad:.2e}"),
            ));
        }
    }
    Ok(out)
}

/// `C[A,t] = 4√π e^{-Γt/2} ∫₀^{√A} exp(-(v²Γ²t² + 1/v²)/4) dv`.
pub fn golden_rule_correction(a: f64, t: f64, gamma: f64) -> Result<f64> {
    let gt = gamma * t;
    let inner = integrate_adaptive(
        |v: f64| {
            if v <= 0.0 {
                0.0
            } else {
                (-(v * v * gt * gt + 1.0 / (v * v)) / 4.0).exp()
            }
        },
        0.0,
        a.sqrt(),
        1e-15,
    )?;
    Ok(4.0 * PI.sqrt() * (-0.5 * gt).exp() * inner)
}

fn golden_rule() -> Result<Vec<Check>> {
    let gamma = 0.1;
    let mut out = Vec::new();
    for gt in [0.1, 1.0, 3.0] {
        let t = gt / gamma;
        let f = golden_rule_F(0.0, t, gamma, 1e-12)?;
        let closed = golden_rule_f_closed(t, gamma);
        out.push(Check::new(
            format!("F[0,t] at Γt = {gt}"),
            (f - closed).abs() <= 1e-6,
            format!("{f:.12} vs {closed:.12}"),
        ));
    }
    for sigma in [1.0, 2.0, 4.0] {
        for t in [1.0, 2.0, 5.0] {
            let a = sigma * sigma / (8.0 * t);
            let diff = (golden_rule_F(a, t, gamma, 1e-12)? - golden_rule_F(0.0, t, gamma, 1e-12)?).abs();
            let bound = golden_rule_correction_bound(sigma, t)?;
            let exact = golden_rule_correction(a, t, gamma)?;
            out.push(Check::new(
                format!("|F[A,t] - F[0,t]| bound, σ = {sigma}, t = {t}"),
                diff <= bound && (diff - exact).abs() <= 1e-9 * (1.0 + exact),
                format!("{diff:.6e} (correction integral {exact:.6e}) <= {bound:.6e}"),
            ));
        }
    }
    Ok(out)
}

fn recipe() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let ww = WWParams::scalar(0.0, 0.004, 0.1)?;
    for (sigma, t) in [(1.0, 10.0), (0.5, 3.0), (2.0, 20.0)] {
        let sub = recipe_transform(|u| (-0.1 * u).exp(), sigma, t, 64)?;
        let closed = survival_expectation(&ww, sigma, t)?.value;
        out.push(Check::new(
            format!("survival, σ = {sigma}, t = {t}"),
            (sub.value - closed).abs() <= 1e-8,
            format!("{:.12} vs {closed:.12}", sub.value),
        ));
        for e_m in [-0.2, 0.0, 0.05] {
            let ch = DecayChannel::new(e_m, c(0.0126, 0.0))?;
            let sub = recipe_transform(
                |u| transition_expectation(&ww, &ch, 0.0, u, TransitionMode::Exact).unwrap_or(f64::NAN),
                sigma,
                t,
                64,
            )?;
            let closed = transition_expectation(&ww, &ch, sigma, t, TransitionMode::Exact)?;
            out.push(Check::new(
                format!("transition to E_m = {e_m}, σ = {sigma}, t = {t}"),
                (sub.value - closed).abs() <= 1e-8,
                format!("{:.12e} vs {closed:.12e}", sub.value),
            ));
        }
    }
    for k in 0..=6u32 {
        let (sigma, t) = (1.3, 2.0);
        let sub = recipe_transform(|u| u.powi(k as i32), sigma, t, 16)?.value;
        // (t - σW/2)^k expanded with the Gaussian moments of W
        let mut exact = 0.0;
        for j in 0..=k {
            let binom = (0..j).fold(1.0, |b, i| b * (k - i) as f64 / (i + 1) as f64);
            exact += binom * t.powi((k - j) as i32) * (-0.5 * sigma).powi(j as i32) * wt_moments(j, t);
        }
        out.push(Check::new(
            format!("E[(t - σW/2)^{k}]"),
            (sub - exact).abs() <= 64.0 * f64::EPSILON * exact.abs().max(1.0),
            format!("{sub:.17e} vs {exact:.17e}"),
        ));
    }
    Ok(out)
}
