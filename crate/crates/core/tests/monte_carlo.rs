//! Ensembles checked against independent closed forms.

use sse_decay::brownian::{sample_path, BrownianPath};
use sse_decay::ensemble::{compare_to_oracle, run_ensemble, Engine, ExperimentPlan};
use sse_decay::expectation::expectation_coefficients_with_step;
use sse_decay::rng::standard_normal;
use sse_decay::system::{build_flat_bath, compute_ww_params, FlatBath};
use sse_decay::trajectory::{pathwise_cm, CoefficientState, LinearizedIntegrator};
use sse_decay::ww::{survival_expectation, transition_expectation, DecayChannel, TransitionMode};
use sse_decay::{Accumulator, Complex64, NoiseParams, RngPolicy, WWParams};

/// Wide, coarse bath: half-width 30, recurrence time 2π/Δ ≈ 63, so the
/// Weisskopf-Wigner curves hold to well below Monte Carlo noise for t ≤ 20.
fn wide_bath() -> FlatBath {
    build_flat_bath(0.1, 601, 0.1, 0.0).unwrap().value
}

fn survival_plan(n_traj: u64, seed: u64) -> ExperimentPlan {
    let mut plan = ExperimentPlan::new(
        wide_bath().spec,
        NoiseParams::new(1.0).unwrap(),
        0.02,
        20.0,
        n_traj,
        seed,
    );
    plan.record_every = 500;
    // the imaginary-noise engine is exact at any step
    plan.allow_coarse_step = true;
    plan
}

#[test]
fn ensemble_survival_matches_stochastic_rate() {
    let table = run_ensemble(survival_plan(10_000, 2), Engine::ImaginaryNoise).unwrap();
    assert_eq!(table.times, vec![0.0, 10.0, 20.0]);
    let s = table.series("survival").unwrap();
    // exp[-1·(1 - 0.0125)]
    let at_10 = (-0.9875f64).exp();
    assert!((at_10 - 0.372504).abs() < 5e-6);
    assert!(s[1].within(at_10, 3.0), "{:?}", s[1]);

    let ww = WWParams::scalar(0.0, 0.0, 0.1).unwrap();
    let oracle: Vec<f64> = table
        .times
        .iter()
        .map(|&t| survival_expectation(&ww, 1.0, t).unwrap().value)
        .collect();
    assert!(compare_to_oracle(&s, &oracle).unwrap().pass);
}

#[test]
fn wrong_oracle_is_detected() {
    let table = run_ensemble(survival_plan(10_000, 3), Engine::ImaginaryNoise).unwrap();
    let s = table.series("survival").unwrap();
    let wrong = WWParams::scalar(0.0, 0.0, 0.11).unwrap();
    let oracle: Vec<f64> = table
        .times
        .iter()
        .map(|&t| survival_expectation(&wrong, 1.0, t).unwrap().value)
        .collect();
    let r = compare_to_oracle(&s, &oracle).unwrap();
    assert!(!r.pass);
    // Γt = 2 is the last point
    assert!(r.z[2].abs() > 10.0, "{:?}", r.z);
}

#[test]
fn standard_error_shrinks_as_inverse_root_n() {
    let se = |n: u64| {
        let t = run_ensemble(survival_plan(n, 4), Engine::ImaginaryNoise).unwrap();
        t.series("survival").unwrap()[1].std_error.unwrap()
    };
    let ratio = se(400) / se(6400);
    assert!((ratio - 4.0).abs() < 0.6, "ratio {ratio}");
}

#[test]
fn seeds_select_reproducible_distinct_ensembles() {
    let a = run_ensemble(survival_plan(64, 1), Engine::ImaginaryNoise).unwrap();
    let b = run_ensemble(survival_plan(64, 1), Engine::ImaginaryNoise).unwrap();
    let c = run_ensemble(survival_plan(64, 2), Engine::ImaginaryNoise).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.rows, c.rows);
}

#[test]
fn pathwise_transition_expectation_matches_leading_order() {
    let bath = build_flat_bath(0.1, 201, 0.01, 0.0).unwrap().value;
    let ww = compute_ww_params(&bath.spec, 1e-9).unwrap();
    let (sigma, t): (f64, f64) = (1.0, 10.0);
    for m in [101, 121, 161] {
        let mut rng = RngPolicy::new(17, m as u64).rng();
        let mut acc = Accumulator::new();
        for _ in 0..100_000 {
            let w = t.sqrt() * standard_normal(&mut rng);
            let path = BrownianPath::from_values(t, vec![0.0, w], RngPolicy::new(17, 0)).unwrap();
            acc.push(pathwise_cm(&bath.spec, &ww, sigma, m, &path, t).unwrap().norm_sqr());
        }
        let ch = DecayChannel::new(bath.spec.energies()[m], bath.spec.v()[(m, 0)]).unwrap();
        let exact = transition_expectation(&ww, &ch, sigma, t, TransitionMode::LeadingOrder).unwrap();
        assert!(
            acc.estimate().within(exact, 3.0),
            "level {m}: {:?} vs {exact}",
            acc.estimate()
        );
    }
}

#[test]
fn linearized_mean_amplitude_follows_expectation_equations() {
    let bath = build_flat_bath(0.2, 21, 0.05, 0.0).unwrap().value;
    let sigma = 1.0;
    let (dt, steps) = (0.01, 200);
    let n_paths = 2000;
    let probe = [0, 3, 11];
    let mut acc = vec![(Accumulator::new(), Accumulator::new()); probe.len()];
    for p in 0..n_paths {
        let path = sample_path(dt, steps, RngPolicy::new(23, p)).unwrap();
        let mut integ = LinearizedIntegrator::new(&bath.spec, sigma).unwrap();
        let mut state = CoefficientState::initial(&bath.spec);
        for dw in path.increments() {
            integ.step(&mut state, dw, dt);
        }
        for (k, &n) in probe.iter().enumerate() {
            acc[k].0.push(state.c[n].re);
            acc[k].1.push(state.c[n].im);
        }
    }
    let t_end = dt * steps as f64;
    let series = expectation_coefficients_with_step(&bath.spec, sigma, &[0.0, t_end], dt / 4.0).unwrap();
    for (k, &n) in probe.iter().enumerate() {
        let expected: Complex64 = series.values[1][n];
        let (re, im) = (acc[k].0.estimate(), acc[k].1.estimate());
        // Euler bias is O(dt); allow it on top of three standard errors
        let slack = 3.0 * dt * expected.norm().max(1e-3);
        assert!(
            (re.mean - expected.re).abs() <= 3.0 * re.se_or_zero() + slack,
            "level {n} re {re:?} vs {expected}"
        );
        assert!(
            (im.mean - expected.im).abs() <= 3.0 * im.se_or_zero() + slack,
            "level {n} im {im:?} vs {expected}"
        );
    }
}
