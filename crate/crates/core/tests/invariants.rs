use proptest::prelude::*;
use sse_decay::expectation::{lindblad_integrate, DensityMatrix};
use sse_decay::linalg::{c, hermiticity_defect, CMatrix, Hamiltonian, HermitianEigen};
use sse_decay::recipe::{recipe_transform, wt_moments};
use sse_decay::trajectory::{imaginary_noise_propagate, sse_step, StateVector};
use sse_decay::ww::{lorentzian_profile, transition_expectation, DecayChannel, TransitionMode};
use sse_decay::zeno_rabi::{rabi_evolve, BlochState};
use sse_decay::{Complex64, WWParams};

fn hermitian(n: usize) -> impl Strategy<Value = Hamiltonian> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n * n).prop_map(move |raw| {
        let m = CMatrix::from_fn(n, n, |i, j| {
            let (a, b) = raw[i.min(j) * n + i.max(j)];
            match i.cmp(&j) {
                std::cmp::Ordering::Equal => c(a, 0.0),
                std::cmp::Ordering::Less => c(a, b),
                std::cmp::Ordering::Greater => c(a, -b),
            }
        });
        Hamiltonian::new(m).unwrap()
    })
}

fn state(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_filter("non-zero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| StateVector::normalized(v.into_iter().map(|(a, b)| c(a, b)).collect(), 0.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sse_step_stays_on_unit_sphere(
        (h, psi) in (2usize..5).prop_flat_map(|n| (hermitian(n), state(n))),
        sigma in 0.0f64..2.0,
        dw in -0.3f64..0.3,
    ) {
        let out = sse_step(&psi, &h, sigma, dw, 0.01).unwrap();
        prop_assert!((out.state.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn imaginary_noise_is_unitary(
        (h, psi) in (2usize..5).prop_flat_map(|n| (hermitian(n), state(n))),
        sigma in 0.0f64..3.0,
        t in 0.0f64..5.0,
        w in -5.0f64..5.0,
    ) {
        let eig = HermitianEigen::new(&h).unwrap();
        let out = imaginary_noise_propagate(&psi, &eig, sigma, t, w).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-10);
        // energy is conserved along every path
        let e0 = h.expectation(&psi.amplitudes);
        prop_assert!((h.expectation(&out.amplitudes) - e0).abs() < 1e-9 * (1.0 + e0.abs()));
    }

    #[test]
    fn lindblad_keeps_trace_hermiticity_and_energy(
        (h, psi) in (2usize..4).prop_flat_map(|n| (hermitian(n), state(n))),
        sigma in 0.0f64..1.5,
    ) {
        let rho0 = DensityMatrix::pure(&psi);
        let out = lindblad_integrate(&rho0, &h, sigma, &[0.5, 1.0]).unwrap();
        for r in &out {
            prop_assert!((r.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-9);
            prop_assert!(hermiticity_defect(&r.rho) < 1e-9);
            prop_assert!(r.purity() <= 1.0 + 1e-9);
            prop_assert!((r.energy(&h) - rho0.energy(&h)).abs() < 1e-8);
        }
    }

    #[test]
    fn substitution_of_polynomials_matches_moments(
        coeffs in prop::collection::vec(-3.0f64..3.0, 1..6),
        sigma in 0.0f64..2.0,
        t in 0.0f64..4.0,
    ) {
        let poly = |u: f64| coeffs.iter().rev().fold(0.0, |acc, a| acc * u + a);
        let sub = recipe_transform(poly, sigma, t, 16).unwrap().value;
        let mut exact = 0.0;
        let mut scale = 0.0;
        for (k, a) in coeffs.iter().enumerate() {
            for j in 0..=k {
                let binom = (0..j).fold(1.0, |b, i| b * (k - i) as f64 / (i + 1) as f64);
                let term = a * binom * t.powi((k - j) as i32) * (-0.5 * sigma).powi(j as i32) * wt_moments(j as u32, t);
                exact += term;
                scale += term.abs();
            }
        }
        prop_assert!((sub - exact).abs() <= 1e-12 * (1.0 + scale));
    }

    #[test]
    fn transition_probability_is_bounded_and_sigma_free_at_late_times(
        e_m in -1.0f64..1.0,
        v in 0.001f64..0.05,
        gamma in 0.02f64..0.3,
        mass in -0.05f64..0.05,
        sigma in 0.0f64..1.5,
        t in 0.0f64..50.0,
    ) {
        let ww = WWParams::scalar(0.0, mass, gamma).unwrap();
        let ch = DecayChannel::new(e_m, c(v, 0.0)).unwrap();
        let lor = lorentzian_profile(&ww, &ch).unwrap();
        for mode in [TransitionMode::Exact, TransitionMode::LeadingOrder] {
            let p = transition_expectation(&ww, &ch, sigma, t, mode).unwrap();
            prop_assert!(p >= -1e-15);
            prop_assert!(p <= 4.0 * lor + 1e-15);
            let late = transition_expectation(&ww, &ch, sigma, 2000.0 / gamma, mode).unwrap();
            prop_assert!((late - lor).abs() <= 1e-6 * lor);
        }
    }

    #[test]
    fn rabi_damping_shrinks_only_the_transverse_part(
        axis in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_filter("non-zero", |(x, y, z)| x * x + y * y + z * z > 1e-2),
        sigma in 0.0f64..2.0,
        t in 0.0f64..10.0,
    ) {
        let omega = [axis.0, axis.1, axis.2];
        let r0 = BlochState::new([0.0, 0.0, -1.0], 0.0).unwrap();
        let r = rabi_evolve(&r0, omega, sigma, t).unwrap();
        let w2: f64 = omega.iter().map(|x| x * x).sum();
        let damping = (-w2 * sigma * sigma * t / 8.0).exp();
        // the component along ω is conserved, the transverse part damps
        let along = |v: &[f64; 3]| (v[0] * omega[0] + v[1] * omega[1] + v[2] * omega[2]) / w2.sqrt();
        prop_assert!((along(&r.r) - along(&r0.r)).abs() < 1e-9);
        let perp2 = |v: &[f64; 3]| v.iter().map(|x| x * x).sum::<f64>() - along(v).powi(2);
        prop_assert!((perp2(&r.r).max(0.0).sqrt() - damping * perp2(&r0.r).max(0.0).sqrt()).abs() < 1e-9);
    }
}
