//! Small-time decay, the reduction rate, two-level Rabi damping and the
//! bounds on `M_σ = 1/σ²` that follow from them.

use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

use crate::expectation::DensityMatrix;
use crate::linalg::{c, CMatrix, Hamiltonian};
use crate::system::SystemSpec;
use crate::trajectory::StateVector;
use crate::{Error, Flagged, Result, Warning};

/// `ħ` in GeV·s.
pub const HBAR_GEV_S: f64 = 6.582119e-25;

/// Published lower bounds on `M_σ` (GeV) from oscillation experiments.
pub const OSCILLATION_BOUNDS: [(&str, f64); 3] = [
    ("neutrino oscillations", 1e-20),
    ("K-meson oscillations", 2e-15),
    ("B-meson oscillations", 2e-13),
];

/// `1 - ⟨(H-⟨H⟩)²⟩·(σ²t/4 + t²)`.
///
/// Attaches [`Warning::ExpansionValidity`] when the scale of the dropped
/// terms, `variance·(σ⁴t² + t³)`, exceeds half of the retained correction.
pub fn zeno_survival_expansion(variance: f64, sigma: f64, t: f64) -> Result<Flagged<f64>> {
    if !(t >= 0.0) || !(variance >= 0.0) {
        return Err(Error::invalid("variance and t must be non-negative"));
    }
    let s2 = sigma * sigma;
    let kept = variance * (0.25 * s2 * t + t * t);
    let neglected = variance * (s2 * s2 * t * t + t * t * t);
    let mut out = Flagged::clean(1.0 - kept);
    if neglected > 0.5 * kept {
        out.warnings.push(Warning::ExpansionValidity { neglected });
    }
    Ok(out)
}

/// `⟨s_A|H²|s_A⟩ - ⟨s_A|H|s_A⟩²` with `H = H₀ + V`.
pub fn energy_variance(spec: &SystemSpec) -> f64 {
    let s = spec.initial();
    let v = spec.v();
    // H_{ns} = V_{ns} off the diagonal; the diagonal cancels in the variance
    (0..spec.dim()).filter(|&n| n != s).map(|n| v[(n, s)].norm_sqr()).sum()
}

/// `Γ_R = σ²·variance/4`.
pub fn reduction_rate(variance: f64, sigma: f64) -> f64 {
    0.25 * sigma * sigma * variance
}

/// Lower bound `E_D/(8π)` on `M_σ` from a decay at energy `E_D` (same
/// units as the input).
pub fn decay_bound_m_sigma(e_d: f64) -> Result<f64> {
    if !(e_d >= 0.0) || !e_d.is_finite() {
        return Err(Error::invalid("decay energy must be finite and >= 0"));
    }
    Ok(e_d / (8.0 * PI))
}

/// Bound from a Rabi experiment: the damping `exp(-πΩσ²/8)` accumulated
/// over half a period must keep the probability deviation
/// `(1 - exp(-πΩσ²/8))/2` within `accuracy`. `omega_mhz` is the angular
/// frequency in units of 10⁶ s⁻¹; the result is in GeV.
pub fn itano_bound(omega_mhz: f64, accuracy: f64) -> Result<f64> {
    if !(omega_mhz > 0.0) || !omega_mhz.is_finite() {
        return Err(Error::invalid("Rabi frequency must be positive"));
    }
    if !(accuracy > 0.0 && accuracy < 0.5) {
        return Err(Error::invalid("probability accuracy must lie in (0, 1/2)"));
    }
    let omega_gev = omega_mhz * 1e6 * HBAR_GEV_S;
    // πΩσ²/8 = -ln(1 - 2·accuracy)
    let sigma_sq = -8.0 * (-2.0 * accuracy).ln_1p() / (PI * omega_gev);
    Ok(1.0 / sigma_sq)
}

/// Bloch vector with the convention `ρ = (1 - R·τ)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub r: [f64; 3],
    pub time: f64,
}

impl BlochState {
    pub fn new(r: [f64; 3], time: f64) -> Result<Self> {
        let s = BlochState { r, time };
        if !(s.length() <= 1.0 + 1e-9) {
            return Err(Error::invalid(format_len(s.length())));
        }
        Ok(s)
    }

    pub fn length(&self) -> f64 {
        dot(self.r, self.r).sqrt()
    }

    /// `R_i = -Tr(ρτ_i)`.
    pub fn from_density(rho: &DensityMatrix) -> Result<Self> {
        if rho.dim() != 2 {
            return Err(Error::invalid("Bloch vectors need a two-level density matrix"));
        }
        let r = &rho.rho;
        Ok(BlochState {
            r: [-2.0 * r[(0, 1)].re, -2.0 * r[(1, 0)].im, -(r[(0, 0)].re - r[(1, 1)].re)],
            time: rho.time,
        })
    }

    pub fn from_state(psi: &StateVector) -> Result<Self> {
        Self::from_density(&DensityMatrix::pure(psi))
    }

    /// The pure state with this Bloch vector; needs `|R| = 1`.
    pub fn to_state(&self) -> Result<StateVector> {
        if (self.length() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("only unit Bloch vectors describe pure states"));
        }
        // ρ = (1 + n·τ)/2 with n = -R
        let n = [-self.r[0], -self.r[1], -self.r[2]];
        let theta = n[2].clamp(-1.0, 1.0).acos();
        let phi = n[1].atan2(n[0]);
        let amps = alloc::vec![
            c((0.5 * theta).cos(), 0.0),
            Complex64::from_polar((0.5 * theta).sin(), phi),
        ];
        StateVector::normalized(amps, self.time)
    }

    /// `(1 - R·τ)/2`.
    pub fn density(&self) -> CMatrix {
        let [x, y, z] = self.r;
        CMatrix::from_row_slice(
            2,
            2,
            &[
                c(0.5 * (1.0 - z), 0.0),
                c(-0.5 * x, 0.5 * y),
                c(-0.5 * x, -0.5 * y),
                c(0.5 * (1.0 + z), 0.0),
            ],
        )
    }
}

fn format_len(len: f64) -> alloc::string::String {
    alloc::format!("Bloch vector length {len} exceeds 1")
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// `H = ½ ω·τ`, under which `dR/dt = ω × R`.
pub fn rabi_hamiltonian(omega_vec: [f64; 3]) -> Result<Hamiltonian> {
    let [x, y, z] = omega_vec;
    Hamiltonian::new(CMatrix::from_row_slice(
        2,
        2,
        &[
            c(0.5 * z, 0.0),
            c(0.5 * x, -0.5 * y),
            c(0.5 * x, 0.5 * y),
            c(-0.5 * z, 0.0),
        ],
    ))
}

/// The two-level system `H = ½ ω·τ` as a [`SystemSpec`]: the `τ₃` part
/// goes into the energies, the rest into `V`. State 0 is the initial one.
pub fn rabi_system(omega_vec: [f64; 3]) -> Result<SystemSpec> {
    let [x, y, z] = omega_vec;
    let v = CMatrix::from_row_slice(
        2,
        2,
        &[c(0.0, 0.0), c(0.5 * x, -0.5 * y), c(0.5 * x, 0.5 * y), c(0.0, 0.0)],
    );
    SystemSpec::new(alloc::vec![0.5 * z, -0.5 * z], v, alloc::vec![0], 0)
}

/// `E[R(t)]` under the energy-localizing noise.
///
/// The noise-free motion is the rotation of `R₀` about `ω̂` by `Ωt`. The
/// component along `ω̂` is a population in the energy basis and is not
/// affected by the noise; the rotating part is damped by `exp(-Ω²σ²t/8)`.
/// When `R₀ ⊥ ω` the whole vector is damped by that factor.
pub fn rabi_evolve(r0: &BlochState, omega_vec: [f64; 3], sigma: f64, t: f64) -> Result<BlochState> {
    let omega = dot(omega_vec, omega_vec).sqrt();
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::invalid("precession vector must be nonzero"));
    }
    let n = [omega_vec[0] / omega, omega_vec[1] / omega, omega_vec[2] / omega];
    let par = dot(n, r0.r);
    let perp = [r0.r[0] - par * n[0], r0.r[1] - par * n[1], r0.r[2] - par * n[2]];
    let nxp = cross(n, perp);
    let (s, co) = (omega * t).sin_cos();
    let damp = (-omega * omega * sigma * sigma * t / 8.0).exp();
    let mut r = [0.0; 3];
    for i in 0..3 {
        r[i] = par * n[i] + damp * (perp[i] * co + nxp[i] * s);
    }
    Ok(BlochState { r, time: r0.time + t })
}

/// `P± = (1 ± R₃)/2`; `P+` is the population of basis state `|1⟩`.
pub fn rabi_probabilities(r3: f64) -> Result<(f64, f64)> {
    if !(r3.abs() <= 1.0 + 1e-12) {
        return Err(Error::invalid(alloc::format!("|R3| = {} exceeds 1", r3.abs())));
    }
    Ok((0.5 * (1.0 + r3), 0.5 * (1.0 - r3)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::build_flat_bath;
    use crate::trajectory::StateVector;
    use proptest::prelude::*;

    #[test]
    fn zeno_expansion() {
        assert_eq!(zeno_survival_expansion(0.03, 0.7, 0.0).unwrap().value, 1.0);
        let s0 = zeno_survival_expansion(0.03, 0.0, 0.2).unwrap();
        assert!((s0.value - (1.0 - 0.03 * 0.04)).abs() < 1e-15);
        assert!(!zeno_survival_expansion(0.03, 1.0, 5.0).unwrap().is_clean());
    }

    #[test]
    fn flat_bath_variance_and_rate() {
        let bath = build_flat_bath(0.1, 201, 0.01, 0.0).unwrap().value;
        let var = energy_variance(&bath.spec);
        assert!((var - 201.0 * bath.coupling * bath.coupling).abs() < 1e-15);
        assert!((var - 0.03199).abs() < 1e-5);
        assert!(reduction_rate(var, 1.0) < 0.1);
        assert!((reduction_rate(0.032, 1.0) - 0.008).abs() < 1e-15);
        assert_eq!(reduction_rate(0.032, 0.0), 0.0);
    }

    #[test]
    fn variance_without_selection_rule() {
        let mut v = CMatrix::zeros(2, 2);
        v[(0, 0)] = c(0.2, 0.0);
        v[(0, 1)] = c(0.3, 0.0);
        v[(1, 0)] = c(0.3, 0.0);
        let spec = SystemSpec::new(alloc::vec![0.0, 1.0], v, alloc::vec![0], 0).unwrap();
        // (V²)_ss - V_ss² = 0.04 + 0.09 - 0.04
        assert!((energy_variance(&spec) - 0.09).abs() < 1e-15);
    }

    #[test]
    fn bounds() {
        assert!((decay_bound_m_sigma(140.0).unwrap() - 5.5704230).abs() < 1e-6);
        assert!((decay_bound_m_sigma(2000.0).unwrap() - 79.5774715).abs() < 1e-6);
        assert_eq!(decay_bound_m_sigma(0.0).unwrap(), 0.0);
        let b = itano_bound(320.7, 0.02).unwrap();
        assert!(b > 2e-15 / 3.0 && b < 6e-15, "{b}");
        assert!(itano_bound(320.7, 0.4999999).unwrap() < itano_bound(320.7, 0.4).unwrap());
        assert!(itano_bound(320.7, 0.4999999).unwrap() < 1e-17);
        assert!(itano_bound(320.7, 1e-9).unwrap() > 1e-9);
        assert!(itano_bound(320.7, 0.5).is_err());
    }

    #[test]
    fn bloch_conventions() {
        let up = StateVector::basis(2, 1).unwrap();
        let b = BlochState::from_state(&up).unwrap();
        assert_eq!(b.r, [0.0, 0.0, 1.0]);
        assert_eq!(rabi_probabilities(b.r[2]).unwrap(), (1.0, 0.0));
        assert_eq!(rabi_probabilities(0.0).unwrap(), (0.5, 0.5));
        assert!(rabi_probabilities(1.5).is_err());
        let rho = DensityMatrix::new(BlochState::new([0.3, -0.2, 0.5], 0.0).unwrap().density(), 0.0).unwrap();
        let back = BlochState::from_density(&rho).unwrap();
        for i in 0..3 {
            assert!((back.r[i] - [0.3, -0.2, 0.5][i]).abs() < 1e-15);
        }
        for r in [[0.0, 0.0, -1.0], [0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.0, -0.6, -0.8]] {
            let psi = BlochState::new(r, 0.0).unwrap().to_state().unwrap();
            let back = BlochState::from_state(&psi).unwrap();
            for i in 0..3 {
                assert!((back.r[i] - r[i]).abs() < 1e-15, "{r:?} -> {:?}", back.r);
            }
        }
        assert!(BlochState::new([0.1, 0.0, 0.0], 0.0).unwrap().to_state().is_err());
    }

    #[test]
    fn half_period_damping() {
        let r0 = BlochState::new([0.0, 0.0, 1.0], 0.0).unwrap();
        let r = rabi_evolve(&r0, [1.0, 0.0, 0.0], 1.0, PI).unwrap();
        assert!((r.r[2] + (-PI / 8.0).exp()).abs() < 1e-12);
        let r = rabi_evolve(&r0, [2.0, 0.0, 0.0], 0.5, PI / 2.0).unwrap();
        assert!((r.r[2] + (-PI * 2.0 * 0.25 / 8.0).exp()).abs() < 1e-12);
        let along = rabi_evolve(&r0, [0.0, 0.0, 3.0], 1.0, 2.0).unwrap();
        assert!((along.r[2] - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn precession_preserves_length(
            x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
            wx in -3.0f64..3.0, wy in -3.0f64..3.0, wz in 0.1f64..3.0,
            t in 0.0f64..20.0,
        ) {
            let len = (x * x + y * y + z * z).sqrt().max(1.0);
            let r0 = BlochState::new([x / len, y / len, z / len], 0.0).unwrap();
            let r = rabi_evolve(&r0, [wx, wy, wz], 0.0, t).unwrap();
            prop_assert!((r.length() - r0.length()).abs() < 1e-10);
        }

        #[test]
        fn decay_bound_is_linear(x in 0.0f64..1e6) {
            prop_assert_eq!(decay_bound_m_sigma(2.0 * x).unwrap(), 2.0 * decay_bound_m_sigma(x).unwrap());
        }
    }
}
