//! Deterministic equations for ensemble averages: the double-commutator
//! Lindblad equation, the linear ODEs for `E[C_n]`, and the occupation
//! equation that turns `E[C_n]` into `E[|C_m|²]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;
use num_traits::Zero;

use crate::linalg::{c, frobenius, hermiticity_defect, CMatrix, Hamiltonian, I};
use crate::system::SystemSpec;
use crate::trajectory::{LinearizedIntegrator, StateVector};
use crate::{Error, Result};

/// Hermitian, unit-trace, positive semidefinite `ρ` at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub rho: CMatrix,
    pub time: f64,
}

impl DensityMatrix {
    pub fn new(rho: CMatrix, time: f64) -> Result<Self> {
        if !rho.is_square() || rho.nrows() == 0 {
            return Err(Error::invalid("density matrix must be square and non-empty"));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::invalid(format!("trace is {tr}, expected 1")));
        }
        if hermiticity_defect(&rho) > 1e-12 * frobenius(&rho) {
            return Err(Error::invalid("density matrix is not Hermitian"));
        }
        let eig = rho
            .clone()
            .try_symmetric_eigen(1e-15, 100_000)
            .ok_or_else(|| Error::numeric("density matrix eigendecomposition failed"))?;
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-9 {
            return Err(Error::invalid(format!("density matrix has eigenvalue {min:e}")));
        }
        Ok(DensityMatrix { rho, time })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn pure(state: &StateVector) -> Self {
        let n = state.dim();
        let a = &state.amplitudes;
        DensityMatrix {
            rho: CMatrix::from_fn(n, n, |i, j| a[i] * a[j].conj()),
            time: state.time,
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `Tr(Hρ)`.
    pub fn energy(&self, h: &Hamiltonian) -> f64 {
        let n = self.dim();
        let mut x = CMatrix::zeros(n, n);
        h.apply_matrix(&self.rho, &mut x);
        x.trace().re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.rho[(i, i)].re).collect()
    }
}

/// Default RK4 step for the Lindblad equation: `0.05/max(W, σ²W²/8)` where
/// `W` bounds the spread of the spectrum.
pub fn lindblad_max_step(h: &Hamiltonian, sigma: f64) -> f64 {
    let (lo, hi) = h.spectral_bounds();
    let w = hi - lo;
    let rate = w.max(sigma * sigma * w * w / 8.0);
    if rate > 0.0 {
        0.05 / rate
    } else {
        f64::INFINITY
    }
}

struct LindbladRhs<'a> {
    h: &'a Hamiltonian,
    k: f64,
    x: CMatrix,
    comm: CMatrix,
    hc: CMatrix,
}

impl LindbladRhs<'_> {
    /// `out = i[ρ,H] - σ²/8 [H,[H,ρ]]`, exactly Hermitian in floating point.
    fn eval(&mut self, rho: &CMatrix, out: &mut CMatrix) {
        let n = rho.nrows();
        self.h.apply_matrix(rho, &mut self.x);
        // [H,ρ] = Hρ - (Hρ)†
        for i in 0..n {
            for j in 0..n {
                self.comm[(i, j)] = self.x[(i, j)] - self.x[(j, i)].conj();
            }
        }
        self.h.apply_matrix(&self.comm, &mut self.hc);
        // [H,C] = HC + (HC)† for anti-Hermitian C
        for i in 0..n {
            for j in 0..n {
                let dd = self.hc[(i, j)] + self.hc[(j, i)].conj();
                out[(i, j)] = -I * self.comm[(i, j)] - dd * self.k;
            }
        }
    }
}

/// Integrate `dρ/dt = i[ρ,H] - σ²/8 [H,[H,ρ]]` with classical RK4 and
/// return `ρ` at each time of `t_grid`.
pub fn lindblad_integrate(
    rho0: &DensityMatrix,
    h: &Hamiltonian,
    sigma: f64,
    t_grid: &[f64],
) -> Result<Vec<DensityMatrix>> {
    lindblad_integrate_with_step(rho0, h, sigma, t_grid, lindblad_max_step(h, sigma))
}

/// [`lindblad_integrate`] with an explicit upper bound on the RK4 step.
pub fn lindblad_integrate_with_step(
    rho0: &DensityMatrix,
    h: &Hamiltonian,
    sigma: f64,
    t_grid: &[f64],
    max_step: f64,
) -> Result<Vec<DensityMatrix>> {
    let n = rho0.dim();
    if h.dim() != n {
        return Err(Error::invalid("density matrix and Hamiltonian dimensions differ"));
    }
    if !(max_step > 0.0) {
        return Err(Error::invalid("max_step must be positive"));
    }
    check_grid(t_grid, rho0.time)?;
    let mut rhs = LindbladRhs {
        h,
        k: sigma * sigma / 8.0,
        x: CMatrix::zeros(n, n),
        comm: CMatrix::zeros(n, n),
        hc: CMatrix::zeros(n, n),
    };
    let mut k1 = CMatrix::zeros(n, n);
    let mut k2 = CMatrix::zeros(n, n);
    let mut k3 = CMatrix::zeros(n, n);
    let mut k4 = CMatrix::zeros(n, n);
    let mut rho = rho0.rho.clone();
    let mut t = rho0.time;
    let mut out = Vec::with_capacity(t_grid.len());
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / max_step).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            for _ in 0..steps {
                rhs.eval(&rho, &mut k1);
                let tmp = &rho + &k1 * c(0.5 * dt, 0.0);
                rhs.eval(&tmp, &mut k2);
                let tmp = &rho + &k2 * c(0.5 * dt, 0.0);
                rhs.eval(&tmp, &mut k3);
                let tmp = &rho + &k3 * c(dt, 0.0);
                rhs.eval(&tmp, &mut k4);
                let incr = (&k1 + &k2 * c(2.0, 0.0) + &k3 * c(2.0, 0.0) + &k4) * c(dt / 6.0, 0.0);
                rho += incr;
            }
            t = target;
        }
        let tr = rho.trace();
        let defect = (tr - 1.0).norm();
        if defect > 1e-9 || !defect.is_finite() {
            return Err(Error::numeric(format!("trace drifted by {defect:e} at t = {t}")));
        }
        out.push(DensityMatrix {
            rho: rho.clone(),
            time: t,
        });
    }
    Ok(out)
}

fn check_grid(t_grid: &[f64], start: f64) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::invalid("time grid is empty"));
    }
    if !(t_grid[0] >= start) {
        return Err(Error::invalid("time grid starts before the initial time"));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("time grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// `E[C_n(t)]` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSeries {
    pub times: Vec<f64>,
    pub values: Vec<Vec<Complex64>>,
}

/// Default RK4 step for the coefficient equations.
pub fn coefficient_max_step(spec: &SystemSpec, sigma: f64) -> f64 {
    let d = spec.max_detuning();
    let rate = d.max(spec.coupling_norm()).max(sigma * sigma * d * d / 8.0);
    if rate > 0.0 {
        0.05 / rate
    } else {
        f64::INFINITY
    }
}

/// Integrate the linear ODEs for `E[C_{s_a}]` and `E[C_m]` from
/// `E[C_{s_A}(0)] = 1`. `t_grid` must start at or after 0.
pub fn expectation_coefficients(spec: &SystemSpec, sigma: f64, t_grid: &[f64]) -> Result<CoefficientSeries> {
    expectation_coefficients_with_step(spec, sigma, t_grid, coefficient_max_step(spec, sigma))
}

pub fn expectation_coefficients_with_step(
    spec: &SystemSpec,
    sigma: f64,
    t_grid: &[f64],
    max_step: f64,
) -> Result<CoefficientSeries> {
    let ode = LinearizedIntegrator::new(spec, sigma)?;
    check_grid(t_grid, 0.0)?;
    if !(max_step > 0.0) {
        return Err(Error::invalid("max_step must be positive"));
    }
    let n = spec.dim();
    let mut y = vec![Complex64::zero(); n];
    y[spec.initial()] = c(1.0, 0.0);
    let mut k1 = vec![Complex64::zero(); n];
    let mut k2 = vec![Complex64::zero(); n];
    let mut k3 = vec![Complex64::zero(); n];
    let mut k4 = vec![Complex64::zero(); n];
    let mut tmp = vec![Complex64::zero(); n];
    let mut t = 0.0;
    let mut values = Vec::with_capacity(t_grid.len());
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / max_step).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            for _ in 0..steps {
                ode.drift(t, &y, &mut k1);
                axpy(&y, &k1, 0.5 * dt, &mut tmp);
                ode.drift(t + 0.5 * dt, &tmp, &mut k2);
                axpy(&y, &k2, 0.5 * dt, &mut tmp);
                ode.drift(t + 0.5 * dt, &tmp, &mut k3);
                axpy(&y, &k3, dt, &mut tmp);
                ode.drift(t + dt, &tmp, &mut k4);
                for i in 0..n {
                    y[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
                }
                t += dt;
            }
            t = target;
        }
        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::numeric(format!("coefficient equations diverged at t = {t}")));
        }
        values.push(y.clone());
    }
    Ok(CoefficientSeries {
        times: t_grid.to_vec(),
        values,
    })
}

fn axpy(y: &[Complex64], k: &[Complex64], h: f64, out: &mut [Complex64]) {
    for ((o, a), b) in out.iter_mut().zip(y).zip(k) {
        *o = a + b * h;
    }
}

/// `E[|C_n(t)|²]` for every level on the series grid.
///
/// Manifold levels use `|E[C_{s_a}]|²`. For `m` outside the manifold,
/// `d/dt E[|C_m|²] = 2 Re(e^{-iΔ_m t} i f_m E[C_m] S_m*) + σ²/4 |S_m|²` with
/// `S_m = Σ_a V_{m s_a} E[C_{s_a}]`, integrated by the trapezoid rule on
/// the grid, starting from 0 at `t = 0`. `t_grid` must equal the series
/// grid exactly and should resolve the largest detuning.
pub fn occupation_expectations(
    spec: &SystemSpec,
    sigma: f64,
    t_grid: &[f64],
    series: &CoefficientSeries,
) -> Result<Vec<Vec<f64>>> {
    if series.times.as_slice() != t_grid {
        return Err(Error::invalid(
            "occupation grid does not match the coefficient series grid",
        ));
    }
    if series.values.iter().any(|v| v.len() != spec.dim()) {
        return Err(Error::invalid("coefficient series does not match the system"));
    }
    if t_grid[0] != 0.0 {
        return Err(Error::invalid("occupation integration must start at t = 0"));
    }
    let e_s = spec.e_s();
    let off = spec.off_manifold();
    let v = spec.v();
    let s2 = sigma * sigma;
    let rate = |k: usize, m: usize| -> f64 {
        let t = t_grid[k];
        let cs = &series.values[k];
        let delta = spec.energies()[m] - e_s;
        let f = c(1.0, -s2 * delta / 8.0);
        let s: Complex64 = spec.manifold().iter().map(|&a| v[(m, a)] * cs[a]).sum();
        let x = Complex64::from_polar(1.0, -delta * t) * I * f * cs[m] * s.conj();
        2.0 * x.re + 0.25 * s2 * s.norm_sqr()
    };
    let mut out = Vec::with_capacity(t_grid.len());
    let mut occ = vec![0.0; spec.dim()];
    let mut prev: Vec<f64> = off.iter().map(|&m| rate(0, m)).collect();
    for k in 0..t_grid.len() {
        if k > 0 {
            let h = t_grid[k] - t_grid[k - 1];
            for (j, &m) in off.iter().enumerate() {
                let r = rate(k, m);
                occ[m] += 0.5 * h * (prev[j] + r);
                prev[j] = r;
            }
        }
        for &a in spec.manifold() {
            occ[a] = series.values[k][a].norm_sqr();
        }
        out.push(occ.clone());
    }
    Ok(out)
}

/// Uniform grid `{0, t/n, …, t}`.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::build_flat_bath;

    fn plus_state() -> DensityMatrix {
        DensityMatrix::new(CMatrix::from_element(2, 2, c(0.5, 0.0)), 0.0).unwrap()
    }

    #[test]
    fn stationary_state_stays_put() {
        let h = Hamiltonian::diagonal(&[0.0, 1.0]).unwrap();
        let rho = DensityMatrix::new(
            CMatrix::from_row_slice(2, 2, &[c(0.3, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.7, 0.0)]),
            0.0,
        )
        .unwrap();
        let out = lindblad_integrate(&rho, &h, 1.0, &[1.0, 5.0]).unwrap();
        for r in &out {
            assert!((&r.rho - &rho.rho).iter().all(|z| z.norm() < 1e-15));
        }
    }

    #[test]
    fn two_level_coherence_decays_in_closed_form() {
        let omega = 1.3;
        let sigma = 0.8;
        let h = Hamiltonian::diagonal(&[0.0, omega]).unwrap();
        let grid = uniform_grid(4.0, 8);
        let out = lindblad_integrate_with_step(&plus_state(), &h, sigma, &grid, 0.005).unwrap();
        for r in &out {
            let t = r.time;
            // ρ01 = ½ exp(+iωt - σ²ω²t/8) for H = diag(0, ω)
            let expect = c(-sigma * sigma * omega * omega * t / 8.0, omega * t).exp() * 0.5;
            assert!(
                (r.rho[(0, 1)] - expect).norm() < 1e-9,
                "t={t}: {} vs {expect}",
                r.rho[(0, 1)]
            );
            assert!((r.rho[(0, 0)].re - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn unitary_limit_keeps_purity_and_energy() {
        let h = Hamiltonian::new(CMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.0, 0.0),
                c(0.2, 0.1),
                c(0.0, 0.0),
                c(0.2, -0.1),
                c(0.5, 0.0),
                c(0.3, 0.0),
                c(0.0, 0.0),
                c(0.3, 0.0),
                c(-0.4, 0.0),
            ],
        ))
        .unwrap();
        let psi = StateVector::basis(3, 0).unwrap();
        let rho0 = DensityMatrix::pure(&psi);
        let e0 = rho0.energy(&h);
        let out = lindblad_integrate(&rho0, &h, 0.0, &uniform_grid(10.0, 10)).unwrap();
        for r in &out {
            assert!((r.purity() - 1.0).abs() < 1e-9);
            assert!((r.energy(&h) - e0).abs() < 1e-10);
        }
        let noisy = lindblad_integrate(&rho0, &h, 1.0, &uniform_grid(10.0, 10)).unwrap();
        for w in noisy.windows(2) {
            assert!(w[1].purity() <= w[0].purity() + 1e-12);
            assert!((w[1].energy(&h) - e0).abs() < 1e-8);
        }
        DensityMatrix::new(noisy[10].rho.clone(), 10.0).unwrap();
    }

    #[test]
    fn uncoupled_initial_amplitude_is_constant() {
        let bath = build_flat_bath(0.0, 11, 0.1, 0.0).unwrap().value;
        let s = expectation_coefficients(&bath.spec, 1.0, &[0.0, 2.0, 7.0]).unwrap();
        for v in &s.values {
            assert_eq!(v[0], c(1.0, 0.0));
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let bath = build_flat_bath(0.1, 11, 0.1, 0.0).unwrap().value;
        let s = expectation_coefficients(&bath.spec, 1.0, &[0.0, 1.0]).unwrap();
        assert!(occupation_expectations(&bath.spec, 1.0, &[0.0, 1.5], &s).is_err());
    }

    #[test]
    fn rejects_bad_density_matrices() {
        assert!(DensityMatrix::new(CMatrix::from_element(2, 2, c(0.4, 0.0)), 0.0).is_err());
        let neg = CMatrix::from_row_slice(2, 2, &[c(1.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]);
        assert!(DensityMatrix::new(neg, 0.0).is_err());
    }
}
