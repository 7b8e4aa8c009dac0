//! Decay problem definition, flat discretized baths, and the
//! Weisskopf-Wigner mass and width matrices.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;
use num_traits::Zero;

use crate::linalg::{c, frobenius, hermiticity_defect, CMatrix, Hamiltonian, I};
use crate::{Error, Flagged, Result, Warning};

/// Unperturbed spectrum `E_n`, Hermitian perturbation `V`, the degenerate
/// manifold `{s_a}` and the initial state `s_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    energies: Vec<f64>,
    v: CMatrix,
    manifold: Vec<usize>,
    initial: usize,
    selection_rule: bool,
    level_spacing: Option<f64>,
}

impl SystemSpec {
    pub fn new(energies: Vec<f64>, v: CMatrix, manifold: Vec<usize>, initial: usize) -> Result<Self> {
        let n = energies.len();
        if n == 0 {
            return Err(Error::invalid("spectrum is empty"));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::invalid("energies must be finite"));
        }
        if v.nrows() != n || v.ncols() != n {
            return Err(Error::invalid(format!(
                "V is {}x{} but there are {n} levels",
                v.nrows(),
                v.ncols()
            )));
        }
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("V has non-finite entries"));
        }
        let defect = hermiticity_defect(&v);
        if defect > 1e-12 * frobenius(&v) {
            return Err(Error::invalid(format!("V is not Hermitian (defect {defect:e})")));
        }
        if manifold.is_empty() {
            return Err(Error::invalid("manifold is empty"));
        }
        for (k, &a) in manifold.iter().enumerate() {
            if a >= n {
                return Err(Error::invalid(format!("manifold index {a} out of range")));
            }
            if manifold[..k].contains(&a) {
                return Err(Error::invalid(format!("manifold index {a} repeated")));
            }
        }
        if !manifold.contains(&initial) {
            return Err(Error::invalid(format!(
                "initial state {initial} is not in the manifold"
            )));
        }
        let e_s = energies[manifold[0]];
        for &a in &manifold {
            if (energies[a] - e_s).abs() > 1e-12 * e_s.abs().max(1.0) {
                return Err(Error::invalid(format!(
                    "manifold is not degenerate: E[{a}] = {} but E_s = {e_s}",
                    energies[a]
                )));
            }
        }
        Ok(SystemSpec {
            energies,
            v,
            manifold,
            initial,
            selection_rule: false,
            level_spacing: None,
        })
    }

    /// Assert `V_{s_a s_b} = 0` inside the manifold; fails if it does not hold.
    pub fn with_selection_rule(mut self) -> Result<Self> {
        if !self.satisfies_selection_rule() {
            return Err(Error::invalid("V has nonzero matrix elements inside the manifold"));
        }
        self.selection_rule = true;
        Ok(self)
    }

    /// Record that the off-manifold levels form a uniform grid with this
    /// spacing, so the on-shell delta function becomes a density of states.
    pub fn with_level_spacing(mut self, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid("level spacing must be positive"));
        }
        self.level_spacing = Some(spacing);
        Ok(self)
    }

    pub fn satisfies_selection_rule(&self) -> bool {
        let scale = frobenius(&self.v).max(f64::MIN_POSITIVE);
        self.manifold
            .iter()
            .all(|&a| self.manifold.iter().all(|&b| self.v[(a, b)].norm() <= 1e-12 * scale))
    }

    pub fn selection_rule_asserted(&self) -> bool {
        self.selection_rule
    }

    pub fn level_spacing(&self) -> Option<f64> {
        self.level_spacing
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn v(&self) -> &CMatrix {
        &self.v
    }

    pub fn manifold(&self) -> &[usize] {
        &self.manifold
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    /// Position of the initial state within the manifold list.
    pub fn initial_position(&self) -> usize {
        self.manifold.iter().position(|&a| a == self.initial).unwrap_or(0)
    }

    pub fn e_s(&self) -> f64 {
        self.energies[self.manifold[0]]
    }

    pub fn in_manifold(&self, n: usize) -> bool {
        self.manifold.contains(&n)
    }

    pub fn off_manifold(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&n| !self.in_manifold(n)).collect()
    }

    /// `(V²)_{mn}`.
    pub fn v_squared(&self, m: usize, n: usize) -> Complex64 {
        (0..self.dim()).map(|k| self.v[(m, k)] * self.v[(k, n)]).sum()
    }

    /// `H = H₀ + V`.
    pub fn hamiltonian(&self) -> Result<Hamiltonian> {
        let mut h = self.v.clone();
        for (i, &e) in self.energies.iter().enumerate() {
            h[(i, i)] += e;
        }
        Hamiltonian::new(h)
    }

    /// Largest `|E_n - E_s|` over the spectrum.
    pub fn max_detuning(&self) -> f64 {
        let e_s = self.e_s();
        self.energies.iter().map(|e| (e - e_s).abs()).fold(0.0, f64::max)
    }

    /// `√(Σ_{m∉manifold} |V_{m s_A}|²)`, the coupling norm out of the initial
    /// state.
    pub fn coupling_norm(&self) -> f64 {
        self.off_manifold()
            .iter()
            .map(|&m| self.v[(m, self.initial)].norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Noise strength `σ`; `M_σ = 1/σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    sigma: f64,
}

impl NoiseParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(NoiseParams { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `1/σ²`, infinite at `σ = 0`.
    pub fn m_sigma(&self) -> f64 {
        1.0 / (self.sigma * self.sigma)
    }
}

/// On-shell energy `E_s`, mass matrix `M` and width matrix `Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct WWParams {
    e_s: f64,
    m: CMatrix,
    gamma: CMatrix,
}

impl WWParams {
    pub fn new(e_s: f64, m: CMatrix, gamma: CMatrix) -> Result<Self> {
        if !m.is_square() || m.shape() != gamma.shape() || m.nrows() == 0 {
            return Err(Error::invalid("M and Gamma must be square matrices of equal size"));
        }
        let tol = |x: &CMatrix| 1e-12 * frobenius(x).max(1e-300);
        if hermiticity_defect(&m) > tol(&m) {
            return Err(Error::invalid("mass matrix is not Hermitian"));
        }
        if hermiticity_defect(&gamma) > tol(&gamma) {
            return Err(Error::invalid("width matrix is not Hermitian"));
        }
        let d = gamma.nrows();
        let min_eig = if d == 1 {
            gamma[(0, 0)].re
        } else {
            let eig = gamma
                .clone()
                .try_symmetric_eigen(1e-15, 10_000)
                .ok_or_else(|| Error::numeric("width matrix eigendecomposition failed"))?;
            eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
        };
        if min_eig < -1e-12 * frobenius(&gamma) {
            return Err(Error::invalid(format!(
                "width matrix is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(WWParams { e_s, m, gamma })
    }

    /// Non-degenerate case with real `M` and `Γ ≥ 0`.
    pub fn scalar(e_s: f64, m: f64, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(Error::invalid(format!("Gamma must be >= 0, got {gamma}")));
        }
        Self::new(
            e_s,
            CMatrix::from_element(1, 1, c(m, 0.0)),
            CMatrix::from_element(1, 1, c(gamma, 0.0)),
        )
    }

    pub fn e_s(&self) -> f64 {
        self.e_s
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn m(&self) -> &CMatrix {
        &self.m
    }

    pub fn gamma(&self) -> &CMatrix {
        &self.gamma
    }

    /// `M` for `D = 1`.
    pub fn m_scalar(&self) -> Result<f64> {
        self.require_scalar()?;
        Ok(self.m[(0, 0)].re)
    }

    /// `Γ` for `D = 1`.
    pub fn gamma_scalar(&self) -> Result<f64> {
        self.require_scalar()?;
        Ok(self.gamma[(0, 0)].re)
    }

    fn require_scalar(&self) -> Result<()> {
        if self.dim() != 1 {
            return Err(Error::invalid(format!(
                "scalar parameters requested for a {}-dimensional manifold",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// One level coupled with constant strength to an odd, symmetric ladder of
/// bath levels. State 0 is the decaying level; states `1..=N` are the bath.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatBath {
    pub spec: SystemSpec,
    pub coupling: f64,
    pub spacing: f64,
}

impl FlatBath {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.spec.dim() - 2) as f64 * self.spacing
    }
}

/// Bath with `v = √(Γ·Δ/2π)` and levels `E_s + kΔ`, `|k| ≤ (N-1)/2`.
///
/// Warns with [`Warning::NarrowBand`] when the band half-width is less than
/// five widths.
pub fn build_flat_bath(gamma_target: f64, level_count: usize, spacing: f64, e_s: f64) -> Result<Flagged<FlatBath>> {
    if !(gamma_target >= 0.0) || !gamma_target.is_finite() {
        return Err(Error::invalid("gamma_target must be finite and >= 0"));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::invalid("spacing must be positive"));
    }
    if level_count < 3 || level_count.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "level_count must be odd and >= 3, got {level_count}"
        )));
    }
    let coupling = (gamma_target * spacing / (2.0 * PI)).sqrt();
    let n = level_count + 1;
    let half = (level_count as i64 - 1) / 2;
    let mut energies = Vec::with_capacity(n);
    energies.push(e_s);
    for k in -half..=half {
        energies.push(e_s + k as f64 * spacing);
    }
    let mut v = CMatrix::zeros(n, n);
    for m in 1..n {
        v[(0, m)] = c(coupling, 0.0);
        v[(m, 0)] = c(coupling, 0.0);
    }
    let spec = SystemSpec::new(energies, v, alloc::vec![0], 0)?
        .with_selection_rule()?
        .with_level_spacing(spacing)?;
    let bath = FlatBath {
        spec,
        coupling,
        spacing,
    };
    let mut out = Flagged::clean(bath);
    let half_width = out.value.half_width();
    if gamma_target > 0.0 && half_width < 5.0 * gamma_target {
        out.warnings.push(Warning::NarrowBand {
            gamma: gamma_target,
            half_width,
        });
    }
    Ok(out)
}

/// Mass and width matrices of the manifold.
///
/// `M_ab = P Σ_m V_{a m} V_{m b} / (E_s - E_m)` is summed after grouping the
/// off-manifold levels by `|E_m - E_s|`, so a symmetric grid cancels in
/// pairs; exactly on-shell levels contribute nothing to `M`.
///
/// `Γ_ab = 2π Σ_{|E_m - E_s| < h} V_{a m} V_{m b} / (2h)` where `h` is half
/// the level spacing when the system carries one (so each on-shell level
/// contributes `2π|V|²/Δ`) and `delta_tolerance` otherwise.
pub fn compute_ww_params(spec: &SystemSpec, delta_tolerance: f64) -> Result<WWParams> {
    if !(delta_tolerance > 0.0) || !delta_tolerance.is_finite() {
        return Err(Error::invalid("delta_tolerance must be positive"));
    }
    let off = spec.off_manifold();
    if off.is_empty() {
        return Err(Error::invalid("there are no states outside the manifold"));
    }
    let e_s = spec.e_s();
    let h = spec.level_spacing().map_or(delta_tolerance, |s| 0.5 * s);
    let shell_scale = e_s.abs().max(1.0) * 1e-12;
    let d = spec.manifold().len();
    let v = spec.v();

    let mut ordered: Vec<(f64, usize)> = off.iter().map(|&m| (spec.energies()[m] - e_s, m)).collect();
    ordered.sort_by(|x, y| x.0.abs().total_cmp(&y.0.abs()).then(x.0.total_cmp(&y.0)));

    let mut m_mat = CMatrix::zeros(d, d);
    let mut g_mat = CMatrix::zeros(d, d);
    for (a, &sa) in spec.manifold().iter().enumerate() {
        for (b, &sb) in spec.manifold().iter().enumerate() {
            let mut m_sum = Complex64::zero();
            let mut g_sum = Complex64::zero();
            let mut k = 0;
            while k < ordered.len() {
                // group of levels sharing |E_m - E_s|
                let mag = ordered[k].0.abs();
                let mut group = Complex64::zero();
                let mut j = k;
                while j < ordered.len() && (ordered[j].0.abs() - mag).abs() <= 1e-12 * mag.max(shell_scale) {
                    let (delta, m) = ordered[j];
                    let num = v[(sa, m)] * v[(m, sb)];
                    if delta.abs() > shell_scale {
                        group += num / (-delta);
                    }
                    if delta.abs() < h {
                        g_sum += num;
                    }
                    j += 1;
                }
                m_sum += group;
                k = j;
            }
            m_mat[(a, b)] = m_sum;
            g_mat[(a, b)] = g_sum * (2.0 * PI / (2.0 * h));
        }
    }
    WWParams::new(e_s, m_mat, g_mat)
}

/// Which form of the manifold kernel `K_ab(E)` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    /// Before the on-shell approximation, including the `f_m` factors.
    Full,
    /// `(-iE + iE_s)δ_ab + iM_ab + Γ_ab/2`.
    WW,
}

/// Manifold kernel at complex energy `E`.
pub fn ww_kernel(spec: &SystemSpec, ww: &WWParams, sigma: f64, energy: Complex64, mode: KernelMode) -> Result<CMatrix> {
    let d = spec.manifold().len();
    if ww.dim() != d {
        return Err(Error::invalid("WW parameters do not match the manifold size"));
    }
    let e_s = spec.e_s();
    let base = -I * energy + I * e_s;
    match mode {
        KernelMode::WW => {
            let mut k = ww.m() * I + ww.gamma() * c(0.5, 0.0);
            for a in 0..d {
                k[(a, a)] += base;
            }
            Ok(k)
        }
        KernelMode::Full => {
            let s2 = sigma * sigma;
            let off = spec.off_manifold();
            let v = spec.v();
            let mut k = CMatrix::zeros(d, d);
            for (a, &sa) in spec.manifold().iter().enumerate() {
                for (b, &sb) in spec.manifold().iter().enumerate() {
                    let mut acc = spec.v_squared(sa, sb) * (s2 / 8.0);
                    for &m in &off {
                        let delta = spec.energies()[m] - e_s;
                        let f = c(1.0, -s2 * delta / 8.0);
                        let den = base + I * delta * f;
                        let num = f * f * v[(sa, m)] * v[(m, sb)];
                        if num.is_zero() {
                            continue;
                        }
                        if den.norm() <= 1e-300 {
                            return Err(Error::numeric(format!("kernel evaluated on the pole of level {m}")));
                        }
                        acc += num / den;
                    }
                    if a == b {
                        acc += base;
                    }
                    k[(a, b)] = acc;
                }
            }
            Ok(k)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bath() -> FlatBath {
        build_flat_bath(0.1, 201, 0.01, 0.0).unwrap().value
    }

    #[test]
    fn flat_bath_coupling_and_width() {
        let b = bath();
        // v = sqrt(ΓΔ/2π) computed independently
        let v = (0.1f64 * 0.01 / (2.0 * core::f64::consts::PI)).sqrt();
        assert!((b.coupling - v).abs() < 1e-15);
        assert!((b.coupling - 0.0126157).abs() < 1e-7);
        let ww = compute_ww_params(&b.spec, 1e-3).unwrap();
        assert!((ww.gamma_scalar().unwrap() / 0.1 - 1.0).abs() < 1e-10);
        assert!(ww.m_scalar().unwrap().abs() < 1e-14);
    }

    #[test]
    fn zero_coupling_bath() {
        let b = build_flat_bath(0.0, 11, 0.1, 0.0).unwrap().value;
        assert_eq!(b.coupling, 0.0);
        assert!(b.spec.v().iter().all(|z| z.is_zero()));
        let ww = compute_ww_params(&b.spec, 1e-3).unwrap();
        assert_eq!(ww.gamma_scalar().unwrap(), 0.0);
        assert_eq!(ww.m_scalar().unwrap(), 0.0);
    }

    #[test]
    fn narrow_band_is_flagged() {
        let f = build_flat_bath(0.1, 21, 0.01, 0.0).unwrap();
        assert!(matches!(f.warnings[..], [Warning::NarrowBand { .. }]));
        assert!(bath_is_clean());
        fn bath_is_clean() -> bool {
            build_flat_bath(0.1, 201, 0.01, 0.0).unwrap().is_clean()
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        let v = CMatrix::zeros(2, 2);
        assert!(SystemSpec::new(alloc::vec![0.0, 1.0], v.clone(), alloc::vec![0], 1).is_err());
        assert!(SystemSpec::new(alloc::vec![0.0, 1.0], v.clone(), alloc::vec![0, 1], 0).is_err());
        assert!(SystemSpec::new(alloc::vec![0.0, 1.0], v.clone(), alloc::vec![2], 2).is_err());
        let mut bad = v.clone();
        bad[(0, 1)] = c(1.0, 0.0);
        assert!(SystemSpec::new(alloc::vec![0.0, 1.0], bad, alloc::vec![0], 0).is_err());
        let mut inside = CMatrix::zeros(3, 3);
        inside[(0, 1)] = c(0.1, 0.0);
        inside[(1, 0)] = c(0.1, 0.0);
        let s = SystemSpec::new(alloc::vec![0.0, 0.0, 1.0], inside, alloc::vec![0, 1], 0).unwrap();
        assert!(s.with_selection_rule().is_err());
        assert!(build_flat_bath(0.1, 200, 0.01, 0.0).is_err());
        assert!(build_flat_bath(0.1, 201, 0.0, 0.0).is_err());
    }

    #[test]
    fn degenerate_manifold_with_decoupled_member() {
        // levels 0,1 degenerate; only level 0 couples to the continuum
        let n = 2 + 41;
        let mut energies = alloc::vec![0.0, 0.0];
        for k in -20..=20 {
            energies.push(k as f64 * 0.05);
        }
        let mut v = CMatrix::zeros(n, n);
        for m in 2..n {
            v[(0, m)] = c(0.02, 0.0);
            v[(m, 0)] = c(0.02, 0.0);
        }
        let spec = SystemSpec::new(energies, v, alloc::vec![0, 1], 0)
            .unwrap()
            .with_level_spacing(0.05)
            .unwrap();
        let ww = compute_ww_params(&spec, 1e-3).unwrap();
        let g = ww.gamma();
        assert!(g[(0, 0)].re > 0.0);
        assert_eq!(g[(0, 1)], Complex64::zero());
        assert_eq!(g[(1, 0)], Complex64::zero());
        assert_eq!(g[(1, 1)], Complex64::zero());
    }

    #[test]
    fn asymmetric_spectrum_gives_principal_value_shift() {
        // two levels at +1 and +2 above E_s: M = -(v²/1 + v²/2)
        let mut v = CMatrix::zeros(3, 3);
        for m in 1..3 {
            v[(0, m)] = c(0.1, 0.0);
            v[(m, 0)] = c(0.1, 0.0);
        }
        let spec = SystemSpec::new(alloc::vec![0.0, 1.0, 2.0], v, alloc::vec![0], 0).unwrap();
        let ww = compute_ww_params(&spec, 1e-3).unwrap();
        assert!((ww.m_scalar().unwrap() + 0.01 * 1.5).abs() < 1e-15);
        assert_eq!(ww.gamma_scalar().unwrap(), 0.0);
    }

    #[test]
    fn ww_kernel_forms() {
        let b = bath();
        let ww = compute_ww_params(&b.spec, 1e-3).unwrap();
        let k = ww_kernel(&b.spec, &ww, 0.0, c(0.0, 0.0), KernelMode::WW).unwrap();
        assert!((k[(0, 0)] - c(0.05, 0.0)).norm() < 1e-12);
        let k0 = ww_kernel(&b.spec, &ww, 0.0, c(0.3, 0.01), KernelMode::WW).unwrap();
        let k1 = ww_kernel(&b.spec, &ww, 0.5, c(0.3, 0.01), KernelMode::WW).unwrap();
        assert_eq!(k0, k1);
        // the full kernel's σ dependence disappears on shell
        let e = c(0.0, 1e-6);
        let f0 = ww_kernel(&b.spec, &ww, 0.0, e, KernelMode::Full).unwrap();
        let f1 = ww_kernel(&b.spec, &ww, 1.0, e, KernelMode::Full).unwrap();
        assert!((f0[(0, 0)] - f1[(0, 0)]).norm() < 1e-6 * f0[(0, 0)].norm());
    }

    #[test]
    fn full_kernel_pole_is_an_error() {
        let b = bath();
        let ww = compute_ww_params(&b.spec, 1e-3).unwrap();
        // E exactly on the on-shell bath level at σ = 0
        assert!(ww_kernel(&b.spec, &ww, 0.0, c(0.0, 0.0), KernelMode::Full).is_err());
    }

    #[test]
    fn ww_params_validation() {
        assert!(WWParams::scalar(0.0, 0.0, -0.1).is_err());
        let g = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(WWParams::new(0.0, CMatrix::zeros(2, 2), g).is_err());
        assert!(NoiseParams::new(-1.0).is_err());
        assert_eq!(NoiseParams::new(0.5).unwrap().m_sigma(), 4.0);
    }
}
