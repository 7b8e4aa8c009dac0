//! Monte Carlo ensembles over trajectories.
//!
//! Trajectory `i` always draws from stream `i` of the master seed. Trajectories
//! are grouped into fixed leaves of [`LEAF_SIZE`] consecutive streams; leaves
//! are combined by [`TreeReducer`] in a fixed binary tree. A parallel driver
//! only has to hand leaves to the reducer in index order to reproduce the
//! sequential result bit for bit.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;
use num_traits::Zero;

use crate::linalg::{Hamiltonian, HermitianEigen};
use crate::rng::standard_normal;
use crate::system::compute_ww_params;
use crate::trajectory::{pathwise_amplitude, CoefficientState, LinearizedIntegrator, SseIntegrator};
use crate::{Accumulator, EnsembleEstimate, Error, NoiseParams, Result, RngPolicy, SystemSpec, WWParams};

/// Trajectories per reduction leaf.
pub const LEAF_SIZE: u64 = 32;

/// Largest allowed `dt·max|E_n - E_s|` without `allow_coarse_step`.
pub const MAX_PHASE_PER_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    /// Euler-Maruyama on the nonlinear energy-driven SSE.
    NonlinearSse,
    /// Exact `exp[-iH(t - σW_t/2)]` propagation.
    ImaginaryNoise,
    /// Euler-Maruyama on the linearized coefficient system.
    Linearized,
    /// Closed-form `C_m` along the path, with `C_s = e^{-iMt - Γt/2}`.
    PathwiseClosedForm,
}

impl Engine {
    pub const ALL: [Engine; 4] = [
        Engine::NonlinearSse,
        Engine::ImaginaryNoise,
        Engine::Linearized,
        Engine::PathwiseClosedForm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Engine::NonlinearSse => "nonlinear-sse",
            Engine::ImaginaryNoise => "imaginary-noise",
            Engine::Linearized => "linearized",
            Engine::PathwiseClosedForm => "pathwise-closed-form",
        }
    }

    pub fn from_name(name: &str) -> Option<Engine> {
        Engine::ALL.into_iter().find(|e| e.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    /// `|⟨ψ₀|ψ(t)⟩|²`.
    Survival,
    /// Total population outside the initial manifold.
    DecayProbability,
    /// `|ψ_n|²` for every level.
    Occupations,
    /// Upper triangle of `ψψ†`, real and imaginary parts.
    DensityMatrix,
    /// `R` with `ρ = (1 - R·τ)/2`; two-level systems only.
    Bloch,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::Survival => "survival",
            Observable::DecayProbability => "decay",
            Observable::Occupations => "occupations",
            Observable::DensityMatrix => "density",
            Observable::Bloch => "bloch",
        }
    }

    pub fn from_name(name: &str) -> Option<Observable> {
        [
            Observable::Survival,
            Observable::DecayProbability,
            Observable::Occupations,
            Observable::DensityMatrix,
            Observable::Bloch,
        ]
        .into_iter()
        .find(|o| o.name() == name)
    }

    fn columns(self, dim: usize) -> Vec<String> {
        match self {
            Observable::Survival => vec!["survival".to_string()],
            Observable::DecayProbability => vec!["decay".to_string()],
            Observable::Occupations => (0..dim).map(|n| format!("p{n}")).collect(),
            Observable::DensityMatrix => {
                let mut out = Vec::new();
                for i in 0..dim {
                    for j in i..dim {
                        out.push(format!("rho{i}_{j}_re"));
                        out.push(format!("rho{i}_{j}_im"));
                    }
                }
                out
            }
            Observable::Bloch => vec!["R1".to_string(), "R2".to_string(), "R3".to_string()],
        }
    }
}

/// Everything needed to run an ensemble.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub system: SystemSpec,
    pub noise: NoiseParams,
    pub dt: f64,
    pub horizon: f64,
    pub n_traj: u64,
    pub observables: Vec<Observable>,
    pub master_seed: u64,
    /// Output every `record_every` steps of size `dt`.
    pub record_every: usize,
    /// Overrides the basis state `system.initial()` for the state-vector
    /// engines.
    pub initial_state: Option<Vec<Complex64>>,
    /// Mass and width for the pathwise engine; computed from the system when
    /// absent.
    pub ww: Option<WWParams>,
    pub allow_coarse_step: bool,
}

impl ExperimentPlan {
    pub fn new(system: SystemSpec, noise: NoiseParams, dt: f64, horizon: f64, n_traj: u64, master_seed: u64) -> Self {
        ExperimentPlan {
            system,
            noise,
            dt,
            horizon,
            n_traj,
            observables: vec![Observable::Survival],
            master_seed,
            record_every: 1,
            initial_state: None,
            ww: None,
            allow_coarse_step: false,
        }
    }

    pub fn n_steps(&self) -> usize {
        libm::round(self.horizon / self.dt) as usize
    }

    /// Output times `k·record_every·dt`.
    pub fn output_times(&self) -> Vec<f64> {
        let stride = self.record_every.max(1);
        (0..=self.n_steps() / stride)
            .map(|k| (k * stride) as f64 * self.dt)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt must be positive"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::invalid("horizon must be positive"));
        }
        if self.n_traj == 0 {
            return Err(Error::invalid("n_traj must be at least 1"));
        }
        if self.observables.is_empty() {
            return Err(Error::invalid("no observables requested"));
        }
        let n = self.n_steps();
        if n == 0 || (n as f64 * self.dt - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(Error::invalid(format!(
                "horizon {} is not a whole number of steps of {}",
                self.horizon, self.dt
            )));
        }
        if self.record_every == 0 || !n.is_multiple_of(self.record_every) {
            return Err(Error::invalid("record_every must divide the number of steps"));
        }
        let phase = self.dt * self.system.max_detuning();
        if phase > MAX_PHASE_PER_STEP && !self.allow_coarse_step {
            return Err(Error::invalid(format!(
                "dt·max|E_n - E_s| = {phase} exceeds {MAX_PHASE_PER_STEP}; reduce dt or allow a coarse step"
            )));
        }
        if self.observables.contains(&Observable::Bloch) && self.system.dim() != 2 {
            return Err(Error::invalid("Bloch components need a two-level system"));
        }
        if let Some(psi) = &self.initial_state {
            if psi.len() != self.system.dim() {
                return Err(Error::invalid("initial state has the wrong dimension"));
            }
            let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("initial state is not normalized"));
            }
        }
        Ok(())
    }

    pub fn columns(&self) -> Vec<String> {
        self.observables
            .iter()
            .flat_map(|o| o.columns(self.system.dim()))
            .collect()
    }
}

/// Per-time, per-column estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTable {
    pub engine: Engine,
    pub master_seed: u64,
    pub n_traj: u64,
    pub times: Vec<f64>,
    pub columns: Vec<String>,
    /// `rows[k][j]`: column `j` at `times[k]`.
    pub rows: Vec<Vec<EnsembleEstimate>>,
}

impl EnsembleTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn series(&self, name: &str) -> Option<Vec<EnsembleEstimate>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn means(&self, name: &str) -> Option<Vec<f64>> {
        Some(self.series(name)?.iter().map(|e| e.mean).collect())
    }
}

/// Partial sums for one leaf (or a merged subtree), laid out like
/// [`EnsembleTable::rows`], flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub index: u64,
    pub acc: Vec<Accumulator>,
}

impl Leaf {
    fn merge(&mut self, other: &Leaf) {
        for (a, b) in self.acc.iter_mut().zip(&other.acc) {
            a.merge(b);
        }
    }
}

/// Binary-counter reduction: leaves must be pushed in index order; the
/// merge tree depends only on the number of leaves.
#[derive(Debug, Default)]
pub struct TreeReducer {
    stack: Vec<(u32, Leaf)>,
    next: u64,
}

impl TreeReducer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, leaf: Leaf) -> Result<()> {
        if leaf.index != self.next {
            return Err(Error::invalid(format!(
                "leaf {} pushed out of order, expected {}",
                leaf.index, self.next
            )));
        }
        self.next += 1;
        let mut cur = (0u32, leaf);
        while let Some((level, _)) = self.stack.last() {
            if *level != cur.0 {
                break;
            }
            let (level, mut left) = self.stack.pop().unwrap();
            left.merge(&cur.1);
            cur = (level + 1, left);
        }
        self.stack.push(cur);
        Ok(())
    }

    pub fn finish(mut self) -> Option<Leaf> {
        let (_, mut acc) = self.stack.pop()?;
        while let Some((_, mut left)) = self.stack.pop() {
            left.merge(&acc);
            acc = left;
        }
        Some(acc)
    }
}

enum Prepared {
    Sse {
        h: Hamiltonian,
    },
    Imaginary {
        values: Vec<f64>,
        /// Eigenvector matrix, row-major.
        rows: Vec<Complex64>,
        /// `U†ψ₀`.
        coeffs: Vec<Complex64>,
        /// Indices whose amplitudes are needed.
        needed: Vec<usize>,
    },
    Linearized,
    Pathwise {
        mass: f64,
        gamma: f64,
        /// `(m, E_m - E_s, V_ms)`.
        channels: Vec<(usize, f64, Complex64)>,
    },
}

/// A validated plan bound to an engine, ready to run leaves.
pub struct PreparedPlan {
    plan: ExperimentPlan,
    engine: Engine,
    times: Vec<f64>,
    columns: Vec<String>,
    psi0: Vec<Complex64>,
    prepared: Prepared,
}

impl PreparedPlan {
    pub fn new(plan: ExperimentPlan, engine: Engine) -> Result<Self> {
        plan.validate()?;
        let dim = plan.system.dim();
        let psi0 = match &plan.initial_state {
            Some(psi) => psi.clone(),
            None => {
                let mut v = vec![Complex64::zero(); dim];
                v[plan.system.initial()] = Complex64::new(1.0, 0.0);
                v
            }
        };
        let basis_only = |what: &str| -> Result<()> {
            if plan.initial_state.is_some() {
                return Err(Error::invalid(format!(
                    "the {what} engine starts from the basis state system.initial"
                )));
            }
            Ok(())
        };
        let prepared = match engine {
            Engine::NonlinearSse => {
                let h = plan.system.hamiltonian()?;
                SseIntegrator::new(h.clone(), plan.noise.sigma())?;
                Prepared::Sse { h }
            }
            Engine::ImaginaryNoise => {
                let eig = HermitianEigen::new(&plan.system.hamiltonian()?)?;
                let mut rows = Vec::with_capacity(dim * dim);
                for i in 0..dim {
                    for k in 0..dim {
                        rows.push(eig.vectors[(i, k)]);
                    }
                }
                let coeffs = (0..dim)
                    .map(|k| (0..dim).map(|i| eig.vectors[(i, k)].conj() * psi0[i]).sum())
                    .collect();
                let full = plan.observables.iter().any(|o| {
                    matches!(
                        o,
                        Observable::Occupations | Observable::DensityMatrix | Observable::Bloch
                    )
                });
                let needed = if full {
                    (0..dim).collect()
                } else {
                    let mut v: Vec<usize> = (0..dim).filter(|&i| psi0[i] != Complex64::zero()).collect();
                    v.extend(plan.system.manifold().iter().copied());
                    v.sort_unstable();
                    v.dedup();
                    v
                };
                Prepared::Imaginary {
                    values: eig.values,
                    rows,
                    coeffs,
                    needed,
                }
            }
            Engine::Linearized => {
                basis_only("linearized")?;
                LinearizedIntegrator::new(&plan.system, plan.noise.sigma())?;
                Prepared::Linearized
            }
            Engine::PathwiseClosedForm => {
                basis_only("pathwise")?;
                if plan.system.manifold().len() != 1 {
                    return Err(Error::invalid(
                        "the pathwise engine needs a non-degenerate initial state",
                    ));
                }
                if !plan.system.satisfies_selection_rule() {
                    return Err(Error::invalid("the pathwise engine needs V_ss = 0"));
                }
                let ww = match &plan.ww {
                    Some(ww) => ww.clone(),
                    None => compute_ww_params(&plan.system, 1e-9)?,
                };
                let s = plan.system.initial();
                let channels = plan
                    .system
                    .off_manifold()
                    .into_iter()
                    .map(|m| {
                        (
                            m,
                            plan.system.energies()[m] - plan.system.e_s(),
                            plan.system.v()[(m, s)],
                        )
                    })
                    .collect();
                Prepared::Pathwise {
                    mass: ww.m_scalar()?,
                    gamma: ww.gamma_scalar()?,
                    channels,
                }
            }
        };
        let times = plan.output_times();
        let columns = plan.columns();
        Ok(PreparedPlan {
            plan,
            engine,
            times,
            columns,
            psi0,
            prepared,
        })
    }

    pub fn plan(&self) -> &ExperimentPlan {
        &self.plan
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    pub fn n_leaves(&self) -> u64 {
        self.plan.n_traj.div_ceil(LEAF_SIZE)
    }

    fn width(&self) -> usize {
        self.times.len() * self.columns.len()
    }

    /// Observables along one trajectory, flattened time-major.
    pub fn run_trajectory(&self, stream_index: u64) -> Result<Vec<f64>> {
        let fail = |reason: String| Error::TrajectoryFailed { stream_index, reason };
        let mut rng = RngPolicy::new(self.plan.master_seed, stream_index).rng();
        let sigma = self.plan.noise.sigma();
        let dt = self.plan.dt;
        let stride = self.plan.record_every;
        let n_out = self.times.len();
        let mut out = Vec::with_capacity(self.width());
        let mut amp = self.psi0.clone();
        let sys = &self.plan.system;
        let dim = sys.dim();
        let record = |out: &mut Vec<f64>, amp: &[Complex64], t: f64, picture: Picture| -> Result<()> {
            let before = out.len();
            self.extract(amp, t, picture, out);
            if out[before..].iter().any(|v| !v.is_finite()) {
                return Err(fail(format!("non-finite observable at t = {t}")));
            }
            Ok(())
        };
        match &self.prepared {
            Prepared::Sse { h } => {
                let mut integ = SseIntegrator::new(h.clone(), sigma).map_err(|e| fail(e.to_string()))?;
                record(&mut out, &amp, 0.0, Picture::Schrodinger)?;
                for k in 1..n_out {
                    for _ in 0..stride {
                        let dw = dt.sqrt() * standard_normal(&mut rng);
                        integ.step(&mut amp, dw, dt).map_err(|e| fail(e.to_string()))?;
                    }
                    record(&mut out, &amp, self.times[k], Picture::Schrodinger)?;
                }
            }
            Prepared::Imaginary {
                values,
                rows,
                coeffs,
                needed,
            } => {
                let mut w = 0.0;
                let mut phased = vec![Complex64::zero(); dim];
                let h_out = stride as f64 * dt;
                for k in 0..n_out {
                    if k > 0 {
                        w += h_out.sqrt() * standard_normal(&mut rng);
                    }
                    let tau = self.times[k] - 0.5 * sigma * w;
                    for (j, p) in phased.iter_mut().enumerate() {
                        *p = coeffs[j] * Complex64::from_polar(1.0, -values[j] * tau);
                    }
                    for &i in needed {
                        let row = &rows[i * dim..(i + 1) * dim];
                        amp[i] = row.iter().zip(&phased).map(|(a, b)| a * b).sum();
                    }
                    record(&mut out, &amp, self.times[k], Picture::SchrodingerPartial)?;
                }
            }
            Prepared::Linearized => {
                let mut integ = LinearizedIntegrator::new(sys, sigma).map_err(|e| fail(e.to_string()))?;
                let mut state = CoefficientState::initial(sys);
                record(&mut out, &state.c, 0.0, Picture::Interaction)?;
                for k in 1..n_out {
                    for _ in 0..stride {
                        let dw = dt.sqrt() * standard_normal(&mut rng);
                        integ.step(&mut state, dw, dt);
                    }
                    // keep the grid exact instead of accumulating dt
                    state.time = self.times[k];
                    record(&mut out, &state.c, self.times[k], Picture::Interaction)?;
                }
            }
            Prepared::Pathwise { mass, gamma, channels } => {
                let mut w = 0.0;
                let h_out = stride as f64 * dt;
                let s = sys.initial();
                for k in 0..n_out {
                    let t = self.times[k];
                    if k > 0 {
                        w += h_out.sqrt() * standard_normal(&mut rng);
                    }
                    amp[s] = Complex64::new(-0.5 * gamma * t, -mass * t).exp();
                    for &(m, delta, v) in channels {
                        amp[m] = pathwise_amplitude(delta, *mass, *gamma, v, sigma, t, w);
                    }
                    record(&mut out, &amp, t, Picture::Interaction)?;
                }
            }
        }
        Ok(out)
    }

    fn extract(&self, amp: &[Complex64], t: f64, picture: Picture, out: &mut Vec<f64>) {
        let sys = &self.plan.system;
        let dim = sys.dim();
        let schrodinger = |n: usize| -> Complex64 {
            match picture {
                Picture::Interaction => amp[n] * Complex64::from_polar(1.0, -sys.energies()[n] * t),
                _ => amp[n],
            }
        };
        for obs in &self.plan.observables {
            match obs {
                Observable::Survival => {
                    let overlap: Complex64 = match picture {
                        // basis initial state: |⟨s|ψ⟩| = |C_s|
                        Picture::Interaction => amp[sys.initial()],
                        _ => self
                            .psi0
                            .iter()
                            .zip(amp)
                            .filter(|(p, _)| !p.is_zero())
                            .map(|(p, a)| p.conj() * a)
                            .sum(),
                    };
                    out.push(overlap.norm_sqr());
                }
                Observable::DecayProbability => {
                    let v = match picture {
                        Picture::SchrodingerPartial => {
                            1.0 - sys.manifold().iter().map(|&a| amp[a].norm_sqr()).sum::<f64>()
                        }
                        _ => sys.off_manifold().iter().map(|&m| amp[m].norm_sqr()).sum(),
                    };
                    out.push(v);
                }
                Observable::Occupations => out.extend(amp.iter().map(|z| z.norm_sqr())),
                Observable::DensityMatrix => {
                    let psi: Vec<Complex64> = (0..dim).map(schrodinger).collect();
                    for i in 0..dim {
                        for j in i..dim {
                            let r = psi[i] * psi[j].conj();
                            out.push(r.re);
                            out.push(r.im);
                        }
                    }
                }
                Observable::Bloch => {
                    let (p0, p1) = (schrodinger(0), schrodinger(1));
                    let rho01 = p0 * p1.conj();
                    let rho10 = p1 * p0.conj();
                    out.push(-2.0 * rho01.re);
                    out.push(-2.0 * rho10.im);
                    out.push(p1.norm_sqr() - p0.norm_sqr());
                }
            }
        }
    }

    /// Accumulates the trajectories of leaf `index`.
    pub fn run_leaf(&self, index: u64) -> Result<Leaf> {
        if index >= self.n_leaves() {
            return Err(Error::invalid(format!("leaf {index} out of range")));
        }
        let mut acc = vec![Accumulator::new(); self.width()];
        let first = index * LEAF_SIZE;
        let last = (first + LEAF_SIZE).min(self.plan.n_traj);
        for stream in first..last {
            let values = self.run_trajectory(stream)?;
            for (a, v) in acc.iter_mut().zip(values) {
                a.push(v);
            }
        }
        Ok(Leaf { index, acc })
    }

    /// Turns the fully reduced leaf into a table.
    pub fn finish(&self, reduced: Leaf) -> Result<EnsembleTable> {
        if reduced.acc.len() != self.width() {
            return Err(Error::invalid("reduced leaf does not match the plan"));
        }
        let nc = self.columns.len();
        let rows = reduced
            .acc
            .chunks(nc)
            .map(|chunk| chunk.iter().map(Accumulator::estimate).collect())
            .collect();
        Ok(EnsembleTable {
            engine: self.engine,
            master_seed: self.plan.master_seed,
            n_traj: self.plan.n_traj,
            times: self.times.clone(),
            columns: self.columns.clone(),
            rows,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Picture {
    Schrodinger,
    /// Schrödinger picture, only the needed amplitudes are current.
    SchrodingerPartial,
    Interaction,
}

/// Single-threaded ensemble.
pub fn run_ensemble(plan: ExperimentPlan, engine: Engine) -> Result<EnsembleTable> {
    let prepared = PreparedPlan::new(plan, engine)?;
    let mut reducer = TreeReducer::new();
    for leaf in 0..prepared.n_leaves() {
        reducer.push(prepared.run_leaf(leaf)?)?;
    }
    let reduced = reducer.finish().ok_or_else(|| Error::invalid("empty ensemble"))?;
    prepared.finish(reduced)
}

/// Outcome of a z-score comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub z: Vec<f64>,
    pub max_abs_z: f64,
    pub fraction_over_3: f64,
    pub pass: bool,
}

/// Deviations at or below this (relative to `max(1, |reference|)`) count as
/// exact agreement.
pub const ZERO_SE_TOLERANCE: f64 = 1e-12;

fn report(z: Vec<f64>) -> ComparisonReport {
    let max_abs_z = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let over = z.iter().filter(|v| v.abs() > 3.0).count();
    let fraction_over_3 = if z.is_empty() {
        0.0
    } else {
        over as f64 / z.len() as f64
    };
    ComparisonReport {
        pass: fraction_over_3 <= 0.01 && max_abs_z <= 5.0,
        z,
        max_abs_z,
        fraction_over_3,
    }
}

fn z_score(index: usize, deviation: f64, se: f64, reference: f64) -> Result<f64> {
    // rounding-level deviations are agreement even when the standard error
    // is itself rounding noise
    if deviation.abs() <= ZERO_SE_TOLERANCE * reference.abs().max(1.0) {
        Ok(0.0)
    } else if se > 0.0 {
        Ok(deviation / se)
    } else {
        Err(Error::ZeroVariance { index, deviation })
    }
}

/// z-scores `(mean - oracle)/std_error` on a shared grid.
pub fn compare_to_oracle(estimates: &[EnsembleEstimate], oracle: &[f64]) -> Result<ComparisonReport> {
    if estimates.len() != oracle.len() {
        return Err(Error::invalid("estimates and oracle are on different grids"));
    }
    let z = estimates
        .iter()
        .zip(oracle)
        .enumerate()
        .map(|(i, (e, &o))| z_score(i, e.mean - o, e.se_or_zero(), o))
        .collect::<Result<Vec<_>>>()?;
    Ok(report(z))
}

/// Two-sample z-scores `(a - b)/√(se_a² + se_b²)`.
pub fn compare_estimates(a: &[EnsembleEstimate], b: &[EnsembleEstimate]) -> Result<ComparisonReport> {
    if a.len() != b.len() {
        return Err(Error::invalid("series have different lengths"));
    }
    let z = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| {
            let se = x.se_or_zero().hypot(y.se_or_zero());
            z_score(i, x.mean - y.mean, se, y.mean)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report(z))
}

/// Compares every column the two tables share.
pub fn compare_tables(a: &EnsembleTable, b: &EnsembleTable) -> Result<ComparisonReport> {
    if a.times.len() != b.times.len()
        || a.times
            .iter()
            .zip(&b.times)
            .any(|(x, y)| (x - y).abs() > 1e-12 * x.abs().max(1.0))
    {
        return Err(Error::invalid("tables are on different time grids"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (j, name) in a.columns.iter().enumerate() {
        if let Some(k) = b.column_index(name) {
            for (ra, rb) in a.rows.iter().zip(&b.rows) {
                xs.push(ra[j]);
                ys.push(rb[k]);
            }
        }
    }
    if xs.is_empty() {
        return Err(Error::invalid("tables share no columns"));
    }
    compare_estimates(&xs, &ys)
}
