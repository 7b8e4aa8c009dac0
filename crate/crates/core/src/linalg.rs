//! Small dense complex linear algebra plus a row-compressed Hermitian
//! operator for the trajectory hot loops.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;
use num_traits::Zero;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖M - M†‖_F`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn is_hermitian(m: &CMatrix, rel_tol: f64) -> bool {
    m.is_square() && hermiticity_defect(m) <= rel_tol * frobenius(m).max(f64::MIN_POSITIVE)
}

/// Hermitian matrix stored as a real diagonal plus compressed off-diagonal
/// rows. Construction checks Hermiticity, so every `Hamiltonian` is valid.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    dense: CMatrix,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl Hamiltonian {
    /// Rejects matrices with `‖H - H†‖ > 1e-10·‖H‖`.
    pub fn new(dense: CMatrix) -> Result<Self> {
        if !dense.is_square() || dense.nrows() == 0 {
            return Err(Error::invalid("Hamiltonian must be a non-empty square matrix"));
        }
        if dense.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("Hamiltonian has non-finite entries"));
        }
        if !is_hermitian(&dense, 1e-10) {
            return Err(Error::invalid(format!(
                "Hamiltonian is not Hermitian (defect {:e})",
                hermiticity_defect(&dense)
            )));
        }
        let n = dense.nrows();
        let diag = (0..n).map(|i| dense[(i, i)].re).collect();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let z = dense[(i, j)];
                if i != j && !z.is_zero() {
                    cols.push(j);
                    vals.push(z);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Hamiltonian {
            dense,
            diag,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn diagonal(energies: &[f64]) -> Result<Self> {
        let n = energies.len();
        Self::new(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c(energies[i], 0.0)
            } else {
                Complex64::zero()
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn dense(&self) -> &CMatrix {
        &self.dense
    }

    /// `out = H·x`.
    #[inline]
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        for i in 0..self.dim() {
            let mut acc = x[i] * self.diag[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            out[i] = acc;
        }
    }

    /// `out = H·X` for a dense column-major `X`, column by column.
    pub fn apply_matrix(&self, x: &CMatrix, out: &mut CMatrix) {
        let n = self.dim();
        for (xc, oc) in x.as_slice().chunks_exact(n).zip(out.as_mut_slice().chunks_exact_mut(n)) {
            self.apply(xc, oc);
        }
    }

    /// `⟨x|H|x⟩` (real for Hermitian H).
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim() {
            let mut hx = x[i] * self.diag[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                hx += self.vals[k] * x[self.cols[k]];
            }
            acc += (x[i].conj() * hx).re;
        }
        acc
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.dim() {
            let r: f64 = self.vals[self.row_ptr[i]..self.row_ptr[i + 1]]
                .iter()
                .map(|z| z.norm())
                .sum();
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }
}

/// Eigendecomposition `H = U diag(λ) U†` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &Hamiltonian) -> Result<Self> {
        let n = h.dim();
        let eig = h
            .dense()
            .clone()
            .try_symmetric_eigen(1e-15, 100 * n * n + 1000)
            .ok_or_else(|| Error::numeric("Hermitian eigendecomposition did not converge"))?;
        let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite eigenvalue"));
        }
        Ok(HermitianEigen {
            values,
            vectors: eig.eigenvectors,
        })
    }

    /// `exp(-iHτ)·x`.
    pub fn evolve(&self, x: &[Complex64], tau: f64) -> Vec<Complex64> {
        let n = self.values.len();
        let mut coeffs = Vec::with_capacity(n);
        for k in 0..n {
            let a: Complex64 = x
                .iter()
                .enumerate()
                .map(|(i, xi)| self.vectors[(i, k)].conj() * xi)
                .sum();
            coeffs.push(a * Complex64::from_polar(1.0, -self.values[k] * tau));
        }
        let mut out = alloc::vec![Complex64::zero(); n];
        for (k, &a) in coeffs.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.vectors[(i, k)] * a;
            }
        }
        out
    }
}

/// Matrix exponential by Padé(13) scaling and squaring.
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    const THETA_13: f64 = 5.371920351148152;
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    if !a.is_square() {
        return Err(Error::invalid("matrix exponential needs a square matrix"));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    if !norm1.is_finite() {
        return Err(Error::numeric("matrix exponential of a non-finite matrix"));
    }
    let s = if norm1 > THETA_13 {
        (norm1 / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * c(2f64.powi(-s), 0.0);
    let id = CMatrix::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let r = |x: f64| c(x, 0.0);
    let u_inner = &a6 * (&a6 * r(B[13]) + &a4 * r(B[11]) + &a2 * r(B[9]))
        + &a6 * r(B[7])
        + &a4 * r(B[5])
        + &a2 * r(B[3])
        + &id * r(B[1]);
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * r(B[12]) + &a4 * r(B[10]) + &a2 * r(B[8]))
        + &a6 * r(B[6])
        + &a4 * r(B[4])
        + &a2 * r(B[2])
        + &id * r(B[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut result = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::numeric("singular Padé denominator"))?;
    for _ in 0..s {
        result = &result * &result;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), c(1.0, 0.0)]);
        assert!(Hamiltonian::new(m).is_err());
    }

    #[test]
    fn sparse_apply_matches_dense() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.0),
                c(0.0, 0.5),
                c(0.2, 0.0),
                c(0.0, -0.5),
                c(-1.0, 0.0),
                c(0.0, 0.0),
                c(0.2, 0.0),
                c(0.0, 0.0),
                c(0.3, 0.0),
            ],
        );
        let h = Hamiltonian::new(m.clone()).unwrap();
        let x = [c(0.3, 0.1), c(-0.2, 0.7), c(0.5, -0.4)];
        let mut out = [Complex64::zero(); 3];
        h.apply(&x, &mut out);
        let dense = &m * CVector::from_column_slice(&x);
        for i in 0..3 {
            assert!((out[i] - dense[i]).norm() < 1e-15);
        }
        let e = (CVector::from_column_slice(&x).adjoint() * dense)[(0, 0)];
        assert!((h.expectation(&x) - e.re).abs() < 1e-15);
        let (lo, hi) = h.spectral_bounds();
        let eig = HermitianEigen::new(&h).unwrap();
        assert!(eig.values.iter().all(|&v| v >= lo && v <= hi));
    }

    #[test]
    fn expm_diagonal_and_rotation() {
        let d = CMatrix::from_diagonal(&CVector::from_column_slice(&[c(0.0, -3.0), c(-0.5, 0.2)]));
        let e = expm(&d).unwrap();
        assert!((e[(0, 0)] - Complex64::from_polar(1.0, -3.0)).norm() < 1e-13);
        assert!((e[(1, 1)] - c(-0.5, 0.2).exp()).norm() < 1e-13);
        assert!(e[(0, 1)].norm() < 1e-15);

        // exp(θ [[0, -1], [1, 0]]) is a rotation; large θ exercises squaring
        let theta = 40.0;
        let g = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(-theta, 0.0), c(theta, 0.0), c(0.0, 0.0)]);
        let r = expm(&g).unwrap();
        assert!((r[(0, 0)].re - theta.cos()).abs() < 1e-10);
        assert!((r[(1, 0)].re - theta.sin()).abs() < 1e-10);
    }

    #[test]
    fn expm_agrees_with_eigen_evolution() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.0, 0.0),
                c(0.3, 0.1),
                c(0.0, 0.0),
                c(0.3, -0.1),
                c(1.0, 0.0),
                c(0.2, 0.0),
                c(0.0, 0.0),
                c(0.2, 0.0),
                c(-0.7, 0.0),
            ],
        );
        let h = Hamiltonian::new(m.clone()).unwrap();
        let eig = HermitianEigen::new(&h).unwrap();
        let t = 2.7;
        let u = expm(&(m * c(0.0, -t))).unwrap();
        let x = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let y = eig.evolve(&x, t);
        for i in 0..3 {
            assert!((u[(i, 0)] - y[i]).norm() < 1e-12);
        }
    }
}
