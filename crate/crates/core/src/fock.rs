//! Truncated Fock-space operators and states.

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ONE, ZERO};

/// Photon-number parity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    pub fn of_level(n: usize) -> Self {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(Error::InvalidDimension { dim })
    } else {
        Ok(())
    }
}

/// Square complex matrix on the truncated Fock space `{|0⟩, …, |D−1⟩}`.
#[derive(Clone, Debug)]
pub struct ComplexOperator {
    mat: Mat<C64>,
}

impl ComplexOperator {
    pub fn from_mat(mat: Mat<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                left: mat.nrows(),
                right: mat.ncols(),
            });
        }
        check_dim(mat.nrows())?;
        Ok(Self { mat })
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            mat: Mat::from_fn(dim, dim, f),
        })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::from_fn(dim, |_, _| ZERO)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::from_fn(dim, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn diagonal(values: &[C64]) -> Result<Self> {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { ZERO })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> MatRef<'_, C64> {
        self.mat.as_ref()
    }

    pub fn into_mat(self) -> Mat<C64> {
        self.mat
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: linalg::adjoint(self.mat.as_ref()),
        }
    }

    fn same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            })
        } else {
            Ok(())
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self {
            mat: &self.mat * &other.mat,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self {
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self {
            mat: &self.mat - &other.mat,
        })
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            mat: linalg::scaled(self.mat.as_ref(), s),
        }
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    pub fn norm_max(&self) -> f64 {
        linalg::norm_max(self.mat.as_ref())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..=i).all(|j| (self.mat[(i, j)] - self.mat[(j, i)].conj()).norm() <= tol))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let prod = &linalg::adjoint(self.mat.as_ref()) * &self.mat;
        let d = self.dim();
        (0..d).all(|i| {
            (0..d).all(|j| {
                let target = if i == j { ONE } else { ZERO };
                (prod[(i, j)] - target).norm() <= tol
            })
        })
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if self.dim() != psi.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: psi.dim(),
            });
        }
        let d = self.dim();
        let amps = (0..d)
            .map(|i| (0..d).map(|j| self.mat[(i, j)] * psi.amps[j]).sum())
            .collect();
        Ok(StateVector { amps })
    }

    /// `⟨ψ|A|ψ⟩ / ⟨ψ|ψ⟩`
    pub fn expectation(&self, psi: &StateVector) -> Result<C64> {
        let a_psi = self.apply(psi)?;
        Ok(psi.inner(&a_psi)? / psi.norm_sqr())
    }

    /// `Tr(A ρ)`
    pub fn expectation_rho(&self, rho: &DensityMatrix) -> Result<C64> {
        if self.dim() != rho.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: rho.dim(),
            });
        }
        let d = self.dim();
        let mut acc = ZERO;
        for i in 0..d {
            for j in 0..d {
                acc += self.mat[(i, j)] * rho.mat[(j, i)];
            }
        }
        Ok(acc)
    }
}

/// `a` with `⟨n−1|a|n⟩ = √n`.
pub fn annihilation(dim: usize) -> Result<ComplexOperator> {
    ComplexOperator::from_fn(dim, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

pub fn creation(dim: usize) -> Result<ComplexOperator> {
    Ok(annihilation(dim)?.adjoint())
}

pub fn number_operator(dim: usize) -> Result<ComplexOperator> {
    ComplexOperator::from_fn(dim, |i, j| if i == j { C64::new(i as f64, 0.0) } else { ZERO })
}

/// `Π = e^{iπ a†a}`, diagonal `(−1)^n`.
pub fn parity(dim: usize) -> Result<ComplexOperator> {
    ComplexOperator::from_fn(dim, |i, j| {
        if i == j {
            C64::new(Parity::of_level(i).sign(), 0.0)
        } else {
            ZERO
        }
    })
}

/// Largest `|α|²` a cutoff `dim` represents faithfully.
pub fn truncation_limit(dim: usize) -> f64 {
    dim as f64 / 4.0
}

fn check_amplitude(what: &'static str, dim: usize, alpha: C64) -> Result<()> {
    let value = alpha.norm_sqr();
    let limit = truncation_limit(dim);
    if value > limit {
        Err(Error::Truncation { what, value, limit })
    } else {
        Ok(())
    }
}

/// `D(α) = exp(α a† − α* a)` on the truncated space.
pub fn displacement(dim: usize, alpha: C64) -> Result<ComplexOperator> {
    check_dim(dim)?;
    check_amplitude("alpha", dim, alpha)?;
    let a = annihilation(dim)?;
    let gen = Mat::from_fn(dim, dim, |i, j| {
        alpha * a.mat[(j, i)].conj() - alpha.conj() * a.mat[(i, j)]
    });
    ComplexOperator::from_mat(linalg::expm(gen.as_ref()))
}

/// Rotation `e^{iθ a†a}`.
pub fn rotation(dim: usize, theta: f64) -> Result<ComplexOperator> {
    ComplexOperator::from_fn(dim, |i, j| {
        if i == j {
            C64::from_polar(1.0, theta * i as f64)
        } else {
            ZERO
        }
    })
}

/// Pure state in the truncated Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        check_dim(amps.len())?;
        Ok(Self { amps })
    }

    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        check_dim(dim)?;
        if n >= dim {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n as f64,
                reason: "Fock level beyond cutoff",
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[n] = ONE;
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::UndefinedState("zero or non-finite vector cannot be normalized"));
        }
        for z in &mut self.amps {
            *z /= n;
        }
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Rotate the largest-magnitude amplitude onto the positive real axis.
    pub fn fix_phase(&mut self) {
        let norm = self.norm();
        linalg::fix_phase(&mut self.amps);
        for z in &mut self.amps {
            *z *= norm;
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        let d = self.dim();
        let n = self.norm_sqr();
        DensityMatrix {
            mat: Mat::from_fn(d, d, |i, j| self.amps[i] * self.amps[j].conj() / n),
        }
    }

    pub fn mean_n(&self) -> f64 {
        let n: f64 = self.amps.iter().enumerate().map(|(k, z)| k as f64 * z.norm_sqr()).sum();
        n / self.norm_sqr()
    }

    pub fn mean_a(&self) -> C64 {
        let s: C64 = (1..self.dim())
            .map(|k| self.amps[k - 1].conj() * self.amps[k] * (k as f64).sqrt())
            .sum();
        s / self.norm_sqr()
    }

    pub fn mean_parity(&self) -> f64 {
        let s: f64 = self
            .amps
            .iter()
            .enumerate()
            .map(|(k, z)| Parity::of_level(k).sign() * z.norm_sqr())
            .sum();
        s / self.norm_sqr()
    }
}

/// Normalized coherent state `|α⟩` truncated to `dim` levels.
pub fn coherent_state(dim: usize, alpha: C64) -> Result<StateVector> {
    check_dim(dim)?;
    check_amplitude("alpha", dim, alpha)?;
    StateVector::new(coherent_amplitudes(dim, alpha))?.normalized()
}

fn coherent_amplitudes(dim: usize, alpha: C64) -> Vec<C64> {
    let mut amps = Vec::with_capacity(dim);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    amps.push(c);
    for n in 1..dim {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    amps
}

/// Normalized cat state `|α⟩ ± |−α⟩`.
pub fn cat_state(dim: usize, alpha: C64, parity: Parity) -> Result<StateVector> {
    check_dim(dim)?;
    if parity == Parity::Odd && alpha == ZERO {
        return Err(Error::UndefinedState("odd cat state with alpha = 0"));
    }
    check_amplitude("alpha", dim, alpha)?;
    // Components are c_n(1 ± (−1)^n), formed directly to avoid cancellation
    // at small |α|.
    let amps = coherent_amplitudes(dim, alpha)
        .into_iter()
        .enumerate()
        .map(|(n, c)| if Parity::of_level(n) == parity { c * 2.0 } else { ZERO })
        .collect();
    StateVector::new(amps)?.normalized()
}

/// `|⟨ψ|φ⟩|²` for normalized states.
pub fn fidelity(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    Ok(psi.inner(phi)?.norm_sqr() / (psi.norm_sqr() * phi.norm_sqr()))
}

/// Trace distance between two pure states, `√(1 − |⟨ψ|φ⟩|²)`, evaluated as
/// the norm of the component of `ψ` orthogonal to `φ` to keep precision
/// when the states nearly coincide.
pub fn pure_trace_distance(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    let np = psi.norm();
    let nf = phi.norm();
    let overlap = phi.inner(psi)? / (np * nf);
    let perp: f64 = psi
        .amps
        .iter()
        .zip(&phi.amps)
        .map(|(p, f)| (p / np - overlap * f / nf).norm_sqr())
        .sum();
    Ok(perp.sqrt().min(1.0))
}

/// Density matrix on the truncated Fock space.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    mat: Mat<C64>,
}

impl DensityMatrix {
    /// Wraps a square matrix; use [`DensityMatrix::validate`] to check the
    /// physical invariants.
    pub fn from_mat(mat: Mat<C64>) -> Result<Self> {
        Ok(Self {
            mat: ComplexOperator::from_mat(mat)?.into_mat(),
        })
    }

    pub fn pure(psi: &StateVector) -> Self {
        psi.to_density()
    }

    pub fn thermal(dim: usize, n_th: f64) -> Result<Self> {
        check_dim(dim)?;
        let r = n_th / (1.0 + n_th);
        let w: Vec<f64> = (0..dim).map(|k| r.powi(k as i32)).collect();
        let z: f64 = w.iter().sum();
        Ok(Self {
            mat: Mat::from_fn(dim, dim, |i, j| if i == j { C64::new(w[i] / z, 0.0) } else { ZERO }),
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> MatRef<'_, C64> {
        self.mat.as_ref()
    }

    pub fn into_mat(self) -> Mat<C64> {
        self.mat
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    /// Replace by the Hermitian part.
    pub fn hermitize(&mut self) {
        let d = self.dim();
        for j in 0..d {
            self.mat[(j, j)].im = 0.0;
            for i in 0..j {
                let v = (self.mat[(i, j)] + self.mat[(j, i)].conj()) * 0.5;
                self.mat[(i, j)] = v;
                self.mat[(j, i)] = v.conj();
            }
        }
    }

    pub fn normalize(&mut self) -> Result<()> {
        let tr = self.trace();
        if tr.norm() < 1e-300 || !tr.norm().is_finite() {
            return Err(Error::NonNormalizable { trace: tr.norm() });
        }
        let inv = tr.inv();
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                self.mat[(i, j)] *= inv;
            }
        }
        Ok(())
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut e = 0.0f64;
        for j in 0..d {
            for i in 0..=j {
                e = e.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        e
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::hermitian_eigenvalues(self.mat.as_ref())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Hermitian within 1e-10, unit trace within 1e-10, eigenvalues ≥ −1e-8.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::Linalg(format!(
                "density matrix not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = self.trace();
        if (tr - ONE).norm() > 1e-10 {
            return Err(Error::NonNormalizable { trace: tr.re });
        }
        let min = self.min_eigenvalue()?;
        if min < -1e-8 {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        Ok(())
    }

    /// Clip eigenvalues in `[−tol, 0)` to zero and renormalize; anything more
    /// negative is an error.
    pub fn repair_psd(&mut self, tol: f64) -> Result<()> {
        self.hermitize();
        self.normalize()?;
        let (vals, vecs) = linalg::hermitian_eigen(self.mat.as_ref())?;
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        if min < 0.0 {
            let d = self.dim();
            let clipped: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
            self.mat = Mat::from_fn(d, d, |i, j| {
                (0..d).map(|k| vecs[(i, k)] * vecs[(j, k)].conj() * clipped[k]).sum()
            });
            self.hermitize();
            self.normalize()?;
        }
        Ok(())
    }

    pub fn expect(&self, op: &ComplexOperator) -> Result<C64> {
        op.expectation_rho(self)
    }

    pub fn mean_n(&self) -> f64 {
        (0..self.dim()).map(|k| k as f64 * self.mat[(k, k)].re).sum::<f64>() / self.trace().re
    }

    pub fn mean_a(&self) -> C64 {
        (1..self.dim())
            .map(|k| self.mat[(k, k - 1)] * (k as f64).sqrt())
            .sum::<C64>()
            / self.trace().re
    }

    pub fn mean_parity(&self) -> f64 {
        (0..self.dim())
            .map(|k| Parity::of_level(k).sign() * self.mat[(k, k)].re)
            .sum::<f64>()
            / self.trace().re
    }

    /// `⟨ψ|ρ|ψ⟩` for normalized `ψ`.
    pub fn overlap(&self, psi: &StateVector) -> Result<f64> {
        if self.dim() != psi.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: psi.dim(),
            });
        }
        let d = self.dim();
        let a = psi.amplitudes();
        let mut acc = ZERO;
        for j in 0..d {
            for i in 0..d {
                acc += a[i].conj() * self.mat[(i, j)] * a[j];
            }
        }
        Ok(acc.re / psi.norm_sqr())
    }

    /// `U ρ U†`
    pub fn conjugate_by(&self, u: &ComplexOperator) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: u.dim(),
                right: self.dim(),
            });
        }
        let m = &(&u.mat * &self.mat) * linalg::adjoint(u.mat.as_ref());
        Ok(Self { mat: m })
    }
}

/// `½ Σ σ_k(ρ₁ − ρ₂)`; the difference is Hermitian so this is half the sum
/// of absolute eigenvalues.
pub fn trace_distance(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch {
            left: rho1.dim(),
            right: rho2.dim(),
        });
    }
    let diff = &rho1.mat - &rho2.mat;
    let ev = linalg::hermitian_eigenvalues(diff.as_ref())?;
    Ok(0.5 * ev.iter().map(|v| v.abs()).sum::<f64>())
}
