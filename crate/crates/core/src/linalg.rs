//! Dense linear-algebra helpers on top of `faer`: matrix exponential,
//! biorthonormal eigensystems, Hermitian spectra and a compressed-row
//! operator used in the trajectory hot loops.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Maximum-column-sum norm.
pub fn norm_one(a: MatRef<'_, C64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_max(a: MatRef<'_, C64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn scaled(a: MatRef<'_, C64>, s: C64) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn adjoint(a: MatRef<'_, C64>) -> Mat<C64> {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

const PADE13: [f64; 14] = [
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
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn expm(a: MatRef<'_, C64>) -> Mat<C64> {
    let n = a.nrows();
    let norm = norm_one(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = scaled(a, C64::new(0.5f64.powi(s), 0.0));
    let ident = Mat::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| C64::new(PADE13[k], 0.0);
    let lin = |c6: C64, c4: C64, c2: C64, c0: C64| -> Mat<C64> {
        Mat::from_fn(n, n, |i, j| {
            c6 * a6[(i, j)] + c4 * a4[(i, j)] + c2 * a2[(i, j)] + c0 * ident[(i, j)]
        })
    };
    let u_inner = &a6 * lin(b(13), b(11), b(9), ZERO);
    let u_inner = &u_inner + lin(b(7), b(5), b(3), b(1));
    let u = &a * &u_inner;
    let v_inner = &a6 * lin(b(12), b(10), b(8), ZERO);
    let v = &v_inner + lin(b(6), b(4), b(2), b(0));
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Right eigenvectors (unit-norm columns, largest component real-positive)
/// together with the dual basis `left = right⁻¹`, so that row `μ` of `left`
/// contracted with column `ν` of `right` gives `δ_{μν}`.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub values: Vec<C64>,
    pub right: Mat<C64>,
    pub left: Mat<C64>,
    /// 2-norm condition number of the normalized eigenvector matrix.
    pub condition: f64,
}

pub fn eigen_system(a: MatRef<'_, C64>) -> Result<EigenSystem> {
    let n = a.nrows();
    let evd = a.eigen().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let s = evd.S();
    let values: Vec<C64> = (0..n).map(|i| s[i]).collect();
    let u = evd.U();
    let mut right = Mat::<C64>::zeros(n, n);
    for j in 0..n {
        let mut col: Vec<C64> = (0..n).map(|i| u[(i, j)]).collect();
        fix_phase(&mut col);
        for (i, v) in col.into_iter().enumerate() {
            right[(i, j)] = v;
        }
    }
    let sv = right.singular_values().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let left = right.partial_piv_lu().inverse();
    Ok(EigenSystem {
        values,
        right,
        left,
        condition,
    })
}

/// Normalize to unit 2-norm and rotate the largest-magnitude component onto
/// the positive real axis.
pub fn fix_phase(v: &mut [C64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let mut best = 0;
    for (k, z) in v.iter().enumerate() {
        if z.norm() > v[best].norm() * (1.0 + 1e-12) {
            best = k;
        }
    }
    let phase = v[best].conj() / v[best].norm();
    for z in v.iter_mut() {
        *z = *z * phase / norm;
    }
}

fn hermitian_part(a: MatRef<'_, C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Eigenvalues (ascending) of the Hermitian part of `a`.
pub fn hermitian_eigenvalues(a: MatRef<'_, C64>) -> Result<Vec<f64>> {
    hermitian_part(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))
}

/// Eigen-decomposition (ascending) of the Hermitian part of `a`.
pub fn hermitian_eigen(a: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let h = hermitian_part(a);
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let n = h.nrows();
    let s = evd.S();
    let values = (0..n).map(|i| s[i].re).collect();
    Ok((values, evd.U().to_owned()))
}

pub fn singular_values(a: MatRef<'_, C64>) -> Result<Vec<f64>> {
    a.singular_values().map_err(|e| Error::Linalg(format!("{e:?}")))
}

/// Column-stacking of a square matrix: `vec(ρ)[j·D + i] = ρ[i, j]`.
pub fn vectorize(a: MatRef<'_, C64>) -> Vec<C64> {
    let d = a.nrows();
    let mut out = Vec::with_capacity(d * d);
    for j in 0..d {
        for i in 0..d {
            out.push(a[(i, j)]);
        }
    }
    out
}

pub fn unvectorize(v: &[C64], dim: usize) -> Mat<C64> {
    Mat::from_fn(dim, dim, |i, j| v[j * dim + i])
}

/// Compressed sparse rows; generators here are banded, so this keeps the
/// stiff trajectory integrations at O(nnz) per right-hand-side call.
#[derive(Clone, Debug)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    pub fn from_dense(a: MatRef<'_, C64>) -> Self {
        let n = a.nrows();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != ZERO {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Csr { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `y = A x`
    #[inline]
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        for i in 0..self.n {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    /// `Y = A X` for column-major square `X`.
    pub fn mul_dense(&self, x: &[C64], y: &mut [C64]) {
        let n = self.n;
        for j in 0..n {
            self.matvec(&x[j * n..(j + 1) * n], &mut y[j * n..(j + 1) * n]);
        }
    }

    /// `Y = A X A†` for column-major Hermitian `X`, using `scratch` of the
    /// same size.
    pub fn sandwich_hermitian(&self, x: &[C64], scratch: &mut [C64], y: &mut [C64]) {
        let n = self.n;
        self.mul_dense(x, scratch);
        // (A X)† = X A† for Hermitian X
        adjoint_in_place(scratch, n);
        self.mul_dense(scratch, y);
    }
}

pub(crate) fn adjoint_in_place(x: &mut [C64], n: usize) {
    for j in 0..n {
        x[j * n + j] = x[j * n + j].conj();
        for i in 0..j {
            let a = x[j * n + i];
            let b = x[i * n + j];
            x[j * n + i] = b.conj();
            x[i * n + j] = a.conj();
        }
    }
}
