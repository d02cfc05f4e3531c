//! Spectral analysis of the no-click evolution.
//!
//! Pure case: eigenvalues `h_μ` of the non-Hermitian generator. The state
//! with the largest `Im h` is the stable fixed point of the normalized flow,
//! and the smallest imaginary gap to it is the relaxation rate.
//!
//! Mixed case: eigenvalues `λ_μ` of `L + N`. The eigenmatrix with the largest
//! real part, rescaled to unit trace, is the stable conditioned state.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{parity, pure_trace_distance, trace_distance, ComplexOperator, DensityMatrix, Parity, StateVector};
use crate::linalg::{self, eigen_system, ZERO};
use crate::model::Superoperator;
use crate::stats::linear_fit;

/// Eigenvector condition number beyond which the generator is treated as
/// defective.
pub const EXCEPTIONAL_CONDITION: f64 = 1e10;
/// Relative tolerance (spectral radius units) for eigenvalue degeneracy.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// `|⟨Π⟩|` above which an eigenvector is labelled with a parity.
pub const PARITY_LABEL_THRESHOLD: f64 = 0.99;
/// Minimum eigenvalue tolerated in a unit-trace mixed pseudo-state.
pub const PSD_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Default, Serialize)]
pub struct RateReport {
    pub gamma_rel: f64,
    /// Jump-rate asymmetry between the parity sectors (parity case only).
    pub gamma_asy: Option<f64>,
    /// Ensemble click rate, when supplied by the caller.
    pub gamma_jump: Option<f64>,
    /// Real energy of the pure pseudo-state.
    pub e_psi: Option<f64>,
    /// Relaxation gaps inside the even and odd sectors (parity case only).
    pub sector_gaps: Option<[f64; 2]>,
}

#[derive(Clone, Debug)]
pub struct PureSpectrum {
    /// Sorted by decreasing imaginary part.
    pub eigenvalues: Vec<C64>,
    /// Unit-norm right eigenvectors, largest component real-positive.
    pub right_vectors: Vec<StateVector>,
    /// Dual vectors `⟨ψ̃_μ|` with `⟨ψ̃_μ|ψ_ν⟩ = δ_μν`, stored as kets.
    pub left_vectors: Vec<StateVector>,
    pub parity_labels: Vec<Option<Parity>>,
    /// Index of the eigenvalue with maximal imaginary part.
    pub stable_index: usize,
    pub condition: f64,
}

impl PureSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn has_parity(&self) -> bool {
        self.parity_labels.iter().all(Option::is_some)
    }

    /// Index of the top eigenvalue within a parity sector.
    pub fn sector_top(&self, parity: Parity) -> Option<usize> {
        self.parity_labels.iter().position(|l| *l == Some(parity))
    }

    fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Full eigensystem of a non-Hermitian generator.
pub fn pure_spectrum(h_eff: &ComplexOperator) -> Result<PureSpectrum> {
    let d = h_eff.dim();
    let es = eigen_system(h_eff.mat())?;
    if !(es.condition <= EXCEPTIONAL_CONDITION) {
        return Err(Error::ExceptionalPoint {
            condition: es.condition,
        });
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| {
        es.values[y]
            .im
            .total_cmp(&es.values[x].im)
            .then(es.values[y].re.total_cmp(&es.values[x].re))
    });
    let pi = parity(d)?;
    let commutes = h_eff.commutator(&pi)?.norm_max() <= 1e-12 * (1.0 + h_eff.norm_max());
    let mut eigenvalues = Vec::with_capacity(d);
    let mut right_vectors = Vec::with_capacity(d);
    let mut left_vectors = Vec::with_capacity(d);
    let mut parity_labels = Vec::with_capacity(d);
    for &k in &order {
        eigenvalues.push(es.values[k]);
        let v = StateVector::new((0..d).map(|i| es.right[(i, k)]).collect())?;
        let label = if commutes {
            let p = v.mean_parity();
            if p.abs() > PARITY_LABEL_THRESHOLD {
                Some(if p > 0.0 { Parity::Even } else { Parity::Odd })
            } else {
                None
            }
        } else {
            None
        };
        parity_labels.push(label);
        right_vectors.push(v);
        left_vectors.push(StateVector::new((0..d).map(|i| es.left[(k, i)].conj()).collect())?);
    }
    Ok(PureSpectrum {
        eigenvalues,
        right_vectors,
        left_vectors,
        parity_labels,
        stable_index: 0,
        condition: es.condition,
    })
}

fn degeneracy_scale(radius: f64) -> f64 {
    DEGENERACY_TOL * radius.max(1.0)
}

/// Normalized eigenvector of the top eigenvalue and its relaxation rate.
pub fn stable_pseudo_state(spec: &PureSpectrum) -> Result<(StateVector, RateReport)> {
    let top = spec.stable_index;
    let h = spec.eigenvalues[top];
    let tol = degeneracy_scale(spec.spectral_radius());
    let degenerate: Vec<usize> = (0..spec.dim())
        .filter(|&m| m != top && (spec.eigenvalues[m].im - h.im).abs() <= tol)
        .collect();
    if !degenerate.is_empty() {
        let mut indices = vec![top];
        indices.extend(degenerate);
        return Err(Error::DegenerateTop { eigenvalue: h, indices });
    }
    let gamma_rel = (0..spec.dim())
        .filter(|&m| m != top)
        .map(|m| h.im - spec.eigenvalues[m].im)
        .fold(f64::INFINITY, f64::min);
    let psi = spec.right_vectors[top].clone();
    Ok((
        psi,
        RateReport {
            gamma_rel,
            e_psi: Some(h.re),
            ..Default::default()
        },
    ))
}

/// Rates of the resonant parametric case, where the spectrum splits into
/// even and odd sectors. `Γ_asy = Im(h⁺_top − h⁻_top)`, and `Γ_rel` is the
/// smaller of the two intra-sector gaps.
pub fn parity_rates(spec: &PureSpectrum, gamma_jump: f64) -> Result<RateReport> {
    if !spec.has_parity() {
        return Err(Error::MissingParity);
    }
    let gap = |p: Parity| -> Result<(C64, f64)> {
        let idx: Vec<usize> = (0..spec.dim()).filter(|&m| spec.parity_labels[m] == Some(p)).collect();
        if idx.len() < 2 {
            return Err(Error::MissingParity);
        }
        let top = spec.eigenvalues[idx[0]];
        Ok((top, top.im - spec.eigenvalues[idx[1]].im))
    };
    let (even_top, even_gap) = gap(Parity::Even)?;
    let (odd_top, odd_gap) = gap(Parity::Odd)?;
    let top = if even_top.im >= odd_top.im { even_top } else { odd_top };
    Ok(RateReport {
        gamma_rel: even_gap.min(odd_gap),
        gamma_asy: Some(even_top.im - odd_top.im),
        gamma_jump: Some(gamma_jump),
        e_psi: Some(top.re),
        sector_gaps: Some([even_gap, odd_gap]),
    })
}

/// Relation of an eigenmatrix to its adjoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "partner")]
pub enum MatrixClass {
    /// `ρ_μ† ∝ ρ_μ`.
    Hermitian,
    /// `ρ_μ† ∝ ρ_ν` with `λ_ν = λ_μ*`.
    Paired(usize),
    /// Neither; only happens inside degenerate subspaces.
    Unclassified,
}

#[derive(Clone, Debug)]
pub struct MixedSpectrum {
    pub dim: usize,
    /// Sorted by decreasing real part.
    pub eigenvalues: Vec<C64>,
    /// Column `μ` is `vec(ρ_μ)`, unit Frobenius norm.
    pub right: Mat<C64>,
    /// Row `μ` is `vec(λ̌_μ)†`, so `Tr(λ̌_ν† ρ_μ) = (left · right)_νμ`.
    pub left: Mat<C64>,
    pub biorthonormal: bool,
    pub condition: f64,
    pub classes: Vec<MatrixClass>,
}

impl MixedSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn right_matrix(&self, mu: usize) -> Mat<C64> {
        let d = self.dim;
        Mat::from_fn(d, d, |i, j| self.right[(j * d + i, mu)])
    }

    /// The dual matrix `λ̌_μ`.
    pub fn left_matrix(&self, mu: usize) -> Mat<C64> {
        let d = self.dim;
        Mat::from_fn(d, d, |i, j| self.left[(mu, j * d + i)].conj())
    }

    /// Largest deviation of `Tr(λ̌_ν† ρ_μ)` from `δ_νμ`.
    pub fn biorthonormality_error(&self) -> f64 {
        let prod = &self.left * &self.right;
        let n = self.len();
        let mut e = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let t = if i == j { 1.0 } else { 0.0 };
                e = e.max((prod[(i, j)] - C64::new(t, 0.0)).norm());
            }
        }
        e
    }
}

/// Full biorthonormal eigensystem of `L + N`.
pub fn mixed_spectrum(l: &Superoperator, n: &Superoperator) -> Result<MixedSpectrum> {
    let total = l.add(n)?;
    let d = total.dim();
    let es = eigen_system(total.mat())?;
    if !(es.condition <= EXCEPTIONAL_CONDITION) {
        return Err(Error::ExceptionalPoint {
            condition: es.condition,
        });
    }
    let m = d * d;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| {
        es.values[y]
            .re
            .total_cmp(&es.values[x].re)
            .then(es.values[y].im.total_cmp(&es.values[x].im))
    });
    let eigenvalues: Vec<C64> = order.iter().map(|&k| es.values[k]).collect();
    let right = Mat::from_fn(m, m, |i, j| es.right[(i, order[j])]);
    let left = Mat::from_fn(m, m, |i, j| es.left[(order[i], j)]);
    let mut spec = MixedSpectrum {
        dim: d,
        eigenvalues,
        right,
        left,
        biorthonormal: false,
        condition: es.condition,
        classes: Vec::new(),
    };
    spec.biorthonormal = spec.biorthonormality_error() < 1e-8;
    spec.classes = classify(&spec);
    Ok(spec)
}

/// Overlap `|⟨vec(A†), vec(B)⟩|` of unit-norm eigenmatrices.
fn adjoint_overlap(spec: &MixedSpectrum, a: usize, b: usize) -> f64 {
    let d = spec.dim;
    let mut acc = ZERO;
    for j in 0..d {
        for i in 0..d {
            // (ρ_a†)_ij = conj(ρ_a)_ji
            let adj = spec.right[(i * d + j, a)].conj();
            acc += adj.conj() * spec.right[(j * d + i, b)];
        }
    }
    acc.norm()
}

fn classify(spec: &MixedSpectrum) -> Vec<MatrixClass> {
    let n = spec.len();
    let radius = spec.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-7 * radius.max(1.0);
    (0..n)
        .map(|mu| {
            if adjoint_overlap(spec, mu, mu) > 1.0 - 1e-6 {
                return MatrixClass::Hermitian;
            }
            let target = spec.eigenvalues[mu].conj();
            (0..n)
                .filter(|&nu| nu != mu && (spec.eigenvalues[nu] - target).norm() <= tol)
                .find(|&nu| adjoint_overlap(spec, mu, nu) > 1.0 - 1e-6)
                .map_or(MatrixClass::Unclassified, MatrixClass::Paired)
        })
        .collect()
}

/// Unit-trace, positive eigenmatrix of the largest-real-part eigenvalue.
pub fn mixed_pseudo_state(spec: &MixedSpectrum) -> Result<(DensityMatrix, RateReport)> {
    let top = 0;
    let lam = spec.eigenvalues[top];
    let radius = spec.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = degeneracy_scale(radius);
    let degenerate: Vec<usize> = (1..spec.len())
        .filter(|&m| (spec.eigenvalues[m].re - lam.re).abs() <= tol)
        .collect();
    if !degenerate.is_empty() {
        let mut indices = vec![top];
        indices.extend(degenerate);
        return Err(Error::DegenerateTop {
            eigenvalue: lam,
            indices,
        });
    }
    let m = spec.right_matrix(top);
    let d = spec.dim;
    let tr: C64 = (0..d).map(|i| m[(i, i)]).sum();
    // Eigenmatrices have unit Frobenius norm, so this is a relative test.
    if tr.norm() < 1e-8 {
        return Err(Error::NonNormalizable { trace: tr.norm() });
    }
    let mut rho = DensityMatrix::from_mat(linalg::scaled(m.as_ref(), tr.inv()))?;
    rho.repair_psd(PSD_TOL)?;
    let gamma_rel = (1..spec.len())
        .map(|k| lam.re - spec.eigenvalues[k].re)
        .fold(f64::INFINITY, f64::min);
    Ok((
        rho,
        RateReport {
            gamma_rel,
            ..Default::default()
        },
    ))
}

/// Outcome of integrating the normalized no-click flow from a perturbed
/// state.
#[derive(Clone, Debug, Serialize)]
pub struct FlowReport {
    /// Fitted exponential decay rate of the distance to the reference
    /// (negative when the flow departs).
    pub rate: f64,
    pub r_squared: f64,
    pub initial_distance: f64,
    pub final_distance: f64,
    pub converging: bool,
}

fn fit_distances(times: &[f64], dist: &[f64]) -> Result<FlowReport> {
    // Skip the first quarter so faster modes have died out, and stop at the
    // round-off floor.
    let skip = times.len() / 4;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (t, dv) in times.iter().zip(dist).skip(skip) {
        if *dv > 1e-11 {
            x.push(*t);
            y.push(dv.ln());
        }
    }
    let fit = linear_fit(&x, &y).ok_or(Error::InsufficientDecay)?;
    let (d0, d1) = (dist[0], *dist.last().unwrap_or(&dist[0]));
    Ok(FlowReport {
        rate: -fit.slope,
        r_squared: fit.r_squared,
        initial_distance: d0,
        final_distance: d1,
        converging: d1 < d0,
    })
}

/// Orthogonal perturbation `ψ + ε P⊥φ`, renormalized.
pub fn perturb_pure(psi: &StateVector, direction: &StateVector, eps: f64) -> Result<StateVector> {
    let psi = psi.clone().normalized()?;
    let overlap = psi.inner(direction)?;
    let perp: Vec<C64> = direction
        .amplitudes()
        .iter()
        .zip(psi.amplitudes())
        .map(|(f, p)| f - overlap * p)
        .collect();
    let perp = StateVector::new(perp)?.normalized()?;
    let amps = psi
        .amplitudes()
        .iter()
        .zip(perp.amplitudes())
        .map(|(p, f)| p + f * eps)
        .collect();
    StateVector::new(amps)?.normalized()
}

/// Integrate `ψ̇ = −iH_eff ψ` (exactly, through the propagator) and
/// renormalize, which is the norm-preserving nonlinear no-click flow; fit
/// the decay of the trace distance to `reference`.
pub fn pure_flow_check(
    h_eff: &ComplexOperator,
    reference: &StateVector,
    initial: &StateVector,
    t_max: f64,
    samples: usize,
) -> Result<FlowReport> {
    let dt = t_max / samples as f64;
    let gen = linalg::scaled(h_eff.mat(), C64::new(0.0, -dt));
    let u = ComplexOperator::from_mat(linalg::expm(gen.as_ref()))?;
    let mut psi = initial.clone().normalized()?;
    let mut times = vec![0.0];
    let mut dist = vec![pure_trace_distance(&psi, reference)?];
    for k in 1..=samples {
        psi = u.apply(&psi)?.normalized()?;
        times.push(k as f64 * dt);
        dist.push(pure_trace_distance(&psi, reference)?);
    }
    fit_distances(&times, &dist)
}

/// Mixed analogue: `ρ̇ = (L+N)ρ` followed by trace normalization.
pub fn mixed_flow_check(
    l: &Superoperator,
    n: &Superoperator,
    reference: &DensityMatrix,
    initial: &DensityMatrix,
    t_max: f64,
    samples: usize,
) -> Result<FlowReport> {
    let total = l.add(n)?;
    let d = total.dim();
    let dt = t_max / samples as f64;
    let prop = linalg::expm(linalg::scaled(total.mat(), C64::new(dt, 0.0)).as_ref());
    let mut v = linalg::vectorize(initial.mat());
    let mut times = vec![0.0];
    let mut dist = vec![trace_distance(initial, reference)?];
    for k in 1..=samples {
        let next = &prop * Mat::from_fn(d * d, 1, |i, _| v[i]);
        v = (0..d * d).map(|i| next[(i, 0)]).collect();
        let mut rho = DensityMatrix::from_mat(linalg::unvectorize(&v, d))?;
        rho.normalize()?;
        v = linalg::vectorize(rho.mat());
        times.push(k as f64 * dt);
        dist.push(trace_distance(&rho, reference)?);
    }
    fit_distances(&times, &dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{annihilation, fidelity};
    use crate::model::{
        build_conditioned_generators, build_hamiltonian, effective_nonhermitian, jump_weight_operator, SystemParams,
    };
    use crate::steady::steady_state_unchecked;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn bistable(d: usize) -> SystemParams {
        SystemParams::semiclassical(1.5, 2.2, 1.5).with_fock_dim(d)
    }

    #[test]
    fn diagonal_spectra() {
        let p = SystemParams::new(0.6, 0.0, ZERO, ZERO).with_fock_dim(6);
        let s = pure_spectrum(&effective_nonhermitian(&p).unwrap()).unwrap();
        for (k, h) in s.eigenvalues.iter().enumerate() {
            let n = k as f64;
            assert!((h - c(-0.6 * n, -n / 2.0)).norm() < 1e-12);
            assert!(fidelity(&s.right_vectors[k], &StateVector::fock(6, k).unwrap()).unwrap() > 1.0 - 1e-12);
        }
        let p = SystemParams::new(0.6, 1.1, ZERO, ZERO).with_fock_dim(6);
        let s = pure_spectrum(&effective_nonhermitian(&p).unwrap()).unwrap();
        for (k, h) in s.eigenvalues.iter().enumerate() {
            let n = k as f64;
            assert!((h - c(-0.6 * n + 1.1 * n * (n - 1.0), -n / 2.0)).norm() < 1e-12);
        }
        let (psi, r) = stable_pseudo_state(&s).unwrap();
        assert!(fidelity(&psi, &StateVector::fock(6, 0).unwrap()).unwrap() > 1.0 - 1e-12);
        assert!((r.gamma_rel - 0.5).abs() < 1e-12);
    }

    #[test]
    fn residuals_and_completeness() {
        let p = bistable(20);
        let h = effective_nonhermitian(&p).unwrap();
        let s = pure_spectrum(&h).unwrap();
        let scale = h.norm_max();
        let mut completeness = Mat::<C64>::zeros(20, 20);
        for k in 0..20 {
            let v = &s.right_vectors[k];
            let hv = h.apply(v).unwrap();
            let res: f64 = hv
                .amplitudes()
                .iter()
                .zip(v.amplitudes())
                .map(|(a, b)| (a - s.eigenvalues[k] * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-8 * scale);
            let l = &s.left_vectors[k];
            for i in 0..20 {
                for j in 0..20 {
                    completeness[(i, j)] += v.amplitudes()[i] * l.amplitudes()[j].conj();
                }
            }
        }
        let id = Mat::<C64>::identity(20, 20);
        assert!(linalg::norm_max((&completeness - &id).as_ref()) < 1e-6);
    }

    #[test]
    fn imaginary_parts_are_jump_weights() {
        let p = bistable(20);
        let s = pure_spectrum(&effective_nonhermitian(&p).unwrap()).unwrap();
        let m = jump_weight_operator(&p).unwrap();
        for k in 0..20 {
            let mk = m.expectation(&s.right_vectors[k]).unwrap().re;
            assert!((s.eigenvalues[k].im + mk).abs() < 1e-8);
            assert!(s.eigenvalues[k].im <= 1e-12);
        }
        // Γ_rel equals the difference of ⟨M⟩ between the first two states
        let (_, r) = stable_pseudo_state(&s).unwrap();
        let m0 = m.expectation(&s.right_vectors[0]).unwrap().re;
        let m1 = m.expectation(&s.right_vectors[1]).unwrap().re;
        assert!((r.gamma_rel - (m1 - m0)).abs() < 1e-8);
    }

    #[test]
    fn pseudo_state_energy_is_real() {
        let p = bistable(25);
        let s = pure_spectrum(&effective_nonhermitian(&p).unwrap()).unwrap();
        let (psi, r) = stable_pseudo_state(&s).unwrap();
        let e = build_hamiltonian(&p).unwrap().expectation(&psi).unwrap();
        assert!(e.im.abs() < 1e-8);
        assert!((e.re - r.e_psi.unwrap()).abs() < 1e-8);
    }

    #[test]
    fn no_click_flow_reaches_pseudo_state() {
        let p = bistable(25);
        let h = effective_nonhermitian(&p).unwrap();
        let s = pure_spectrum(&h).unwrap();
        let (psi, r) = stable_pseudo_state(&s).unwrap();
        let start = StateVector::new(
            (0..25)
                .map(|k| c((k as f64 * 1.3).sin(), (k as f64 * 0.7).cos()) / (1.0 + k as f64))
                .collect(),
        )
        .unwrap();
        let t = 60.0 / r.gamma_rel;
        let u = ComplexOperator::from_mat(linalg::expm(linalg::scaled(h.mat(), c(0.0, -t)).as_ref())).unwrap();
        let end = u.apply(&start).unwrap().normalized().unwrap();
        assert!((end.mean_n() - psi.mean_n()).abs() < 1e-6);
    }

    #[test]
    fn flow_rates_match_gaps() {
        let p = bistable(25);
        let h = effective_nonhermitian(&p).unwrap();
        let s = pure_spectrum(&h).unwrap();
        let (psi, r) = stable_pseudo_state(&s).unwrap();
        let dir = StateVector::new((0..25).map(|k| c(1.0 / (1.0 + k as f64), 0.3)).collect()).unwrap();
        let start = perturb_pure(&psi, &dir, 1e-3).unwrap();
        let f = pure_flow_check(&h, &psi, &start, 20.0 / r.gamma_rel, 400).unwrap();
        assert!(f.converging);
        assert!(
            (f.rate / r.gamma_rel - 1.0).abs() < 0.1,
            "{} vs {}",
            f.rate,
            r.gamma_rel
        );

        // mode-wise: push along ψ_2 only
        let start = perturb_pure(&psi, &s.right_vectors[2], 1e-3).unwrap();
        let gap = s.eigenvalues[0].im - s.eigenvalues[2].im;
        let f = pure_flow_check(&h, &psi, &start, 10.0 / gap, 400).unwrap();
        assert!((f.rate / gap - 1.0).abs() < 0.1, "{} vs {gap}", f.rate);

        // an unstable eigenstate is left behind
        let unstable = &s.right_vectors[1];
        let start = perturb_pure(unstable, &psi, 1e-3).unwrap();
        let f = pure_flow_check(&h, unstable, &start, 5.0, 100).unwrap();
        assert!(!f.converging);
        assert!(f.rate < 0.0);
    }

    #[test]
    fn parity_case() {
        let p = SystemParams::parametric(0.0, 10.0, 5.3).with_fock_dim(25);
        let s = pure_spectrum(&effective_nonhermitian(&p).unwrap()).unwrap();
        assert!(s.has_parity());
        for v in &s.right_vectors {
            assert!(v.mean_parity().abs() > 1.0 - 1e-6);
        }
        let r = parity_rates(&s, 0.4).unwrap();
        assert!(r.gamma_rel > r.gamma_asy.unwrap());
        let plus = &s.right_vectors[s.sector_top(Parity::Even).unwrap()];
        let minus = &s.right_vectors[s.sector_top(Parity::Odd).unwrap()];
        let a = annihilation(25).unwrap();
        assert!(fidelity(&a.apply(minus).unwrap(), plus).unwrap() > 0.99);

        let semi = pure_spectrum(&effective_nonhermitian(&bistable(15)).unwrap()).unwrap();
        assert!(matches!(parity_rates(&semi, 0.1), Err(Error::MissingParity)));
    }

    #[test]
    fn parity_small_drive_limit() {
        let p = SystemParams::parametric(0.0, 2.0, 0.0).with_fock_dim(10);
        let s = pure_spectrum(&effective_nonhermitian(&p).unwrap()).unwrap();
        let r = parity_rates(&s, 0.0).unwrap();
        let m = jump_weight_operator(&p).unwrap();
        let plus = &s.right_vectors[s.sector_top(Parity::Even).unwrap()];
        let minus = &s.right_vectors[s.sector_top(Parity::Odd).unwrap()];
        let asy = m.expectation(minus).unwrap().re - m.expectation(plus).unwrap().re;
        assert!((r.gamma_asy.unwrap() - asy).abs() < 1e-12);
        assert!((asy - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exceptional_point_detected() {
        // Jordan block
        let h = ComplexOperator::from_fn(3, |i, j| if j == i + 1 { C64::new(1.0, 0.0) } else { ZERO }).unwrap();
        assert!(matches!(pure_spectrum(&h), Err(Error::ExceptionalPoint { .. })));
    }

    #[test]
    fn degenerate_top_reported() {
        let h = ComplexOperator::diagonal(&[c(0.0, 0.0), c(1.0, 0.0), c(2.0, -1.0)]).unwrap();
        let s = pure_spectrum(&h).unwrap();
        match stable_pseudo_state(&s) {
            Err(Error::DegenerateTop { indices, .. }) => assert_eq!(indices.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mixed_maps_to_pure() {
        let p = bistable(8);
        let (l, n) = build_conditioned_generators(&p).unwrap();
        let ms = mixed_spectrum(&l, &n).unwrap();
        assert!(ms.biorthonormal);
        let ps = pure_spectrum(&effective_nonhermitian(&p).unwrap()).unwrap();
        for lam in &ms.eigenvalues {
            let best = ps
                .eigenvalues
                .iter()
                .flat_map(|hi| {
                    ps.eigenvalues
                        .iter()
                        .map(move |hj| (C64::new(0.0, -1.0) * (hi - hj.conj()) - lam).norm())
                })
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8);
        }
        let (rho, r) = mixed_pseudo_state(&ms).unwrap();
        let (psi, rp) = stable_pseudo_state(&ps).unwrap();
        assert!(trace_distance(&rho, &psi.to_density()).unwrap() < 1e-6);
        assert!((r.gamma_rel - rp.gamma_rel).abs() < 1e-8);
    }

    #[test]
    fn unmonitored_pseudo_state_is_steady_state() {
        let p = bistable(8).with_efficiency(0.0);
        let (l, n) = build_conditioned_generators(&p).unwrap();
        let ms = mixed_spectrum(&l, &n).unwrap();
        assert!(ms.eigenvalues[0].norm() < 1e-10);
        let (rho, _) = mixed_pseudo_state(&ms).unwrap();
        let ss = steady_state_unchecked(&p).unwrap();
        assert!(trace_distance(&rho, &ss.rho_ss).unwrap() < 1e-8);
    }

    #[test]
    fn sector_separation() {
        let p = bistable(7).with_efficiency(0.25).with_xi(C64::from_polar(0.9, 1.8));
        let (l, n) = build_conditioned_generators(&p).unwrap();
        let ms = mixed_spectrum(&l, &n).unwrap();
        let mut herm = 0;
        for (mu, class) in ms.classes.iter().enumerate() {
            match class {
                MatrixClass::Hermitian => {
                    herm += 1;
                    assert!(ms.eigenvalues[mu].im.abs() < 1e-8);
                }
                MatrixClass::Paired(nu) => {
                    assert_eq!(ms.classes[*nu], MatrixClass::Paired(mu));
                }
                MatrixClass::Unclassified => panic!("unclassified eigenmatrix {mu}"),
            }
        }
        assert!(herm >= 1);
        // left/right completeness
        let prod = &ms.right * &ms.left;
        let id = Mat::<C64>::identity(49, 49);
        assert!(linalg::norm_max((&prod - &id).as_ref()) < 1e-6);
        assert!(ms.biorthonormality_error() < 1e-8);
    }

    #[test]
    fn mixed_flow_converges() {
        let p = SystemParams::parametric(0.0, 2.0, 1.0)
            .with_fock_dim(8)
            .with_thermal(0.1);
        let (l, n) = build_conditioned_generators(&p).unwrap();
        let ms = mixed_spectrum(&l, &n).unwrap();
        let (rho, r) = mixed_pseudo_state(&ms).unwrap();
        let mut start = rho.clone().into_mat();
        start[(0, 0)] += c(1e-3, 0.0);
        start[(1, 1)] += c(1e-3, 0.0);
        let mut start = DensityMatrix::from_mat(start).unwrap();
        start.normalize().unwrap();
        let f = mixed_flow_check(&l, &n, &rho, &start, 15.0 / r.gamma_rel, 300).unwrap();
        assert!(f.converging);
        assert!(f.final_distance < 1e-6);
    }
}
