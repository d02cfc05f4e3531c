//! The driven Kerr oscillator: Hamiltonian, no-click generators and the
//! Liouvillian superoperators.
//!
//! Rates are in units of the decay rate κ. Superoperators act on
//! column-stacked density matrices, `vec(ρ)[j·D + i] = ρ[i, j]`, so that
//! `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{annihilation, displacement, ComplexOperator, DensityMatrix};
use crate::linalg::{self, ZERO};

fn zero_c() -> C64 {
    ZERO
}
fn one() -> f64 {
    1.0
}

/// Physical parameters of the monitored oscillator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemParams {
    /// Detuning Δ = ω_drive − ω₀.
    #[serde(default)]
    pub delta: f64,
    /// Kerr nonlinearity K ≥ 0.
    #[serde(default)]
    pub kerr: f64,
    /// Coherent (semiclassical) drive amplitude.
    #[serde(default = "zero_c")]
    pub alpha1: C64,
    /// Parametric (two-photon) drive amplitude.
    #[serde(default = "zero_c")]
    pub alpha2: C64,
    /// Decay rate; everything is measured in units of it, so it must be 1.
    #[serde(default = "one")]
    pub kappa: f64,
    /// Thermal occupation of the bath.
    #[serde(default)]
    pub n_th: f64,
    /// Detection efficiency.
    #[serde(default = "one")]
    pub eta: f64,
    /// Local-oscillator amplitude added to the output field before detection.
    #[serde(default = "zero_c")]
    pub xi: C64,
    pub fock_dim: usize,
    /// Additional unmonitored Lindblad channels appended to the closed
    /// dynamics. Not part of the serialized schema.
    #[serde(skip)]
    pub extra_channels: Vec<Channel>,
}

/// A dissipator `rate · D[op]`.
#[derive(Clone, Debug)]
pub struct Channel {
    pub rate: f64,
    pub op: ComplexOperator,
}

impl SystemParams {
    /// Perfectly monitored, zero-temperature oscillator with the cutoff
    /// chosen by [`SystemParams::auto_cutoff`].
    pub fn new(delta: f64, kerr: f64, alpha1: C64, alpha2: C64) -> Self {
        let mut p = SystemParams {
            delta,
            kerr,
            alpha1,
            alpha2,
            kappa: 1.0,
            n_th: 0.0,
            eta: 1.0,
            xi: ZERO,
            fock_dim: 2,
            extra_channels: Vec::new(),
        };
        p.fock_dim = p.auto_cutoff();
        p
    }

    /// Coherent drive at fixed rescaled power `P = |α₁|²K`; α₁ is taken real.
    pub fn semiclassical(delta: f64, kerr: f64, drive_power: f64) -> Self {
        let alpha1 = if kerr > 0.0 { (drive_power / kerr).sqrt() } else { 0.0 };
        Self::new(delta, kerr, C64::new(alpha1, 0.0), ZERO)
    }

    pub fn parametric(delta: f64, kerr: f64, alpha2: f64) -> Self {
        Self::new(delta, kerr, ZERO, C64::new(alpha2, 0.0))
    }

    pub fn with_fock_dim(mut self, dim: usize) -> Self {
        self.fock_dim = dim;
        self
    }

    pub fn with_thermal(mut self, n_th: f64) -> Self {
        self.n_th = n_th;
        self
    }

    pub fn with_efficiency(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_xi(mut self, xi: C64) -> Self {
        self.xi = xi;
        self
    }

    pub fn with_channel(mut self, rate: f64, op: ComplexOperator) -> Self {
        self.extra_channels.push(Channel { rate, op });
        self
    }

    /// Whether the pure-state (stochastic Schrödinger) unraveling applies.
    pub fn is_pure_unraveling(&self) -> bool {
        self.eta == 1.0 && self.n_th == 0.0 && self.extra_channels.is_empty()
    }

    /// Effective decay rate into the detected output, κ(n_th + 1).
    pub fn kappa_out(&self) -> f64 {
        self.kappa * (self.n_th + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("delta", self.delta),
            ("kerr", self.kerr),
            ("alpha1", self.alpha1.re + self.alpha1.im),
            ("alpha2", self.alpha2.re + self.alpha2.im),
            ("kappa", self.kappa),
            ("n_th", self.n_th),
            ("eta", self.eta),
            ("xi", self.xi.re + self.xi.im),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
        }
        if self.kappa != 1.0 {
            return Err(Error::InvalidParameter {
                name: "kappa",
                value: self.kappa,
                reason: "rates are in units of kappa, so kappa must be 1",
            });
        }
        if self.kerr < 0.0 {
            return Err(Error::InvalidParameter {
                name: "kerr",
                value: self.kerr,
                reason: "must be non-negative",
            });
        }
        if self.n_th < 0.0 {
            return Err(Error::InvalidParameter {
                name: "n_th",
                value: self.n_th,
                reason: "must be non-negative",
            });
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter {
                name: "eta",
                value: self.eta,
                reason: "must lie in [0, 1]",
            });
        }
        if self.fock_dim < 2 {
            return Err(Error::InvalidDimension { dim: self.fock_dim });
        }
        for ch in &self.extra_channels {
            if ch.rate < 0.0 || !ch.rate.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "extra_channels.rate",
                    value: ch.rate,
                    reason: "must be finite and non-negative",
                });
            }
            if ch.op.dim() != self.fock_dim {
                return Err(Error::DimensionMismatch {
                    left: ch.op.dim(),
                    right: self.fock_dim,
                });
            }
        }
        Ok(())
    }

    /// Photon-number scale used to size the cutoff: the largest mean-field
    /// occupation (coherent drive), |α₂|/K (parametric drive) or the linear
    /// response when K = 0.
    pub fn photon_estimate(&self) -> f64 {
        let mut n = 0.0f64;
        let lin = self.alpha1.norm_sqr() / (self.delta.powi(2) + self.kappa.powi(2) / 4.0);
        if self.kerr > 0.0 {
            n = n.max(self.alpha2.norm() / self.kerr);
            if self.alpha2 == ZERO {
                for fp in crate::steady::semiclassical_fixed_points(self).unwrap_or_default() {
                    n = n.max(fp.alpha.norm_sqr());
                }
            } else {
                n = n.max(lin);
            }
        } else {
            n = n.max(lin);
        }
        n + self.n_th
    }

    /// `⌈4·max(n_est, |ξ|², |α₂/K|) + 20⌉`.
    pub fn auto_cutoff(&self) -> usize {
        let scale = self.photon_estimate().max(self.xi.norm_sqr());
        (4.0 * scale + 20.0).ceil() as usize
    }
}

/// `H₀ = −Δ a†a + K a†a†aa + (α₁a† + α₂a†a† + h.c.)`.
pub fn build_hamiltonian(p: &SystemParams) -> Result<ComplexOperator> {
    p.validate()?;
    let d = p.fock_dim;
    ComplexOperator::from_fn(d, |i, j| {
        let (n, m) = (i as f64, j as f64);
        if i == j {
            C64::new(-p.delta * n + p.kerr * n * (n - 1.0), 0.0)
        } else if i == j + 1 {
            p.alpha1 * n.sqrt()
        } else if j == i + 1 {
            p.alpha1.conj() * m.sqrt()
        } else if i == j + 2 {
            p.alpha2 * (n * (n - 1.0)).sqrt()
        } else if j == i + 2 {
            p.alpha2.conj() * (m * (m - 1.0)).sqrt()
        } else {
            ZERO
        }
    })
}

/// `M = κ a†a / 2`.
pub fn jump_weight_operator(p: &SystemParams) -> Result<ComplexOperator> {
    p.validate()?;
    ComplexOperator::from_fn(p.fock_dim, |i, j| {
        if i == j {
            C64::new(p.kappa * i as f64 / 2.0, 0.0)
        } else {
            ZERO
        }
    })
}

/// Detected mode `a + ξ`.
pub fn detected_mode(p: &SystemParams) -> Result<ComplexOperator> {
    let a = annihilation(p.fock_dim)?;
    let xi = p.xi;
    ComplexOperator::from_fn(p.fock_dim, |i, j| a.get(i, j) + if i == j { xi } else { ZERO })
}

/// Hermitian drive `κ(n_th+1)η · (i/2)(ξa† − ξ*a)` generated by the local
/// oscillator.
pub fn local_oscillator_drive(p: &SystemParams) -> Result<ComplexOperator> {
    let a = annihilation(p.fock_dim)?;
    let g = p.kappa_out() * p.eta;
    let i_half = C64::new(0.0, 0.5 * g);
    ComplexOperator::from_fn(p.fock_dim, |i, j| {
        i_half * (p.xi * a.get(j, i).conj() - p.xi.conj() * a.get(i, j))
    })
}

/// No-click generator of the monitored channel:
/// `H₀ + H_ξ − i(κ(n_th+1)η/2)(a† + ξ*)(a + ξ)`.
///
/// At ξ = 0, η = 1, n_th = 0 this is `H₀ − iM`.
pub fn effective_nonhermitian(p: &SystemParams) -> Result<ComplexOperator> {
    let h0 = build_hamiltonian(p)?;
    let hx = local_oscillator_drive(p)?;
    let j = detected_mode(p)?;
    let jj = j.adjoint().matmul(&j)?;
    let g = p.kappa_out() * p.eta;
    h0.add(&hx)?.sub(&jj.scale(C64::new(0.0, g / 2.0)))
}

/// `D(ξ) H₀ D†(ξ) − iκ(n_th+1)η(ξ*a − ξa†)/2`, the Hamiltonian seen when
/// the local oscillator is absorbed into a displaced frame.
pub fn displaced_hamiltonian(p: &SystemParams) -> Result<ComplexOperator> {
    let h0 = build_hamiltonian(p)?;
    let hx = local_oscillator_drive(p)?;
    if p.xi == ZERO {
        return h0.add(&hx);
    }
    let dxi = displacement(p.fock_dim, p.xi)?;
    dxi.matmul(&h0)?.matmul(&dxi.adjoint())?.add(&hx)
}

/// Operator form of the trace-decreasing no-click generator `L + N`:
/// `ρ ↦ −i H_c ρ + i ρ H_c† + Σ_k γ_k c_k ρ c_k†`, plus the detected jump
/// `rate · JρJ†` that completes it to the full Liouvillian.
#[derive(Clone, Debug)]
pub struct ConditionedGenerator {
    /// Non-Hermitian generator including every anti-commutator term.
    pub h_cond: ComplexOperator,
    /// Unmonitored refill terms `γ c ρ c†`.
    pub refills: Vec<Channel>,
    /// Detected jump operator `a + ξ`.
    pub jump: ComplexOperator,
    /// Rate multiplying `JρJ†`, κ(n_th+1)η.
    pub jump_rate: f64,
}

fn unmonitored_channels(p: &SystemParams) -> Result<Vec<Channel>> {
    let a = annihilation(p.fock_dim)?;
    let mut out = Vec::new();
    let lost = p.kappa_out() * (1.0 - p.eta);
    if lost > 0.0 {
        out.push(Channel {
            rate: lost,
            op: a.clone(),
        });
    }
    let heat = p.kappa * p.n_th;
    if heat > 0.0 {
        out.push(Channel {
            rate: heat,
            op: a.adjoint(),
        });
    }
    out.extend(p.extra_channels.iter().cloned());
    Ok(out)
}

pub fn conditioned_generator(p: &SystemParams) -> Result<ConditionedGenerator> {
    p.validate()?;
    let mut h = effective_nonhermitian(p)?;
    let refills = unmonitored_channels(p)?;
    for ch in &refills {
        let cc = ch.op.adjoint().matmul(&ch.op)?;
        h = h.sub(&cc.scale(C64::new(0.0, ch.rate / 2.0)))?;
    }
    Ok(ConditionedGenerator {
        h_cond: h,
        refills,
        jump: detected_mode(p)?,
        jump_rate: p.kappa_out() * p.eta,
    })
}

/// Linear map on column-stacked `D × D` matrices.
#[derive(Clone, Debug)]
pub struct Superoperator {
    dim: usize,
    mat: Mat<C64>,
}

fn nonzeros(a: MatRef<'_, C64>) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)] != ZERO {
                out.push((i, j, a[(i, j)]));
            }
        }
    }
    out
}

impl Superoperator {
    pub fn zeros(dim: usize) -> Self {
        Superoperator {
            dim,
            mat: Mat::zeros(dim * dim, dim * dim),
        }
    }

    pub fn from_mat(dim: usize, mat: Mat<C64>) -> Result<Self> {
        if mat.nrows() != dim * dim || mat.ncols() != dim * dim {
            return Err(Error::DimensionMismatch {
                left: mat.nrows(),
                right: dim * dim,
            });
        }
        Ok(Superoperator { dim, mat })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mat(&self) -> MatRef<'_, C64> {
        self.mat.as_ref()
    }

    pub fn into_mat(self) -> Mat<C64> {
        self.mat
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.dim + i
    }

    /// `+= c · A ρ`
    pub fn add_left(&mut self, a: &ComplexOperator, c: C64) {
        let d = self.dim;
        for (i, k, v) in nonzeros(a.mat()) {
            for j in 0..d {
                let (r, s) = (self.idx(i, j), self.idx(k, j));
                self.mat[(r, s)] += c * v;
            }
        }
    }

    /// `+= c · ρ B`
    pub fn add_right(&mut self, b: &ComplexOperator, c: C64) {
        let d = self.dim;
        for (l, j, v) in nonzeros(b.mat()) {
            for i in 0..d {
                let (r, s) = (self.idx(i, j), self.idx(i, l));
                self.mat[(r, s)] += c * v;
            }
        }
    }

    /// `+= c · A ρ B`
    pub fn add_sandwich(&mut self, a: &ComplexOperator, b: &ComplexOperator, c: C64) {
        let na = nonzeros(a.mat());
        let nb = nonzeros(b.mat());
        for &(i, k, va) in &na {
            for &(l, j, vb) in &nb {
                let (r, s) = (self.idx(i, j), self.idx(k, l));
                self.mat[(r, s)] += c * va * vb;
            }
        }
    }

    /// `+= γ D[c]`
    pub fn add_dissipator(&mut self, ch: &Channel) -> Result<()> {
        let cd = ch.op.adjoint();
        let cc = cd.matmul(&ch.op)?;
        let g = C64::new(ch.rate, 0.0);
        self.add_sandwich(&ch.op, &cd, g);
        self.add_left(&cc, -g * 0.5);
        self.add_right(&cc, -g * 0.5);
        Ok(())
    }

    /// `+= −i[H, ·]` for a possibly non-Hermitian `H`, i.e. `−iHρ + iρH†`.
    pub fn add_hamiltonian(&mut self, h: &ComplexOperator) {
        self.add_left(h, C64::new(0.0, -1.0));
        self.add_right(&h.adjoint(), C64::new(0.0, 1.0));
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(Superoperator {
            dim: self.dim,
            mat: &self.mat + &other.mat,
        })
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim * self.dim;
        let mut out = vec![ZERO; n];
        for s in 0..n {
            let x = v[s];
            if x == ZERO {
                continue;
            }
            let col = self.mat.col(s);
            for r in 0..n {
                out[r] += col[r] * x;
            }
        }
        out
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<Mat<C64>> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: rho.dim(),
                right: self.dim,
            });
        }
        let v = self.apply_vec(&linalg::vectorize(rho.mat()));
        Ok(linalg::unvectorize(&v, self.dim))
    }

    /// Largest `|Tr(S X)|` over matrix units `X = |k⟩⟨l|`; zero for a
    /// trace-preserving map.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let n = d * d;
        let mut worst = 0.0f64;
        for s in 0..n {
            let t: C64 = (0..d).map(|i| self.mat[(i * d + i, s)]).sum();
            worst = worst.max(t.norm());
        }
        worst
    }
}

/// `−i[H₀,·] + κ(n_th+1)D[a] + κ n_th D[a†]` plus any extra channels.
pub fn build_liouvillian(p: &SystemParams) -> Result<Superoperator> {
    p.validate()?;
    let d = p.fock_dim;
    let a = annihilation(d)?;
    let mut s = Superoperator::zeros(d);
    s.add_hamiltonian(&build_hamiltonian(p)?);
    let mut channels = vec![Channel {
        rate: p.kappa_out(),
        op: a.clone(),
    }];
    if p.n_th > 0.0 {
        channels.push(Channel {
            rate: p.kappa * p.n_th,
            op: a.adjoint(),
        });
    }
    channels.extend(p.extra_channels.iter().cloned());
    for ch in &channels {
        s.add_dissipator(ch)?;
    }
    Ok(s)
}

/// The pair `(L, N)`: `L` carries the closed dynamics, the local-oscillator
/// drive and the unmonitored dissipators; `N = −(κ(n_th+1)η/2){J†J, ·}` is
/// the trace-decreasing no-click part of the detected channel `J = a + ξ`.
pub fn build_conditioned_generators(p: &SystemParams) -> Result<(Superoperator, Superoperator)> {
    p.validate()?;
    let d = p.fock_dim;
    let mut l = Superoperator::zeros(d);
    l.add_hamiltonian(&build_hamiltonian(p)?.add(&local_oscillator_drive(p)?)?);
    for ch in unmonitored_channels(p)? {
        l.add_dissipator(&ch)?;
    }
    let j = detected_mode(p)?;
    let jj = j.adjoint().matmul(&j)?;
    let g = p.kappa_out() * p.eta;
    let mut n = Superoperator::zeros(d);
    n.add_left(&jj, C64::new(-g / 2.0, 0.0));
    n.add_right(&jj, C64::new(-g / 2.0, 0.0));
    Ok((l, n))
}

/// `L + N` assembled from the operator form.
pub fn conditioned_superoperator(g: &ConditionedGenerator) -> Result<Superoperator> {
    let mut s = Superoperator::zeros(g.h_cond.dim());
    s.add_hamiltonian(&g.h_cond);
    for ch in &g.refills {
        s.add_sandwich(&ch.op, &ch.op.adjoint(), C64::new(ch.rate, 0.0));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, parity, StateVector};
    use crate::linalg::{norm_max, unvectorize, vectorize};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn bistable() -> SystemParams {
        SystemParams::semiclassical(1.5, 2.2, 1.5).with_fock_dim(20)
    }

    fn random_density(d: usize, seed: u64) -> DensityMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = Mat::<C64>::from_fn(d, d, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &g * linalg::adjoint(g.as_ref());
        let mut r = DensityMatrix::from_mat(m).unwrap();
        r.normalize().unwrap();
        r
    }

    #[test]
    fn hamiltonian_diagonal_cases() {
        let p = SystemParams::new(0.7, 0.0, ZERO, ZERO).with_fock_dim(6);
        let h = build_hamiltonian(&p).unwrap();
        for n in 0..6 {
            assert_eq!(h.get(n, n), c(-0.7 * n as f64, 0.0));
        }
        let p = SystemParams::new(0.7, 1.3, ZERO, ZERO).with_fock_dim(6);
        let h = build_hamiltonian(&p).unwrap();
        for n in 0..6 {
            let nf = n as f64;
            assert!((h.get(n, n) - c(-0.7 * nf + 1.3 * nf * (nf - 1.0), 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn hamiltonian_matches_operator_products() {
        let p = SystemParams::new(1.5, 2.2, c(0.4, -0.3), c(0.2, 0.5)).with_fock_dim(10);
        let a = annihilation(10).unwrap();
        let ad = a.adjoint();
        let n = ad.matmul(&a).unwrap();
        let kerr = ad.matmul(&ad).unwrap().matmul(&a).unwrap().matmul(&a).unwrap();
        let drive = ad
            .scale(p.alpha1)
            .add(&ad.matmul(&ad).unwrap().scale(p.alpha2))
            .unwrap();
        let oracle = n
            .scale(c(-p.delta, 0.0))
            .add(&kerr.scale(c(p.kerr, 0.0)))
            .unwrap()
            .add(&drive)
            .unwrap()
            .add(&drive.adjoint())
            .unwrap();
        let h = build_hamiltonian(&p).unwrap();
        assert!(h.sub(&oracle).unwrap().norm_max() < 1e-12);
        let h = build_hamiltonian(&bistable()).unwrap();
        assert!(h.sub(&h.adjoint()).unwrap().norm_max() < 1e-14);
    }

    #[test]
    fn jump_weight() {
        let p = SystemParams::new(0.0, 0.0, ZERO, ZERO).with_fock_dim(30);
        let m = jump_weight_operator(&p).unwrap();
        for n in 0..30 {
            assert_eq!(m.get(n, n), c(n as f64 / 2.0, 0.0));
        }
        let beta = c(0.3, 0.8);
        let psi = coherent_state(30, beta).unwrap();
        assert!((m.expectation(&psi).unwrap().re - beta.norm_sqr() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn effective_generator_structure() {
        let p = bistable();
        let h = effective_nonhermitian(&p).unwrap();
        let h0 = build_hamiltonian(&p).unwrap();
        let m = jump_weight_operator(&p).unwrap();
        assert!(h.sub(&h0.sub(&m.scale(c(0.0, 1.0))).unwrap()).unwrap().norm_max() < 1e-14);
        let anti = h.sub(&h.adjoint()).unwrap().scale(c(0.5, 0.0));
        assert!(anti.add(&m.scale(c(0.0, 1.0))).unwrap().norm_max() < 1e-14);

        let p = SystemParams::parametric(0.0, 10.0, 5.3).with_fock_dim(25);
        let h = effective_nonhermitian(&p).unwrap();
        let comm = h.commutator(&parity(25).unwrap()).unwrap();
        assert!(comm.norm_max() < 1e-12);
    }

    #[test]
    fn displaced_hamiltonian_cases() {
        let p = bistable();
        let h0 = build_hamiltonian(&p).unwrap();
        assert!(displaced_hamiltonian(&p).unwrap().sub(&h0).unwrap().norm_max() == 0.0);

        let xi = c(0.3, -0.2);
        let p = SystemParams::new(0.0, 0.0, ZERO, ZERO).with_fock_dim(12).with_xi(xi);
        let h = displaced_hamiltonian(&p).unwrap();
        let a = annihilation(12).unwrap();
        let expected = a
            .scale(xi.conj())
            .sub(&a.adjoint().scale(xi))
            .unwrap()
            .scale(c(0.0, -0.5));
        assert!(h.sub(&expected).unwrap().norm_max() < 1e-14);
        assert!(h.sub(&h.adjoint()).unwrap().norm_max() < 1e-14);
    }

    #[test]
    fn liouvillian_trace_and_null_vectors() {
        let p = bistable();
        let l = build_liouvillian(&p).unwrap();
        assert!(l.trace_defect() < 1e-10);

        let p = SystemParams::new(0.4, 0.9, ZERO, ZERO).with_fock_dim(10);
        let l = build_liouvillian(&p).unwrap();
        let vac = StateVector::fock(10, 0).unwrap().to_density();
        assert!(norm_max(l.apply(&vac).unwrap().as_ref()) < 1e-14);

        let p = SystemParams::new(0.4, 0.9, ZERO, ZERO)
            .with_fock_dim(60)
            .with_thermal(0.5);
        let l = build_liouvillian(&p).unwrap();
        let th = DensityMatrix::thermal(60, 0.5).unwrap();
        let r = l.apply(&th).unwrap();
        // the truncated chain is in detailed balance level by level
        assert!(norm_max(r.as_ref()) < 1e-10);
    }

    #[test]
    fn pure_limit_matches_nonhermitian_evolution() {
        let p = bistable().with_fock_dim(8);
        let (l, n) = build_conditioned_generators(&p).unwrap();
        let s = l.add(&n).unwrap();
        let heff = effective_nonhermitian(&p).unwrap();
        let psi = coherent_state(8, c(0.5, 0.2)).unwrap();
        let rho = psi.to_density();
        let got = s.apply(&rho).unwrap();
        let h = heff.mat();
        let left = &h * rho.mat();
        let right = rho.mat() * linalg::adjoint(h);
        let expected = Mat::from_fn(8, 8, |i, j| c(0.0, -1.0) * left[(i, j)] + c(0.0, 1.0) * right[(i, j)]);
        assert!(norm_max((&got - &expected).as_ref()) < 1e-13);
    }

    #[test]
    fn unmonitored_limit_is_liouvillian() {
        let p = bistable().with_fock_dim(8).with_efficiency(0.0).with_thermal(0.3);
        let (l, n) = build_conditioned_generators(&p).unwrap();
        assert_eq!(norm_max(n.mat()), 0.0);
        let full = build_liouvillian(&p).unwrap();
        assert!(norm_max((l.mat() - full.mat()).as_ref()) < 1e-13);
    }

    #[test]
    fn jump_completes_liouvillian() {
        let p = bistable()
            .with_fock_dim(9)
            .with_efficiency(0.6)
            .with_thermal(0.2)
            .with_xi(c(0.4, -0.7));
        let (l, n) = build_conditioned_generators(&p).unwrap();
        let g = conditioned_generator(&p).unwrap();
        let mut total = l.add(&n).unwrap();
        total.add_sandwich(&g.jump, &g.jump.adjoint(), c(g.jump_rate, 0.0));
        let full = build_liouvillian(&p).unwrap();
        assert!(norm_max((total.mat() - full.mat()).as_ref()) < 1e-12);
        let op_form = conditioned_superoperator(&g).unwrap();
        assert!(norm_max((op_form.mat() - l.add(&n).unwrap().mat()).as_ref()) < 1e-12);
    }

    #[test]
    fn no_click_trace_decay_contraction() {
        let p = bistable()
            .with_fock_dim(9)
            .with_efficiency(0.7)
            .with_thermal(0.4)
            .with_xi(c(0.2, 0.9));
        let (_, n) = build_conditioned_generators(&p).unwrap();
        let rho = random_density(9, 7);
        let tr_n: C64 = {
            let m = n.apply(&rho).unwrap();
            (0..9).map(|i| m[(i, i)]).sum()
        };
        // direct contraction: Σ_ij (J†J)_ij ρ_ji
        let j = detected_mode(&p).unwrap();
        let jj = j.adjoint().matmul(&j).unwrap();
        let mut direct = ZERO;
        for i in 0..9 {
            for k in 0..9 {
                direct += jj.get(i, k) * rho.get(k, i);
            }
        }
        let expected = -direct * p.kappa_out() * p.eta;
        assert!((tr_n - expected).norm() < 1e-12);
    }

    #[test]
    fn parity_sectors_closed() {
        let p = SystemParams::parametric(0.0, 3.0, 1.7)
            .with_fock_dim(10)
            .with_thermal(0.2)
            .with_efficiency(0.5);
        let (l, n) = build_conditioned_generators(&p).unwrap();
        let s = l.add(&n).unwrap();
        let d = 10;
        for col in 0..d * d {
            let (k, l_) = (col % d, col / d);
            let sector_in = (k + l_) % 2;
            for row in 0..d * d {
                let (i, j) = (row % d, row / d);
                if (i + j) % 2 != sector_in {
                    assert_eq!(s.mat()[(row, col)], ZERO);
                }
            }
        }
    }

    #[test]
    fn validation_errors() {
        let mut p = bistable();
        p.eta = 1.5;
        assert!(matches!(p.validate(), Err(Error::InvalidParameter { name: "eta", .. })));
        let mut p = bistable();
        p.n_th = -0.1;
        assert!(matches!(
            p.validate(),
            Err(Error::InvalidParameter { name: "n_th", .. })
        ));
        let p = bistable().with_fock_dim(1);
        assert!(matches!(p.validate(), Err(Error::InvalidDimension { .. })));
    }

    #[test]
    fn auto_cutoff_heuristic() {
        let p = SystemParams::parametric(0.0, 10.0, 5.3);
        assert_eq!(p.fock_dim, (4.0 * 0.53f64 + 20.0).ceil() as usize);
        let p = SystemParams::new(0.0, 0.0, ZERO, ZERO).with_xi(c(3.0, 0.0));
        assert_eq!(p.auto_cutoff(), 56);
    }

    proptest! {
        #[test]
        fn generator_preserves_hermiticity(seed in 0u64..1000, eta in 0.0f64..1.0, nth in 0.0f64..0.5, xr in -1.0f64..1.0, xim in -1.0f64..1.0) {
            let p = bistable().with_fock_dim(7).with_efficiency(eta).with_thermal(nth).with_xi(c(xr, xim));
            let (l, n) = build_conditioned_generators(&p).unwrap();
            let s = l.add(&n).unwrap();
            let rho = random_density(7, seed);
            let out = s.apply(&rho).unwrap();
            let herm = norm_max((&out - linalg::adjoint(out.as_ref())).as_ref());
            prop_assert!(herm < 1e-12);
        }

        #[test]
        fn no_click_trace_non_increasing(seed in 0u64..1000, eta in 0.0f64..1.0, nth in 0.0f64..0.5) {
            let p = bistable().with_fock_dim(8).with_efficiency(eta).with_thermal(nth);
            let (l, n) = build_conditioned_generators(&p).unwrap();
            let s = l.add(&n).unwrap();
            let rho = random_density(8, seed);
            // short-time step of the semigroup from a positive state
            let dt = 1e-3;
            let v = vectorize(rho.mat());
            let k = s.apply_vec(&v);
            let next: Vec<C64> = v.iter().zip(&k).map(|(a, b)| a + b * dt).collect();
            let m = unvectorize(&next, 8);
            let tr: f64 = (0..8).map(|i| m[(i, i)].re).sum();
            prop_assert!(tr <= 1.0 + 1e-12);
        }
    }
}
