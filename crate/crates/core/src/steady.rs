//! Unconditional steady state, ensemble detection rate and the mean-field
//! fixed points of the coherently driven oscillator.

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{ComplexOperator, DensityMatrix};
use crate::linalg::{self, ONE, ZERO};
use crate::model::{build_liouvillian, detected_mode, Superoperator, SystemParams};

/// Extra levels used for the cutoff-convergence re-run.
pub const CUTOFF_PROBE: usize = 10;
/// Absolute tolerance on the drift of ⟨a†a⟩ between the two cutoffs.
pub const CUTOFF_TOL: f64 = 1e-6;
/// Minimum `σ_min/σ_max` of the bordered Liouvillian for a unique null vector.
pub const UNIQUENESS_RATIO: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SteadyStateResult {
    pub rho_ss: DensityMatrix,
    pub gamma_jump: f64,
    pub mean_a: C64,
    pub mean_n: f64,
    pub converged: bool,
    /// |Δ⟨a†a⟩| between cutoffs D and D + 10 (zero when not checked).
    pub cutoff_drift: f64,
    /// Estimated `σ_min/σ_max` of the bordered Liouvillian.
    pub conditioning: f64,
}

/// Steady state with the cutoff re-run at `D + 10`; a drift of ⟨a†a⟩ above
/// [`CUTOFF_TOL`] is an error.
pub fn steady_state(p: &SystemParams) -> Result<SteadyStateResult> {
    let mut res = steady_state_unchecked(p)?;
    let probe = steady_state_unchecked(&probe_params(p))?;
    let drift = (probe.mean_n - res.mean_n).abs();
    if drift > CUTOFF_TOL {
        return Err(Error::NoConvergence {
            quantity: "steady-state photon number",
            drift,
            tol: CUTOFF_TOL,
        });
    }
    res.cutoff_drift = drift;
    res.converged = true;
    Ok(res)
}

pub(crate) fn probe_params(p: &SystemParams) -> SystemParams {
    let mut q = p.clone();
    q.fock_dim += CUTOFF_PROBE;
    // Extra channels are user operators on the original cutoff; embed them.
    for ch in &mut q.extra_channels {
        let old = ch.op.clone();
        let d = old.dim();
        ch.op = ComplexOperator::from_fn(q.fock_dim, |i, j| if i < d && j < d { old.get(i, j) } else { ZERO })
            .expect("dimension grows");
    }
    q
}

/// Steady state at the configured cutoff only.
pub fn steady_state_unchecked(p: &SystemParams) -> Result<SteadyStateResult> {
    let (rho, conditioning) = null_state(build_liouvillian(p)?)?;
    let gamma_jump = detection_rate(p, &rho)?;
    Ok(SteadyStateResult {
        mean_a: rho.mean_a(),
        mean_n: rho.mean_n(),
        rho_ss: rho,
        gamma_jump,
        converged: false,
        cutoff_drift: 0.0,
        conditioning,
    })
}

/// Unit-trace null vector of a trace-preserving generator, found by an LU
/// solve with the `ρ₀₀` equation replaced by the trace functional. The
/// bordered matrix is nonsingular exactly when the null space is
/// one-dimensional.
pub fn null_state(l: Superoperator) -> Result<(DensityMatrix, f64)> {
    let d = l.dim();
    let n = d * d;
    let mut b = l.into_mat();
    for s in 0..n {
        b[(0, s)] = ZERO;
    }
    for i in 0..d {
        b[(0, i * d + i)] = ONE;
    }
    let lu = b.partial_piv_lu();
    let conditioning = bordered_conditioning(&b, &lu);
    if !(conditioning > UNIQUENESS_RATIO) {
        return Err(Error::DegenerateSteadyState { ratio: conditioning });
    }
    let mut rhs = Mat::<C64>::zeros(n, 1);
    rhs[(0, 0)] = ONE;
    let x = lu.solve(&rhs);
    let v: Vec<C64> = (0..n).map(|k| x[(k, 0)]).collect();
    let mut rho = DensityMatrix::from_mat(linalg::unvectorize(&v, d))?;
    rho.repair_psd(1e-8)?;
    Ok((rho, conditioning))
}

/// `σ_min/σ_max` estimated by inverse iteration on `(BᴴB)⁻¹` with the
/// existing LU factors and power iteration on `BᴴB`. A full SVD of the
/// `D² × D²` matrix would dominate the run time.
fn bordered_conditioning(b: &Mat<C64>, lu: &faer::linalg::solvers::PartialPivLu<C64>) -> f64 {
    let n = b.nrows();
    let start = |k: usize| C64::new(1.0 + (k as f64 * 0.618).sin() * 0.5, (k as f64 * 0.377).cos() * 0.5);
    let norm = |x: &Mat<C64>| (0..n).map(|k| x[(k, 0)].norm_sqr()).sum::<f64>().sqrt();

    let mut x = Mat::<C64>::from_fn(n, 1, |k, _| start(k));
    let mut inv_growth = 0.0;
    for _ in 0..8 {
        let nx = norm(&x);
        x = Mat::from_fn(n, 1, |k, _| x[(k, 0)] / nx);
        let y = lu.solve_adjoint(&x);
        let z = lu.solve(&y);
        inv_growth = norm(&z);
        if !inv_growth.is_finite() {
            return 0.0;
        }
        x = z;
    }
    let sigma_min = 1.0 / inv_growth.sqrt();

    let bh = linalg::adjoint(b.as_ref());
    let mut x = Mat::<C64>::from_fn(n, 1, |k, _| start(k + 7));
    let mut growth = 0.0;
    for _ in 0..30 {
        let nx = norm(&x);
        x = Mat::from_fn(n, 1, |k, _| x[(k, 0)] / nx);
        let y = b * &x;
        let z = &bh * &y;
        growth = norm(&z);
        x = z;
    }
    let sigma_max = growth.sqrt();
    sigma_min / sigma_max
}

/// `2 Tr(Mρ)` for a jump-weight operator `M`.
pub fn jump_rate(rho: &DensityMatrix, m: &ComplexOperator) -> Result<f64> {
    Ok(2.0 * m.expectation_rho(rho)?.re)
}

/// Click intensity `−Tr(Nρ) = κ(n_th+1)η Tr[(a†+ξ*)(a+ξ)ρ]`; equals
/// `2 Tr(Mρ)` for an ideal detector without local oscillator.
pub fn detection_rate(p: &SystemParams, rho: &DensityMatrix) -> Result<f64> {
    let j = detected_mode(p)?;
    let jj = j.adjoint().matmul(&j)?;
    Ok(p.kappa_out() * p.eta * jj.expectation_rho(rho)?.re)
}

/// Mean-field stationary amplitude with its linear stability.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FixedPoint {
    pub alpha: C64,
    pub stable: bool,
}

/// All stationary points of `α̇ = −i(−Δα + 2K|α|²α + α₁) − κα/2`.
///
/// With `n = |α|²` stationarity reduces to the cubic
/// `4K²n³ − 4KΔn² + (Δ² + κ²/4)n − |α₁|² = 0` and `α = α₁/(Δ − 2Kn + iκ/2)`.
/// Stability follows from the linearization `δα̇ = Aδα + Bδα*` with
/// `A = −κ/2 + i(Δ − 4K|α|²)`, `B = −2iKα²`: the trace is −κ, so the point is
/// stable iff `|A|² − |B|² > 0`.
pub fn semiclassical_fixed_points(p: &SystemParams) -> Result<Vec<FixedPoint>> {
    if p.alpha2 != ZERO {
        return Err(Error::InvalidParameter {
            name: "alpha2",
            value: p.alpha2.norm(),
            reason: "mean-field fixed points are defined for the coherent drive only",
        });
    }
    let (delta, k, kappa) = (p.delta, p.kerr, p.kappa);
    let f2 = p.alpha1.norm_sqr();
    let lin = delta * delta + kappa * kappa / 4.0;
    let roots: Vec<f64> = if f2 == 0.0 {
        vec![0.0]
    } else if k == 0.0 {
        vec![f2 / lin]
    } else {
        // Work in x = Kn so the coefficients are O(1).
        let pw = k * f2;
        let c = [4.0, -4.0 * delta, lin, -pw];
        real_cubic_roots(c)
            .into_iter()
            .filter(|&x| x >= 0.0)
            .map(|x| x / k)
            .collect()
    };
    let mut out = Vec::new();
    for n in roots {
        let alpha = p.alpha1 / C64::new(delta - 2.0 * k * n, kappa / 2.0);
        let a = C64::new(-kappa / 2.0, delta - 4.0 * k * alpha.norm_sqr());
        let b = C64::new(0.0, -2.0 * k) * alpha * alpha;
        out.push(FixedPoint {
            alpha,
            stable: a.norm_sqr() - b.norm_sqr() > 0.0,
        });
    }
    out.sort_by(|x, y| x.alpha.norm_sqr().total_cmp(&y.alpha.norm_sqr()));
    Ok(out)
}

/// Real roots of `c₀x³ + c₁x² + c₂x + c₃` via the companion matrix, polished
/// by Newton steps; near-coincident roots are merged.
fn real_cubic_roots(c: [f64; 4]) -> Vec<f64> {
    let (a1, a2, a3) = (c[1] / c[0], c[2] / c[0], c[3] / c[0]);
    let comp = Mat::<C64>::from_fn(3, 3, |i, j| match (i, j) {
        (0, _) => C64::new(-[a1, a2, a3][j], 0.0),
        (1, 0) | (2, 1) => ONE,
        _ => ZERO,
    });
    let eig = comp.eigenvalues().unwrap_or_default();
    let scale = 1.0 + a1.abs().max(a2.abs()).max(a3.abs());
    let poly = |x: f64| ((x + a1) * x + a2) * x + a3;
    let dpoly = |x: f64| (3.0 * x + 2.0 * a1) * x + a2;
    let mut out: Vec<f64> = Vec::new();
    for z in eig {
        if z.im.abs() > 1e-7 * scale {
            continue;
        }
        let mut x = z.re;
        for _ in 0..4 {
            let d = dpoly(x);
            if d == 0.0 {
                break;
            }
            x -= poly(x) / d;
        }
        if !out.iter().any(|&y| (y - x).abs() < 1e-9 * scale) {
            out.push(x);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}
