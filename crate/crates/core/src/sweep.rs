//! Parameter scans of the heralded negativity and local-oscillator
//! optimization.
//!
//! A pseudo-steady state is useful only when it is approached faster than
//! clicks arrive, so every point is tested for admissibility: `Γ_rel ≥
//! Γ_jump`, or `Γ_asy ≥ Γ_jump` when the spectrum splits into parity sectors.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::model::{build_conditioned_generators, effective_nonhermitian, SystemParams};
use crate::spectral::{
    mixed_pseudo_state, mixed_spectrum, parity_rates, pure_spectrum, stable_pseudo_state, MixedSpectrum, PureSpectrum,
    RateReport,
};
use crate::steady::{detection_rate, steady_state_unchecked};
use crate::trajectory::State;
use crate::wigner::negativity;

/// Everything the admissibility test needs at one parameter point.
#[derive(Clone, Debug, Serialize)]
pub struct PointReport {
    pub kerr: f64,
    pub delta: f64,
    pub alpha1: C64,
    pub alpha2: C64,
    pub xi: C64,
    pub gamma_rel: f64,
    pub gamma_jump: f64,
    pub gamma_asy: Option<f64>,
    /// Negativity of the pseudo-steady state; `None` when it was skipped
    /// for an inadmissible point.
    pub negativity: Option<f64>,
    pub admissible: bool,
}

impl PointReport {
    /// Negativity counted towards a constrained maximum.
    pub fn admissible_negativity(&self) -> Option<f64> {
        if self.admissible {
            self.negativity
        } else {
            None
        }
    }
}

/// Spectrum the pseudo-state was taken from.
#[derive(Clone, Debug)]
pub enum Spectrum {
    Pure(PureSpectrum),
    Mixed(MixedSpectrum),
}

#[derive(Clone, Debug)]
pub struct PseudoState {
    pub state: State,
    pub rates: RateReport,
    pub spectrum: Spectrum,
}

/// Pseudo-steady state of the no-click dynamics. Pure unravelings use the
/// effective Hamiltonian (the top eigenvector, with sector rates when the
/// spectrum carries parity labels); otherwise the conditioned generator.
pub fn pseudo_state(p: &SystemParams, gamma_jump: f64) -> Result<PseudoState> {
    if p.is_pure_unraveling() {
        let spec = pure_spectrum(&effective_nonhermitian(p)?)?;
        let (psi, rates) = if spec.has_parity() {
            let rates = parity_rates(&spec, gamma_jump)?;
            (spec.right_vectors[spec.stable_index].clone(), rates)
        } else {
            let (psi, mut rates) = stable_pseudo_state(&spec)?;
            rates.gamma_jump = Some(gamma_jump);
            (psi, rates)
        };
        Ok(PseudoState {
            state: State::Pure(psi),
            rates,
            spectrum: Spectrum::Pure(spec),
        })
    } else {
        let (l, n) = build_conditioned_generators(p)?;
        let spec = mixed_spectrum(&l, &n)?;
        let (rho, mut rates) = mixed_pseudo_state(&spec)?;
        rates.gamma_jump = Some(gamma_jump);
        Ok(PseudoState {
            state: State::Mixed(rho),
            rates,
            spectrum: Spectrum::Mixed(spec),
        })
    }
}

/// Pseudo-steady state and rates at `p`; the ensemble steady state is
/// passed in because it does not depend on the local oscillator.
fn evaluate_with(p: &SystemParams, rho_ss: &DensityMatrix, always_negativity: bool) -> Result<PointReport> {
    let gamma_jump = detection_rate(p, rho_ss)?;
    let ps = pseudo_state(p, gamma_jump)?;
    let (gamma_rel, gamma_asy) = (ps.rates.gamma_rel, ps.rates.gamma_asy);
    let state = ps.state.to_density();
    let admissible = gamma_asy.unwrap_or(gamma_rel) >= gamma_jump;
    let negativity = if admissible || always_negativity {
        Some(negativity(&state)?.negativity)
    } else {
        None
    };
    Ok(PointReport {
        kerr: p.kerr,
        delta: p.delta,
        alpha1: p.alpha1,
        alpha2: p.alpha2,
        xi: p.xi,
        gamma_rel,
        gamma_jump,
        gamma_asy,
        negativity,
        admissible,
    })
}

/// Rates, admissibility and pseudo-state negativity at one point.
pub fn evaluate_point(p: &SystemParams) -> Result<PointReport> {
    p.validate()?;
    let ss = steady_state_unchecked(p)?;
    evaluate_with(p, &ss.rho_ss, true)
}

/// Moves `base` to Kerr strength `kerr` while holding the rescaled drives
/// `|α₁|²K` and `α₂/K` fixed.
pub fn rescale_kerr(base: &SystemParams, kerr: f64) -> Result<SystemParams> {
    if !(kerr > 0.0) || !(base.kerr > 0.0) {
        return Err(Error::InvalidParameter {
            name: "kerr",
            value: kerr,
            reason: "Kerr rescaling needs positive nonlinearity",
        });
    }
    let mut p = base.clone();
    p.alpha1 = base.alpha1 * (base.kerr / kerr).sqrt();
    p.alpha2 = base.alpha2 * (kerr / base.kerr);
    p.kerr = kerr;
    Ok(p)
}

/// Constrained maximum of the pseudo-state negativity over a scan.
#[derive(Clone, Debug, Serialize)]
pub struct NegativityReport {
    /// Negativity at the maximizing admissible point.
    pub negativity: f64,
    pub n_max: f64,
    /// Whether the maximizing point satisfies the rate constraint. Scans
    /// with no admissible point fail instead, so this is always set.
    pub constraint_satisfied: bool,
    pub argmax: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub points: Vec<PointReport>,
    pub report: NegativityReport,
}

/// Largest admissible negativity in `points`.
pub fn constrained_max(points: &[PointReport]) -> Result<NegativityReport> {
    let best = points
        .iter()
        .enumerate()
        .filter_map(|(k, pt)| pt.admissible_negativity().map(|n| (k, n)))
        .fold(None, |acc: Option<(usize, f64)>, (k, n)| match acc {
            Some((_, b)) if b >= n => acc,
            _ => Some((k, n)),
        });
    let (argmax, n_max) = best.ok_or(Error::EmptyAdmissibleSet)?;
    Ok(NegativityReport {
        negativity: n_max,
        n_max,
        constraint_satisfied: true,
        argmax,
    })
}

/// Scan over K/κ at fixed detuning and rescaled drive power. Returns the
/// per-point table and the maximum over admissible points.
pub fn n_max_sweep(base: &SystemParams, kerr_grid: &[f64]) -> Result<SweepResult> {
    let points = kerr_scan(base, kerr_grid)?;
    let report = constrained_max(&points)?;
    Ok(SweepResult { points, report })
}

/// Per-point table of a K/κ scan, evaluated in parallel.
pub fn kerr_scan(base: &SystemParams, kerr_grid: &[f64]) -> Result<Vec<PointReport>> {
    base.validate()?;
    kerr_grid
        .par_iter()
        .map(|&k| evaluate_point(&rescale_kerr(base, k)?))
        .collect()
}

/// Same as [`n_max_sweep`] but never fails on an empty admissible set;
/// used by maps that record zero there.
fn sweep_points(base: &SystemParams, kerr_grid: &[f64]) -> Result<Vec<PointReport>> {
    kerr_grid
        .iter()
        .map(|&k| evaluate_point(&rescale_kerr(base, k)?))
        .collect()
}

/// Square grid of `resolution²` local-oscillator values clipped to the disc
/// `|ξ| ≤ radius`. Odd resolutions contain ξ = 0.
pub fn xi_disc(radius: f64, resolution: usize) -> Vec<C64> {
    let r = resolution.max(1);
    let axis: Vec<f64> = if r == 1 {
        vec![0.0]
    } else {
        (0..r)
            .map(|k| radius * (2.0 * k as f64 / (r - 1) as f64 - 1.0))
            .collect()
    };
    let mut out = Vec::new();
    for &im in &axis {
        for &re in &axis {
            let z = C64::new(re, im);
            if z.norm() <= radius * (1.0 + 1e-12) {
                out.push(z);
            }
        }
    }
    out
}

/// Default ξ disc radius: twice the steady-state field amplitude.
pub fn xi_radius(p: &SystemParams) -> Result<f64> {
    Ok(2.0 * steady_state_unchecked(p)?.mean_a.norm())
}

#[derive(Clone, Debug, Serialize)]
pub struct XiOptimization {
    pub best_xi: C64,
    pub best: PointReport,
    pub baseline: PointReport,
    pub points: Vec<PointReport>,
    pub report: NegativityReport,
}

/// Best admissible local oscillator on `xi_grid`. ξ = 0 is always
/// evaluated, so the optimum never falls below the unshifted baseline
/// when that is admissible. With `full_map` the negativity is computed at
/// inadmissible grid points too.
pub fn optimize_xi(p: &SystemParams, xi_grid: &[C64], full_map: bool) -> Result<XiOptimization> {
    let (baseline, points) = xi_scan(p, xi_grid, full_map)?;
    let mut all = points.clone();
    all.push(baseline.clone());
    let report = constrained_max(&all)?;
    let best = all[report.argmax].clone();
    Ok(XiOptimization {
        best_xi: best.xi,
        best,
        baseline,
        points,
        report,
    })
}

/// The ξ = 0 baseline and the per-point map over `xi_grid`.
pub fn xi_scan(p: &SystemParams, xi_grid: &[C64], full_map: bool) -> Result<(PointReport, Vec<PointReport>)> {
    p.validate()?;
    let ss = steady_state_unchecked(p)?;
    let baseline = evaluate_with(&p.clone().with_xi(C64::new(0.0, 0.0)), &ss.rho_ss, true)?;
    let points = xi_grid
        .par_iter()
        .map(|&xi| evaluate_with(&p.clone().with_xi(xi), &ss.rho_ss, full_map))
        .collect::<Result<Vec<_>>>()?;
    Ok((baseline, points))
}

/// One cell of an `N_max` map over detuning and drive power.
#[derive(Clone, Debug, Serialize)]
pub struct MapCell {
    pub delta: f64,
    pub drive_power: f64,
    /// Zero when no scanned K/κ is admissible.
    pub n_max: f64,
    pub n_max_optimized: Option<f64>,
}

/// `N_max` over the K/κ scan at each `(Δ, |α₁|²K)` cell, optionally also
/// with the ξ optimization (disc of `xi_resolution²` points, radius twice
/// the steady-state amplitude) at every scanned K.
pub fn n_max_map(
    template: &SystemParams,
    deltas: &[f64],
    powers: &[f64],
    kerr_grid: &[f64],
    xi_resolution: Option<usize>,
) -> Result<Vec<MapCell>> {
    let cells: Vec<(f64, f64)> = deltas
        .iter()
        .flat_map(|&d| powers.iter().map(move |&w| (d, w)))
        .collect();
    cells
        .par_iter()
        .map(|&(delta, power)| {
            let mut base = SystemParams::semiclassical(delta, kerr_grid[0], power);
            base.fock_dim = template.fock_dim;
            base.eta = template.eta;
            base.n_th = template.n_th;
            let points = sweep_points(&base, kerr_grid)?;
            let n_max = points
                .iter()
                .filter_map(PointReport::admissible_negativity)
                .fold(0.0, f64::max);
            let n_max_optimized = match xi_resolution {
                None => None,
                Some(res) => {
                    let mut best: f64 = 0.0;
                    for &k in kerr_grid {
                        let p = rescale_kerr(&base, k)?;
                        let grid = xi_disc(xi_radius(&p)?, res);
                        match optimize_xi(&p, &grid, false) {
                            Ok(o) => best = best.max(o.report.n_max),
                            Err(Error::EmptyAdmissibleSet) => {}
                            Err(e) => return Err(e),
                        }
                    }
                    Some(best)
                }
            };
            Ok(MapCell {
                delta,
                drive_power: power,
                n_max,
                n_max_optimized,
            })
        })
        .collect()
}
