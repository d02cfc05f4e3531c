//! Mode implementations and the artifact manifest.

use std::path::PathBuf;
use std::time::Instant;

use kerr_herald::export::{
    csv, jumps_csv, mixed_spectrum_csv, n_max_map_csv, pure_spectrum_csv, sweep_axis_csv, trajectory_csv, wigner_csv,
    write_text, xi_map_csv,
};
use kerr_herald::steady::{steady_state, steady_state_unchecked};
use kerr_herald::sweep::{
    constrained_max, evaluate_point, kerr_scan, n_max_map, pseudo_state, xi_disc, xi_radius, xi_scan,
};
use kerr_herald::trajectory::{
    derive_seed, detect_heralds, ensemble_average, fit_relaxation, run_ensemble, simulate_sme, simulate_sse,
};
use kerr_herald::wigner::{negativity, wigner};
use kerr_herald::{
    Error, GridSpec, PseudoState, Spectrum, State, StateVector, SteadyStateResult, SystemParams, TrajectoryOptions, C64,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{AutoOr, Mode, RunConfig, SchemaError, SweepAxis, Unraveling, WignerState};

#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Schema(_) => "configuration",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> Self {
        CliError::Schema(e.0)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Json(_) => CliError::Io(e.to_string()),
            Error::InvalidParameter { .. } | Error::InvalidDimension { .. } => CliError::Schema(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Serialize)]
struct CutoffReport {
    fock_dim: usize,
    /// Chosen from the photon-number estimate rather than configured.
    automatic: bool,
    /// |Δ⟨a†a⟩| against a run at a larger cutoff, where checked.
    #[serde(skip_serializing_if = "Option::is_none")]
    drift: Option<f64>,
}

pub struct Context {
    mode: Mode,
    config: RunConfig,
    params: SystemParams,
    out: PathBuf,
    started: Instant,
    files: Vec<String>,
    seeds: Vec<u64>,
    cutoff: CutoffReport,
}

impl Context {
    pub fn new(
        mode: Mode,
        config: RunConfig,
        params: SystemParams,
        out: PathBuf,
        automatic: bool,
    ) -> Result<Self, CliError> {
        std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
        let cutoff = CutoffReport {
            fock_dim: params.fock_dim,
            automatic,
            drift: None,
        };
        Ok(Context {
            mode,
            config,
            params,
            out,
            started: Instant::now(),
            files: Vec::new(),
            seeds: Vec::new(),
            cutoff,
        })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        write_text(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes `manifest.json`, always last; on failure it records the error
    /// next to whatever was produced.
    pub fn finish(mut self, error: Option<&CliError>) -> Result<(), CliError> {
        let manifest = json!({
            "tool": "kerr-herald",
            "version": env!("CARGO_PKG_VERSION"),
            "mode": self.mode.name(),
            "status": if error.is_some() { "error" } else { "ok" },
            "error": error.map(|e| json!({"kind": e.kind(), "message": e.to_string(), "exit_code": e.exit_code()})),
            "config": self.config,
            "master_seed": self.config.trajectory.seed,
            "derived_seeds": self.seeds,
            "cutoff": self.cutoff,
            "wall_clock_s": self.started.elapsed().as_secs_f64(),
            "files": self.files,
        });
        self.write_json("manifest.json", &manifest)
    }
}

pub fn dispatch(ctx: &mut Context) -> Result<(), CliError> {
    match ctx.mode {
        Mode::Steady => steady(ctx),
        Mode::Spectrum => spectrum(ctx),
        Mode::Pseudo => pseudo(ctx),
        Mode::Trajectory => trajectory(ctx),
        Mode::Wigner => wigner_map(ctx),
        Mode::Sweep => sweep(ctx),
        Mode::OptimizeXi => optimize(ctx),
    }
}

fn steady(ctx: &mut Context) -> Result<(), CliError> {
    let ss = steady_state(&ctx.params)?;
    ctx.cutoff.drift = Some(ss.cutoff_drift);
    let rho = &ss.rho_ss;
    let report = json!({
        "fock_dim": rho.dim(),
        "mean_n": ss.mean_n,
        "mean_a": ss.mean_a,
        "mean_parity": rho.mean_parity(),
        "gamma_jump": ss.gamma_jump,
        "min_eigenvalue": rho.min_eigenvalue()?,
        "conditioning": ss.conditioning,
        "cutoff_drift": ss.cutoff_drift,
        "converged": ss.converged,
    });
    ctx.write_json("steady.json", &report)
}

fn pseudo_at(p: &SystemParams) -> Result<(SteadyStateResult, PseudoState), CliError> {
    let ss = steady_state_unchecked(p)?;
    let ps = pseudo_state(p, ss.gamma_jump)?;
    Ok((ss, ps))
}

fn spectrum_artifacts(ctx: &mut Context, ps: &PseudoState) -> Result<(), CliError> {
    let (text, summary) = match &ps.spectrum {
        Spectrum::Pure(s) => (
            pure_spectrum_csv(s),
            json!({
                "kind": "pure",
                "eigenvalues": s.eigenvalues,
                "parity_labels": s.parity_labels,
                "stable_index": s.stable_index,
                "condition": s.condition,
            }),
        ),
        Spectrum::Mixed(s) => (
            mixed_spectrum_csv(s),
            json!({
                "kind": "mixed",
                "eigenvalues": s.eigenvalues,
                "stable_index": 0,
                "condition": s.condition,
                "biorthonormal": s.biorthonormal,
                "biorthonormality_error": s.biorthonormality_error(),
            }),
        ),
    };
    ctx.write("spectrum.csv", &text)?;
    if ctx.mode == Mode::Spectrum {
        let mut v = summary;
        v["rates"] = json!(ps.rates);
        ctx.write_json("spectrum.json", &v)?;
    }
    Ok(())
}

fn spectrum(ctx: &mut Context) -> Result<(), CliError> {
    let (_, ps) = pseudo_at(&ctx.params)?;
    spectrum_artifacts(ctx, &ps)
}

fn admissible(rates: &kerr_herald::RateReport, gamma_jump: f64) -> bool {
    rates.gamma_asy.unwrap_or(rates.gamma_rel) >= gamma_jump
}

fn state_json(state: &State) -> Value {
    match state {
        State::Pure(psi) => json!({"kind": "pure", "dim": psi.dim(), "amplitudes": psi.amplitudes()}),
        State::Mixed(rho) => {
            let d = rho.dim();
            let rows: Vec<Vec<C64>> = (0..d).map(|i| (0..d).map(|j| rho.get(i, j)).collect()).collect();
            json!({"kind": "mixed", "dim": d, "density": rows})
        }
    }
}

fn pseudo(ctx: &mut Context) -> Result<(), CliError> {
    let (ss, ps) = pseudo_at(&ctx.params)?;
    let gamma_jump = ss.gamma_jump;
    spectrum_artifacts(ctx, &ps)?;
    let neg = negativity(&ps.state.to_density())?;
    let mut state = state_json(&ps.state);
    state["mean_n"] = json!(ps.state.mean_n());
    state["mean_n_ss"] = json!(ss.mean_n);
    state["mean_a"] = json!(ps.state.mean_a());
    state["mean_parity"] = json!(ps.state.mean_parity());
    state["wigner_minimum"] = json!(neg);
    ctx.write_json("pseudo_state.json", &state)?;
    let rates = json!({
        "gamma_rel": ps.rates.gamma_rel,
        "gamma_jump": gamma_jump,
        "gamma_asy": ps.rates.gamma_asy,
        "e_psi": ps.rates.e_psi,
        "sector_gaps": ps.rates.sector_gaps,
        "admissible": admissible(&ps.rates, gamma_jump),
        "negativity": neg.negativity,
    });
    ctx.write_json("rates.json", &rates)
}

fn trajectory(ctx: &mut Context) -> Result<(), CliError> {
    let p = ctx.params.clone();
    let t = ctx.config.trajectory.clone();
    let (ss, ps) = pseudo_at(&p)?;
    let gamma_jump = ss.gamma_jump;
    let pure = match t.unraveling {
        Unraveling::Auto => p.is_pure_unraveling(),
        Unraveling::Sse => true,
        Unraveling::Sme => false,
    };
    let opts = TrajectoryOptions::default()
        .with_samples(t.sample_count)
        .with_reference(if pure {
            ps.state.clone()
        } else {
            State::Mixed(ps.state.to_density())
        });
    ctx.seeds = (0..t.n_traj as u64).map(|i| derive_seed(t.seed, i)).collect();
    let vac = StateVector::fock(p.fock_dim, 0)?;
    let trajs = if pure {
        run_ensemble(t.n_traj, t.seed, |s| simulate_sse(&p, &vac, t.t_final, s, &opts))?
    } else {
        let rho0 = vac.to_density();
        run_ensemble(t.n_traj, t.seed, |s| simulate_sme(&p, &rho0, t.t_final, s, &opts))?
    };

    for (i, tr) in trajs.iter().enumerate().take(t.write_limit) {
        ctx.write(&format!("traj_{i:04}.csv"), &trajectory_csv(tr))?;
        ctx.write(&format!("jumps_{i:04}.csv"), &jumps_csv(tr))?;
    }
    let avg = ensemble_average(&trajs)?;
    let table = csv(
        &["t", "n_mean", "n_se", "re_a_mean", "re_a_se", "im_a_mean", "im_a_se"],
        (0..avg.times.len()).map(|k| {
            vec![
                avg.times[k],
                avg.mean_n[k],
                avg.se_n[k],
                avg.mean_re_a[k],
                avg.se_re_a[k],
                avg.mean_im_a[k],
                avg.se_im_a[k],
            ]
        }),
    );
    ctx.write("ensemble.csv", &table)?;

    let mut intervals = Vec::new();
    for tr in &trajs {
        intervals.extend(detect_heralds(tr, ps.rates.gamma_rel, t.herald_k)?.intervals);
    }
    let fidelities: Vec<f64> = intervals.iter().filter_map(|s| s.fidelity).collect();
    let distances: Vec<f64> = intervals.iter().filter_map(|s| s.trace_distance).collect();
    let mean = |v: &[f64]| {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    let clicks: Vec<usize> = trajs.iter().map(|tr| tr.jump_times.len()).collect();
    let click_rate = clicks.iter().sum::<usize>() as f64 / (t.n_traj as f64 * t.t_final);
    let relaxation = trajs.iter().find_map(|tr| fit_relaxation(tr).ok());
    let summary = json!({
        "unraveling": if pure { "sse" } else { "sme" },
        "n_traj": t.n_traj,
        "t_final": t.t_final,
        "sample_count": t.sample_count,
        "clicks": clicks,
        "click_rate": click_rate,
        "gamma_jump": gamma_jump,
        "mean_n_ss": ss.mean_n,
        "mean_n_ps": ps.state.mean_n(),
        "gamma_rel": ps.rates.gamma_rel,
        "gamma_asy": ps.rates.gamma_asy,
        "heralds": {
            "k": t.herald_k,
            "min_duration": t.herald_k / ps.rates.gamma_rel,
            "count": intervals.len(),
            "mean_fidelity": mean(&fidelities),
            "min_fidelity": fidelities.iter().copied().reduce(f64::min),
            "mean_trace_distance": mean(&distances),
            "max_trace_distance": distances.iter().copied().reduce(f64::max),
        },
        "relaxation_fit": relaxation,
    });
    ctx.write_json("summary.json", &summary)
}

fn wigner_map(ctx: &mut Context) -> Result<(), CliError> {
    let p = ctx.params.clone();
    let w = ctx.config.wigner.clone();
    let state = match w.state {
        WignerState::Steady => steady_state_unchecked(&p)?.rho_ss,
        WignerState::Pseudo => pseudo_at(&p)?.1.state.to_density(),
    };
    let center = match w.center {
        AutoOr::Value(z) => C64::new(z[0], z[1]),
        AutoOr::Auto(_) => state.mean_a(),
    };
    // The phase-space map is trusted while (|c| + √2·h)² ≤ D.
    let reach = ((p.fock_dim as f64).sqrt() - center.norm()) / 2f64.sqrt();
    let half_width = match w.half_width {
        AutoOr::Value(h) => {
            if h > reach {
                return Err(CliError::Schema(format!(
                    "wigner.half_width = {h}: exceeds {reach:.4}, the largest width trusted at fock_dim = {} around this center",
                    p.fock_dim
                )));
            }
            h
        }
        AutoOr::Auto(_) => {
            let spread = (state.mean_n() - state.mean_a().norm_sqr()).max(0.0);
            (2.0 + 2.0 * spread.sqrt()).min(reach)
        }
    };
    if !(half_width > 0.0) {
        return Err(CliError::Schema(format!(
            "wigner.center: no trusted phase-space region at fock_dim = {}",
            p.fock_dim
        )));
    }
    let spec = GridSpec::new(center, half_width, w.resolution);
    let grid = wigner(&state, &spec)?;
    let neg = negativity(&state)?;
    ctx.write("wigner.csv", &wigner_csv(&grid))?;
    let report = json!({
        "state": w.state,
        "center": spec.center,
        "half_width": spec.half_width,
        "resolution": spec.resolution,
        "spacing": spec.spacing(),
        "grid_min_value": grid.min_value,
        "grid_argmin": grid.argmin,
        "grid_integral": grid.integral(),
        "negativity": neg.negativity,
        "min_value": neg.min_value,
        "argmin": neg.argmin,
    });
    ctx.write_json("wigner.json", &report)
}

fn sweep(ctx: &mut Context) -> Result<(), CliError> {
    let s = ctx.config.sweep.clone().expect("checked");
    let grid = s.grid.values();
    let base = ctx.params.clone();
    if s.axis == SweepAxis::DetuningPower {
        let deltas = s.deltas.as_ref().expect("checked").values();
        let powers = s.powers.as_ref().expect("checked").values();
        let cells = n_max_map(&base, &deltas, &powers, &grid, s.xi_resolution)?;
        ctx.write("n_max_map.csv", &n_max_map_csv(&cells))?;
        let report = json!({
            "axis": s.axis,
            "kerr_grid": grid,
            "deltas": deltas,
            "powers": powers,
            "xi_resolution": s.xi_resolution,
            "cells": cells,
        });
        return ctx.write_json("sweep.json", &report);
    }
    let points = match s.axis {
        SweepAxis::Kerr => kerr_scan(&base, &grid)?,
        axis => grid
            .par_iter()
            .map(|&v| {
                let mut p = base.clone();
                match axis {
                    SweepAxis::Alpha2 => p.alpha2 = C64::new(v, 0.0),
                    SweepAxis::NTh => p.n_th = v,
                    SweepAxis::Eta => p.eta = v,
                    SweepAxis::Kerr | SweepAxis::DetuningPower => unreachable!(),
                }
                evaluate_point(&p)
            })
            .collect::<Result<Vec<_>, Error>>()?,
    };
    ctx.write("sweep.csv", &sweep_axis_csv(s.axis.column(), &grid, &points))?;
    let best = match constrained_max(&points) {
        Ok(r) => Some(r),
        Err(Error::EmptyAdmissibleSet) => None,
        Err(e) => return Err(e.into()),
    };
    let report = json!({
        "axis": s.axis,
        "grid": grid,
        "n_max": best.as_ref().map(|r| r.n_max),
        "value_at_max": best.as_ref().map(|r| grid[r.argmax]),
        "admissible_points": points.iter().filter(|pt| pt.admissible).count(),
        "points": points,
    });
    ctx.write_json("sweep.json", &report)
}

fn optimize(ctx: &mut Context) -> Result<(), CliError> {
    let p = ctx.params.clone();
    let x = ctx.config.xi.clone();
    let radius = match x.radius {
        AutoOr::Value(r) => r,
        AutoOr::Auto(_) => xi_radius(&p)?,
    };
    let grid = xi_disc(radius, x.resolution);
    let (baseline, points) = xi_scan(&p, &grid, x.full_map)?;
    ctx.write("xi_map.csv", &xi_map_csv(&points))?;
    let mut all = points.clone();
    all.push(baseline.clone());
    let best = match constrained_max(&all) {
        Ok(r) => Some(all[r.argmax].clone()),
        Err(Error::EmptyAdmissibleSet) => None,
        Err(e) => return Err(e.into()),
    };
    let report = json!({
        "radius": radius,
        "resolution": x.resolution,
        "grid_points": grid.len(),
        "baseline": baseline,
        "best": best,
        "best_xi": best.as_ref().map(|b| b.xi),
        "n_max": best.as_ref().and_then(|b| b.negativity),
        "baseline_admissible_negativity": baseline.admissible_negativity(),
    });
    ctx.write_json("xi.json", &report)
}
