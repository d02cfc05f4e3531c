//! Run configuration: strict JSON schema, defaults and range checks.

use std::path::PathBuf;

use kerr_herald::stats::{linspace, logspace};
use kerr_herald::{SystemParams, C64};
use serde::{Deserialize, Serialize};

/// Configuration problems; reported with exit code 2.
#[derive(Debug)]
pub struct SchemaError(pub String);

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Steady,
    Spectrum,
    Pseudo,
    Trajectory,
    Wigner,
    Sweep,
    OptimizeXi,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Steady => "steady",
            Mode::Spectrum => "spectrum",
            Mode::Pseudo => "pseudo",
            Mode::Trajectory => "trajectory",
            Mode::Wigner => "wigner",
            Mode::Sweep => "sweep",
            Mode::OptimizeXi => "optimize-xi",
        }
    }
}

fn zero() -> [f64; 2] {
    [0.0, 0.0]
}
fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub kerr: f64,
    #[serde(default = "zero")]
    pub alpha1: [f64; 2],
    #[serde(default = "zero")]
    pub alpha2: [f64; 2],
    /// Rescaled drive power `|α₁|²K`; sets a real α₁ when given instead of
    /// `alpha1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive_power: Option<f64>,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default)]
    pub n_th: f64,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default = "zero")]
    pub xi: [f64; 2],
    /// Fock cutoff; chosen from the photon-number estimate when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_dim: Option<usize>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Unraveling {
    Auto,
    Sse,
    Sme,
}

fn t_final() -> f64 {
    100.0
}
fn n_traj() -> usize {
    1
}
fn samples() -> usize {
    kerr_herald::trajectory::DEFAULT_SAMPLES
}
fn herald_k() -> f64 {
    5.0
}
fn auto_unraveling() -> Unraveling {
    Unraveling::Auto
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    #[serde(default = "t_final")]
    pub t_final: f64,
    #[serde(default = "n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "samples")]
    pub sample_count: usize,
    #[serde(default = "herald_k")]
    pub herald_k: f64,
    #[serde(default = "auto_unraveling")]
    pub unraveling: Unraveling,
    /// Record per-trajectory CSVs for at most this many trajectories.
    #[serde(default = "max_written")]
    pub write_limit: usize,
}

fn max_written() -> usize {
    20
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            t_final: t_final(),
            n_traj: n_traj(),
            seed: 0,
            sample_count: samples(),
            herald_k: herald_k(),
            unraveling: Unraveling::Auto,
            write_limit: max_written(),
        }
    }
}

/// `"auto"` or an explicit value.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum AutoOr<T> {
    Auto(AutoTag),
    Value(T),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl<T> Default for AutoOr<T> {
    fn default() -> Self {
        AutoOr::Auto(AutoTag::Auto)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum WignerState {
    Steady,
    Pseudo,
}

fn resolution() -> usize {
    101
}
fn pseudo() -> WignerState {
    WignerState::Pseudo
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerConfig {
    #[serde(default)]
    pub center: AutoOr<[f64; 2]>,
    #[serde(default)]
    pub half_width: AutoOr<f64>,
    #[serde(default = "resolution")]
    pub resolution: usize,
    #[serde(default = "pseudo")]
    pub state: WignerState,
}

impl Default for WignerConfig {
    fn default() -> Self {
        WignerConfig {
            center: AutoOr::default(),
            half_width: AutoOr::default(),
            resolution: resolution(),
            state: pseudo(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

fn log_spacing() -> Spacing {
    Spacing::Log
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default = "log_spacing")]
    pub spacing: Spacing,
}

impl GridConfig {
    pub fn values(&self) -> Vec<f64> {
        match self.spacing {
            Spacing::Log => logspace(self.start, self.stop, self.points),
            Spacing::Linear => linspace(self.start, self.stop, self.points),
        }
    }

    fn check(&self, name: &str) -> Result<(), SchemaError> {
        finite(&format!("{name}.start"), self.start)?;
        finite(&format!("{name}.stop"), self.stop)?;
        if self.points == 0 {
            return Err(SchemaError(format!("{name}.points: must be at least 1")));
        }
        if self.spacing == Spacing::Log && !(self.start > 0.0 && self.stop > 0.0) {
            return Err(SchemaError(format!(
                "{name}: log spacing needs positive start and stop"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// K/κ with `|α₁|²K` and `α₂/K` held fixed.
    Kerr,
    /// Real two-photon drive amplitude α₂/κ.
    Alpha2,
    /// Thermal occupation.
    NTh,
    /// Detection efficiency.
    Eta,
    /// `N_max` over the K/κ grid at every (Δ/κ, |α₁|²K/κ³) cell.
    DetuningPower,
}

impl SweepAxis {
    /// Header of the swept column.
    pub fn column(self) -> &'static str {
        match self {
            SweepAxis::Kerr | SweepAxis::DetuningPower => "K_over_kappa",
            SweepAxis::Alpha2 => "alpha2_over_kappa",
            SweepAxis::NTh => "n_th",
            SweepAxis::Eta => "eta",
        }
    }
}

fn kerr_axis() -> SweepAxis {
    SweepAxis::Kerr
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "kerr_axis")]
    pub axis: SweepAxis,
    /// Values of the swept quantity; the K/κ scan for `detuning-power`.
    pub grid: GridConfig,
    /// Detuning axis of a `detuning-power` map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<GridConfig>,
    /// Rescaled drive-power axis of a `detuning-power` map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub powers: Option<GridConfig>,
    /// Also optimize the local oscillator on a disc of this resolution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_resolution: Option<usize>,
}

fn xi_resolution() -> usize {
    41
}
fn full_map() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiConfig {
    /// Disc radius; twice the steady-state amplitude by default.
    #[serde(default)]
    pub radius: AutoOr<f64>,
    #[serde(default = "xi_resolution")]
    pub resolution: usize,
    /// Also compute the negativity where the rate constraint fails.
    #[serde(default = "full_map")]
    pub full_map: bool,
}

impl Default for XiConfig {
    fn default() -> Self {
        XiConfig {
            radius: AutoOr::default(),
            resolution: xi_resolution(),
            full_map: full_map(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub params: ParamsConfig,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub wigner: WignerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub xi: XiConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn c(v: [f64; 2]) -> C64 {
    C64::new(v[0], v[1])
}

fn finite(name: &str, v: f64) -> Result<(), SchemaError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SchemaError(format!("{name}: value must be finite")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        serde_json::from_str(text)
            .map_err(|e| SchemaError(format!("parse error at line {}, column {}: {e}", e.line(), e.column())))
    }

    /// Physical parameters with the cutoff resolved; also checks ranges.
    pub fn system_params(&self) -> Result<SystemParams, SchemaError> {
        let q = &self.params;
        for (name, v) in [
            ("params.delta", q.delta),
            ("params.kerr", q.kerr),
            ("params.kappa", q.kappa),
            ("params.n_th", q.n_th),
            ("params.eta", q.eta),
            ("params.alpha1", q.alpha1[0]),
            ("params.alpha1", q.alpha1[1]),
            ("params.alpha2", q.alpha2[0]),
            ("params.alpha2", q.alpha2[1]),
            ("params.xi", q.xi[0]),
            ("params.xi", q.xi[1]),
        ] {
            finite(name, v)?;
        }
        let alpha1 = match q.drive_power {
            None => c(q.alpha1),
            Some(power) => {
                finite("params.drive_power", power)?;
                if q.alpha1 != [0.0, 0.0] {
                    return Err(SchemaError(
                        "params: give either alpha1 or drive_power, not both".into(),
                    ));
                }
                if !(power >= 0.0) || !(q.kerr > 0.0) {
                    return Err(SchemaError(
                        "params.drive_power: needs drive_power >= 0 and kerr > 0".into(),
                    ));
                }
                C64::new((power / q.kerr).sqrt(), 0.0)
            }
        };
        let mut p = SystemParams::new(q.delta, q.kerr, alpha1, c(q.alpha2));
        p.kappa = q.kappa;
        p.n_th = q.n_th;
        p.eta = q.eta;
        p.xi = c(q.xi);
        p.fock_dim = match q.fock_dim {
            Some(d) => d,
            None => p.auto_cutoff(),
        };
        p.validate().map_err(|e| match e {
            kerr_herald::Error::InvalidParameter { name, value, reason } => {
                SchemaError(format!("params.{name} = {value}: {reason}"))
            }
            other => SchemaError(format!("params: {other}")),
        })?;
        Ok(p)
    }

    /// Full validation against `mode`, without running anything.
    pub fn check(&self, mode: Mode) -> Result<SystemParams, SchemaError> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(SchemaError(format!(
                    "mode: config says {} but {} was requested",
                    m.name(),
                    mode.name()
                )));
            }
        }
        let p = self.system_params()?;
        let t = &self.trajectory;
        finite("trajectory.t_final", t.t_final)?;
        if !(t.t_final > 0.0) {
            return Err(SchemaError("trajectory.t_final: must be positive".into()));
        }
        if t.n_traj == 0 {
            return Err(SchemaError("trajectory.n_traj: must be at least 1".into()));
        }
        if t.sample_count < 2 {
            return Err(SchemaError("trajectory.sample_count: must be at least 2".into()));
        }
        if !(t.herald_k > 0.0) || !t.herald_k.is_finite() {
            return Err(SchemaError("trajectory.herald_k: must be positive".into()));
        }
        if mode == Mode::Trajectory && t.unraveling == Unraveling::Sse && !p.is_pure_unraveling() {
            return Err(SchemaError(
                "trajectory.unraveling: sse needs eta = 1 and n_th = 0; use sme".into(),
            ));
        }
        let w = &self.wigner;
        if w.resolution == 0 {
            return Err(SchemaError("wigner.resolution: must be positive".into()));
        }
        if let AutoOr::Value(h) = w.half_width {
            if !(h > 0.0) || !h.is_finite() {
                return Err(SchemaError("wigner.half_width: must be positive".into()));
            }
        }
        if let AutoOr::Value(z) = w.center {
            finite("wigner.center", z[0])?;
            finite("wigner.center", z[1])?;
        }
        if mode == Mode::Sweep {
            let s = self
                .sweep
                .as_ref()
                .ok_or_else(|| SchemaError("sweep: block required in sweep mode".into()))?;
            s.grid.check("sweep.grid")?;
            let values = s.grid.values();
            let all = |ok: fn(f64) -> bool| values.iter().all(|&v| ok(v));
            match s.axis {
                SweepAxis::Kerr | SweepAxis::DetuningPower => {
                    if !all(|v| v > 0.0) {
                        return Err(SchemaError("sweep.grid: K/κ values must be positive".into()));
                    }
                    if s.axis == SweepAxis::Kerr && !(p.kerr > 0.0) {
                        return Err(SchemaError("params.kerr: a Kerr sweep needs kerr > 0".into()));
                    }
                }
                SweepAxis::Alpha2 => {}
                SweepAxis::NTh => {
                    if !all(|v| v >= 0.0) {
                        return Err(SchemaError("sweep.grid: n_th values must be non-negative".into()));
                    }
                }
                SweepAxis::Eta => {
                    if !all(|v| (0.0..=1.0).contains(&v)) {
                        return Err(SchemaError("sweep.grid: eta values must lie in [0, 1]".into()));
                    }
                }
            }
            if s.axis == SweepAxis::DetuningPower {
                let d = s
                    .deltas
                    .as_ref()
                    .ok_or_else(|| SchemaError("sweep.deltas: required for a detuning-power map".into()))?;
                let w = s
                    .powers
                    .as_ref()
                    .ok_or_else(|| SchemaError("sweep.powers: required for a detuning-power map".into()))?;
                d.check("sweep.deltas")?;
                w.check("sweep.powers")?;
                if w.values().iter().any(|&v| v < 0.0) {
                    return Err(SchemaError("sweep.powers: drive powers must be non-negative".into()));
                }
                if s.xi_resolution == Some(0) {
                    return Err(SchemaError("sweep.xi_resolution: must be positive".into()));
                }
            } else if s.deltas.is_some() || s.powers.is_some() || s.xi_resolution.is_some() {
                return Err(SchemaError(
                    "sweep: deltas, powers and xi_resolution belong to a detuning-power map".into(),
                ));
            }
        }
        if mode == Mode::OptimizeXi {
            if self.xi.resolution == 0 {
                return Err(SchemaError("xi.resolution: must be positive".into()));
            }
            if let AutoOr::Value(r) = self.xi.radius {
                if !(r >= 0.0) || !r.is_finite() {
                    return Err(SchemaError("xi.radius: must be non-negative".into()));
                }
            }
        }
        Ok(p)
    }

    /// The configuration with defaults filled in and the cutoff fixed.
    pub fn resolved(&self, p: &SystemParams) -> RunConfig {
        let mut out = self.clone();
        out.params.fock_dim = Some(p.fock_dim);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::parse(r#"{"params": {"kerr": 1.0, "colour": 3}}"#).unwrap_err();
        assert!(e.0.contains("colour"));
    }

    #[test]
    fn defaults_and_cutoff() {
        let cfg = RunConfig::parse(r#"{"params": {"delta": 1.5, "kerr": 2.2, "drive_power": 1.5}}"#).unwrap();
        let p = cfg.check(Mode::Pseudo).unwrap();
        assert!((p.alpha1.norm_sqr() * 2.2 - 1.5).abs() < 1e-12);
        assert_eq!(p.fock_dim, p.auto_cutoff());
        assert_eq!(cfg.trajectory.sample_count, 2000);
        assert_eq!(cfg.resolved(&p).params.fock_dim, Some(p.fock_dim));
    }

    #[test]
    fn range_violation_names_the_field() {
        let cfg = RunConfig::parse(r#"{"params": {"eta": 1.5, "fock_dim": 10}}"#).unwrap();
        assert!(cfg.check(Mode::Steady).unwrap_err().0.contains("eta"));
    }

    #[test]
    fn auto_values() {
        let cfg = RunConfig::parse(r#"{"params": {"fock_dim": 10}, "wigner": {"center": "auto", "half_width": 2.5}}"#)
            .unwrap();
        assert_eq!(cfg.wigner.half_width, AutoOr::Value(2.5));
        assert!(matches!(cfg.wigner.center, AutoOr::Auto(_)));
    }

    #[test]
    fn mode_mismatch() {
        let cfg = RunConfig::parse(r#"{"mode": "wigner", "params": {"fock_dim": 10}}"#).unwrap();
        assert!(cfg.check(Mode::Steady).is_err());
        assert!(cfg.check(Mode::Wigner).is_ok());
    }
}
