//! Photon-counting trajectories.
//!
//! Jumps are sampled with the waiting-time method: the unnormalized state
//! follows the linear no-click generator until its norm (pure) or trace
//! (mixed) falls to a pre-drawn uniform threshold, at which point the jump
//! map is applied and a fresh threshold is drawn. Between jumps the linear
//! flow is integrated with adaptive Dormand–Prince steps; the crossing time
//! is refined by bisection.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{pure_trace_distance, trace_distance, DensityMatrix, StateVector};
use crate::linalg::{self, Csr, ZERO};
use crate::model::{conditioned_generator, detected_mode, effective_nonhermitian, SystemParams};
use crate::ode::{Dp5, Rhs};
use crate::stats::{linear_fit, pairwise_sum};

pub const DEFAULT_SAMPLES: usize = 2000;
pub const DEFAULT_RTOL: f64 = 1e-8;
/// Relative resolution of the jump time.
pub const JUMP_TIME_TOL: f64 = 1e-10;

/// Pure or mixed system state.
#[derive(Clone, Debug)]
pub enum State {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl State {
    pub fn dim(&self) -> usize {
        match self {
            State::Pure(s) => s.dim(),
            State::Mixed(r) => r.dim(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            State::Pure(s) => s.to_density(),
            State::Mixed(r) => r.clone(),
        }
    }

    pub fn mean_n(&self) -> f64 {
        match self {
            State::Pure(s) => s.mean_n(),
            State::Mixed(r) => r.mean_n(),
        }
    }

    pub fn mean_a(&self) -> C64 {
        match self {
            State::Pure(s) => s.mean_a(),
            State::Mixed(r) => r.mean_a(),
        }
    }

    pub fn mean_parity(&self) -> f64 {
        match self {
            State::Pure(s) => s.mean_parity(),
            State::Mixed(r) => r.mean_parity(),
        }
    }

    pub fn trace_distance(&self, other: &State) -> Result<f64> {
        match (self, other) {
            (State::Pure(a), State::Pure(b)) => pure_trace_distance(a, b),
            _ => trace_distance(&self.to_density(), &other.to_density()),
        }
    }

    /// Overlap fidelity when at least one side is pure.
    pub fn fidelity(&self, other: &State) -> Result<Option<f64>> {
        Ok(match (self, other) {
            (State::Pure(a), State::Pure(b)) => Some(crate::fock::fidelity(a, b)?),
            (State::Mixed(r), State::Pure(s)) | (State::Pure(s), State::Mixed(r)) => Some(r.overlap(s)?),
            (State::Mixed(_), State::Mixed(_)) => None,
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryOptions {
    /// Number of uniformly spaced samples on `[0, t_final]`, endpoints
    /// included.
    pub samples: usize,
    /// State whose trace distance is recorded at every sample and at the
    /// end of every no-click segment.
    pub reference: Option<State>,
    pub keep_snapshots: bool,
    pub rtol: f64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            samples: DEFAULT_SAMPLES,
            reference: None,
            keep_snapshots: false,
            rtol: DEFAULT_RTOL,
        }
    }
}

impl TrajectoryOptions {
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_reference(mut self, reference: State) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_snapshots(mut self) -> Self {
        self.keep_snapshots = true;
        self
    }

    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }
}

/// A maximal click-free stretch of a trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    /// Whether the segment ends with a click (otherwise at `t_final`).
    pub ends_in_jump: bool,
    pub fidelity: Option<f64>,
    pub trace_distance: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub seed: u64,
    pub t_final: f64,
    pub times: Vec<f64>,
    pub mean_n: Vec<f64>,
    pub mean_a: Vec<C64>,
    pub parity: Vec<f64>,
    /// `jumped[k]`: at least one click in `(t_{k−1}, t_k]`.
    pub jumped: Vec<bool>,
    pub trace_dist_ref: Option<Vec<f64>>,
    pub jump_times: Vec<f64>,
    /// `⟨Π⟩` just before and just after each click.
    pub jump_parity: Vec<[f64; 2]>,
    pub segments: Vec<Segment>,
    pub snapshots: Option<Vec<State>>,
    pub final_state: State,
}

/// Counter-based seed derivation: the `index`-th trajectory of an ensemble
/// gets the same seed regardless of scheduling.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct PureRhs {
    h: Csr,
}

impl Rhs for PureRhs {
    fn eval(&mut self, y: &[C64], out: &mut [C64]) {
        self.h.matvec(y, out);
        for z in out.iter_mut() {
            *z = C64::new(z.im, -z.re);
        }
    }
}

/// `ρ ↦ −iH_cρ + iρH_c† + Σ γ cρc†` for Hermitian `ρ`.
///
/// The output is Hermitian bit for bit, so the iterates never leave the
/// Hermitian subspace. That matters: on anti-Hermitian input this shortcut
/// would act as `−iHA − iAH†`, whose modes grow at rates up to the spread of
/// `Im h`.
struct MixedRhs {
    dim: usize,
    h: Csr,
    refills: Vec<(f64, Csr)>,
    s1: Vec<C64>,
    s2: Vec<C64>,
}

impl Rhs for MixedRhs {
    fn eval(&mut self, y: &[C64], out: &mut [C64]) {
        let d = self.dim;
        self.h.mul_dense(y, &mut self.s1);
        // Y = −iHρ, out = Y + Y†
        for j in 0..d {
            for i in 0..=j {
                let yij = self.s1[j * d + i];
                let yji = self.s1[i * d + j];
                let a = C64::new(yij.im, -yij.re);
                let b = C64::new(yji.im, -yji.re);
                out[j * d + i] = a + b.conj();
                out[i * d + j] = b + a.conj();
            }
        }
        for (rate, c) in &self.refills {
            c.sandwich_hermitian(y, &mut self.s1, &mut self.s2);
            add_hermitian_part(out, &self.s2, *rate, d);
        }
    }
}

/// `out += rate · (x + x†)/2`, keeping `out` exactly Hermitian.
fn add_hermitian_part(out: &mut [C64], x: &[C64], rate: f64, d: usize) {
    for j in 0..d {
        out[j * d + j].re += rate * x[j * d + j].re;
        for i in 0..j {
            let v = (x[j * d + i] + x[i * d + j].conj()) * (0.5 * rate);
            out[j * d + i] += v;
            out[i * d + j] += v.conj();
        }
    }
}

trait Kind {
    /// Squared norm (pure) or trace (mixed) of the unnormalized state.
    fn weight(&self, y: &[C64]) -> f64;
    fn jump(&mut self, y: &[C64], out: &mut [C64]);
    fn to_state(&self, y: &[C64]) -> Result<State>;
}

struct PureKind {
    jump: Csr,
}

impl Kind for PureKind {
    fn weight(&self, y: &[C64]) -> f64 {
        y.iter().map(|z| z.norm_sqr()).sum()
    }
    fn jump(&mut self, y: &[C64], out: &mut [C64]) {
        self.jump.matvec(y, out);
    }
    fn to_state(&self, y: &[C64]) -> Result<State> {
        Ok(State::Pure(StateVector::new(y.to_vec())?.normalized()?))
    }
}

struct MixedKind {
    dim: usize,
    jump: Csr,
    scratch: Vec<C64>,
    scratch2: Vec<C64>,
}

impl Kind for MixedKind {
    fn weight(&self, y: &[C64]) -> f64 {
        (0..self.dim).map(|i| y[i * self.dim + i].re).sum()
    }
    fn jump(&mut self, y: &[C64], out: &mut [C64]) {
        self.jump.sandwich_hermitian(y, &mut self.scratch, &mut self.scratch2);
        out.fill(ZERO);
        add_hermitian_part(out, &self.scratch2, 1.0, self.dim);
    }
    fn to_state(&self, y: &[C64]) -> Result<State> {
        let mut r = DensityMatrix::from_mat(linalg::unvectorize(y, self.dim))?;
        r.hermitize();
        r.normalize()?;
        Ok(State::Mixed(r))
    }
}

fn rescale(y: &mut [C64], weight: f64, pure: bool) {
    let s = if pure { weight.sqrt() } else { weight };
    for z in y.iter_mut() {
        *z /= s;
    }
}

struct Recorder {
    reference: Option<State>,
    keep: bool,
    traj: Trajectory,
}

impl Recorder {
    fn sample(&mut self, t: f64, s: &State, jumped: bool) -> Result<()> {
        let t_ = &mut self.traj;
        t_.times.push(t);
        t_.mean_n.push(s.mean_n());
        t_.mean_a.push(s.mean_a());
        t_.parity.push(s.mean_parity());
        t_.jumped.push(jumped);
        if let Some(r) = &self.reference {
            let d = s.trace_distance(r)?;
            t_.trace_dist_ref.get_or_insert_with(Vec::new).push(d);
        }
        if self.keep {
            t_.snapshots.get_or_insert_with(Vec::new).push(s.clone());
        }
        Ok(())
    }

    fn segment(&mut self, start: f64, end: f64, ends_in_jump: bool, s: &State) -> Result<()> {
        let (fidelity, trace_distance) = match &self.reference {
            Some(r) => (s.fidelity(r)?, Some(s.trace_distance(r)?)),
            None => (None, None),
        };
        self.traj.segments.push(Segment {
            start,
            end,
            ends_in_jump,
            fidelity,
            trace_distance,
        });
        Ok(())
    }
}

fn run<R: Rhs, K: Kind>(
    rhs: &mut R,
    kind: &mut K,
    mut y: Vec<C64>,
    pure: bool,
    t_final: f64,
    seed: u64,
    opts: &TrajectoryOptions,
) -> Result<Trajectory> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t_final",
            value: t_final,
            reason: "must be positive and finite",
        });
    }
    if opts.samples < 2 {
        return Err(Error::InvalidParameter {
            name: "samples",
            value: opts.samples as f64,
            reason: "need at least two samples",
        });
    }
    let n = y.len();
    let w0 = kind.weight(&y);
    if !(w0 > 0.0) {
        return Err(Error::UndefinedState("initial state has zero norm"));
    }
    rescale(&mut y, w0, pure);
    let s = opts.samples;
    let sample_time = |k: usize| {
        if k + 1 == s {
            t_final
        } else {
            t_final * k as f64 / (s - 1) as f64
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| 1.0 - rng.random::<f64>();
    let mut threshold = draw(&mut rng);

    let first = kind.to_state(&y)?;
    let mut rec = Recorder {
        reference: opts.reference.clone(),
        keep: opts.keep_snapshots,
        traj: Trajectory {
            seed,
            t_final,
            times: Vec::with_capacity(s),
            mean_n: Vec::with_capacity(s),
            mean_a: Vec::with_capacity(s),
            parity: Vec::with_capacity(s),
            jumped: Vec::with_capacity(s),
            trace_dist_ref: None,
            jump_times: Vec::new(),
            jump_parity: Vec::new(),
            segments: Vec::new(),
            snapshots: None,
            final_state: first.clone(),
        },
    };
    rec.sample(0.0, &first, false)?;

    let mut dp = Dp5::new(n, opts.rtol, 1e-14);
    dp.prime(rhs, &y);
    let mut h = dp.initial_step(&y);
    let mut y_new = vec![ZERO; n];
    let mut y_jump = vec![ZERO; n];
    let mut t = 0.0;
    let mut segment_start = 0.0;
    let mut next = 1;
    let mut jumped_since_sample = false;

    while next < s {
        let target = sample_time(next);
        let hits = h >= target - t;
        let hh = if hits { target - t } else { h };
        let err = dp.step(rhs, &y, hh, &mut y_new);
        if !(err <= 1.0) {
            h = hh * Dp5::factor(if err.is_finite() { err } else { 1e10 });
            if h < 1e-14 * t.max(1.0) {
                return Err(Error::StepSizeUnderflow { t });
            }
            continue;
        }
        let w = kind.weight(&y_new);
        if w <= threshold {
            // Bisect the crossing inside (t, t + hh]; y at lo stays above.
            let (mut lo, mut hi) = (0.0, hh);
            while hi - lo > JUMP_TIME_TOL * (t + hi).max(1.0) {
                let mid = 0.5 * (lo + hi);
                dp.step(rhs, &y, mid, &mut y_new);
                if kind.weight(&y_new) > threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            dp.step(rhs, &y, hi, &mut y_new);
            let t_jump = t + hi;
            let w = kind.weight(&y_new);
            if !(w >= 1e-12) {
                return Err(Error::TraceCollapse { t: t_jump, trace: w });
            }
            let before = kind.to_state(&y_new)?;
            rec.segment(segment_start, t_jump, true, &before)?;
            kind.jump(&y_new, &mut y_jump);
            let wj = kind.weight(&y_jump);
            if !(wj > 0.0) {
                return Err(Error::TraceCollapse { t: t_jump, trace: wj });
            }
            rescale(&mut y_jump, wj, pure);
            std::mem::swap(&mut y, &mut y_jump);
            let after = kind.to_state(&y)?;
            rec.traj.jump_times.push(t_jump);
            rec.traj.jump_parity.push([before.mean_parity(), after.mean_parity()]);
            threshold = draw(&mut rng);
            t = t_jump;
            segment_start = t_jump;
            jumped_since_sample = true;
            dp.prime(rhs, &y);
            continue;
        }
        std::mem::swap(&mut y, &mut y_new);
        dp.accept();
        h = hh * Dp5::factor(err);
        if hits {
            t = target;
            // Keep numbers O(1): renormalize and rescale the threshold.
            let w = kind.weight(&y);
            rescale(&mut y, w, pure);
            threshold /= w;
            dp.prime(rhs, &y);
            let st = kind.to_state(&y)?;
            rec.sample(t, &st, jumped_since_sample)?;
            jumped_since_sample = false;
            next += 1;
        } else {
            t += hh;
        }
    }
    let last = kind.to_state(&y)?;
    rec.segment(segment_start, t_final, false, &last)?;
    rec.traj.final_state = last;
    Ok(rec.traj)
}

/// Pure-state trajectory of an ideally monitored oscillator (η = 1,
/// n_th = 0, no extra channels).
pub fn simulate_sse(
    p: &SystemParams,
    initial: &StateVector,
    t_final: f64,
    seed: u64,
    opts: &TrajectoryOptions,
) -> Result<Trajectory> {
    p.validate()?;
    if !p.is_pure_unraveling() {
        return Err(Error::UseSme);
    }
    if initial.dim() != p.fock_dim {
        return Err(Error::DimensionMismatch {
            left: initial.dim(),
            right: p.fock_dim,
        });
    }
    let mut rhs = PureRhs {
        h: Csr::from_dense(effective_nonhermitian(p)?.mat()),
    };
    let mut kind = PureKind {
        jump: Csr::from_dense(detected_mode(p)?.mat()),
    };
    run(
        &mut rhs,
        &mut kind,
        initial.amplitudes().to_vec(),
        true,
        t_final,
        seed,
        opts,
    )
}

/// Density-matrix trajectory of the general monitored oscillator.
pub fn simulate_sme(
    p: &SystemParams,
    initial: &DensityMatrix,
    t_final: f64,
    seed: u64,
    opts: &TrajectoryOptions,
) -> Result<Trajectory> {
    let g = conditioned_generator(p)?;
    let d = p.fock_dim;
    if initial.dim() != d {
        return Err(Error::DimensionMismatch {
            left: initial.dim(),
            right: d,
        });
    }
    let mut rhs = MixedRhs {
        dim: d,
        h: Csr::from_dense(g.h_cond.mat()),
        refills: g
            .refills
            .iter()
            .map(|c| (c.rate, Csr::from_dense(c.op.mat())))
            .collect(),
        s1: vec![ZERO; d * d],
        s2: vec![ZERO; d * d],
    };
    let mut kind = MixedKind {
        dim: d,
        jump: Csr::from_dense(g.jump.mat()),
        scratch: vec![ZERO; d * d],
        scratch2: vec![ZERO; d * d],
    };
    let mut rho = initial.clone();
    rho.hermitize();
    run(
        &mut rhs,
        &mut kind,
        linalg::vectorize(rho.mat()),
        false,
        t_final,
        seed,
        opts,
    )
}

/// Runs `n_traj` trajectories in parallel with seeds derived from
/// `master_seed`; the result is ordered by trajectory index.
pub fn run_ensemble<F>(n_traj: usize, master_seed: u64, simulate: F) -> Result<Vec<Trajectory>>
where
    F: Fn(u64) -> Result<Trajectory> + Sync,
{
    (0..n_traj as u64)
        .into_par_iter()
        .map(|i| simulate(derive_seed(master_seed, i)))
        .collect()
}

/// Pointwise ensemble means with standard errors.
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleAverage {
    pub times: Vec<f64>,
    pub n_traj: usize,
    pub mean_n: Vec<f64>,
    pub se_n: Vec<f64>,
    pub mean_re_a: Vec<f64>,
    pub se_re_a: Vec<f64>,
    pub mean_im_a: Vec<f64>,
    pub se_im_a: Vec<f64>,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn ensemble_average(trajectories: &[Trajectory]) -> Result<EnsembleAverage> {
    let first = trajectories.first().ok_or(Error::GridMismatch)?;
    if trajectories.iter().any(|t| t.times != first.times) {
        return Err(Error::GridMismatch);
    }
    let s = first.times.len();
    let mut out = EnsembleAverage {
        times: first.times.clone(),
        n_traj: trajectories.len(),
        mean_n: Vec::with_capacity(s),
        se_n: Vec::with_capacity(s),
        mean_re_a: Vec::with_capacity(s),
        se_re_a: Vec::with_capacity(s),
        mean_im_a: Vec::with_capacity(s),
        se_im_a: Vec::with_capacity(s),
    };
    let mut col = vec![0.0; trajectories.len()];
    for k in 0..s {
        for (c, t) in col.iter_mut().zip(trajectories) {
            *c = t.mean_n[k];
        }
        let (m, e) = mean_se(&col);
        out.mean_n.push(m);
        out.se_n.push(e);
        for (c, t) in col.iter_mut().zip(trajectories) {
            *c = t.mean_a[k].re;
        }
        let (m, e) = mean_se(&col);
        out.mean_re_a.push(m);
        out.se_re_a.push(e);
        for (c, t) in col.iter_mut().zip(trajectories) {
            *c = t.mean_a[k].im;
        }
        let (m, e) = mean_se(&col);
        out.mean_im_a.push(m);
        out.se_im_a.push(e);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct HeraldReport {
    pub k: f64,
    /// Minimum click-free duration `k/Γ_rel`.
    pub min_duration: f64,
    pub intervals: Vec<Segment>,
}

/// Click-free stretches longer than `k/Γ_rel`, each with the fidelity of its
/// end state to the trajectory's reference.
pub fn detect_heralds(traj: &Trajectory, gamma_rel: f64, k: f64) -> Result<HeraldReport> {
    if !(gamma_rel > 0.0) {
        return Err(Error::InvalidParameter {
            name: "gamma_rel",
            value: gamma_rel,
            reason: "must be positive",
        });
    }
    let min_duration = k / gamma_rel;
    Ok(HeraldReport {
        k,
        min_duration,
        intervals: traj
            .segments
            .iter()
            .filter(|s| s.end - s.start > min_duration)
            .cloned()
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RelaxationFit {
    pub rate: f64,
    pub r_squared: f64,
    /// Click-free segment `(start, end)` the fit used.
    pub segment: (f64, f64),
}

/// Distances above this are outside the linear (exponential) regime.
const FIT_UPPER: f64 = 0.1;
/// Distances below this approach the integration-error plateau (near 1e-6
/// at the default tolerance) and bend the fit.
const FIT_FLOOR: f64 = 1e-5;

/// Exponential decay rate of `dist` against `times`, from the points in the
/// linear regime; `None` unless they span two decades.
pub fn fit_decay(times: &[f64], dist: &[f64]) -> Option<(f64, f64)> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (t, d) in times.iter().zip(dist) {
        if *d <= FIT_UPPER && *d >= FIT_FLOOR {
            x.push(*t);
            y.push(d.ln());
        }
    }
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if x.len() < 5 || hi - lo < 100f64.ln() {
        return None;
    }
    linear_fit(&x, &y).map(|f| (-f.slope, f.r_squared))
}

/// Fit the post-click decay of the recorded reference distance. Uses the
/// longest click-free segment whose distance falls over two decades.
pub fn fit_relaxation(traj: &Trajectory) -> Result<RelaxationFit> {
    let dist = traj.trace_dist_ref.as_ref().ok_or(Error::MissingReference)?;
    let mut best: Option<RelaxationFit> = None;
    for seg in &traj.segments {
        // samples strictly inside the segment
        let idx: Vec<usize> = (0..traj.times.len())
            .filter(|&k| traj.times[k] > seg.start && traj.times[k] < seg.end)
            .collect();
        if idx.len() < 5 {
            continue;
        }
        let ts: Vec<f64> = idx.iter().map(|&k| traj.times[k]).collect();
        let ds: Vec<f64> = idx.iter().map(|&k| dist[k]).collect();
        if let Some((rate, r2)) = fit_decay(&ts, &ds) {
            let longer = best.is_none_or(|b| seg.end - seg.start > b.segment.1 - b.segment.0);
            if longer {
                best = Some(RelaxationFit {
                    rate,
                    r_squared: r2,
                    segment: (seg.start, seg.end),
                });
            }
        }
    }
    best.ok_or(Error::InsufficientDecay)
}
