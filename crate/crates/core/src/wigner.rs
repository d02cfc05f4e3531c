//! Wigner function by displaced parity, `W(α) = Tr[ρ D(α) Π D†(α)] / π`.
//!
//! With this normalization the vacuum peaks at `1/π` and `∫W d²α = 1/2`.
//! `D(α)ΠD†(α) = D(2α)Π`, and the columns `D(β)|n⟩` follow from
//! `D(β)a† = (a† − β*)D(β)` starting at the coherent state `|β⟩`. The
//! recurrence only moves amplitude upward in the Fock ladder, so the
//! components below the cutoff are those of the untruncated operator.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::linalg::ZERO;

/// Minima above this count as non-negative.
pub const NEGATIVITY_TOL: f64 = 1e-9;
pub const COARSE_RESOLUTION: usize = 101;
pub const REFINE_RESOLUTION: usize = 11;
pub const REFINE_LEVELS: usize = 3;
pub const REFINE_FACTOR: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub center: C64,
    pub half_width: f64,
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(center: C64, half_width: f64, resolution: usize) -> Self {
        GridSpec {
            center,
            half_width,
            resolution,
        }
    }

    /// Coordinate of grid index `i` along one axis, relative to the center.
    fn offset(&self, i: usize) -> f64 {
        if self.resolution == 1 {
            return 0.0;
        }
        self.half_width * (2.0 * i as f64 / (self.resolution - 1) as f64 - 1.0)
    }

    /// Grid point `(i, j)`: `i` along Re α, `j` along Im α.
    pub fn point(&self, i: usize, j: usize) -> C64 {
        self.center + C64::new(self.offset(i), self.offset(j))
    }

    pub fn spacing(&self) -> f64 {
        if self.resolution < 2 {
            0.0
        } else {
            2.0 * self.half_width / (self.resolution - 1) as f64
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WignerGrid {
    #[serde(flatten)]
    pub spec: GridSpec,
    /// Row-major in Im α: `values[j * resolution + i]`.
    pub values: Vec<f64>,
    pub min_value: f64,
    pub argmin: C64,
}

impl WignerGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.resolution + i]
    }

    /// Riemann sum of `W` over the grid.
    pub fn integral(&self) -> f64 {
        let h = self.spec.spacing();
        crate::stats::pairwise_sum(&self.values) * h * h
    }
}

/// Evaluates `W` at single points; holds the recurrence buffers.
pub struct WignerEvaluator<'a> {
    rho: &'a DensityMatrix,
    col: Vec<C64>,
    next: Vec<C64>,
}

impl<'a> WignerEvaluator<'a> {
    pub fn new(rho: &'a DensityMatrix) -> Self {
        let d = rho.dim();
        WignerEvaluator {
            rho,
            col: vec![ZERO; d],
            next: vec![ZERO; d],
        }
    }

    pub fn eval(&mut self, alpha: C64) -> f64 {
        let d = self.rho.dim();
        let beta = alpha * 2.0;
        let bc = beta.conj();
        // |β⟩ amplitudes
        self.col[0] = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
        for m in 1..d {
            self.col[m] = self.col[m - 1] * beta / (m as f64).sqrt();
        }
        let mut acc = ZERO;
        let rho = self.rho.mat();
        for n in 0..d {
            if n > 0 {
                let s = 1.0 / (n as f64).sqrt();
                self.next[0] = -bc * self.col[0] * s;
                for m in 1..d {
                    self.next[m] = (self.col[m - 1] * (m as f64).sqrt() - bc * self.col[m]) * s;
                }
                std::mem::swap(&mut self.col, &mut self.next);
            }
            // Σ_m ρ_{nm} ⟨m|D|n⟩ (−1)^n
            let mut row = ZERO;
            for m in 0..d {
                row += rho[(n, m)] * self.col[m];
            }
            if n % 2 == 0 {
                acc += row;
            } else {
                acc -= row;
            }
        }
        acc.re / std::f64::consts::PI
    }
}

fn check_domain(rho: &DensityMatrix, spec: &GridSpec) -> Result<()> {
    if spec.resolution == 0 || !(spec.half_width >= 0.0) || !spec.half_width.is_finite() {
        return Err(Error::InvalidParameter {
            name: "grid",
            value: spec.half_width,
            reason: "resolution must be positive and half-width finite and non-negative",
        });
    }
    let reach = spec.center.norm() + std::f64::consts::SQRT_2 * spec.half_width;
    let limit = rho.dim() as f64;
    if reach * reach > limit {
        return Err(Error::TruncationDomain {
            value: reach * reach,
            limit,
        });
    }
    Ok(())
}

fn evaluate(rho: &DensityMatrix, spec: &GridSpec) -> WignerGrid {
    let r = spec.resolution;
    let values: Vec<f64> = (0..r)
        .into_par_iter()
        .flat_map_iter(|j| {
            let mut ev = WignerEvaluator::new(rho);
            (0..r).map(move |i| ev.eval(spec.point(i, j))).collect::<Vec<_>>()
        })
        .collect();
    let (k, min_value) =
        values.iter().copied().enumerate().fold(
            (0, f64::INFINITY),
            |(bk, bv), (k, v)| if v < bv { (k, v) } else { (bk, bv) },
        );
    WignerGrid {
        spec: *spec,
        argmin: spec.point(k % r, k / r),
        min_value,
        values,
    }
}

/// `W` on a square grid. The grid must stay within `|α|² ≤ dim`.
pub fn wigner(rho: &DensityMatrix, spec: &GridSpec) -> Result<WignerGrid> {
    check_domain(rho, spec)?;
    Ok(evaluate(rho, spec))
}

/// Refined minimum of `W` and the negativity `max(0, −min W)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WignerMinimum {
    pub negativity: f64,
    pub min_value: f64,
    pub argmin: C64,
}

/// Coarse scan around `⟨a⟩` covering the state's spread, then nested grids
/// around the coarse minimum.
pub fn negativity(rho: &DensityMatrix) -> Result<WignerMinimum> {
    let center = rho.mean_a();
    let spread = (rho.mean_n() - center.norm_sqr()).max(0.0);
    let coarse = GridSpec::new(center, 2.0 + 2.0 * spread.sqrt(), COARSE_RESOLUTION);
    let grid = evaluate(rho, &coarse);
    let (mut best, mut best_at) = (grid.min_value, grid.argmin);
    let mut half = coarse.spacing();
    for _ in 0..REFINE_LEVELS {
        let g = evaluate(rho, &GridSpec::new(best_at, half, REFINE_RESOLUTION));
        if g.min_value < best {
            best = g.min_value;
            best_at = g.argmin;
        }
        half /= REFINE_FACTOR;
    }
    Ok(WignerMinimum {
        negativity: if best >= -NEGATIVITY_TOL { 0.0 } else { -best },
        min_value: best,
        argmin: best_at,
    })
}
