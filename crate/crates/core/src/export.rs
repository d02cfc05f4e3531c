//! CSV artifacts for the plotting side.
//!
//! Comma separated, one header row, LF line endings, every value printed
//! with 17 significant digits in scientific notation (flags as 0/1, missing
//! values as `nan`).

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::spectral::{MixedSpectrum, PureSpectrum};
use crate::sweep::{MapCell, PointReport};
use crate::trajectory::Trajectory;
use crate::wigner::WignerGrid;

pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Renders a table; each row must have one value per header column.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", format_value(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

pub const TRAJECTORY_HEADER: [&str; 6] = ["t", "n_expect", "re_a", "im_a", "jumped_flag", "trace_dist_ref"];

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let dist = traj.trace_dist_ref.as_deref();
    csv(
        &TRAJECTORY_HEADER,
        (0..traj.times.len()).map(|k| {
            vec![
                traj.times[k],
                traj.mean_n[k],
                traj.mean_a[k].re,
                traj.mean_a[k].im,
                flag(traj.jumped[k]),
                dist.map_or(f64::NAN, |d| d[k]),
            ]
        }),
    )
}

pub fn jumps_csv(traj: &Trajectory) -> String {
    csv(
        &["t_jump", "parity_before", "parity_after"],
        traj.jump_times
            .iter()
            .zip(&traj.jump_parity)
            .map(|(t, p)| vec![*t, p[0], p[1]]),
    )
}

pub fn wigner_csv(grid: &WignerGrid) -> String {
    let r = grid.spec.resolution;
    csv(
        &["re_alpha", "im_alpha", "w"],
        (0..r * r).map(|k| {
            let a = grid.spec.point(k % r, k / r);
            vec![a.re, a.im, grid.values[k]]
        }),
    )
}

pub fn sweep_csv(points: &[PointReport]) -> String {
    let kerr: Vec<f64> = points.iter().map(|p| p.kerr).collect();
    sweep_axis_csv("K_over_kappa", &kerr, points)
}

/// Sweep table whose first column holds `values` under the name `column`.
pub fn sweep_axis_csv(column: &str, values: &[f64], points: &[PointReport]) -> String {
    csv(
        &[
            column,
            "gamma_rel",
            "gamma_jump",
            "negativity",
            "gamma_asy",
            "admissible",
        ],
        values.iter().zip(points).map(|(v, p)| {
            vec![
                *v,
                p.gamma_rel,
                p.gamma_jump,
                p.negativity.unwrap_or(f64::NAN),
                p.gamma_asy.unwrap_or(f64::NAN),
                flag(p.admissible),
            ]
        }),
    )
}

pub fn n_max_map_csv(cells: &[MapCell]) -> String {
    csv(
        &["delta_over_kappa", "drive_power", "n_max", "n_max_optimized"],
        cells
            .iter()
            .map(|c| vec![c.delta, c.drive_power, c.n_max, c.n_max_optimized.unwrap_or(f64::NAN)]),
    )
}

pub fn xi_map_csv(points: &[PointReport]) -> String {
    csv(
        &["re_xi", "im_xi", "gamma_rel", "gamma_jump", "negativity", "admissible"],
        points.iter().map(|p| {
            vec![
                p.xi.re,
                p.xi.im,
                p.gamma_rel,
                p.gamma_jump,
                p.negativity.unwrap_or(f64::NAN),
                flag(p.admissible),
            ]
        }),
    )
}

/// Pure spectrum with parity labels (+1, −1, or nan) and a stability flag.
pub fn pure_spectrum_csv(spec: &PureSpectrum) -> String {
    csv(
        &["re", "im", "parity", "stable"],
        spec.eigenvalues.iter().enumerate().map(|(k, h)| {
            vec![
                h.re,
                h.im,
                spec.parity_labels[k].map_or(f64::NAN, |p| p.sign()),
                flag(k == spec.stable_index),
            ]
        }),
    )
}

pub fn mixed_spectrum_csv(spec: &MixedSpectrum) -> String {
    csv(
        &["re", "im", "stable"],
        spec.eigenvalues
            .iter()
            .enumerate()
            .map(|(k, l)| vec![l.re, l.im, flag(k == 0)]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_dialect() {
        let s = csv(&["a", "b"], vec![vec![1.0, -0.1], vec![f64::NAN, 1e-300]]);
        assert_eq!(
            s,
            "a,b\n1.0000000000000000e0,-1.0000000000000001e-1\nnan,1.0000000000000000e-300\n"
        );
        for line in s.lines().skip(1) {
            for field in line.split(',') {
                if field != "nan" {
                    let v: f64 = field.parse().unwrap();
                    assert_eq!(format_value(v), field);
                }
            }
        }
    }
}
