//! Dormand–Prince 5(4) steps for linear complex systems `y' = f(y)`.

use num_complex::Complex64 as C64;

use crate::linalg::ZERO;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂ (fifth minus embedded fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Autonomous right-hand side writing `f(y)` into `out`.
pub trait Rhs {
    fn eval(&mut self, y: &[C64], out: &mut [C64]);
}

impl<F: FnMut(&[C64], &mut [C64])> Rhs for F {
    fn eval(&mut self, y: &[C64], out: &mut [C64]) {
        self(y, out)
    }
}

/// Stage storage for one system size; reused across steps.
pub struct Dp5 {
    pub rtol: f64,
    pub atol: f64,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    err: Vec<C64>,
}

fn axpy_into(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..out.len() {
        let mut acc = ZERO;
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        out[i] = y[i] + acc * h;
    }
}

fn l2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl Dp5 {
    pub fn new(n: usize, rtol: f64, atol: f64) -> Self {
        let z = || vec![ZERO; n];
        Dp5 {
            rtol,
            atol,
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            err: z(),
        }
    }

    /// `k1 = f(y)` must already sit in the first stage slot; see
    /// [`Dp5::prime`]. Writes the fifth-order solution into `y_new` and
    /// returns the scaled error norm (≤ 1 means acceptable). The last stage
    /// is `f(y_new)`; [`Dp5::accept`] moves it into the first slot.
    pub fn step<F: Rhs>(&mut self, f: &mut F, y: &[C64], h: f64, y_new: &mut [C64]) -> f64 {
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        axpy_into(tmp, y, h, &[(A21, k1)]);
        f.eval(tmp, k2);
        axpy_into(tmp, y, h, &[(A31, k1), (A32, k2)]);
        f.eval(tmp, k3);
        axpy_into(tmp, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
        f.eval(tmp, k4);
        axpy_into(tmp, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
        f.eval(tmp, k5);
        axpy_into(tmp, y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
        f.eval(tmp, k6);
        axpy_into(y_new, y, h, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
        f.eval(y_new, k7);
        for i in 0..y.len() {
            self.err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        }
        let scale = self.atol + self.rtol * l2(y).max(l2(y_new));
        l2(&self.err) / scale
    }

    pub fn prime<F: Rhs>(&mut self, f: &mut F, y: &[C64]) {
        f.eval(y, &mut self.k[0]);
    }

    /// First-same-as-last: reuse the final stage as the next `k1`.
    pub fn accept(&mut self) {
        self.k.swap(0, 6);
    }

    /// Step-size update factor from a scaled error.
    pub fn factor(err: f64) -> f64 {
        if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        }
    }

    /// Rough initial step from the size of `f(y)`.
    pub fn initial_step(&self, y: &[C64]) -> f64 {
        let fy = l2(&self.k[0]);
        let ny = l2(y);
        if fy == 0.0 {
            1.0
        } else {
            (0.01 * ny / fy).clamp(1e-8, 1.0)
        }
    }
}
