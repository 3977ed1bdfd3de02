//! Reference quadrature for the Cauchy-Green transform
//! `(1 / 2 pi i) iint g(zeta) / (zeta - z) dzeta ^ dzetabar` on a disk.
//!
//! Only used to validate the monomial right inverse of `d_bar`. The angular
//! integral of each Fourier mode against the kernel is done in closed form; the
//! remaining radial integrals are split at `|z|`, where the kernel jumps, and
//! integrated by Gauss-Legendre on a spectral interpolant of the radial profile.

use std::f64::consts::PI;

use super::grid::{CollocationGrid, GridValues};
use crate::error::{Error, Result};
use crate::linalg::C64;

const GL_POINTS: usize = 48;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Barycentric interpolant through the symmetric `2 M_r` Chebyshev nodes, with
/// values on the negative half filled in by the parity of the mode.
struct RadialInterpolant {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialInterpolant {
    fn new(grid: &CollocationGrid) -> Self {
        let m = grid.radial();
        let mut nodes = Vec::with_capacity(2 * m);
        let mut weights = Vec::with_capacity(2 * m);
        for k in 1..=2 * m {
            let angle = (2 * k - 1) as f64 * PI / (4 * m) as f64;
            nodes.push(grid.radius() * angle.cos());
            weights.push(if k % 2 == 0 { angle.sin() } else { -angle.sin() });
        }
        RadialInterpolant { nodes, weights }
    }

    /// `values` holds the profile at the positive nodes (grid order).
    fn eval(&self, values: &[C64], parity: f64, x: f64) -> C64 {
        let m = values.len();
        let value_at = |k: usize| if k < m { values[k] } else { values[2 * m - 1 - k] * parity };
        let mut num = C64::default();
        let mut den = 0.0;
        for (k, (&xk, &wk)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let diff = x - xk;
            if diff == 0.0 {
                return value_at(k);
            }
            let c = wk / diff;
            num += value_at(k) * c;
            den += c;
        }
        num / den
    }
}

/// Quadrature value of the Cauchy-Green transform of grid samples at `z`.
pub fn cauchy_green_quadrature(grid: &CollocationGrid, samples: &GridValues, z: C64) -> Result<Vec<C64>> {
    let r = grid.radius();
    if z.norm() >= r {
        return Err(Error::OutsideDisk { modulus: z.norm(), radius: r });
    }
    if grid.nodes().any(|node| (node - z).norm() < 1e-9) {
        return Err(Error::NodeCollision);
    }
    let n = samples.n();
    let (mr, ma) = (grid.radial(), grid.angular());
    let top = ((ma - 1) / 2) as i64;
    let interp = RadialInterpolant::new(grid);
    let (gx, gw) = gauss_legendre(GL_POINTS);
    let modz = z.norm();
    let mut out = vec![C64::default(); n];
    let mut profile = vec![vec![C64::default(); mr]; n];
    for m in -top..=top {
        for i in 0..mr {
            for c in 0..n {
                let mut acc = C64::default();
                for l in 0..ma {
                    acc += samples.at(i * ma + l)[c] * grid.root_power(-m, l);
                }
                profile[c][i] = acc / ma as f64;
            }
        }
        let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
        let (lo, hi, sign) = if m <= 0 { (0.0, modz, 1.0) } else { (modz, r, -1.0) };
        if hi <= lo {
            continue;
        }
        let (mid, half) = (0.5 * (hi + lo), 0.5 * (hi - lo));
        for (x, w) in gx.iter().zip(&gw) {
            let rho = mid + half * x;
            let kernel = if m <= 0 {
                (C64::new(rho, 0.0) / z).powu((1 - m) as u32)
            } else if m == 1 {
                C64::new(1.0, 0.0)
            } else {
                (z / rho).powu((m - 1) as u32)
            };
            let weight = kernel * (2.0 * sign * half * w);
            for c in 0..n {
                out[c] += interp.eval(&profile[c], parity, rho) * weight;
            }
        }
    }
    Ok(out)
}
