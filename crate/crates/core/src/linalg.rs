//! Small helpers for moving between `C^n` and interleaved `R^{2n}`.
//!
//! Coordinates are always interleaved `(x1, y1, ..., xn, yn)`, and
//! multiplication by `i` is the block rotation `J0`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;

/// Interleave a complex vector into real coordinates.
pub fn to_real(v: &[C64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * v.len());
    for c in v {
        out.push(c.re);
        out.push(c.im);
    }
    out
}

/// Inverse of [`to_real`]. Panics on odd length.
pub fn to_complex(p: &[f64]) -> Vec<C64> {
    assert!(p.len() % 2 == 0, "odd real dimension {}", p.len());
    p.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect()
}

/// The standard complex structure on `R^{2n}`.
pub fn j0(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for b in 0..n {
        m[(2 * b, 2 * b + 1)] = -1.0;
        m[(2 * b + 1, 2 * b)] = 1.0;
    }
    m
}

pub fn cnorm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn cdist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Spectral norm; cheap Frobenius bound first.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    let fro = m.norm();
    if fro == 0.0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Apply a real `2n x 2n` matrix to a complex vector viewed in `R^{2n}`.
pub fn apply_real(m: &DMatrix<f64>, v: &[C64], out: &mut [C64]) {
    let n = v.len();
    for r in 0..n {
        let mut re = 0.0;
        let mut im = 0.0;
        for c in 0..n {
            let (x, y) = (v[c].re, v[c].im);
            re += m[(2 * r, 2 * c)] * x + m[(2 * r, 2 * c + 1)] * y;
            im += m[(2 * r + 1, 2 * c)] * x + m[(2 * r + 1, 2 * c + 1)] * y;
        }
        out[r] = C64::new(re, im);
    }
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Numerical rank with a relative singular value cutoff.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * top).count()
}

/// Radical inverse in the given base; deterministic probe points.
pub fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

const PRIMES: [usize; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// `count` Halton points in the cube `[-half, half]^dim` (dim <= 16).
pub fn halton_box(dim: usize, half: f64, count: usize) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len());
    (1..=count)
        .map(|i| {
            (0..dim)
                .map(|d| half * (2.0 * halton(i, PRIMES[d]) - 1.0))
                .collect()
        })
        .collect()
}
