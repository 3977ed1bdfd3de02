use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::poly::{mono_count, PolyDiskMap};
use crate::error::{Error, Result};
use crate::linalg::C64;

/// Largest admissible condition number of the column-normalized fitting operator.
pub const MAX_CONDITION: f64 = 1e6;

/// Polar collocation grid `z_{m,l} = rho_m e^{i theta_l}` on `D_r`.
///
/// Radial nodes are the positive half of the `2 M_r`-point Gauss-Chebyshev rule
/// on `[-r, r]`, so they lie in `(0, r)` and never touch the center;
/// angular nodes are equispaced.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationGrid {
    radius: f64,
    radial: usize,
    angular: usize,
    /// radial nodes divided by the radius, decreasing
    t: Vec<f64>,
    /// `e^{2 pi i l / M_theta}`
    roots: Vec<C64>,
}

impl CollocationGrid {
    pub fn new(radius: f64, radial: usize, angular: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::BadRadius(radius));
        }
        if radial == 0 || angular == 0 {
            return Err(Error::BadGrid("grid needs at least one node in each direction".into()));
        }
        let t = (1..=radial)
            .map(|m| ((2 * m - 1) as f64 * PI / (4 * radial) as f64).cos())
            .collect();
        let roots = (0..angular)
            .map(|l| C64::from_polar(1.0, 2.0 * PI * l as f64 / angular as f64))
            .collect();
        Ok(CollocationGrid { radius, radial, angular, t, roots })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn radial(&self) -> usize {
        self.radial
    }

    pub fn angular(&self) -> usize {
        self.angular
    }

    pub fn len(&self) -> usize {
        self.radial * self.angular
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.radius * self.t[i]
    }

    pub fn normalized_rho(&self) -> &[f64] {
        &self.t
    }

    /// `e^{i m theta_l}` by exact table lookup.
    #[inline]
    pub fn root_power(&self, m: i64, l: usize) -> C64 {
        let a = self.angular as i64;
        let idx = ((m * l as i64) % a + a) % a;
        self.roots[idx as usize]
    }

    /// Node `i * M_theta + l`.
    pub fn node(&self, index: usize) -> C64 {
        let (i, l) = (index / self.angular, index % self.angular);
        self.roots[l] * self.rho(i)
    }

    pub fn nodes(&self) -> impl Iterator<Item = C64> + '_ {
        (0..self.len()).map(move |k| self.node(k))
    }

    /// Same node pattern on another radius.
    pub fn rescaled(&self, radius: f64) -> Self {
        CollocationGrid { radius, ..self.clone() }
    }

    /// Evaluate a disk map at every node.
    ///
    /// Radial sums per angular frequency first, then synthesis over the
    /// frequencies; the accumulation order is fixed.
    pub fn eval(&self, f: &PolyDiskMap) -> GridValues {
        let n = f.n();
        let deg = f.degree();
        let nfreq = 2 * deg + 1;
        let mut out = GridValues::zeros(n, self.len());
        let mut radial_sum = vec![C64::default(); nfreq * n];
        let mut pow = vec![0.0; deg + 1];
        for i in 0..self.radial {
            let rho = self.rho(i);
            pow[0] = 1.0;
            for d in 1..=deg {
                pow[d] = pow[d - 1] * rho;
            }
            radial_sum.iter_mut().for_each(|c| *c = C64::default());
            for d in 0..=deg {
                for k in 0..=d {
                    let j = d - k;
                    let m = j as i64 - k as i64 + deg as i64;
                    let slot = &mut radial_sum[m as usize * n..(m as usize + 1) * n];
                    for (s, c) in slot.iter_mut().zip(f.coeff(j, k)) {
                        *s += c * pow[d];
                    }
                }
            }
            for l in 0..self.angular {
                let node = i * self.angular + l;
                let dst = out.at_mut(node);
                for mi in 0..nfreq {
                    let w = self.root_power(mi as i64 - deg as i64, l);
                    for (o, s) in dst.iter_mut().zip(&radial_sum[mi * n..(mi + 1) * n]) {
                        *o += s * w;
                    }
                }
            }
        }
        out
    }

    /// `M_theta` points on the boundary circle `|z| = r`.
    pub fn boundary_ring(&self) -> impl Iterator<Item = C64> + '_ {
        self.roots.iter().map(move |w| w * self.radius)
    }
}

/// Values of a `C^n`-valued function at the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridValues {
    n: usize,
    data: Vec<C64>,
}

impl GridValues {
    pub fn zeros(n: usize, nodes: usize) -> Self {
        GridValues { n, data: vec![C64::default(); n * nodes] }
    }

    pub fn from_fn(grid: &CollocationGrid, n: usize, f: impl Fn(C64) -> Vec<C64>) -> Self {
        let mut out = Self::zeros(n, grid.len());
        for (k, z) in grid.nodes().enumerate() {
            out.at_mut(k).copy_from_slice(&f(z));
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> usize {
        self.data.len() / self.n
    }

    #[inline]
    pub fn at(&self, node: usize) -> &[C64] {
        &self.data[node * self.n..(node + 1) * self.n]
    }

    #[inline]
    pub fn at_mut(&mut self, node: usize) -> &mut [C64] {
        &mut self.data[node * self.n..(node + 1) * self.n]
    }

    /// `max_node |value|` with the Euclidean norm on `C^n`.
    pub fn sup_norm(&self) -> f64 {
        self.data
            .chunks_exact(self.n)
            .map(|v| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn sup_dist(&self, other: &GridValues) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .chunks_exact(self.n)
            .zip(other.data.chunks_exact(self.n))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// One angular frequency block of the least-squares fit.
#[derive(Clone, Debug)]
struct FrequencyBlock {
    m: i64,
    /// total degrees `|m|, |m| + 2, ...`
    degrees: Vec<usize>,
    /// pseudoinverse of the normalized radial basis, `L x M_r`
    pinv: DMatrix<f64>,
}

/// Precomputed least-squares operator from grid samples to coefficients of
/// degree `<= N`, for one `(N, M_r, M_theta)` triple.
///
/// The angular DFT block-diagonalizes the monomial basis on a polar grid, so
/// the pseudoinverse is stored per frequency. The radius only rescales
/// coefficients and is applied at fit time.
#[derive(Clone, Debug)]
pub struct Fitter {
    degree: usize,
    radial: usize,
    angular: usize,
    blocks: Vec<FrequencyBlock>,
    condition: f64,
}

impl Fitter {
    pub fn new(degree: usize, radial: usize, angular: usize) -> Result<Self> {
        let grid = CollocationGrid::new(1.0, radial, angular)?;
        if angular < 2 * degree + 1 {
            return Err(Error::BadGrid(format!(
                "{angular} angular nodes alias frequencies of degree {degree} (need {})",
                2 * degree + 1
            )));
        }
        if radial < degree / 2 + 1 {
            return Err(Error::BadGrid(format!("{radial} radial nodes cannot resolve degree {degree}")));
        }
        if radial * angular < 2 * mono_count(degree) {
            return Err(Error::BadGrid(format!(
                "{} nodes for {} coefficients (need twice as many)",
                radial * angular,
                mono_count(degree)
            )));
        }
        let t = grid.normalized_rho();
        let mut blocks = Vec::with_capacity(2 * degree + 1);
        let (mut smax, mut smin) = (0.0_f64, f64::INFINITY);
        for m in -(degree as i64)..=degree as i64 {
            let degrees: Vec<usize> = (m.unsigned_abs() as usize..=degree).step_by(2).collect();
            let mut basis = DMatrix::from_fn(radial, degrees.len(), |i, c| t[i].powi(degrees[c] as i32));
            for mut col in basis.column_iter_mut() {
                let norm = col.norm();
                col /= norm;
            }
            let svd = basis.clone().svd(true, true);
            smax = smax.max(svd.singular_values.max());
            smin = smin.min(svd.singular_values.min());
            // Undo the column scaling inside the pseudoinverse.
            let mut pinv = svd.pseudo_inverse(0.0).map_err(|e| Error::BadGrid(e.to_string()))?;
            for (r, d) in degrees.iter().enumerate() {
                let norm = (0..radial).map(|i| t[i].powi(2 * *d as i32)).sum::<f64>().sqrt();
                pinv.row_mut(r).scale_mut(1.0 / norm);
            }
            blocks.push(FrequencyBlock { m, degrees, pinv });
        }
        let condition = smax / smin;
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned { condition });
        }
        Ok(Fitter { degree, radial, angular, blocks, condition })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    fn check_grid(&self, grid: &CollocationGrid) {
        assert!(
            grid.radial() == self.radial && grid.angular() == self.angular,
            "fitter built for a {}x{} grid, got {}x{}",
            self.radial,
            self.angular,
            grid.radial(),
            grid.angular()
        );
    }

    /// Least-squares fit of grid samples in the monomial basis.
    pub fn fit(&self, grid: &CollocationGrid, samples: &GridValues) -> PolyDiskMap {
        self.check_grid(grid);
        let n = samples.n();
        let deg = self.degree as i64;
        let nfreq = 2 * self.degree + 1;
        let inv_m = 1.0 / self.angular as f64;
        // spectrum[(mi * M_r + i) * n + c]
        let mut spectrum = vec![C64::default(); nfreq * self.radial * n];
        for i in 0..self.radial {
            for mi in 0..nfreq {
                let m = mi as i64 - deg;
                let slot = &mut spectrum[(mi * self.radial + i) * n..(mi * self.radial + i + 1) * n];
                for l in 0..self.angular {
                    let w = grid.root_power(-m, l);
                    for (s, v) in slot.iter_mut().zip(samples.at(i * self.angular + l)) {
                        *s += v * w;
                    }
                }
                slot.iter_mut().for_each(|s| *s *= inv_m);
            }
        }
        let mut out = PolyDiskMap::zeros(n, grid.radius(), self.degree);
        let r = grid.radius();
        for (mi, block) in self.blocks.iter().enumerate() {
            for (row, &d) in block.degrees.iter().enumerate() {
                let j = ((d as i64 + block.m) / 2) as usize;
                let k = ((d as i64 - block.m) / 2) as usize;
                let scale = r.powi(-(d as i32));
                let slot = out.coeff_mut(j, k);
                for i in 0..self.radial {
                    let p = block.pinv[(row, i)] * scale;
                    let src = &spectrum[(mi * self.radial + i) * n..(mi * self.radial + i + 1) * n];
                    for (o, s) in slot.iter_mut().zip(src) {
                        *o += s * p;
                    }
                }
            }
        }
        out
    }

    /// Fit and report the largest misfit at the nodes.
    pub fn fit_with_residual(&self, grid: &CollocationGrid, samples: &GridValues) -> (PolyDiskMap, f64) {
        let f = self.fit(grid, samples);
        let misfit = grid.eval(&f).sup_dist(samples);
        (f, misfit)
    }
}

/// Fit grid samples at degree `N` (builds a fresh operator).
pub fn fit_grid(grid: &CollocationGrid, samples: &GridValues, degree: usize) -> Result<PolyDiskMap> {
    Ok(Fitter::new(degree, grid.radial(), grid.angular())?.fit(grid, samples))
}
