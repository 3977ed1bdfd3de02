//! The nonlinear Cauchy-Riemann equation on a disk.
//!
//! With `d_bar f = (f_x + J0 f_y) / 2` and `q_J = (J0 + J)^{-1} (J0 - J)`, a map
//! is `J`-holomorphic (`f_y = J(f) f_x`) exactly when
//! `d_bar f = q_J(f) d f`. Applying the right inverse `T` of `d_bar` turns this
//! into the fixed point problem `f = h + T(q_J(f) d f)` with `h` holomorphic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ACStructure;
use crate::kernel::{CollocationGrid, Fitter, GridValues, PolyDiskMap};
use crate::linalg::{apply_real, to_real, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub radial: usize,
    pub angular: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams { radial: 24, angular: 64 }
    }
}

/// Numerical knobs of the Picard solver. Every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    #[serde(rename = "N")]
    pub degree: usize,
    pub grid: GridParams,
    pub tol_fix: f64,
    pub max_iter: usize,
    pub blowup: f64,
    pub q_cap: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { degree: 16, grid: GridParams::default(), tol_fix: 1e-10, max_iter: 200, blowup: 1e3, q_cap: 0.5 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.degree < 2 {
            return Err(Error::Invalid(format!("degree {} must be at least 2", self.degree)));
        }
        if !(self.tol_fix > 0.0 && self.blowup > 0.0 && self.q_cap > 0.0) {
            return Err(Error::Invalid("solver tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Invalid("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    Diverged,
    MaxIter,
    QCapExceeded,
    /// Steps fell below `tol_fix` but the truncation residual stayed above
    /// tolerance; the degree is too low for the data.
    Stagnated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub final_residual: f64,
    pub residual_tolerance: f64,
    pub step_history: Vec<f64>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub disk: PolyDiskMap,
    pub report: SolveReport,
}

impl SolveOutcome {
    /// Turn any non-converged status into an error.
    pub fn require_converged(self) -> Result<Self> {
        if self.report.converged() {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                status: self.report.status,
                iterations: self.report.iterations,
                residual: self.report.final_residual,
            })
        }
    }
}

/// Discretization shared by all solves with one configuration.
#[derive(Clone, Debug)]
pub struct Solver {
    cfg: SolverConfig,
    /// fits `d_bar`-data at degree `N - 1`, so `T` lands back in degree `N`
    rhs_fitter: Fitter,
}

impl Solver {
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let rhs_fitter = Fitter::new(cfg.degree - 1, cfg.grid.radial, cfg.grid.angular)?;
        Ok(Solver { cfg, rhs_fitter })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn grid(&self, radius: f64) -> Result<CollocationGrid> {
        CollocationGrid::new(radius, self.cfg.grid.radial, self.cfg.grid.angular)
    }

    fn check_degree(&self, f: &PolyDiskMap) -> Result<()> {
        if f.degree() > self.cfg.degree {
            return Err(Error::Invalid(format!("disk degree {} exceeds solver degree {}", f.degree(), self.cfg.degree)));
        }
        Ok(())
    }

    /// `q_J(f) d f` at the grid nodes, plus the sup of the values of `f`.
    fn beltrami_term(&self, f: &PolyDiskMap, s: &ACStructure, grid: &CollocationGrid) -> Result<(GridValues, f64)> {
        if f.n() != s.n() {
            return Err(Error::Dimension { expected: s.n(), found: f.n() });
        }
        let vals = grid.eval(f);
        let dvals = grid.eval(&f.d());
        let mut out = GridValues::zeros(f.n(), grid.len());
        if s.is_standard() {
            for node in 0..grid.len() {
                s.beltrami_at(&to_real(vals.at(node)))?;
            }
            return Ok((out, vals.sup_norm()));
        }
        for node in 0..grid.len() {
            let p = to_real(vals.at(node));
            let q = s.beltrami_at(&p)?;
            let fro = q.norm();
            if fro > self.cfg.q_cap {
                let norm = crate::linalg::operator_norm(&q);
                if norm > self.cfg.q_cap {
                    return Err(Error::QCapExceeded { norm, cap: self.cfg.q_cap });
                }
            }
            apply_real(&q, dvals.at(node), out.at_mut(node));
        }
        Ok((out, vals.sup_norm()))
    }

    /// `sup_nodes |f_y - J(f) f_x|`.
    pub fn residual(&self, f: &PolyDiskMap, s: &ACStructure) -> Result<f64> {
        if f.n() != s.n() {
            return Err(Error::Dimension { expected: s.n(), found: f.n() });
        }
        let grid = self.grid(f.radius())?;
        residual_on(&grid, f, s)
    }

    /// Holomorphic reduction `h = f - T(q_J(f) d f)`.
    pub fn phi_forward(&self, f: &PolyDiskMap, s: &ACStructure) -> Result<PolyDiskMap> {
        self.check_degree(f)?;
        let grid = self.grid(f.radius())?;
        let (rhs, _) = self.beltrami_term(f, s, &grid)?;
        let correction = self.rhs_fitter.fit(&grid, &rhs).green_t();
        Ok(f.with_degree(self.cfg.degree).sub(&correction))
    }

    /// Picard iteration `f <- h + T(q_J(f) d f)` started at `h`.
    pub fn solve_from_h(&self, h: &PolyDiskMap, s: &ACStructure) -> Result<SolveOutcome> {
        self.solve_with_guess(h, s, None)
    }

    pub fn solve_with_guess(&self, h: &PolyDiskMap, s: &ACStructure, guess: Option<&PolyDiskMap>) -> Result<SolveOutcome> {
        self.check_degree(h)?;
        if h.n() != s.n() {
            return Err(Error::Dimension { expected: s.n(), found: h.n() });
        }
        let cfg = &self.cfg;
        let grid = self.grid(h.radius())?;
        let h = h.with_degree(cfg.degree);
        let h_norm = grid.eval(&h).sup_norm();
        let residual_tolerance = 10.0 * cfg.tol_fix * (1.0 + h_norm);
        let mut f = match guess {
            Some(g) => {
                self.check_degree(g)?;
                g.with_degree(cfg.degree).with_radius(h.radius())
            }
            None => h.clone(),
        };
        let mut history = Vec::new();
        let mut relax = 1.0;
        let mut non_decreasing = 0;
        let finish = |status, iterations, disk: PolyDiskMap, history, residual| {
            Ok(SolveOutcome {
                disk,
                report: SolveReport { status, iterations, final_residual: residual, residual_tolerance, step_history: history },
            })
        };
        for iteration in 1..=cfg.max_iter {
            let (rhs, _) = match self.beltrami_term(&f, s, &grid) {
                Ok(v) => v,
                Err(Error::QCapExceeded { .. }) => {
                    return finish(SolveStatus::QCapExceeded, iteration - 1, f, history, f64::INFINITY)
                }
                // the iterate left the region where J is defined
                Err(Error::EvaluatorDomain { .. }) if iteration > 1 => {
                    return finish(SolveStatus::Diverged, iteration - 1, f, history, f64::INFINITY)
                }
                Err(e) => return Err(e),
            };
            let fitted = self.rhs_fitter.fit(&grid, &rhs);
            let mut next = if fitted.raw().iter().all(|c| *c == C64::default()) {
                h.clone()
            } else {
                h.add(&fitted.green_t())
            };
            if relax != 1.0 {
                next = f.add(&next.sub(&f).scale(relax));
            }
            let step = grid.eval(&next.sub(&f)).sup_norm();
            let size = grid.eval(&next).sup_norm();
            f = next;
            if !step.is_finite() || !(size <= cfg.blowup) {
                history.push(step);
                return finish(SolveStatus::Diverged, iteration, f, history, f64::INFINITY);
            }
            if let Some(&prev) = history.last() {
                if step >= prev {
                    non_decreasing += 1;
                    if non_decreasing >= 3 {
                        relax = 0.5;
                    }
                } else {
                    non_decreasing = 0;
                }
            }
            history.push(step);
            if step <= cfg.tol_fix {
                let residual = residual_on(&grid, &f, s)?;
                let status =
                    if residual <= residual_tolerance { SolveStatus::Converged } else { SolveStatus::Stagnated };
                return finish(status, iteration, f, history, residual);
            }
        }
        let residual = residual_on(&grid, &f, s).unwrap_or(f64::INFINITY);
        finish(SolveStatus::MaxIter, cfg.max_iter, f, history, residual)
    }
}

fn residual_on(grid: &CollocationGrid, f: &PolyDiskMap, s: &ACStructure) -> Result<f64> {
    let vals = grid.eval(f);
    let d = grid.eval(&f.d());
    let db = grid.eval(&f.d_bar());
    let n = f.n();
    let mut fx = vec![C64::default(); n];
    let mut jfx = vec![C64::default(); n];
    let mut worst = 0.0_f64;
    for node in 0..grid.len() {
        let j = s.j_at(&to_real(vals.at(node)))?;
        for c in 0..n {
            fx[c] = d.at(node)[c] + db.at(node)[c];
        }
        apply_real(&j, &fx, &mut jfx);
        let mut acc = 0.0;
        for c in 0..n {
            let fy = C64::i() * (d.at(node)[c] - db.at(node)[c]);
            acc += (fy - jfx[c]).norm_sqr();
        }
        worst = worst.max(acc.sqrt());
    }
    Ok(worst)
}
