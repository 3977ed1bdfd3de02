//! Deforming a pseudoholomorphic disk to a prescribed first-order jet.
//!
//! Holomorphic data `h` is moved inside an affine family
//! `h_Z = base + (a - a_0) + (v - v_0) z`, each member is solved, and the jet
//! map `Psi(Z) = (f_Z(0), (f_Z)_x(0))` is inverted by Newton's method with a
//! finite-difference Jacobian. The map is close to the identity when the
//! structure is close to `J0`, which is what makes the inversion work on a
//! slightly smaller disk.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ACStructure;
use crate::injectivity::{separation_ratio, PairGrid};
use crate::kernel::PolyDiskMap;
use crate::linalg::{cnorm, to_complex, to_real, C64};
use crate::rng;
use crate::solver::{SolveOutcome, SolveReport, Solver};

/// First-order jet `(f(0), f_x(0))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jet1 {
    pub a: Vec<C64>,
    pub v: Vec<C64>,
}

impl Jet1 {
    pub fn new(a: Vec<C64>, v: Vec<C64>) -> Result<Self> {
        if a.len() != v.len() {
            return Err(Error::Dimension { expected: a.len(), found: v.len() });
        }
        if a.iter().chain(&v).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Invalid("jet entries must be finite".into()));
        }
        Ok(Jet1 { a, v })
    }

    pub fn of(f: &PolyDiskMap) -> Self {
        let (a, v) = f.jet();
        Jet1 { a, v }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// Real coordinates `(Re a, Im a, ..., Re v, Im v, ...)`.
    pub fn to_params(&self) -> Vec<f64> {
        let mut x = to_real(&self.a);
        x.extend(to_real(&self.v));
        x
    }

    pub fn from_params(x: &[f64]) -> Self {
        let half = x.len() / 2;
        Jet1 { a: to_complex(&x[..half]), v: to_complex(&x[half..]) }
    }

    pub fn dist(&self, other: &Jet1) -> f64 {
        let x = self.to_params();
        let y = other.to_params();
        x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { tol: 1e-9, max_iter: 25, fd_step: 1e-6 }
    }
}

/// Affine family of holomorphic data `base + (a - a_0) + (v - v_0) z`.
#[derive(Clone, Debug)]
pub struct JetFamily {
    base: PolyDiskMap,
    origin: Jet1,
}

impl JetFamily {
    /// The linear disks `h_Z(z) = a + v z` on `D_r`.
    pub fn linear(n: usize, radius: f64) -> Self {
        let zero = vec![C64::default(); n];
        JetFamily { base: PolyDiskMap::zeros(n, radius, 1), origin: Jet1 { a: zero.clone(), v: zero } }
    }

    /// Offsets of `base`, with `origin` the parameter at which the family
    /// returns `base` itself.
    pub fn offset(base: PolyDiskMap, origin: Jet1) -> Self {
        JetFamily { base, origin }
    }

    pub fn data(&self, z: &Jet1) -> PolyDiskMap {
        let mut h = self.base.with_degree(self.base.degree().max(1));
        for (c, (a, a0)) in h.coeff_mut(0, 0).iter_mut().zip(z.a.iter().zip(&self.origin.a)) {
            *c += a - a0;
        }
        for (c, (v, v0)) in h.coeff_mut(1, 0).iter_mut().zip(z.v.iter().zip(&self.origin.v)) {
            *c += v - v0;
        }
        h
    }
}

fn solve_member(
    solver: &Solver,
    s: &ACStructure,
    family: &JetFamily,
    z: &Jet1,
    guess: Option<&PolyDiskMap>,
) -> Result<SolveOutcome> {
    solver.solve_with_guess(&family.data(z), s, guess)?.require_converged()
}

/// The jet map `Psi(Z)` for the linear family on `D_r`.
pub fn psi(z: &Jet1, s: &ACStructure, radius: f64, solver: &Solver) -> Result<Jet1> {
    let family = JetFamily::linear(z.n(), radius);
    Ok(Jet1::of(&solve_member(solver, s, &family, z, None)?.disk))
}

/// Result of a Newton inversion of the jet map.
#[derive(Clone, Debug)]
pub struct Inversion {
    pub z: Jet1,
    pub outcome: SolveOutcome,
    pub steps: usize,
    /// `|Psi(Z) - target|` after each evaluation, starting with the initial guess
    pub errors: Vec<f64>,
}

/// Solve `Psi(Z) = target` over a family, starting at `Z = target`.
///
/// The Jacobian is rebuilt by central differences whenever an accepted step
/// fails to reduce the error by half; columns are independent solves warm
/// started at the current disk.
pub fn invert_family(
    family: &JetFamily,
    target: &Jet1,
    s: &ACStructure,
    solver: &Solver,
    newton: &NewtonConfig,
) -> Result<Inversion> {
    if target.v.iter().all(|c| *c == C64::default()) {
        return Err(Error::DegenerateDirection);
    }
    let goal = DVector::from_vec(target.to_params());
    let mut x = goal.clone();
    let mut outcome = solve_member(solver, s, family, target, None)?;
    let mut resid = DVector::from_vec(Jet1::of(&outcome.disk).to_params()) - &goal;
    let mut errors = vec![resid.norm()];
    let mut jac: Option<DMatrix<f64>> = None;
    let mut steps = 0;
    while resid.norm() > newton.tol {
        if steps == newton.max_iter {
            return Err(Error::NewtonStalled { error: resid.norm(), iterations: steps });
        }
        steps += 1;
        let j = match jac.take() {
            Some(j) => j,
            None => fd_jacobian(family, s, solver, &x, &outcome.disk, newton.fd_step)?,
        };
        let dx = j.clone().lu().solve(&(-&resid)).ok_or_else(|| Error::SingularJacobian { point: x.as_slice().to_vec() })?;
        if !dx.iter().all(|d| d.is_finite()) {
            return Err(Error::SingularJacobian { point: x.as_slice().to_vec() });
        }
        // backtrack on the step length when the error grows
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..6 {
            let trial = &x + &dx * lambda;
            let z = Jet1::from_params(trial.as_slice());
            if let Ok(out) = solve_member(solver, s, family, &z, Some(&outcome.disk)) {
                let r = DVector::from_vec(Jet1::of(&out.disk).to_params()) - &goal;
                if r.norm() < resid.norm() {
                    accepted = Some((trial, out, r));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((trial, out, r)) = accepted else {
            return Err(Error::NewtonStalled { error: resid.norm(), iterations: steps });
        };
        let ratio = r.norm() / resid.norm();
        x = trial;
        outcome = out;
        resid = r;
        errors.push(resid.norm());
        if lambda == 1.0 && ratio < 0.5 {
            jac = Some(j);
        }
    }
    Ok(Inversion { z: Jet1::from_params(x.as_slice()), outcome, steps, errors })
}

fn fd_jacobian(
    family: &JetFamily,
    s: &ACStructure,
    solver: &Solver,
    x: &DVector<f64>,
    guess: &PolyDiskMap,
    step: f64,
) -> Result<DMatrix<f64>> {
    let dim = x.len();
    let columns: Vec<Result<Vec<f64>>> = (0..dim)
        .into_par_iter()
        .map(|col| {
            let eval = |sign: f64| -> Result<Vec<f64>> {
                let mut p = x.clone();
                p[col] += sign * step;
                let out = solve_member(solver, s, family, &Jet1::from_params(p.as_slice()), Some(guess))?;
                Ok(Jet1::of(&out.disk).to_params())
            };
            let plus = eval(1.0)?;
            let minus = eval(-1.0)?;
            Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * step)).collect())
        })
        .collect();
    let mut j = DMatrix::zeros(dim, dim);
    for (col, values) in columns.into_iter().enumerate() {
        j.set_column(col, &DVector::from_vec(values?));
    }
    Ok(j)
}

/// `Z~` with `Psi(Z~) = target` for the linear family on `D_r`.
pub fn invert_psi(target: &Jet1, s: &ACStructure, radius: f64, solver: &Solver, newton: &NewtonConfig) -> Result<Jet1> {
    let family = JetFamily::linear(target.n(), radius);
    Ok(invert_family(&family, target, s, solver, newton)?.z)
}

#[derive(Clone, Debug)]
pub struct DeformationResult {
    /// the deformed disk on `D_{R - eps}`
    pub disk: PolyDiskMap,
    /// family parameter reaching the target
    pub solved_z: Jet1,
    pub jet_error: f64,
    pub report: SolveReport,
    pub newton_steps: usize,
    pub newton_errors: Vec<f64>,
    /// jet of the base disk, read from its coefficients
    pub base_jet: Jet1,
    /// grid sup distance to the restricted base disk
    pub distance: f64,
    /// `distance / |target - base jet|`, when the jets differ
    pub constant: Option<f64>,
    /// bi-Lipschitz certificate that the output is embedded, see [`embedded_certificate`]
    pub embedded: bool,
}

/// Largest residual of the base disk accepted by [`deform_disk`].
pub const BASE_RESIDUAL_TOL: f64 = 1e-6;

/// Deform `f0` (on `D_R`) to a disk on `D_{R - eps}` with jet `target`.
pub fn deform_disk(
    f0: &PolyDiskMap,
    s: &ACStructure,
    target: &Jet1,
    eps: f64,
    solver: &Solver,
    newton: &NewtonConfig,
) -> Result<DeformationResult> {
    if target.n() != f0.n() {
        return Err(Error::Dimension { expected: f0.n(), found: target.n() });
    }
    if target.v.iter().all(|c| *c == C64::default()) {
        return Err(Error::DegenerateDirection);
    }
    if !(eps > 0.0 && eps < f0.radius()) {
        return Err(Error::BadRadius(eps));
    }
    let residual = solver.residual(f0, s)?;
    if !(residual <= BASE_RESIDUAL_TOL) {
        return Err(Error::NotPseudoholomorphic { residual });
    }
    let radius = f0.radius() - eps;
    let base = f0.restrict(radius)?;
    let base_jet = Jet1::of(&base);
    let attempt = || -> Result<Inversion> {
        let h0 = solver.phi_forward(&base, s)?;
        let family = JetFamily::offset(h0, base_jet.clone());
        invert_family(&family, target, s, solver, newton)
    };
    let inv = match attempt() {
        Ok(inv) => inv,
        Err(e @ (Error::NotConverged { .. } | Error::QCapExceeded { .. })) => {
            return Err(shrink_probe(&base, s, solver).unwrap_or(e));
        }
        Err(e) => return Err(e),
    };
    let disk = inv.outcome.disk;
    let jet_error = Jet1::of(&disk).dist(target);
    let grid = solver.grid(radius)?;
    let distance = grid.eval(&disk).sup_dist(&grid.eval(&base));
    let shift = target.dist(&base_jet);
    let constant = (shift > 0.0).then(|| distance / shift);
    let embedded = embedded_certificate(&base, &disk);
    Ok(DeformationResult {
        disk,
        solved_z: inv.z,
        jet_error,
        report: inv.outcome.report,
        newton_steps: inv.steps,
        newton_errors: inv.errors,
        base_jet,
        distance,
        constant,
        embedded,
    })
}

/// After a failure at radius `r`, look for the largest radius `r 0.9^k`
/// (`k <= 6`) on which the base data still solves.
fn shrink_probe(base: &PolyDiskMap, s: &ACStructure, solver: &Solver) -> Option<Error> {
    let requested = base.radius();
    let mut radius = requested;
    for _ in 0..6 {
        radius *= 0.9;
        let smaller = base.with_radius(radius);
        let ok = solver
            .phi_forward(&smaller, s)
            .and_then(|h| solver.solve_from_h(&h, s))
            .map(|o| o.report.converged())
            .unwrap_or(false);
        if ok {
            return Some(Error::ShrinkTooSmall { requested, largest_working: Some(radius) });
        }
    }
    None
}

/// Sufficient condition for `f` to be embedded, given that it is close to an
/// embedded `f0` on the same disk.
///
/// With `sigma = min |f0(z1) - f0(z2)| / |z1 - z2|` over the pair grid,
/// `f` is certified when `sup |f - f0| <= sigma / 4` and
/// `sup (|d(f - f0)| + |d_bar(f - f0)|) <= sigma / 4`: the difference is then
/// `sigma / 4`-Lipschitz and cannot close the gap.
pub fn embedded_certificate(f0: &PolyDiskMap, f: &PolyDiskMap) -> bool {
    let pairs = PairGrid::new(f0.radius(), PairGrid::DEFAULT_DIVISIONS);
    let sigma = separation_ratio(f0, &pairs);
    if !(sigma > 0.0) {
        return false;
    }
    let diff = f.sub(f0);
    let (dd, ddb) = (diff.d(), diff.d_bar());
    let mut c0 = 0.0_f64;
    let mut c1 = 0.0_f64;
    for z in pairs.points() {
        c0 = c0.max(cnorm(&diff.eval_unchecked(*z)));
        c1 = c1.max(cnorm(&dd.eval_unchecked(*z)) + cnorm(&ddb.eval_unchecked(*z)));
    }
    c0 <= sigma / 4.0 && c1 <= sigma / 4.0
}

/// `(z, F(z))` into `C x C^n`, with the product structure `i x J`.
pub fn graph_lift(f: &PolyDiskMap, s: &ACStructure) -> (PolyDiskMap, ACStructure) {
    let id = PolyDiskMap::linear(&[C64::default()], &[C64::new(1.0, 0.0)], f.radius(), 1);
    (f.prepend(&id), s.product_with_plane())
}

/// `count` jets uniformly distributed in the ball of radius `radius` around
/// `center` in `C^{2n}`.
pub fn sample_jets(center: &Jet1, radius: f64, count: usize, seed: u64) -> Vec<Jet1> {
    let mut rng = rng::stream(seed, rng::streams::TARGET_JETS);
    let x0 = center.to_params();
    let dim = x0.len();
    (0..count)
        .map(|_| {
            let dir: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            let len = radius * rng.random::<f64>().powf(1.0 / dim as f64);
            let x: Vec<f64> = x0.iter().zip(&dir).map(|(c, d)| c + len * d / norm).collect();
            Jet1::from_params(&x)
        })
        .collect()
}

pub(crate) fn standard_normal(rng: &mut rng::Rng) -> f64 {
    // Box-Muller; the first uniform is kept away from zero
    let u: f64 = 1.0 - rng.random::<f64>();
    let w: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * w).cos()
}

/// Outcome of probing the jet neighborhood on which deformation succeeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeighborhoodReport {
    /// largest probed jet-ball radius on which every seeded target succeeded
    pub largest_radius: Option<f64>,
    /// `(radius, successes, attempts)` per probed radius
    pub trials: Vec<(f64, usize, usize)>,
}

/// Probe increasing jet-ball radii around the base jet of `f0` restricted to
/// `D_{R - eps}`, with `per_radius` seeded targets each.
#[allow(clippy::too_many_arguments)]
pub fn probe_neighborhood(
    f0: &PolyDiskMap,
    s: &ACStructure,
    eps: f64,
    radii: &[f64],
    per_radius: usize,
    seed: u64,
    solver: &Solver,
    newton: &NewtonConfig,
) -> Result<NeighborhoodReport> {
    let base_jet = Jet1::of(&f0.restrict(f0.radius() - eps)?);
    let mut report = NeighborhoodReport { largest_radius: None, trials: Vec::new() };
    for (i, &rad) in radii.iter().enumerate() {
        let targets = sample_jets(&base_jet, rad, per_radius, seed.wrapping_add(i as u64));
        let ok = targets
            .iter()
            .filter(|t| deform_disk(f0, s, t, eps, solver, newton).is_ok_and(|d| d.jet_error <= 1e-6))
            .count();
        report.trials.push((rad, ok, per_radius));
        if ok == per_radius {
            report.largest_radius = Some(report.largest_radius.map_or(rad, |r: f64| r.max(rad)));
        } else {
            break;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_q_structure, make_standard_structure, AntilinearField, Monomial};
    use crate::solver::SolverConfig;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn solver() -> Solver {
        Solver::new(SolverConfig::default()).unwrap()
    }

    /// `q` with vanishing first column, so every disk `z -> (a + v z, b)` is
    /// pseudoholomorphic but tilted directions are not.
    fn tilted_field() -> ACStructure {
        let z = c(0.0, 0.0);
        let q = AntilinearField::from_complex(
            2,
            vec![
                (Monomial(vec![0, 0, 0, 0]), vec![vec![z, c(0.1, 0.0)], vec![z, c(0.0, 0.05)]]),
                (Monomial(vec![1, 0, 0, 0]), vec![vec![z, c(0.0, 0.03)], vec![z, c(0.03, 0.0)]]),
            ],
            2.0,
        )
        .unwrap();
        make_q_structure(q).unwrap()
    }

    fn flat() -> PolyDiskMap {
        PolyDiskMap::linear(&[c(0.0, 0.0); 2], &[c(1.0, 0.0), c(0.0, 0.0)], 1.0, 1)
    }

    #[test]
    fn psi_is_identity_for_standard_structure() {
        let s = make_standard_structure(2).unwrap();
        let z = Jet1::new(vec![c(0.1, 0.2), c(-0.3, 0.0)], vec![c(1.0, 0.5), c(0.0, 0.0)]).unwrap();
        assert_eq!(psi(&z, &s, 1.0, &solver()).unwrap(), z);
        let zero_dir = Jet1::new(z.a.clone(), vec![c(0.0, 0.0); 2]).unwrap();
        assert_eq!(psi(&zero_dir, &s, 1.0, &solver()).unwrap(), zero_dir);
        let inv = invert_family(&JetFamily::linear(2, 1.0), &z, &s, &solver(), &NewtonConfig::default()).unwrap();
        assert_eq!(inv.steps, 0);
        assert_eq!(inv.z, z);
    }

    #[test]
    fn zero_direction_is_rejected() {
        let s = make_standard_structure(1).unwrap();
        let t = Jet1::new(vec![c(0.0, 0.0)], vec![c(0.0, 0.0)]).unwrap();
        assert_eq!(invert_psi(&t, &s, 1.0, &solver(), &NewtonConfig::default()), Err(Error::DegenerateDirection));
    }

    #[test]
    fn psi_is_near_identity_for_small_q() {
        let s = tilted_field();
        let sv = solver();
        let z0 = Jet1::of(&flat());
        for z in sample_jets(&z0, 0.1, 4, 3) {
            let p = psi(&z, &s, 0.9, &sv).unwrap();
            assert!(p.dist(&z) <= 0.1 * z.dist(&z0) + 0.2 * 0.2, "{}", p.dist(&z));
        }
    }

    #[test]
    fn invert_psi_round_trip() {
        let s = tilted_field();
        let sv = solver();
        let target = Jet1::new(vec![c(0.02, -0.01), c(0.01, 0.0)], vec![c(1.0, 0.02), c(0.03, -0.02)]).unwrap();
        let family = JetFamily::linear(2, 0.9);
        let inv = invert_family(&family, &target, &s, &sv, &NewtonConfig::default()).unwrap();
        assert!(inv.steps <= 6, "{} steps", inv.steps);
        assert!(*inv.errors.last().unwrap() <= 1e-9);
        let back = psi(&inv.z, &s, 0.9, &sv).unwrap();
        assert!(back.dist(&target) <= 1e-8);
    }

    #[test]
    fn deformation_of_flat_disk_under_standard_structure_is_restriction() {
        let s = make_standard_structure(2).unwrap();
        let f0 = flat();
        let out = deform_disk(&f0, &s, &Jet1::of(&f0), 0.1, &solver(), &NewtonConfig::default()).unwrap();
        assert_eq!(out.disk, f0.restrict(0.9).unwrap().with_degree(16));
        assert_eq!(out.jet_error, 0.0);
        assert!(out.embedded);
        assert_eq!(out.constant, None);
    }

    #[test]
    fn deformation_hits_target_jet() {
        let s = tilted_field();
        let f0 = flat();
        let base = Jet1::of(&f0);
        let sv = solver();
        for target in sample_jets(&base, 0.05, 3, 11) {
            let out = deform_disk(&f0, &s, &target, 0.1, &sv, &NewtonConfig::default()).unwrap();
            assert!(out.jet_error <= 1e-6);
            assert!(sv.residual(&out.disk, &s).unwrap() <= 1e-6);
            assert!(out.embedded);
            assert_eq!(out.disk.radius(), 0.9);
        }
    }

    #[test]
    fn deformation_preconditions() {
        let s = tilted_field();
        let f0 = flat();
        let sv = solver();
        let nw = NewtonConfig::default();
        let t = Jet1::of(&f0);
        assert_eq!(deform_disk(&f0, &s, &t, 1.0, &sv, &nw).unwrap_err(), Error::BadRadius(1.0));
        let tilted = PolyDiskMap::linear(&[c(0.0, 0.0); 2], &[c(1.0, 0.0), c(1.0, 0.0)], 1.0, 1);
        assert!(matches!(deform_disk(&tilted, &s, &t, 0.1, &sv, &nw), Err(Error::NotPseudoholomorphic { .. })));
    }

    #[test]
    fn graph_lift_keeps_residual() {
        let s = tilted_field();
        let sv = solver();
        let f = PolyDiskMap::linear(&[c(0.0, 0.0); 2], &[c(1.0, 0.0), c(0.2, 0.1)], 0.9, 1);
        let (lift, ls) = graph_lift(&f, &s);
        assert_eq!(lift.n(), 3);
        assert_eq!(lift.coeff(1, 0)[0], c(1.0, 0.0));
        let diff = (sv.residual(&lift, &ls).unwrap() - sv.residual(&f, &s).unwrap()).abs();
        assert!(diff <= 1e-12, "{diff}");
    }

    #[test]
    fn sampled_jets_stay_in_ball() {
        let center = Jet1::of(&flat());
        let jets = sample_jets(&center, 0.05, 50, 1);
        assert!(jets.iter().all(|j| j.dist(&center) <= 0.05));
        assert_eq!(jets, sample_jets(&center, 0.05, 50, 1));
    }
}
