//! Self-intersections of disks and their removal by small cubic shifts.
//!
//! A shift `f_W = f - w2 z^2 - w3 z^3` keeps `f(0)` and `f'(0)`. For `w2`
//! away from the quotients `(f(z1) - f(z2)) / (z1^2 - z2^2)` and
//! `f'(z) / (2z)`, and generic `w3`, it is injective. Away from the standard
//! structure the shifted data is fed through the solver and the jet is
//! restored by Newton inversion.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::deformation::{invert_family, standard_normal, Jet1, JetFamily, NewtonConfig, BASE_RESIDUAL_TOL};
use crate::error::{Error, Result};
use crate::geometry::ACStructure;
use crate::kernel::PolyDiskMap;
use crate::linalg::{cdist, cnorm, rank, to_real, C64};
use crate::rng;
use crate::solver::{SolveReport, Solver};

/// Cartesian lattice of spacing `r / divisions` clipped to the closed disk `D_r`.
#[derive(Clone, Debug)]
pub struct PairGrid {
    radius: f64,
    spacing: f64,
    points: Vec<C64>,
}

impl PairGrid {
    pub const DEFAULT_DIVISIONS: usize = 20;

    pub fn new(radius: f64, divisions: usize) -> Self {
        let divisions = divisions.max(1);
        let spacing = radius / divisions as f64;
        let m = divisions as i64;
        let mut points = Vec::new();
        for i in -m..=m {
            for j in -m..=m {
                let z = C64::new(i as f64 * spacing, j as f64 * spacing);
                if z.norm() <= radius * (1.0 + 1e-12) {
                    points.push(z);
                }
            }
        }
        PairGrid { radius, spacing, points }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }
}

/// `min |f(z1) - f(z2)| / |z1 - z2|` over distinct lattice pairs.
pub fn separation_ratio(f: &PolyDiskMap, pairs: &PairGrid) -> f64 {
    let values: Vec<Vec<C64>> = pairs.points.iter().map(|z| f.eval_unchecked(*z)).collect();
    let mut best = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let ratio = cdist(&values[i], &values[j]) / (pairs.points[i] - pairs.points[j]).norm();
            best = best.min(ratio);
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineConfig {
    /// accepted gap `|f(z1) - f(z2)|`
    pub tol: f64,
    pub max_iter: usize,
    /// smallest `|z1 - z2|` counted as a double point
    pub separation_floor: f64,
    pub divisions: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { tol: 1e-10, max_iter: 60, separation_floor: 1e-3, divisions: PairGrid::DEFAULT_DIVISIONS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfIntersection {
    pub z1: C64,
    pub z2: C64,
    pub gap: f64,
    pub transversal: bool,
    /// `d f` at `z1` and `z2`
    pub tangent1: Vec<C64>,
    pub tangent2: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionScan {
    pub intersections: Vec<SelfIntersection>,
    /// lattice spacing of the coarse scan
    pub resolution: f64,
    pub candidates: usize,
}

impl IntersectionScan {
    pub fn is_empty(&self) -> bool {
        self.intersections.is_empty()
    }
}

/// Most refinement seeds tried per scan.
const MAX_SEEDS: usize = 400;

/// Columns `f_x, f_y` of the real differential at `z`, as vectors of `C^n`.
fn differential(d: &PolyDiskMap, db: &PolyDiskMap, z: C64) -> (Vec<C64>, Vec<C64>) {
    let a = d.eval_unchecked(z);
    let b = db.eval_unchecked(z);
    let fx = a.iter().zip(&b).map(|(p, q)| p + q).collect();
    let fy = a.iter().zip(&b).map(|(p, q)| C64::i() * (p - q)).collect();
    (fx, fy)
}

fn lex_less(a: C64, b: C64) -> bool {
    (a.re, a.im) < (b.re, b.im)
}

/// Scan the lattice for pairs with nearly equal images and refine each
/// cluster to a double point by Gauss-Newton.
pub fn find_self_intersections(f: &PolyDiskMap, cfg: &RefineConfig) -> IntersectionScan {
    let pairs = PairGrid::new(f.radius(), cfg.divisions);
    let h = pairs.spacing;
    let (d, db) = (f.d(), f.d_bar());
    let pts = &pairs.points;
    let values: Vec<Vec<C64>> = pts.iter().map(|z| f.eval_unchecked(*z)).collect();
    let slopes: Vec<f64> =
        pts.iter().map(|z| cnorm(&d.eval_unchecked(*z)) + cnorm(&db.eval_unchecked(*z))).collect();

    let mut candidates = Vec::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if (pts[i] - pts[j]).norm() < 2.0 * h {
                continue;
            }
            let gap = cdist(&values[i], &values[j]);
            if gap <= 1.5 * h * (slopes[i] + slopes[j]) {
                candidates.push((gap, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    // one seed per cluster of nearby pairs
    let mut seeds: Vec<(usize, usize)> = Vec::new();
    for &(_, i, j) in &candidates {
        let near = |&(a, b): &(usize, usize)| {
            let close = |p: usize, q: usize| (pts[p] - pts[q]).norm() <= 3.0 * h;
            (close(a, i) && close(b, j)) || (close(a, j) && close(b, i))
        };
        if !seeds.iter().any(near) {
            seeds.push((i, j));
            if seeds.len() == MAX_SEEDS {
                break;
            }
        }
    }

    let mut found: Vec<SelfIntersection> = Vec::new();
    for (i, j) in seeds {
        let Some((z1, z2, gap)) = refine_pair(f, &d, &db, pts[i], pts[j], cfg) else { continue };
        let (z1, z2) = if lex_less(z2, z1) { (z2, z1) } else { (z1, z2) };
        let same = |s: &SelfIntersection| {
            (s.z1 - z1).norm() + (s.z2 - z2).norm() < 1e-6 || (s.z1 - z2).norm() + (s.z2 - z1).norm() < 1e-6
        };
        if found.iter().any(same) {
            continue;
        }
        let (fx1, fy1) = differential(&d, &db, z1);
        let (fx2, fy2) = differential(&d, &db, z2);
        let n = f.n();
        let mut m = DMatrix::zeros(2 * n, 4);
        for (col, v) in [&fx1, &fy1, &fx2, &fy2].into_iter().enumerate() {
            m.set_column(col, &DVector::from_vec(to_real(v)));
        }
        found.push(SelfIntersection {
            z1,
            z2,
            gap,
            transversal: rank(&m, 1e-8) == 4,
            tangent1: d.eval_unchecked(z1),
            tangent2: d.eval_unchecked(z2),
        });
    }
    found.sort_by(|a, b| (a.z1.re, a.z1.im, a.z2.re, a.z2.im).partial_cmp(&(b.z1.re, b.z1.im, b.z2.re, b.z2.im)).unwrap());
    IntersectionScan { intersections: found, resolution: h, candidates: candidates.len() }
}

/// Gauss-Newton on `f(z1) - f(z2) = 0` in the four real unknowns, with steps
/// from the pseudoinverse and iterates clamped to the disk. Iterates past
/// `tol` while the residual still decreases, so accepted points sit at
/// rounding level.
fn refine_pair(
    f: &PolyDiskMap,
    d: &PolyDiskMap,
    db: &PolyDiskMap,
    mut z1: C64,
    mut z2: C64,
    cfg: &RefineConfig,
) -> Option<(C64, C64, f64)> {
    let r = f.radius();
    let clamp = |z: C64| if z.norm() > r { z * (r / z.norm()) } else { z };
    let residual = |a: C64, b: C64| -> Vec<f64> {
        let fa = f.eval_unchecked(a);
        let fb = f.eval_unchecked(b);
        to_real(&fa.iter().zip(&fb).map(|(p, q)| p - q).collect::<Vec<_>>())
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut res = residual(z1, z2);
    for _ in 0..cfg.max_iter {
        if norm(&res) == 0.0 {
            break;
        }
        let (fx1, fy1) = differential(d, db, z1);
        let (fx2, fy2) = differential(d, db, z2);
        let rows = res.len();
        let mut jac = DMatrix::zeros(rows, 4);
        jac.set_column(0, &DVector::from_vec(to_real(&fx1)));
        jac.set_column(1, &DVector::from_vec(to_real(&fy1)));
        jac.set_column(2, &-DVector::from_vec(to_real(&fx2)));
        jac.set_column(3, &-DVector::from_vec(to_real(&fy2)));
        let pinv = jac.pseudo_inverse(1e-12).ok()?;
        let step = pinv * DVector::from_vec(res.clone());
        let n1 = clamp(z1 - C64::new(step[0], step[1]));
        let n2 = clamp(z2 - C64::new(step[2], step[3]));
        let next = residual(n1, n2);
        if !(norm(&next) < norm(&res)) {
            break;
        }
        z1 = n1;
        z2 = n2;
        res = next;
        if (z1 - z2).norm() < cfg.separation_floor {
            return None;
        }
    }
    let gap = norm(&res);
    (gap <= cfg.tol && (z1 - z2).norm() >= cfg.separation_floor).then_some((z1, z2, gap))
}

/// Smallest `|f_x|` over the lattice points.
pub fn min_speed(f: &PolyDiskMap) -> f64 {
    let (d, db) = (f.d(), f.d_bar());
    PairGrid::new(f.radius(), PairGrid::DEFAULT_DIVISIONS)
        .points()
        .iter()
        .map(|z| cnorm(&differential(&d, &db, *z).0))
        .fold(f64::INFINITY, f64::min)
}

/// Lower bound on `|f_x|` required of immersed disks.
pub const IMMERSION_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubicShift {
    pub w2: Vec<C64>,
    pub w3: Vec<C64>,
    pub magnitude: f64,
}

impl CubicShift {
    pub fn zero(n: usize) -> Self {
        CubicShift { w2: vec![C64::default(); n], w3: vec![C64::default(); n], magnitude: 0.0 }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CubicShift {
            w2: self.w2.iter().map(|w| w * factor).collect(),
            w3: self.w3.iter().map(|w| w * factor).collect(),
            magnitude: self.magnitude * factor,
        }
    }
}

/// `f - w2 z^2 - w3 z^3`; coefficients of degree below two are untouched.
pub fn cubic_perturb(f: &PolyDiskMap, shift: &CubicShift) -> PolyDiskMap {
    if shift.w2.iter().chain(&shift.w3).all(|w| *w == C64::default()) {
        return f.clone();
    }
    let mut out = f.with_degree(f.degree().max(3));
    for (c, w) in out.coeff_mut(2, 0).iter_mut().zip(&shift.w2) {
        *c -= w;
    }
    for (c, w) in out.coeff_mut(3, 0).iter_mut().zip(&shift.w3) {
        *c -= w;
    }
    out
}

/// Samples of the two quotient families a good `w2` must avoid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BadSet {
    /// `(f(z1) - f(z2)) / (z1^2 - z2^2)`
    pub chords: Vec<Vec<C64>>,
    /// `f'(z) / (2z)`
    pub tangents: Vec<Vec<C64>>,
}

impl BadSet {
    pub fn distance(&self, w: &[C64]) -> f64 {
        self.chords.iter().chain(&self.tangents).map(|b| cdist(b, w)).fold(f64::INFINITY, f64::min)
    }
}

fn uniform_in_disk(rng: &mut rng::Rng, radius: f64) -> C64 {
    let rho = radius * rng.random::<f64>().sqrt();
    C64::from_polar(rho, 2.0 * std::f64::consts::PI * rng.random::<f64>())
}

/// `count` seeded samples of each family; points where a quotient is
/// undefined (`z1 = +-z2`, `z = 0`) are redrawn.
pub fn sample_bad_set(f: &PolyDiskMap, count: usize, seed: u64) -> Result<BadSet> {
    if count == 0 {
        return Err(Error::BadCount);
    }
    let mut rng = rng::stream(seed, rng::streams::BAD_SET);
    let r = f.radius();
    let d = f.d();
    let mut chords = Vec::with_capacity(count);
    while chords.len() < count {
        let (z1, z2) = (uniform_in_disk(&mut rng, r), uniform_in_disk(&mut rng, r));
        let den = z1 * z1 - z2 * z2;
        if den.norm() < 1e-9 {
            continue;
        }
        let (a, b) = (f.eval_unchecked(z1), f.eval_unchecked(z2));
        chords.push(a.iter().zip(&b).map(|(p, q)| (p - q) / den).collect());
    }
    let mut tangents = Vec::with_capacity(count);
    while tangents.len() < count {
        let z = uniform_in_disk(&mut rng, r);
        if z.norm() < 1e-9 {
            continue;
        }
        tangents.push(d.eval_unchecked(z).iter().map(|p| p / (2.0 * z)).collect());
    }
    Ok(BadSet { chords, tangents })
}

/// Bad-set samples used by [`choose_generic_shift`].
pub const BAD_SET_SAMPLES: usize = 256;
/// Trials of [`choose_generic_shift`].
pub const SHIFT_TRIALS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftChoice {
    pub shift: CubicShift,
    /// 1-based index of the accepted draw
    pub trial: usize,
    /// distance from `w2` to the sampled bad set
    pub margin: f64,
}

fn uniform_in_ball(rng: &mut rng::Rng, dim: usize, radius: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    let len = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    dir.iter().map(|d| len * d / norm).collect()
}

/// Seeded rejection sampling of `(w2, w3)` in the `delta`-ball of `C^n`
/// each: accept the first draw whose `w2` keeps distance `0.1 delta` from the
/// sampled bad set and whose shifted map has no detected self-intersection.
///
/// Draws are `delta` times a draw in the unit ball, so for a fixed seed the
/// candidate shifts scale linearly with `delta`.
pub fn choose_generic_shift(f: &PolyDiskMap, delta: f64, seed: u64, trials: usize, refine: &RefineConfig) -> Result<ShiftChoice> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::BadMagnitude);
    }
    let bad = sample_bad_set(f, BAD_SET_SAMPLES, seed)?;
    let mut rng = rng::stream(seed, rng::streams::SHIFTS);
    let n = f.n();
    let mut best_violation = f64::INFINITY;
    for trial in 1..=trials {
        let w2 = crate::linalg::to_complex(&uniform_in_ball(&mut rng, 2 * n, 1.0));
        let w3 = crate::linalg::to_complex(&uniform_in_ball(&mut rng, 2 * n, 1.0));
        let shift = CubicShift { w2, w3, magnitude: 1.0 }.scaled(delta);
        let margin = bad.distance(&shift.w2);
        if margin < 0.1 * delta {
            best_violation = best_violation.min(0.1 * delta - margin);
            continue;
        }
        let scan = find_self_intersections(&cubic_perturb(f, &shift), refine);
        if scan.is_empty() {
            return Ok(ShiftChoice { shift, trial, margin });
        }
        let smallest = scan.intersections.iter().map(|s| (s.z1 - s.z2).norm()).fold(f64::INFINITY, f64::min);
        best_violation = best_violation.min(smallest);
    }
    Err(Error::NoGenericShiftFound { trials, best_violation })
}

#[derive(Clone, Debug)]
pub struct InjectiveResult {
    pub disk: PolyDiskMap,
    pub shift: CubicShift,
    pub before: IntersectionScan,
    pub after: IntersectionScan,
    pub jet_error: f64,
    /// grid sup norm of `solved - (f + jet offsets - w2 z^2 - w3 z^3)`
    pub correction: f64,
    pub min_speed: f64,
    pub report: Option<SolveReport>,
}

/// Replace `f` (on `D_R`) by an injective pseudoholomorphic disk on
/// `D_{R - eps}` with the same jet; `eps = 0` keeps the radius.
#[allow(clippy::too_many_arguments)]
pub fn make_injective(
    f: &PolyDiskMap,
    s: &ACStructure,
    delta: f64,
    eps: f64,
    seed: u64,
    solver: &Solver,
    newton: &NewtonConfig,
    refine: &RefineConfig,
) -> Result<InjectiveResult> {
    if f.n() != s.n() {
        return Err(Error::Dimension { expected: s.n(), found: f.n() });
    }
    if !(eps >= 0.0 && eps < f.radius()) {
        return Err(Error::BadRadius(eps));
    }
    let base = if eps > 0.0 { f.restrict(f.radius() - eps)? } else { f.clone() };
    let residual = solver.residual(&base, s)?;
    if !(residual <= BASE_RESIDUAL_TOL) {
        return Err(Error::NotPseudoholomorphic { residual });
    }
    let before = find_self_intersections(&base, refine);
    let speed = min_speed(&base);
    if before.is_empty() && speed >= IMMERSION_FLOOR {
        return Ok(InjectiveResult {
            disk: base,
            shift: CubicShift::zero(f.n()),
            after: before.clone(),
            before,
            jet_error: 0.0,
            correction: 0.0,
            min_speed: speed,
            report: None,
        });
    }
    if f.n() < 3 {
        return Err(Error::AmbientTooSmall { n: f.n() });
    }
    let choice = choose_generic_shift(&base, delta, seed, SHIFT_TRIALS, refine)?;
    let base_jet = Jet1::of(&base);
    let h0 = solver.phi_forward(&base, s)?;
    let family = JetFamily::offset(cubic_perturb(&h0, &choice.shift), base_jet.clone());
    let inv = invert_family(&family, &base_jet, s, solver, newton)?;
    let disk = inv.outcome.disk;
    let jet_error = Jet1::of(&disk).dist(&base_jet);

    let offsets = JetFamily::offset(cubic_perturb(&base, &choice.shift), base_jet.clone()).data(&inv.z);
    let grid = solver.grid(base.radius())?;
    let correction = grid.eval(&disk).sup_dist(&grid.eval(&offsets));

    let after = find_self_intersections(&disk, refine);
    let speed = min_speed(&disk);
    if !after.is_empty() || speed < IMMERSION_FLOOR {
        return Err(Error::StillSelfIntersecting { count: after.intersections.len() });
    }
    Ok(InjectiveResult {
        disk,
        shift: choice.shift,
        before,
        after,
        jet_error,
        correction,
        min_speed: speed,
        report: Some(inv.outcome.report),
    })
}

/// The map `z -> (z (alpha z - 1)^2, alpha z^2 (alpha z - 1))` on the unit disk.
///
/// It has a transversal double point `f(0) = f(1/alpha) = 0`.
pub fn phi_alpha(alpha: C64) -> Result<PolyDiskMap> {
    if !(alpha.norm() > 1.0) {
        return Err(Error::BadAlpha(alpha.norm()));
    }
    let z = C64::default();
    let one = C64::new(1.0, 0.0);
    PolyDiskMap::from_terms(
        2,
        1.0,
        3,
        &[(1, 0, vec![one, z]), (2, 0, vec![-2.0 * alpha, -alpha]), (3, 0, vec![alpha * alpha, alpha * alpha])],
    )
}
