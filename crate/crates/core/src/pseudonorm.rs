//! Upper bounds for the Kobayashi-Royden and Hahn pseudonorms.
//!
//! `F(p, v) = inf { 1/r : f: D_r -> M pseudoholomorphic, f(0) = p, f_x(0) = v }`
//! and `S(p, v)` is the same infimum over injective disks. Both are estimated
//! by bisection on `r`: a radius is accepted when some witness disk with the
//! jet `(p, v)` maps `D_r` into the domain with a positive margin. Every
//! accepted radius comes with its witness, so the values are upper bounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deformation::{invert_family, Jet1, JetFamily, NewtonConfig};
use crate::error::{Error, Result};
use crate::geometry::{domain_margin, ACStructure, Domain};
use crate::injectivity::{find_self_intersections, make_injective, min_speed, RefineConfig, IMMERSION_FLOOR};
use crate::kernel::PolyDiskMap;
use crate::linalg::{cdist, cnorm, C64};
use crate::solver::Solver;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormConfig {
    /// relative bisection resolution
    pub tol_r: f64,
    /// accepted witnesses keep this margin, relative to the domain scale
    pub margin_floor: f64,
    pub expand: f64,
    pub max_expand: usize,
    /// shift magnitudes tried, in order, when a witness must be made injective
    pub shift_ladder: Vec<f64>,
    /// seed of the injective perturbations
    pub seed: u64,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            tol_r: 1e-2,
            margin_floor: 1e-3,
            expand: 4.0,
            max_expand: 12,
            shift_ladder: vec![0.05, 5e-3, 5e-4, 5e-5],
            seed: 0,
        }
    }
}

/// Everything a radius test needs.
#[derive(Clone, Copy)]
pub struct NormContext<'a> {
    pub domain: &'a Domain,
    pub structure: &'a ACStructure,
    pub solver: &'a Solver,
    pub newton: &'a NewtonConfig,
    pub refine: &'a RefineConfig,
    pub config: &'a NormConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BisectionStep {
    pub radius: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct NormEstimate {
    /// `1 / r_star`
    pub value: f64,
    pub r_star: f64,
    pub witness: PolyDiskMap,
    /// which seed family produced the witness
    pub seed_kind: &'static str,
    pub trace: Vec<BisectionStep>,
}

/// Jet error allowed for witnesses.
pub const WITNESS_JET_TOL: f64 = 1e-6;

/// Smallest domain margin over the grid nodes, the boundary circle and the center.
pub fn disk_margin(domain: &Domain, f: &PolyDiskMap, solver: &Solver, stop_below: f64) -> Result<f64> {
    let grid = solver.grid(f.radius())?;
    let mut worst = domain_margin(domain, &f.eval_unchecked(C64::default()));
    let ring: Vec<C64> = grid.boundary_ring().collect();
    for z in ring.into_iter().chain(grid.nodes()) {
        worst = worst.min(domain_margin(domain, &f.eval_unchecked(z)));
        if worst < stop_below {
            break;
        }
    }
    Ok(worst)
}

/// Holomorphic disks on `D_r` with jet `(p, v)`, best first.
fn seeds(domain: &Domain, p: &[C64], v: &[C64], r: f64, degree: usize) -> Vec<(&'static str, PolyDiskMap)> {
    let mut out = Vec::new();
    match domain {
        Domain::Ball { center, radius } => {
            if let Some(f) = ball_extremal(center, *radius, p, v, r, degree) {
                out.push(("ball_extremal", f));
            }
        }
        Domain::WholeSpace { truncation_radius, .. } => {
            let origin = vec![C64::default(); p.len()];
            if let Some(f) = ball_extremal(&origin, *truncation_radius, p, v, r, degree) {
                out.push(("ball_extremal", f));
            }
        }
        Domain::Tube(tube) => {
            let base = tube.base();
            let (t0, _) = tube.nearest(p);
            let s_x = base.d().eval_unchecked(t0);
            let sb = base.d_bar().eval_unchecked(t0);
            let fx: Vec<C64> = s_x.iter().zip(&sb).map(|(a, b)| a + b).collect();
            let norm2: f64 = fx.iter().map(|c| c.norm_sqr()).sum();
            if norm2 > 0.0 && base.d_bar().majorant() == 0.0 {
                // best complex multiple of the base direction, the rest added linearly
                let lambda: C64 = fx.iter().zip(v).map(|(a, b)| a.conj() * b).sum::<C64>() / norm2;
                let mut f = base.precompose_affine(t0, lambda, r).with_degree(base.degree().max(1));
                let s0 = base.eval_unchecked(t0);
                for (c, (pc, sc)) in f.coeff_mut(0, 0).iter_mut().zip(p.iter().zip(&s0)) {
                    *c += pc - sc;
                }
                for (c, (vc, fc)) in f.coeff_mut(1, 0).iter_mut().zip(v.iter().zip(&fx)) {
                    *c += vc - lambda * fc;
                }
                if f.degree() <= degree {
                    out.push(("tube_base", f));
                }
            }
        }
        Domain::Polydisk { .. } => {}
    }
    out.push(("straight", PolyDiskMap::linear(p, v, r, 1)));
    out
}

/// The map onto the slice of the ball by the complex line through `p` along
/// `v`, `z -> p + v z / (1 - conj(a) s z)` with `s = |v| / (sigma (1 - |a|^2))`,
/// truncated at `degree`. It is the extremal disk when `s r = 1`.
fn ball_extremal(center: &[C64], radius: f64, p: &[C64], v: &[C64], r: f64, degree: usize) -> Option<PolyDiskMap> {
    let vn = cnorm(v);
    if vn == 0.0 {
        return None;
    }
    let dir: Vec<C64> = v.iter().map(|c| c / vn).collect();
    let offset: Vec<C64> = center.iter().zip(p).map(|(c, x)| c - x).collect();
    let along: C64 = dir.iter().zip(&offset).map(|(d, o)| d.conj() * o).sum();
    let perp2 = (cnorm(&offset).powi(2) - along.norm_sqr()).max(0.0);
    let sigma2 = radius * radius - perp2;
    if !(sigma2 > 0.0) {
        return None;
    }
    let sigma = sigma2.sqrt();
    let a = along / sigma;
    if !(a.norm() < 1.0) {
        return None;
    }
    let s = vn / (sigma * (1.0 - a.norm_sqr()));
    let ratio = a.conj() * s;
    let mut f = PolyDiskMap::zeros(p.len(), r, degree);
    f.coeff_mut(0, 0).copy_from_slice(p);
    let mut w = C64::new(1.0, 0.0);
    for k in 1..=degree {
        for (c, vc) in f.coeff_mut(k, 0).iter_mut().zip(v) {
            *c = vc * w;
        }
        w *= ratio;
    }
    Some(f)
}

/// A pseudoholomorphic disk on `D_r` with jet `(p, v)` and margin at least
/// the floor, if one of the seeds yields it.
fn witness_at(ctx: &NormContext, jet: &Jet1, r: f64) -> Option<(&'static str, PolyDiskMap)> {
    let floor = ctx.config.margin_floor * ctx.domain.scale();
    for (kind, seed) in seeds(ctx.domain, &jet.a, &jet.v, r, ctx.solver.config().degree) {
        let disk = if ctx.structure.is_standard() {
            seed.with_degree(ctx.solver.config().degree)
        } else {
            let family = JetFamily::offset(seed, jet.clone());
            match invert_family(&family, jet, ctx.structure, ctx.solver, ctx.newton) {
                Ok(inv) => inv.outcome.disk,
                Err(_) => continue,
            }
        };
        if Jet1::of(&disk).dist(jet) > WITNESS_JET_TOL {
            continue;
        }
        if disk_margin(ctx.domain, &disk, ctx.solver, floor).is_ok_and(|m| m >= floor) {
            return Some((kind, disk));
        }
    }
    None
}

/// An injective, immersed witness on `D_r`, perturbing a plain witness when
/// the ambient dimension allows it.
fn injective_witness_at(ctx: &NormContext, jet: &Jet1, r: f64) -> Option<(&'static str, PolyDiskMap)> {
    let (kind, disk) = witness_at(ctx, jet, r)?;
    if find_self_intersections(&disk, ctx.refine).is_empty() && min_speed(&disk) >= IMMERSION_FLOOR {
        return Some((kind, disk));
    }
    if jet.n() < 3 {
        return None;
    }
    let floor = ctx.config.margin_floor * ctx.domain.scale();
    for &delta in &ctx.config.shift_ladder {
        let Ok(out) = make_injective(&disk, ctx.structure, delta, 0.0, ctx.config.seed, ctx.solver, ctx.newton, ctx.refine)
        else {
            continue;
        };
        if out.jet_error <= WITNESS_JET_TOL
            && disk_margin(ctx.domain, &out.disk, ctx.solver, floor).is_ok_and(|m| m >= floor)
        {
            return Some((kind, out.disk));
        }
    }
    None
}

fn check_jet(ctx: &NormContext, p: &[C64], v: &[C64]) -> Result<Jet1> {
    let n = ctx.domain.n();
    if p.len() != n || v.len() != n || ctx.structure.n() != n {
        return Err(Error::Dimension { expected: n, found: p.len().min(v.len()).min(ctx.structure.n()) });
    }
    if cnorm(v) == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    let margin = domain_margin(ctx.domain, p);
    if !(margin > 0.0) {
        return Err(Error::OutsideDomain { margin });
    }
    Jet1::new(p.to_vec(), v.to_vec())
}

/// Largest accepted radius up to resolution `tol_r`, by expansion from
/// `r_lo` and geometric bisection. `cap` bounds the search from above.
fn bisect(
    ctx: &NormContext,
    jet: &Jet1,
    test: impl Fn(f64) -> Option<(&'static str, PolyDiskMap)>,
    cap: Option<f64>,
) -> Result<NormEstimate> {
    let cfg = ctx.config;
    let mut trace = Vec::new();
    let mut record = |r: f64, w: &Option<(&'static str, PolyDiskMap)>| trace.push(BisectionStep { radius: r, accepted: w.is_some() });

    let mut r_lo = 0.5 * domain_margin(ctx.domain, &jet.a) / cnorm(&jet.v);
    if let Some(c) = cap {
        r_lo = r_lo.min(c);
    }
    let mut best = None;
    for _ in 0..4 {
        let w = test(r_lo);
        record(r_lo, &w);
        if let Some(w) = w {
            best = Some((r_lo, w));
            break;
        }
        r_lo /= cfg.expand;
    }
    let Some((mut lo, mut witness)) = best else {
        return Err(Error::NoDiskFound { r_lo });
    };
    let mut hi = None;
    match cap {
        Some(c) if lo < c => {
            let w = test(c);
            record(c, &w);
            match w {
                Some(w) => {
                    lo = c;
                    witness = w;
                }
                None => hi = Some(c),
            }
        }
        Some(_) => {}
        None => {
            for _ in 0..cfg.max_expand {
                let r = lo * cfg.expand;
                let w = test(r);
                record(r, &w);
                match w {
                    Some(w) => {
                        lo = r;
                        witness = w;
                    }
                    None => {
                        hi = Some(r);
                        break;
                    }
                }
            }
        }
    }
    if let Some(mut h) = hi {
        while h / lo > 1.0 + cfg.tol_r {
            let mid = (lo * h).sqrt();
            let w = test(mid);
            record(mid, &w);
            match w {
                Some(w) => {
                    lo = mid;
                    witness = w;
                }
                None => h = mid,
            }
        }
    }
    Ok(NormEstimate { value: 1.0 / lo, r_star: lo, seed_kind: witness.0, witness: witness.1, trace })
}

/// Upper bound on the Kobayashi-Royden pseudonorm `F(p, v)`.
pub fn kobayashi_norm(ctx: &NormContext, p: &[C64], v: &[C64]) -> Result<NormEstimate> {
    let jet = check_jet(ctx, p, v)?;
    bisect(ctx, &jet, |r| witness_at(ctx, &jet, r), None)
}

/// Upper bound on the Hahn pseudonorm `S(p, v)`, never below the
/// Kobayashi-Royden estimate `kobayashi` for the same jet.
pub fn hahn_norm_from(ctx: &NormContext, p: &[C64], v: &[C64], kobayashi: &NormEstimate) -> Result<NormEstimate> {
    let jet = check_jet(ctx, p, v)?;
    bisect(ctx, &jet, |r| injective_witness_at(ctx, &jet, r), Some(kobayashi.r_star))
}

/// Upper bound on the Hahn pseudonorm `S(p, v)`.
pub fn hahn_norm(ctx: &NormContext, p: &[C64], v: &[C64]) -> Result<NormEstimate> {
    let f = kobayashi_norm(ctx, p, v)?;
    hahn_norm_from(ctx, p, v, &f)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceEstimate {
    pub value: f64,
    /// `(path parameter, pseudonorm of the velocity)` at each sample
    pub samples: Vec<(f64, f64)>,
}

/// Trapezoid rule for `int F(gamma, gamma')` along the polyline
/// `from -> vertices -> to`, `samples` subintervals per segment.
pub fn kobayashi_distance(
    ctx: &NormContext,
    from: &[C64],
    to: &[C64],
    vertices: &[Vec<C64>],
    samples: usize,
) -> Result<DistanceEstimate> {
    if samples == 0 {
        return Err(Error::BadCount);
    }
    let mut points = vec![from.to_vec()];
    points.extend(vertices.iter().cloned());
    points.push(to.to_vec());
    let mut out = DistanceEstimate { value: 0.0, samples: Vec::new() };
    for seg in 0..points.len() - 1 {
        let (a, b) = (&points[seg], &points[seg + 1]);
        let vel: Vec<C64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
        if cnorm(&vel) == 0.0 {
            continue;
        }
        let mut prev = None;
        for k in 0..=samples {
            let t = k as f64 / samples as f64;
            let x: Vec<C64> = a.iter().zip(&vel).map(|(p, d)| p + d * t).collect();
            let margin = domain_margin(ctx.domain, &x);
            if !(margin > 0.0) {
                return Err(Error::PathExits { index: seg * samples + k, margin });
            }
            let value = kobayashi_norm(ctx, &x, &vel)?.value;
            if let Some(last) = prev {
                out.value += 0.5 * (last + value) / samples as f64;
            }
            prev = Some(value);
            out.samples.push((seg as f64 + t, value));
        }
    }
    Ok(out)
}

/// Poincare distance on the unit disk, `arctanh |(z - w) / (1 - conj(z) w)|`.
pub fn poincare_distance(z: C64, w: C64) -> f64 {
    if z == w {
        return 0.0;
    }
    ((z - w) / (C64::new(1.0, 0.0) - z.conj() * w)).norm().atanh()
}

#[derive(Clone, Debug)]
pub struct ChainLink {
    pub disk: PolyDiskMap,
    pub z: C64,
    pub w: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainReport {
    pub length: f64,
    pub links: Vec<f64>,
    pub injective: Vec<bool>,
}

/// Largest endpoint mismatch accepted between consecutive links.
pub const CHAIN_MATCH_TOL: f64 = 1e-8;

/// Sum of Poincare distances `d(z_k, w_k)`, points taken relative to each
/// disk's radius.
pub fn chain_length(chain: &[ChainLink], refine: &RefineConfig) -> Result<ChainReport> {
    let mut report = ChainReport { length: 0.0, links: Vec::new(), injective: Vec::new() };
    for (k, link) in chain.iter().enumerate() {
        let r = link.disk.radius();
        if !(link.z.norm() < r && link.w.norm() < r) {
            return Err(Error::Invalid(format!("chain link {k} has a point outside its disk")));
        }
        if let Some(next) = chain.get(k + 1) {
            let mismatch = cdist(&link.disk.eval_unchecked(link.w), &next.disk.eval_unchecked(next.z));
            if !(mismatch <= CHAIN_MATCH_TOL) {
                return Err(Error::BrokenChain { link: k, mismatch });
            }
        }
        let d = poincare_distance(link.z / r, link.w / r);
        report.length += d;
        report.links.push(d);
        report.injective.push(find_self_intersections(&link.disk, refine).is_empty());
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub jet_id: usize,
    pub f_hat: f64,
    pub s_hat: f64,
    /// `(S - F) / F`
    pub gap: f64,
    pub r_star_f: f64,
    pub r_star_s: f64,
    pub n: usize,
    /// gap above two percent in dimension at least three
    pub anomaly: bool,
}

/// Relative gap above which a row in dimension `n >= 3` is flagged.
pub const GAP_FLAG: f64 = 0.02;

/// Both estimates for each jet; rows are computed in parallel and returned in input order.
pub fn compare_norms(ctx: &NormContext, jets: &[Jet1]) -> Result<Vec<CompareRow>> {
    jets.par_iter()
        .enumerate()
        .map(|(jet_id, jet)| {
            let f = kobayashi_norm(ctx, &jet.a, &jet.v)?;
            let s = hahn_norm_from(ctx, &jet.a, &jet.v, &f)?;
            let gap = (s.value - f.value) / f.value;
            let n = jet.n();
            Ok(CompareRow {
                jet_id,
                f_hat: f.value,
                s_hat: s.value,
                gap,
                r_star_f: f.r_star,
                r_star_s: s.r_star,
                n,
                anomaly: n >= 3 && gap > GAP_FLAG,
            })
        })
        .collect()
}
