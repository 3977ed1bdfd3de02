use crate::error::{Error, Result};
use crate::kernel::PolyDiskMap;
use crate::linalg::{cdist, cnorm, C64};

/// A region of `C^n` described by a signed, 1-Lipschitz margin function.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Ball { center: Vec<C64>, radius: f64 },
    Polydisk { center: Vec<C64>, radii: Vec<f64> },
    Tube(Tube),
    /// `C^n` truncated to a ball around the origin.
    WholeSpace { n: usize, truncation_radius: f64 },
}

/// Points within `radius` of the image of a disk map.
#[derive(Clone, Debug, PartialEq)]
pub struct Tube {
    base: PolyDiskMap,
    radius: f64,
    d: PolyDiskMap,
    d_bar: PolyDiskMap,
    /// `(z, base(z))` on a closed polar sample of the base disk
    samples: Vec<(C64, Vec<C64>)>,
}

const TUBE_RADIAL: usize = 48;
const TUBE_ANGULAR: usize = 128;
const TUBE_REFINED: usize = 4;

impl Tube {
    pub fn new(base: PolyDiskMap, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::BadRadius(radius));
        }
        let r = base.radius();
        let mut samples = vec![(C64::default(), base.eval_unchecked(C64::default()))];
        for i in 1..=TUBE_RADIAL {
            let rho = r * i as f64 / TUBE_RADIAL as f64;
            for l in 0..TUBE_ANGULAR {
                let z = C64::from_polar(rho, 2.0 * std::f64::consts::PI * l as f64 / TUBE_ANGULAR as f64);
                samples.push((z, base.eval_unchecked(z)));
            }
        }
        Ok(Tube { d: base.d(), d_bar: base.d_bar(), base, radius, samples })
    }

    pub fn base(&self) -> &PolyDiskMap {
        &self.base
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Distance from `p` to the image of the base disk: sampled minimum,
    /// then Gauss-Newton refinement of the closest candidates.
    pub fn distance(&self, p: &[C64]) -> f64 {
        self.nearest(p).1
    }

    /// Base parameter of the closest point found, and its distance to `p`.
    pub fn nearest(&self, p: &[C64]) -> (C64, f64) {
        let mut ranked = [(f64::INFINITY, 0usize); TUBE_REFINED];
        for (i, (_, f)) in self.samples.iter().enumerate() {
            let d = cdist(f, p);
            if d < ranked[TUBE_REFINED - 1].0 {
                let mut slot = TUBE_REFINED - 1;
                while slot > 0 && ranked[slot - 1].0 > d {
                    ranked[slot] = ranked[slot - 1];
                    slot -= 1;
                }
                ranked[slot] = (d, i);
            }
        }
        let mut best = (self.samples[ranked[0].1].0, ranked[0].0);
        for &(d, idx) in &ranked {
            if d.is_finite() {
                let refined = self.refine(self.samples[idx].0, p);
                if refined.1 < best.1 {
                    best = refined;
                }
            }
        }
        best
    }

    fn refine(&self, mut z: C64, p: &[C64]) -> (C64, f64) {
        let r = self.base.radius();
        let mut best = (z, f64::INFINITY);
        for _ in 0..30 {
            let f = self.base.eval_unchecked(z);
            let dist = cdist(&f, p);
            if dist < best.1 {
                best = (z, dist);
            }
            let dz = self.d.eval_unchecked(z);
            let dzb = self.d_bar.eval_unchecked(z);
            // f_x = d + dbar, f_y = i (d - dbar); normal equations for (dx, dy)
            let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for c in 0..p.len() {
                let fx = dz[c] + dzb[c];
                let fy = C64::i() * (dz[c] - dzb[c]);
                let res = f[c] - p[c];
                a11 += fx.norm_sqr();
                a22 += fy.norm_sqr();
                a12 += (fx.conj() * fy).re;
                b1 += (fx.conj() * res).re;
                b2 += (fy.conj() * res).re;
            }
            let det = a11 * a22 - a12 * a12;
            if det.abs() < 1e-300 {
                break;
            }
            let dx = -(a22 * b1 - a12 * b2) / det;
            let dy = -(a11 * b2 - a12 * b1) / det;
            let mut next = z + C64::new(dx, dy);
            if next.norm() > r {
                next *= r / next.norm();
            }
            if (next - z).norm() < 1e-15 {
                break;
            }
            z = next;
        }
        let last = cdist(&self.base.eval_unchecked(z), p);
        if last < best.1 {
            best = (z, last);
        }
        best
    }
}

impl Domain {
    pub fn ball(center: Vec<C64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::BadRadius(radius));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn polydisk(center: Vec<C64>, radii: Vec<f64>) -> Result<Self> {
        if center.len() != radii.len() {
            return Err(Error::Dimension { expected: center.len(), found: radii.len() });
        }
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0)) {
            return Err(Error::BadRadius(*r));
        }
        Ok(Domain::Polydisk { center, radii })
    }

    pub fn tube(base: PolyDiskMap, radius: f64) -> Result<Self> {
        Ok(Domain::Tube(Tube::new(base, radius)?))
    }

    pub fn n(&self) -> usize {
        match self {
            Domain::Ball { center, .. } | Domain::Polydisk { center, .. } => center.len(),
            Domain::Tube(t) => t.base.n(),
            Domain::WholeSpace { n, .. } => *n,
        }
    }

    /// Characteristic length used for relative floors.
    pub fn scale(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } => *radius,
            Domain::Polydisk { radii, .. } => radii.iter().copied().fold(f64::INFINITY, f64::min),
            Domain::Tube(t) => t.radius,
            Domain::WholeSpace { truncation_radius, .. } => *truncation_radius,
        }
    }

    pub fn kind_tag(&self) -> &'static str {
        match self {
            Domain::Ball { .. } => "ball",
            Domain::Polydisk { .. } => "polydisk",
            Domain::Tube(_) => "tube",
            Domain::WholeSpace { .. } => "whole_space",
        }
    }
}

/// Signed margin: positive inside, 1-Lipschitz in the Euclidean norm.
pub fn domain_margin(domain: &Domain, p: &[C64]) -> f64 {
    match domain {
        Domain::Ball { center, radius } => radius - cdist(p, center),
        Domain::Polydisk { center, radii } => center
            .iter()
            .zip(radii)
            .zip(p)
            .map(|((c, r), x)| r - (x - c).norm())
            .fold(f64::INFINITY, f64::min),
        Domain::Tube(t) => t.radius - t.distance(p),
        Domain::WholeSpace { truncation_radius, .. } => truncation_radius - cnorm(p),
    }
}
