use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Position of `z^j zbar^k` in the canonical triangular layout: ordered by total
/// degree `d = j + k`, then by `k`.
#[inline]
pub fn mono_index(j: usize, k: usize) -> usize {
    let d = j + k;
    d * (d + 1) / 2 + k
}

/// Number of monomials with `j + k <= degree`.
#[inline]
pub fn mono_count(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Iterate `(j, k)` in canonical order.
pub fn monomials(degree: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..=degree).flat_map(|d| (0..=d).map(move |k| (d - k, k)))
}

/// A disk map `D_r -> C^n`, `f(z) = sum c_jk z^j zbar^k` over `j + k <= N`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyDiskMap {
    n: usize,
    radius: f64,
    degree: usize,
    /// `coeffs[mono_index(j, k) * n + component]`
    coeffs: Vec<C64>,
}

impl PolyDiskMap {
    pub fn zeros(n: usize, radius: f64, degree: usize) -> Self {
        PolyDiskMap { n, radius, degree, coeffs: vec![C64::default(); mono_count(degree) * n] }
    }

    /// The holomorphic affine disk `z -> a + v z`.
    pub fn linear(a: &[C64], v: &[C64], radius: f64, degree: usize) -> Self {
        assert_eq!(a.len(), v.len());
        let mut f = Self::zeros(a.len(), radius, degree.max(1));
        f.coeff_mut(0, 0).copy_from_slice(a);
        f.coeff_mut(1, 0).copy_from_slice(v);
        f
    }

    /// Build from `(j, k, value)` triples; unspecified coefficients are zero.
    pub fn from_terms(n: usize, radius: f64, degree: usize, terms: &[(usize, usize, Vec<C64>)]) -> Result<Self> {
        let mut f = Self::zeros(n, radius, degree);
        for (j, k, c) in terms {
            if j + k > degree {
                return Err(Error::Invalid(format!("monomial ({j},{k}) exceeds degree {degree}")));
            }
            if c.len() != n {
                return Err(Error::Dimension { expected: n, found: c.len() });
            }
            f.coeff_mut(*j, *k).copy_from_slice(c);
        }
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn raw(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn raw_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    /// Coefficient vector of `z^j zbar^k`; zero if beyond the degree.
    pub fn coeff(&self, j: usize, k: usize) -> &[C64] {
        const ZERO: [C64; 16] = [C64 { re: 0.0, im: 0.0 }; 16];
        if j + k > self.degree {
            return &ZERO[..self.n];
        }
        let i = mono_index(j, k) * self.n;
        &self.coeffs[i..i + self.n]
    }

    pub fn coeff_mut(&mut self, j: usize, k: usize) -> &mut [C64] {
        assert!(j + k <= self.degree, "monomial ({j},{k}) beyond degree {}", self.degree);
        let i = mono_index(j, k) * self.n;
        &mut self.coeffs[i..i + self.n]
    }

    /// Same map at a different degree bound (zero padded or truncated).
    pub fn with_degree(&self, degree: usize) -> Self {
        let mut out = Self::zeros(self.n, self.radius, degree);
        for (j, k) in monomials(degree.min(self.degree)) {
            out.coeff_mut(j, k).copy_from_slice(self.coeff(j, k));
        }
        out
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        let mut out = self.clone();
        out.radius = radius;
        out
    }

    /// Same coefficients on the smaller disk `D_{r'}`.
    pub fn restrict(&self, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < self.radius) {
            return Err(Error::BadRadius(radius));
        }
        Ok(self.with_radius(radius))
    }

    /// Evaluate at `z`, rejecting points outside the closed disk.
    pub fn eval(&self, z: C64) -> Result<Vec<C64>> {
        if z.norm() > self.radius * (1.0 + 1e-12) {
            return Err(Error::OutsideDisk { modulus: z.norm(), radius: self.radius });
        }
        Ok(self.eval_unchecked(z))
    }

    /// Nested Horner evaluation, `sum_j z^j (sum_k c_jk zbar^k)`, in a fixed
    /// order so results are bit-reproducible.
    pub fn eval_unchecked(&self, z: C64) -> Vec<C64> {
        let mut out = vec![C64::default(); self.n];
        self.eval_into(z, &mut out);
        out
    }

    pub fn eval_into(&self, z: C64, out: &mut [C64]) {
        let zb = z.conj();
        let n = self.n;
        for (c, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = C64::default();
            for j in (0..=self.degree).rev() {
                let mut inner = C64::default();
                for k in (0..=self.degree - j).rev() {
                    inner = inner * zb + self.coeffs[mono_index(j, k) * n + c];
                }
                acc = acc * z + inner;
            }
            *o = acc;
        }
    }

    /// Wirtinger derivative `d/dzbar`.
    pub fn d_bar(&self) -> Self {
        let deg = self.degree.saturating_sub(1);
        let mut out = Self::zeros(self.n, self.radius, deg);
        if self.degree == 0 {
            return out;
        }
        for (j, k) in monomials(self.degree) {
            if k == 0 {
                continue;
            }
            let src = self.coeff(j, k);
            let kf = k as f64;
            for (o, s) in out.coeff_mut(j, k - 1).iter_mut().zip(src) {
                *o = s * kf;
            }
        }
        out
    }

    /// Wirtinger derivative `d/dz`.
    pub fn d(&self) -> Self {
        let deg = self.degree.saturating_sub(1);
        let mut out = Self::zeros(self.n, self.radius, deg);
        if self.degree == 0 {
            return out;
        }
        for (j, k) in monomials(self.degree) {
            if j == 0 {
                continue;
            }
            let src = self.coeff(j, k);
            let jf = j as f64;
            for (o, s) in out.coeff_mut(j - 1, k).iter_mut().zip(src) {
                *o = s * jf;
            }
        }
        out
    }

    /// Right inverse of `d_bar` by the monomial primitive
    /// `z^j zbar^k -> z^j zbar^{k+1} / (k+1)`.
    ///
    /// Differs from the Cauchy-Green integral by a holomorphic addend.
    pub fn green_t(&self) -> Self {
        let mut out = Self::zeros(self.n, self.radius, self.degree + 1);
        for (j, k) in monomials(self.degree) {
            let src = self.coeff(j, k);
            let w = 1.0 / (k as f64 + 1.0);
            for (o, s) in out.coeff_mut(j, k + 1).iter_mut().zip(src) {
                *o = s * w;
            }
        }
        out
    }

    /// Keep only the holomorphic part (`k = 0`).
    pub fn holomorphic_part(&self) -> Self {
        let mut out = Self::zeros(self.n, self.radius, self.degree);
        for j in 0..=self.degree {
            out.coeff_mut(j, 0).copy_from_slice(self.coeff(j, 0));
        }
        out
    }

    /// Largest coefficient magnitude among terms with `k >= 1`.
    pub fn antiholomorphic_size(&self) -> f64 {
        monomials(self.degree)
            .filter(|(_, k)| *k >= 1)
            .flat_map(|(j, k)| self.coeff(j, k).iter().map(|c| c.norm()))
            .fold(0.0, f64::max)
    }

    /// `f(0)` and `f_x(0) = c10 + c01`.
    pub fn jet(&self) -> (Vec<C64>, Vec<C64>) {
        let a = self.coeff(0, 0).to_vec();
        let v = self.coeff(1, 0).iter().zip(self.coeff(0, 1)).map(|(p, q)| p + q).collect();
        (a, v)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(C64, C64) -> C64) -> Self {
        assert_eq!(self.n, other.n, "component count mismatch");
        let deg = self.degree.max(other.degree);
        let mut out = Self::zeros(self.n, self.radius, deg);
        for (j, k) in monomials(deg) {
            let a = self.coeff(j, k);
            let b = other.coeff(j, k);
            for ((o, x), y) in out.coeff_mut(j, k).iter_mut().zip(a).zip(b) {
                *o = op(*x, *y);
            }
        }
        out
    }

    /// Coefficientwise sum; the radius of `self` is kept.
    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// Precompose with `z -> lambda z`: coefficients become `c_jk lambda^j lambdabar^k`.
    pub fn precompose_scale(&self, lambda: C64, radius: f64) -> Self {
        let mut out = Self::zeros(self.n, radius, self.degree);
        for (j, k) in monomials(self.degree) {
            let w = lambda.powu(j as u32) * lambda.conj().powu(k as u32);
            for (o, s) in out.coeff_mut(j, k).iter_mut().zip(self.coeff(j, k)) {
                *o = s * w;
            }
        }
        out
    }

    /// Precompose with `z -> t0 + lambda z`, on a disk of the given radius.
    pub fn precompose_affine(&self, t0: C64, lambda: C64, radius: f64) -> Self {
        let deg = self.degree;
        let mut binom = vec![vec![1.0_f64; deg + 1]; deg + 1];
        for j in 1..=deg {
            for a in 1..j {
                binom[j][a] = binom[j - 1][a - 1] + binom[j - 1][a];
            }
        }
        // (t0 + lambda z)^j = sum_a hol[j][a] z^a
        let expand = |t: C64, l: C64| -> Vec<Vec<C64>> {
            (0..=deg)
                .map(|j| (0..=j).map(|a| t.powu((j - a) as u32) * l.powu(a as u32) * binom[j][a]).collect())
                .collect()
        };
        let hol = expand(t0, lambda);
        let anti = expand(t0.conj(), lambda.conj());
        let mut out = Self::zeros(self.n, radius, deg);
        for (j, k) in monomials(deg) {
            let src = self.coeff(j, k);
            if src.iter().all(|c| *c == C64::default()) {
                continue;
            }
            for a in 0..=j {
                for b in 0..=k {
                    let w = hol[j][a] * anti[k][b];
                    for (o, s) in out.coeff_mut(a, b).iter_mut().zip(src) {
                        *o += s * w;
                    }
                }
            }
        }
        out
    }

    /// Sum of coefficient magnitudes times `r^(j+k)`: a bound on the sup norm.
    pub fn majorant(&self) -> f64 {
        monomials(self.degree)
            .map(|(j, k)| {
                let w = self.radius.powi((j + k) as i32);
                self.coeff(j, k).iter().map(|c| c.norm()).sum::<f64>() * w
            })
            .sum()
    }

    /// Append extra components in front: `(g(z), f(z))`.
    pub fn prepend(&self, front: &PolyDiskMap) -> Self {
        let n = front.n + self.n;
        let deg = front.degree.max(self.degree);
        let mut out = Self::zeros(n, self.radius, deg);
        for (j, k) in monomials(deg) {
            let slot = out.coeff_mut(j, k);
            slot[..front.n].copy_from_slice(front.coeff(j, k));
            slot[front.n..].copy_from_slice(self.coeff(j, k));
        }
        out
    }

    /// Append zero components until the target dimension is reached.
    pub fn embed(&self, n: usize) -> Self {
        assert!(n >= self.n);
        let mut out = Self::zeros(n, self.radius, self.degree);
        for (j, k) in monomials(self.degree) {
            out.coeff_mut(j, k)[..self.n].copy_from_slice(self.coeff(j, k));
        }
        out
    }
}

/// On-disk JSON shape of a [`PolyDiskMap`].
#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct PolyDiskMapFile {
    pub n: usize,
    pub r: f64,
    #[serde(rename = "N")]
    pub degree: usize,
    pub coeffs: Vec<CoeffEntry>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct CoeffEntry {
    pub j: usize,
    pub k: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&PolyDiskMap> for PolyDiskMapFile {
    fn from(f: &PolyDiskMap) -> Self {
        let coeffs = monomials(f.degree)
            .filter(|(j, k)| f.coeff(*j, *k).iter().any(|c| *c != C64::default()))
            .map(|(j, k)| CoeffEntry {
                j,
                k,
                re: f.coeff(j, k).iter().map(|c| c.re).collect(),
                im: f.coeff(j, k).iter().map(|c| c.im).collect(),
            })
            .collect();
        PolyDiskMapFile { n: f.n, r: f.radius, degree: f.degree, coeffs }
    }
}

impl TryFrom<PolyDiskMapFile> for PolyDiskMap {
    type Error = Error;

    fn try_from(file: PolyDiskMapFile) -> Result<Self> {
        if file.n == 0 || file.n > 16 {
            return Err(Error::Invalid(format!("n = {} must be in 1..=16", file.n)));
        }
        if !(file.r > 0.0 && file.r.is_finite()) {
            return Err(Error::BadRadius(file.r));
        }
        let terms = file
            .coeffs
            .into_iter()
            .map(|e| {
                if e.re.len() != file.n || e.im.len() != file.n {
                    return Err(Error::Dimension { expected: file.n, found: e.re.len().min(e.im.len()) });
                }
                let c = e.re.iter().zip(&e.im).map(|(a, b)| C64::new(*a, *b)).collect();
                Ok((e.j, e.k, c))
            })
            .collect::<Result<Vec<_>>>()?;
        PolyDiskMap::from_terms(file.n, file.r, file.degree, &terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn mono(j: usize, k: usize, degree: usize) -> PolyDiskMap {
        PolyDiskMap::from_terms(1, 1.0, degree, &[(j, k, vec![c(1.0, 0.0)])]).unwrap()
    }

    #[test]
    fn layout_is_triangular() {
        let idx: Vec<_> = monomials(2).map(|(j, k)| mono_index(j, k)).collect();
        assert_eq!(idx, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(mono_count(16), 153);
    }

    #[test]
    fn linear_disk_evaluates() {
        let h = PolyDiskMap::linear(&[c(1.0, 0.0), c(0.0, 0.0)], &[c(0.0, 0.0), c(1.0, 0.0)], 1.0, 1);
        assert_eq!(h.eval(c(0.5, 0.0)).unwrap(), vec![c(1.0, 0.0), c(0.5, 0.0)]);
    }

    #[test]
    fn modulus_squared() {
        let f = mono(1, 1, 2);
        let v = f.eval(c(0.3, 0.4)).unwrap()[0];
        assert!((v - c(0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn outside_disk_is_rejected() {
        let f = mono(1, 0, 1);
        assert!(matches!(f.eval(c(1.5, 0.0)), Err(Error::OutsideDisk { .. })));
    }

    #[test]
    fn wirtinger_rules() {
        assert_eq!(mono(1, 1, 2).d_bar(), mono(1, 0, 1));
        assert_eq!(mono(2, 0, 2).d(), mono(1, 0, 1).scale(2.0));
        assert_eq!(mono(2, 0, 2).d_bar().antiholomorphic_size(), 0.0);
        assert!(mono(2, 0, 2).d_bar().raw().iter().all(|c| *c == C64::default()));
        let h = PolyDiskMap::linear(&[c(0.3, 1.0)], &[c(-2.0, 0.5)], 1.0, 4);
        assert!(h.d_bar().raw().iter().all(|c| *c == C64::default()));
    }

    #[test]
    fn green_t_of_constants() {
        assert_eq!(mono(0, 0, 0).green_t(), mono(0, 1, 1));
        assert_eq!(mono(0, 1, 1).green_t(), mono(0, 2, 2).scale(0.5));
    }

    #[test]
    fn jet_extraction() {
        let f = PolyDiskMap::from_terms(
            1,
            1.0,
            2,
            &[(0, 0, vec![c(1.0, 2.0)]), (1, 0, vec![c(3.0, 0.0)]), (0, 1, vec![c(0.0, 1.0)])],
        )
        .unwrap();
        let (a, v) = f.jet();
        assert_eq!(a, vec![c(1.0, 2.0)]);
        assert_eq!(v, vec![c(3.0, 1.0)]);
    }

    #[test]
    fn restrict_keeps_values_and_composes() {
        let h = PolyDiskMap::linear(&[c(1.0, 0.0)], &[c(0.0, 1.0)], 1.0, 3);
        let r = h.restrict(0.9).unwrap();
        assert_eq!(r.eval(c(0.5, 0.0)).unwrap(), h.eval(c(0.5, 0.0)).unwrap());
        assert_eq!(r.restrict(0.5).unwrap(), h.restrict(0.5).unwrap());
        assert!(matches!(h.restrict(1.2), Err(Error::BadRadius(_))));
        assert!(matches!(h.restrict(0.0), Err(Error::BadRadius(_))));
    }

    #[test]
    fn file_round_trip() {
        let f = PolyDiskMap::from_terms(2, 0.75, 3, &[(2, 1, vec![c(1.0, -1.0), c(0.5, 0.0)])]).unwrap();
        let file = PolyDiskMapFile::from(&f);
        let text = serde_json::to_string(&file).unwrap();
        let back: PolyDiskMapFile = serde_json::from_str(&text).unwrap();
        assert_eq!(PolyDiskMap::try_from(back).unwrap(), f);
    }

    #[test]
    fn file_rejects_unknown_keys() {
        let text = r#"{"n":1,"r":1.0,"N":1,"coeffs":[],"extra":3}"#;
        assert!(serde_json::from_str::<PolyDiskMapFile>(text).is_err());
    }

    #[test]
    fn affine_precomposition_matches_evaluation() {
        let f = PolyDiskMap::from_terms(
            2,
            1.0,
            3,
            &[(1, 0, vec![c(1.0, 0.0), c(0.0, 0.5)]), (2, 1, vec![c(0.3, -0.2), c(0.0, 0.0)]), (0, 3, vec![c(0.0, 0.0), c(-0.4, 0.1)])],
        )
        .unwrap();
        let (t0, lambda) = (c(0.2, -0.1), c(0.5, 0.3));
        let g = f.precompose_affine(t0, lambda, 0.8);
        for z in [c(0.0, 0.0), c(0.3, 0.4), c(-0.7, 0.1)] {
            let lhs = g.eval(z).unwrap();
            let rhs = f.eval_unchecked(t0 + lambda * z);
            for (x, y) in lhs.iter().zip(&rhs) {
                assert!((x - y).norm() <= 1e-14);
            }
        }
    }
}
