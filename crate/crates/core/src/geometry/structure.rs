use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, halton_box, j0, max_abs, operator_norm};

/// Real monomial `prod p_i^{d_i}` in the interleaved coordinates of `R^{2n}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.0.iter().zip(p).fold(1.0, |acc, (&d, &x)| if d == 0 { acc } else { acc * x.powi(d as i32) })
    }

    /// `d/dp_i` of the monomial.
    pub fn partial(&self, p: &[f64], i: usize) -> f64 {
        let di = self.0[i];
        if di == 0 {
            return 0.0;
        }
        let mut acc = di as f64;
        for (c, (&d, &x)) in self.0.iter().zip(p).enumerate() {
            let e = if c == i { d - 1 } else { d };
            if e > 0 {
                acc *= x.powi(e as i32);
            }
        }
        acc
    }
}

/// A polynomial field `p -> q(p)` of `J0`-antilinear real `2n x 2n` matrices.
///
/// `bound` is the majorant `sum |monomial| * ||matrix||` over the reference box
/// `[-box_radius, box_radius]^{2n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AntilinearField {
    n: usize,
    terms: Vec<(Monomial, DMatrix<f64>)>,
    box_radius: f64,
    bound: f64,
}

/// Real `2 x 2` block of `v -> a * conj(v)` for a complex scalar `a`.
fn antilinear_block(a: crate::linalg::C64) -> [[f64; 2]; 2] {
    [[a.re, a.im], [a.im, -a.re]]
}

impl AntilinearField {
    pub fn new(n: usize, terms: Vec<(Monomial, DMatrix<f64>)>, box_radius: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("complex dimension must be positive".into()));
        }
        if !(box_radius > 0.0) {
            return Err(Error::Invalid(format!("reference box radius {box_radius} must be positive")));
        }
        let j = j0(n);
        let mut bound = 0.0;
        for (index, (mono, m)) in terms.iter().enumerate() {
            if mono.0.len() != 2 * n {
                return Err(Error::Dimension { expected: 2 * n, found: mono.0.len() });
            }
            if m.nrows() != 2 * n || m.ncols() != 2 * n {
                return Err(Error::Dimension { expected: 2 * n, found: m.nrows() });
            }
            let error = max_abs(&(m * &j + &j * m));
            if error > 1e-12 * max_abs(m).max(1.0) {
                return Err(Error::NotAntilinear { index, error });
            }
            bound += operator_norm(m) * box_radius.powi(mono.degree() as i32);
        }
        Ok(AntilinearField { n, terms, box_radius, bound })
    }

    /// Build from complex matrices `A(p)`, where `q(p) v = A(p) conj(v)`.
    pub fn from_complex(
        n: usize,
        terms: Vec<(Monomial, Vec<Vec<crate::linalg::C64>>)>,
        box_radius: f64,
    ) -> Result<Self> {
        let real = terms
            .into_iter()
            .map(|(mono, a)| {
                let mut m = DMatrix::zeros(2 * n, 2 * n);
                for (r, row) in a.iter().enumerate() {
                    for (c, &entry) in row.iter().enumerate() {
                        let b = antilinear_block(entry);
                        for (u, brow) in b.iter().enumerate() {
                            for (w, &x) in brow.iter().enumerate() {
                                m[(2 * r + u, 2 * c + w)] = x;
                            }
                        }
                    }
                }
                (mono, m)
            })
            .collect();
        Self::new(n, real, box_radius)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(Monomial, DMatrix<f64>)] {
        &self.terms
    }

    pub fn box_radius(&self) -> f64 {
        self.box_radius
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn eval(&self, p: &[f64]) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(2 * self.n, 2 * self.n);
        for (mono, m) in &self.terms {
            let w = mono.eval(p);
            if w != 0.0 {
                q += m * w;
            }
        }
        q
    }

    /// The same field on `C^{extra} x C^n`, independent of the new coordinates
    /// and zero on the new directions.
    pub fn prepend_flat(&self, extra: usize) -> AntilinearField {
        let n = self.n + extra;
        let terms = self
            .terms
            .iter()
            .map(|(mono, m)| {
                let mut degrees = vec![0; 2 * extra];
                degrees.extend_from_slice(&mono.0);
                let mut big = DMatrix::zeros(2 * n, 2 * n);
                big.view_mut((2 * extra, 2 * extra), (2 * self.n, 2 * self.n)).copy_from(m);
                (Monomial(degrees), big)
            })
            .collect();
        AntilinearField { n, terms, box_radius: self.box_radius, bound: self.bound }
    }

    /// Coefficientwise difference bound `sup ||q - q'||` over the box.
    pub fn distance_bound(&self, other: &AntilinearField) -> f64 {
        let mut total = 0.0;
        let mut matched = vec![false; other.terms.len()];
        for (mono, m) in &self.terms {
            let mut diff = m.clone();
            for (idx, (mono2, m2)) in other.terms.iter().enumerate() {
                if mono2 == mono && !matched[idx] {
                    diff -= m2;
                    matched[idx] = true;
                    break;
                }
            }
            total += operator_norm(&diff) * self.box_radius.powi(mono.degree() as i32);
        }
        for ((mono, m), used) in other.terms.iter().zip(matched) {
            if !used {
                total += operator_norm(m) * other.box_radius.powi(mono.degree() as i32);
            }
        }
        total
    }
}

/// A polynomial diffeomorphism `phi(w) = w + sum monomial(w) * vector` of
/// `R^{2n}`, intended to be close to the identity on its reference box.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyDiffeo {
    n: usize,
    terms: Vec<(Monomial, Vec<f64>)>,
    box_radius: f64,
}

impl PolyDiffeo {
    pub fn new(n: usize, terms: Vec<(Monomial, Vec<f64>)>, box_radius: f64) -> Result<Self> {
        for (mono, v) in &terms {
            if mono.0.len() != 2 * n {
                return Err(Error::Dimension { expected: 2 * n, found: mono.0.len() });
            }
            if v.len() != 2 * n {
                return Err(Error::Dimension { expected: 2 * n, found: v.len() });
            }
        }
        if !(box_radius > 0.0) {
            return Err(Error::Invalid(format!("reference box radius {box_radius} must be positive")));
        }
        Ok(PolyDiffeo { n, terms, box_radius })
    }

    pub fn identity(n: usize, box_radius: f64) -> Self {
        PolyDiffeo { n, terms: Vec::new(), box_radius }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(Monomial, Vec<f64>)] {
        &self.terms
    }

    pub fn box_radius(&self) -> f64 {
        self.box_radius
    }

    pub fn map(&self, u: &[f64]) -> Vec<f64> {
        let mut out = u.to_vec();
        for (mono, v) in &self.terms {
            let w = mono.eval(u);
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
        out
    }

    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let d = 2 * self.n;
        let mut jac = DMatrix::identity(d, d);
        for (mono, v) in &self.terms {
            for c in 0..d {
                let g = mono.partial(u, c);
                if g != 0.0 {
                    for (r, x) in v.iter().enumerate() {
                        jac[(r, c)] += g * x;
                    }
                }
            }
        }
        jac
    }

    /// Newton inversion `phi^{-1}(p)` started at `p`.
    pub fn inverse(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut u = p.to_vec();
        let scale = 1.0 + p.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for _ in 0..60 {
            let fu = self.map(&u);
            let r: Vec<f64> = fu.iter().zip(p).map(|(a, b)| a - b).collect();
            let err = r.iter().map(|x| x.abs()).fold(0.0, f64::max);
            if err <= 4.0 * f64::EPSILON * scale {
                return self.check_box(u, p);
            }
            let step = self
                .jacobian(&u)
                .lu()
                .solve(&linalg::dvec(&r))
                .ok_or_else(|| Error::SingularJacobian { point: u.clone() })?;
            for (x, s) in u.iter_mut().zip(step.iter()) {
                *x -= s;
            }
            if u.iter().any(|x| !x.is_finite()) {
                return Err(Error::EvaluatorDomain { point: p.to_vec() });
            }
        }
        // Newton converged to rounding but not below the strict threshold.
        let err = self.map(&u).iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if err <= 1e-13 * scale {
            return self.check_box(u, p);
        }
        Err(Error::EvaluatorDomain { point: p.to_vec() })
    }

    fn check_box(&self, u: Vec<f64>, p: &[f64]) -> Result<Vec<f64>> {
        if u.iter().any(|x| x.abs() > self.box_radius) {
            return Err(Error::EvaluatorDomain { point: p.to_vec() });
        }
        Ok(u)
    }

    /// `id x phi` on `C^{extra} x C^n`.
    pub fn prepend_identity(&self, extra: usize) -> PolyDiffeo {
        let terms = self
            .terms
            .iter()
            .map(|(mono, v)| {
                let mut degrees = vec![0; 2 * extra];
                degrees.extend_from_slice(&mono.0);
                let mut vec = vec![0.0; 2 * extra];
                vec.extend_from_slice(v);
                (Monomial(degrees), vec)
            })
            .collect();
        PolyDiffeo { n: self.n + extra, terms, box_radius: self.box_radius }
    }
}

/// How the structure field is specified.
#[derive(Clone, Debug, PartialEq)]
pub enum StructureKind {
    Standard,
    /// `J = J0 (I - q)(I + q)^{-1}`
    QField(AntilinearField),
    /// `J = D phi J0 (D phi)^{-1}`, integrable by construction
    Pushforward(PolyDiffeo),
}

/// An almost complex structure on a region of `R^{2n} = C^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ACStructure {
    n: usize,
    kind: StructureKind,
}

pub fn make_standard_structure(n: usize) -> Result<ACStructure> {
    if n == 0 {
        return Err(Error::Invalid("complex dimension must be positive".into()));
    }
    Ok(ACStructure { n, kind: StructureKind::Standard })
}

/// Number of Halton probes used to certify structure fields.
const PROBES: usize = 100;

pub fn make_q_structure(q: AntilinearField) -> Result<ACStructure> {
    let j = j0(q.n);
    for (index, (_, m)) in q.terms.iter().enumerate() {
        let error = max_abs(&(m * &j + &j * m));
        if error > 1e-12 * max_abs(m).max(1.0) {
            return Err(Error::NotAntilinear { index, error });
        }
    }
    let mut probes = halton_box(2 * q.n, q.box_radius, PROBES);
    probes.push(vec![0.0; 2 * q.n]);
    for p in probes {
        let norm = operator_norm(&q.eval(&p));
        if norm >= 1.0 {
            return Err(Error::NormTooLarge { norm });
        }
    }
    Ok(ACStructure { n: q.n, kind: StructureKind::QField(q) })
}

pub fn make_pushforward_structure(diffeo: PolyDiffeo) -> Result<ACStructure> {
    let mut probes = halton_box(2 * diffeo.n, diffeo.box_radius, PROBES);
    probes.push(vec![0.0; 2 * diffeo.n]);
    for p in probes {
        let det = diffeo.jacobian(&p).determinant();
        if !(det.abs() > 1e-8) {
            return Err(Error::SingularJacobian { point: p });
        }
    }
    Ok(ACStructure { n: diffeo.n, kind: StructureKind::Pushforward(diffeo) })
}

impl ACStructure {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &StructureKind {
        &self.kind
    }

    pub fn kind_tag(&self) -> &'static str {
        match self.kind {
            StructureKind::Standard => "standard",
            StructureKind::QField(_) => "q_field",
            StructureKind::Pushforward(_) => "pushforward",
        }
    }

    pub fn is_standard(&self) -> bool {
        matches!(self.kind, StructureKind::Standard)
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != 2 * self.n {
            return Err(Error::Dimension { expected: 2 * self.n, found: p.len() });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::EvaluatorDomain { point: p.to_vec() });
        }
        if let StructureKind::QField(q) = &self.kind {
            if p.iter().any(|x| x.abs() > q.box_radius) {
                return Err(Error::EvaluatorDomain { point: p.to_vec() });
            }
        }
        Ok(())
    }

    /// `J(p)`.
    pub fn j_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(p)?;
        let j = j0(self.n);
        match &self.kind {
            StructureKind::Standard => Ok(j),
            StructureKind::QField(field) => {
                let q = field.eval(p);
                let id = DMatrix::<f64>::identity(2 * self.n, 2 * self.n);
                let inv = (&id + &q).try_inverse().ok_or_else(|| Error::SingularSum { point: p.to_vec() })?;
                Ok(j * (id - q) * inv)
            }
            StructureKind::Pushforward(phi) => {
                let u = phi.inverse(p)?;
                let a = phi.jacobian(&u);
                let inv = a.clone().try_inverse().ok_or_else(|| Error::SingularJacobian { point: u.clone() })?;
                Ok(a * j * inv)
            }
        }
    }

    /// `q_J(p)` for the solver. Q-fields return their defining field, which
    /// equals [`compute_q`] to rounding.
    pub fn beltrami_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        match &self.kind {
            StructureKind::Standard => {
                self.check_point(p)?;
                Ok(DMatrix::zeros(2 * self.n, 2 * self.n))
            }
            StructureKind::QField(field) => {
                self.check_point(p)?;
                Ok(field.eval(p))
            }
            StructureKind::Pushforward(_) => compute_q(self, p),
        }
    }

    /// Product structure `i x J` on `C x C^n` (first factor standard).
    pub fn product_with_plane(&self) -> ACStructure {
        let kind = match &self.kind {
            StructureKind::Standard => StructureKind::Standard,
            StructureKind::QField(q) => StructureKind::QField(q.prepend_flat(1)),
            StructureKind::Pushforward(phi) => StructureKind::Pushforward(phi.prepend_identity(1)),
        };
        ACStructure { n: self.n + 1, kind }
    }
}

/// `q_J(p) = (J0 + J(p))^{-1} (J0 - J(p))`.
pub fn compute_q(s: &ACStructure, p: &[f64]) -> Result<DMatrix<f64>> {
    let j = s.j_at(p)?;
    let j0 = j0(s.n);
    let sum = &j0 + &j;
    let lu = sum.lu();
    if lu.determinant().abs() < 1e-12 {
        return Err(Error::SingularSum { point: p.to_vec() });
    }
    lu.solve(&(j0 - j)).ok_or_else(|| Error::SingularSum { point: p.to_vec() })
}

/// Nijenhuis tensor `N(X, Y) = [JX, JY] - J[JX, Y] - J[X, JY] - [X, Y]` for
/// constant vector fields, with central differences of step `h`.
///
/// Evaluated as `A(X, Y) - A(Y, X)` with
/// `A(X, Y) = (D_{JX} J) Y - J (D_X J) Y`, so swapping the arguments negates
/// the result exactly.
pub fn nijenhuis(s: &ACStructure, p: &[f64], x: &[f64], y: &[f64], h: f64) -> Result<Vec<f64>> {
    let d = 2 * s.n;
    if x.len() != d || y.len() != d {
        return Err(Error::Dimension { expected: d, found: x.len().min(y.len()) });
    }
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("finite-difference step {h} must be positive")));
    }
    let jp = s.j_at(p)?;
    let directional = |u: &[f64]| -> Result<DMatrix<f64>> {
        let plus: Vec<f64> = p.iter().zip(u).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = p.iter().zip(u).map(|(a, b)| a - h * b).collect();
        Ok((s.j_at(&plus)? - s.j_at(&minus)?) / (2.0 * h))
    };
    let half = |a: &[f64], b: &[f64]| -> Result<nalgebra::DVector<f64>> {
        let (av, bv) = (linalg::dvec(a), linalg::dvec(b));
        let ja = &jp * &av;
        let d_ja = directional(ja.as_slice())?;
        let d_a = directional(a)?;
        Ok(d_ja * &bv - &jp * (d_a * &bv))
    };
    let n = half(x, y)? - half(y, x)?;
    Ok(n.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample_field() -> AntilinearField {
        AntilinearField::from_complex(
            2,
            vec![
                (Monomial(vec![0, 0, 0, 0]), vec![vec![c(0.1, 0.05), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-0.05, 0.0)]]),
                (Monomial(vec![1, 0, 0, 0]), vec![vec![c(0.0, 0.0), c(0.1, 0.0)], vec![c(0.0, 0.1), c(0.0, 0.0)]]),
                (Monomial(vec![0, 0, 1, 1]), vec![vec![c(0.05, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.05)]]),
            ],
            1.5,
        )
        .unwrap()
    }

    fn max_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        max_abs(&(a - b))
    }

    #[test]
    fn standard_structure_is_j0() {
        let s = make_standard_structure(1).unwrap();
        let j = s.j_at(&[0.3, -4.0]).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        let s2 = make_standard_structure(2).unwrap();
        let j2 = s2.j_at(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(&j2 * &j2, -DMatrix::<f64>::identity(4, 4));
        assert_eq!(compute_q(&s2, &[0.1, 0.2, 0.3, 0.4]).unwrap(), DMatrix::zeros(4, 4));
    }

    #[test]
    fn zero_field_gives_standard_structure() {
        let q = AntilinearField::new(2, vec![], 1.0).unwrap();
        let s = make_q_structure(q).unwrap();
        assert_eq!(s.j_at(&[0.1, 0.2, 0.3, 0.4]).unwrap(), j0(2));
    }

    #[test]
    fn q_round_trip_constant_field() {
        // |q0| = 0.3 constant antilinear field
        let q = AntilinearField::from_complex(
            2,
            vec![(Monomial(vec![0; 4]), vec![vec![c(0.0, 0.3), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.2, 0.0)]])],
            1.0,
        )
        .unwrap();
        let q0 = q.eval(&[0.0; 4]);
        assert!((operator_norm(&q0) - 0.3).abs() < 1e-14);
        let s = make_q_structure(q).unwrap();
        let back = compute_q(&s, &[0.5, -0.2, 0.1, 0.9]).unwrap();
        assert!(max_err(&back, &q0) <= 1e-12);
    }

    #[test]
    fn q_structure_squares_to_minus_identity() {
        let q = sample_field();
        let s = make_q_structure(q.clone()).unwrap();
        let id = DMatrix::<f64>::identity(4, 4);
        for p in halton_box(4, 1.5, 100) {
            let j = s.j_at(&p).unwrap();
            assert!(max_abs(&(&j * &j + &id)) <= 1e-12);
            let back = compute_q(&s, &p).unwrap();
            assert!(max_err(&back, &q.eval(&p)) <= 1e-12);
            let jz = j0(2);
            assert!(max_abs(&(&back * &jz + &jz * &back)) <= 1e-10);
        }
    }

    #[test]
    fn non_antilinear_matrix_is_rejected() {
        let m = DMatrix::<f64>::identity(2, 2) * 0.1;
        let err = AntilinearField::new(1, vec![(Monomial(vec![0, 0]), m)], 1.0).unwrap_err();
        assert!(matches!(err, Error::NotAntilinear { index: 0, .. }));
    }

    #[test]
    fn large_field_is_rejected() {
        let q = AntilinearField::from_complex(1, vec![(Monomial(vec![1, 0]), vec![vec![c(1.0, 0.0)]])], 2.0).unwrap();
        assert!(matches!(make_q_structure(q), Err(Error::NormTooLarge { .. })));
    }

    #[test]
    fn identity_pushforward_is_standard() {
        let s = make_pushforward_structure(PolyDiffeo::identity(2, 2.0)).unwrap();
        assert!(max_err(&s.j_at(&[0.1, 0.2, -0.3, 0.4]).unwrap(), &j0(2)) == 0.0);
    }

    #[test]
    fn diffeo_inverse_round_trips() {
        let phi = PolyDiffeo::new(
            2,
            vec![
                (Monomial(vec![2, 0, 0, 0]), vec![0.0, 0.0, 0.0, 0.1]),
                (Monomial(vec![1, 1, 0, 0]), vec![0.0, 0.0, 0.1, 0.0]),
            ],
            2.0,
        )
        .unwrap();
        let u = vec![0.3, -0.4, 0.1, 0.2];
        let back = phi.inverse(&phi.map(&u)).unwrap();
        for (a, b) in back.iter().zip(&u) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn nijenhuis_vanishes_for_standard_and_is_antisymmetric() {
        let s = make_standard_structure(2).unwrap();
        let p = [0.1, 0.2, 0.3, 0.4];
        let (x, y) = ([1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]);
        let n = nijenhuis(&s, &p, &x, &y, 1e-4).unwrap();
        assert!(n.iter().all(|v| v.abs() <= 1e-10));
        let q = make_q_structure(sample_field()).unwrap();
        let a = nijenhuis(&q, &p, &x, &y, 1e-4).unwrap();
        let b = nijenhuis(&q, &p, &y, &x, 1e-4).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_eq!(*u, -*v);
        }
    }

    #[test]
    fn qfield_outside_box_is_domain_error() {
        let s = make_q_structure(sample_field()).unwrap();
        assert!(matches!(s.j_at(&[2.0, 0.0, 0.0, 0.0]), Err(Error::EvaluatorDomain { .. })));
    }

    #[test]
    fn product_structure_is_block_diagonal() {
        let s = make_q_structure(sample_field()).unwrap();
        let lifted = s.product_with_plane();
        let p = [0.7, -0.3, 0.2, 0.1, -0.4, 0.3];
        let big = lifted.j_at(&p).unwrap();
        let small = s.j_at(&p[2..]).unwrap();
        assert_eq!(big.view((0, 0), (2, 2)).clone_owned(), j0(1));
        assert!(max_err(&big.view((2, 2), (4, 4)).clone_owned(), &small) < 1e-15);
        assert!(max_abs(&big.view((0, 2), (2, 4)).clone_owned()) == 0.0);
    }
}
