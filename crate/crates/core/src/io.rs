//! JSON file shapes for structures, domains, points and numerical settings.
//!
//! Physical parameters (dimensions, radii, coefficients) have no defaults;
//! every numerical knob does. All shapes reject unknown keys.
//!
//! Points and directions are arrays of `[re, im]` pairs, one per complex
//! coordinate. Structures and domains are tagged by `"kind"`:
//!
//! ```
//! use phd_core::io::{DomainFile, StructureFile};
//!
//! let s: StructureFile = serde_json::from_str(r#"{"kind": "standard", "n": 2}"#).unwrap();
//! assert!(s.build().unwrap().is_standard());
//!
//! let d: DomainFile = serde_json::from_str(
//!     r#"{"kind": "ball", "center": [[0, 0], [0, 0]], "radius": 2}"#,
//! ).unwrap();
//! assert_eq!(d.build().unwrap().scale(), 2.0);
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::deformation::NewtonConfig;
use crate::error::{Error, Result};
use crate::geometry::{
    make_pushforward_structure, make_q_structure, make_standard_structure, ACStructure, AntilinearField, Domain,
    Monomial, PolyDiffeo, StructureKind,
};
use crate::injectivity::RefineConfig;
use crate::kernel::{PolyDiskMap, PolyDiskMapFile};
use crate::linalg::C64;
use crate::pseudonorm::NormConfig;
use crate::solver::SolverConfig;

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureFile {
    Standard { n: usize },
    QField { n: usize, box_radius: f64, coeffs: Vec<QTerm> },
    Pushforward { n: usize, box_radius: f64, coeffs: Vec<DiffeoTerm> },
}

/// `monomial(p) * matrix`, with `matrix` given as `2n` real rows.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QTerm {
    pub monomial: Vec<u32>,
    pub matrix: Vec<Vec<f64>>,
}

/// `monomial(w) * vector`, added to the identity.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiffeoTerm {
    pub monomial: Vec<u32>,
    pub vector: Vec<f64>,
}

impl StructureFile {
    pub fn build(&self) -> Result<ACStructure> {
        match self {
            StructureFile::Standard { n } => make_standard_structure(*n),
            StructureFile::QField { n, box_radius, coeffs } => {
                let terms = coeffs
                    .iter()
                    .map(|t| Ok((Monomial(t.monomial.clone()), matrix(*n, &t.matrix)?)))
                    .collect::<Result<Vec<_>>>()?;
                make_q_structure(AntilinearField::new(*n, terms, *box_radius)?)
            }
            StructureFile::Pushforward { n, box_radius, coeffs } => {
                let terms = coeffs.iter().map(|t| (Monomial(t.monomial.clone()), t.vector.clone())).collect();
                make_pushforward_structure(PolyDiffeo::new(*n, terms, *box_radius)?)
            }
        }
    }
}

fn matrix(n: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = 2 * n;
    if rows.len() != d {
        return Err(Error::Dimension { expected: d, found: rows.len() });
    }
    if let Some(row) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension { expected: d, found: row.len() });
    }
    Ok(DMatrix::from_fn(d, d, |r, c| rows[r][c]))
}

impl From<&ACStructure> for StructureFile {
    fn from(s: &ACStructure) -> Self {
        match s.kind() {
            StructureKind::Standard => StructureFile::Standard { n: s.n() },
            StructureKind::QField(q) => StructureFile::QField {
                n: q.n(),
                box_radius: q.box_radius(),
                coeffs: q
                    .terms()
                    .iter()
                    .map(|(mono, m)| QTerm {
                        monomial: mono.0.clone(),
                        matrix: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    })
                    .collect(),
            },
            StructureKind::Pushforward(phi) => StructureFile::Pushforward {
                n: phi.n(),
                box_radius: phi.box_radius(),
                coeffs: phi
                    .terms()
                    .iter()
                    .map(|(mono, v)| DiffeoTerm { monomial: mono.0.clone(), vector: v.clone() })
                    .collect(),
            },
        }
    }
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainFile {
    Ball { center: Vec<C64>, radius: f64 },
    Polydisk { center: Vec<C64>, radii: Vec<f64> },
    Tube { base: PolyDiskMapFile, radius: f64 },
    WholeSpace { n: usize, truncation_radius: f64 },
}

impl DomainFile {
    pub fn build(&self) -> Result<Domain> {
        match self {
            DomainFile::Ball { center, radius } => Domain::ball(center.clone(), *radius),
            DomainFile::Polydisk { center, radii } => Domain::polydisk(center.clone(), radii.clone()),
            DomainFile::Tube { base, radius } => Domain::tube(PolyDiskMap::try_from(base.clone())?, *radius),
            DomainFile::WholeSpace { n, truncation_radius } => {
                if *n == 0 {
                    return Err(Error::Invalid("complex dimension must be positive".into()));
                }
                if !(*truncation_radius > 0.0) {
                    return Err(Error::BadRadius(*truncation_radius));
                }
                Ok(Domain::WholeSpace { n: *n, truncation_radius: *truncation_radius })
            }
        }
    }
}

impl From<&Domain> for DomainFile {
    fn from(d: &Domain) -> Self {
        match d {
            Domain::Ball { center, radius } => DomainFile::Ball { center: center.clone(), radius: *radius },
            Domain::Polydisk { center, radii } => DomainFile::Polydisk { center: center.clone(), radii: radii.clone() },
            Domain::Tube(t) => DomainFile::Tube { base: PolyDiskMapFile::from(t.base()), radius: t.radius() },
            Domain::WholeSpace { n, truncation_radius } => {
                DomainFile::WholeSpace { n: *n, truncation_radius: *truncation_radius }
            }
        }
    }
}

/// Numerical settings shared by the pipelines. Every field has a default.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub solver: SolverConfig,
    pub newton: NewtonConfig,
    pub refine: RefineConfig,
    pub norm: NormConfig,
}
