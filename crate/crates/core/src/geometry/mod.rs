//! Almost complex structures on regions of `C^n`, the Beltrami-type
//! coefficient `q_J`, the Nijenhuis tensor and model domains.

mod domain;
mod structure;

pub use domain::{domain_margin, Domain, Tube};
pub use structure::{
    compute_q, make_pushforward_structure, make_q_structure, make_standard_structure, nijenhuis, ACStructure,
    AntilinearField, Monomial, PolyDiffeo, StructureKind,
};
