//! Pseudoholomorphic disks in almost complex domains of `C^n`.
//!
//! The crate builds disks solving the nonlinear Cauchy-Riemann equation
//! `f_y = J(f) f_x` by reducing it to a holomorphic problem with a right
//! inverse of `d_bar`, deforms them to prescribed first-order jets, perturbs
//! them to injective disks, and uses the resulting witnesses to bound the
//! Kobayashi-Royden and Hahn pseudonorms from above.

pub mod deformation;
pub mod error;
pub mod geometry;
pub mod injectivity;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod pseudonorm;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
