use serde::Serialize;
use thiserror::Error;

use crate::solver::SolveStatus;

/// Errors raised across the library.
///
/// Numerical failures (non-convergence, missing witnesses) are kept apart from
/// input errors so that front ends can map them to different exit codes; see
/// [`Error::is_numerical`].
#[derive(Debug, Error, Clone, PartialEq, Serialize)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),

    // geometry
    #[error("coefficient matrix {index} is not J0-antilinear (error {error:.3e})")]
    NotAntilinear { index: usize, error: f64 },
    #[error("operator norm of q reaches {norm:.6} >= 1 at a probe point")]
    NormTooLarge { norm: f64 },
    #[error("Jacobian of the diffeomorphism is singular near {point:?}")]
    SingularJacobian { point: Vec<f64> },
    #[error("J0 + J(p) is not invertible at {point:?}")]
    SingularSum { point: Vec<f64> },
    #[error("point {point:?} lies outside the region where the structure is defined")]
    EvaluatorDomain { point: Vec<f64> },

    // cauchy kernel
    #[error("evaluation point |z| = {modulus} outside the disk of radius {radius}")]
    OutsideDisk { modulus: f64, radius: f64 },
    #[error("fitting operator is ill conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },
    #[error("grid too small: {0}")]
    BadGrid(String),
    #[error("quadrature point within 1e-9 of a collocation node")]
    NodeCollision,

    // solver
    #[error("operator norm of q_J reaches {norm:.4} above the cap {cap}")]
    QCapExceeded { norm: f64, cap: f64 },
    #[error("Picard iteration did not converge: {status:?} after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { status: SolveStatus, iterations: usize, residual: f64 },

    // deformation
    #[error("target direction v is zero")]
    DegenerateDirection,
    #[error("radius {0} is not admissible")]
    BadRadius(f64),
    #[error("Newton inversion of the jet map stalled (jet error {error:.3e} after {iterations} steps)")]
    NewtonStalled { error: f64, iterations: usize },
    #[error("base disk is not pseudoholomorphic (residual {residual:.3e})")]
    NotPseudoholomorphic { residual: f64 },
    #[error("solver fails at radius {requested}; largest working radius {largest_working:?}")]
    ShrinkTooSmall { requested: f64, largest_working: Option<f64> },

    // injectivity
    #[error("sample count must be positive")]
    BadCount,
    #[error("shift magnitude must be positive")]
    BadMagnitude,
    #[error("|alpha| = {0} must exceed 1")]
    BadAlpha(f64),
    #[error("no generic shift found in {trials} trials (best violation {best_violation:.3e})")]
    NoGenericShiftFound { trials: usize, best_violation: f64 },
    #[error("perturbed disk still has {count} self-intersections")]
    StillSelfIntersecting { count: usize },
    #[error("ambient dimension n = {n} < 3: lift the disk first")]
    AmbientTooSmall { n: usize },

    // pseudonorm
    #[error("no admissible disk found, even at radius {r_lo}")]
    NoDiskFound { r_lo: f64 },
    #[error("point is not inside the domain (margin {margin})")]
    OutsideDomain { margin: f64 },
    #[error("path leaves the domain at sample {index} (margin {margin})")]
    PathExits { index: usize, margin: f64 },
    #[error("chain link {link} does not match the next link (mismatch {mismatch:.3e})")]
    BrokenChain { link: usize, mismatch: f64 },
}

impl Error {
    /// True for failures of a numerical procedure on otherwise valid input.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::Dimension { .. }
                | Error::Invalid(_)
                | Error::NotAntilinear { .. }
                | Error::BadGrid(_)
                | Error::BadCount
                | Error::BadMagnitude
                | Error::BadAlpha(_)
                | Error::BadRadius(_)
                | Error::AmbientTooSmall { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
