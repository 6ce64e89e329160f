//! Error types shared across the crate.

use thiserror::Error;

/// Failures of map-family evaluations and branch inversion.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    /// The map value is undefined at the turning point itself.
    #[error("map value undefined at the turning point x = {x}")]
    AtTurningPoint { x: f64 },

    /// Derivative queries are rejected inside the cusp guard band, where the
    /// one-sided derivatives are no longer representable.
    #[error("|x - c| = {dist:e} lies inside the cusp guard band ({guard:e})")]
    CuspProximity { dist: f64, guard: f64 },

    /// Argument outside `[0, 1]`.
    #[error("x = {x} outside the unit interval")]
    OutOfDomain { x: f64 },

    /// Parameter outside `[0, eps_max)`.
    #[error("epsilon = {eps} outside [0, {eps_max})")]
    EpsilonOutOfRange { eps: f64, eps_max: f64 },

    /// The requested point has no preimage on the given branch.
    #[error("no branch preimage: x = {x} exceeds the branch image bound {bound}")]
    NoPreimage { x: f64, bound: f64 },

    /// Derivative order outside `{1, 2, 3}`.
    #[error("derivative order {order} not supported (must be 1, 2, or 3)")]
    BadOrder { order: u8 },

    /// The safeguarded root finder exhausted its iteration budget.
    #[error("branch inverse did not converge: residual {residual:e} after {iterations} iterations")]
    RootFind { residual: f64, iterations: u32 },
}

/// Failures of the iterative solvers and spectral routines.
#[derive(Debug, Error)]
pub enum SolverError {
    /// A precondition on a caller-supplied parameter was violated.  CLI
    /// front-ends map this to a configuration error, not a numerical one.
    #[error("invalid parameter {name} = {value}: {requirement}")]
    InvalidParameter {
        name: &'static str,
        value: String,
        requirement: &'static str,
    },

    /// An iteration failed to reach its tolerance within the budget.
    #[error("{what} did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        residual: f64,
        iterations: usize,
    },

    /// Distinct starting vectors settled on different fixed densities.
    #[error("stationary vector is not unique: starts disagree by {gap:e} in L1")]
    NotUnique { gap: f64 },

    /// The Neumann series was fed a right-hand side with nonzero mean.
    #[error("right-hand side is not zero-mean: integral = {mean:e}")]
    NotZeroMean { mean: f64 },

    /// A density expected to be normalised was not.
    #[error("density is not normalised: integral = {mass}")]
    NotNormalized { mass: f64 },

    /// The dense eigensolver failed.
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error(transparent)]
    Map(#[from] MapError),
}
