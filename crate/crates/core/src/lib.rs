//! Numerics for transfer operators of piecewise-expanding interval maps whose
//! turning point is an integrable cusp: the one-sided derivatives blow up like
//! `|x - c|^beta` with `beta` in `(-1, -3/4)`, so the map is expanding with an
//! unbounded expansion constant and the pushforward of Lebesgue-absolutely
//! continuous densities gains Sobolev regularity.
//!
//! The crate is organised bottom-up:
//!
//! * [`map`] — the map family abstraction, branch inverses, and a concrete
//!   cusp-tent family together with a bounded-slope tent used as a negative
//!   control;
//! * [`quad`] / [`grid`] — deterministic composite Gauss–Legendre quadrature
//!   (with geometric refinement toward the cusp) and uniform-grid densities
//!   with local polynomial interpolation;
//! * [`op`] — pointwise transfer-operator actions on values, first and second
//!   derivatives, branch (ψ) components, and the inequality constants they
//!   satisfy;
//! * [`solver`] — invariant densities by power iteration, an Ulam-matrix
//!   oracle, Neumann-series resolvent solves on the zero-mean subspace, dense
//!   collocation spectra, and Birkhoff-average spot checks;
//! * [`response`] — the first-order parameter response of the invariant
//!   density and its finite-difference validation;
//! * [`audit`] — measurable checks of the standing assumptions on a family.
//!
//! All floating-point reductions use fixed-order pairwise summation so repeat
//! runs produce identical bits regardless of thread count.

// Negated comparisons like `!(x > 0.0)` are NaN-rejecting guards and must
// stay in that form; reference constants keep their full source digits even
// past f64 resolution.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::excessive_precision)]

pub mod audit;
pub mod error;
pub mod grid;
pub mod map;
pub mod op;
pub mod quad;
pub mod response;
pub mod solver;

pub use audit::{AssumptionAudit, AuditEntry, AuditStatus};
pub use error::{MapError, SolverError};
pub use grid::{GridDensity, InterpOrder, NormKind, Quadrature};
pub use map::{Branch, FamilyRegistry, MapFamily, Preimage};
pub use response::{ResponseReport, ValidateOptions};
pub use solver::birkhoff::{BirkhoffCheck, Observable};
pub use solver::ulam::UlamSolve;
pub use solver::{InvariantSolve, ResolventSolve, SolveOptions, SpectralDiagnostics};
