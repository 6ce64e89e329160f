//! Fixed-point, resolvent, and spectral solvers for the transfer operator.
//!
//! All three entry points share the collocation discretization from
//! [`crate::op::collocation_rows`]: a density is a cubic interpolant on a
//! uniform grid, and one operator application is a sparse matrix-vector
//! product. Certificates are computed against the exact pointwise operator
//! ([`crate::op::apply`]), not against the discretized matrix, so a reported
//! residual measures the true defect of the returned interpolant.

pub mod birkhoff;
pub(crate) mod rng;
pub mod ulam;

use crate::error::SolverError;
use crate::grid::{GridDensity, InterpOrder, NormKind, Quadrature};
use crate::map::MapFamily;
use crate::op::{self, ly_constants};
use nalgebra::DMatrix;

/// Width of the refined quadrature band around the support edge, as a
/// fraction of the domain.
const EDGE_BAND: f64 = 0.05;

/// Step-to-certificate ratio: the expensive exact-operator residual is only
/// evaluated once successive iterates differ by this fraction of `tol`.
const CERT_TRIGGER: f64 = 0.05;

/// Tuning knobs for [`invariant_density_with`].
#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Refine the certificate quadrature near the support edge `a(eps)`,
    /// where the density has a flat but non-polynomial profile.
    pub refine_near_edge: bool,
    /// Starting density; uniform when absent. Must live on the same grid
    /// and carry positive mass.
    pub init: Option<GridDensity>,
    /// Iteration cap for the power method.
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            refine_near_edge: true,
            init: None,
            max_iterations: 100_000,
        }
    }
}

/// Invariant density together with its convergence certificate.
#[derive(Clone, Debug)]
pub struct InvariantSolve {
    /// Fixed point of the transfer operator, normalized to unit mass.
    pub density: GridDensity,
    /// `‖L h − h‖₁` measured with the exact pointwise operator.
    pub residual_l1: f64,
    /// Power-method iterations consumed.
    pub iterations: usize,
}

fn check_grid_n(grid_n: usize) -> Result<(), SolverError> {
    if grid_n < 128 {
        return Err(SolverError::InvalidParameter {
            name: "grid_n",
            value: grid_n.to_string(),
            requirement: "at least 128 cells",
        });
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<(), SolverError> {
    if !(tol >= 1e-12) {
        return Err(SolverError::InvalidParameter {
            name: "tol",
            value: format!("{tol:e}"),
            requirement: "at least 1e-12",
        });
    }
    Ok(())
}

fn certificate_quadrature(family: &dyn MapFamily, eps: f64, grid_n: usize, refine: bool) -> Quadrature {
    if refine {
        Quadrature::uniform_refined(grid_n, family.turning_image(eps), EDGE_BAND)
    } else {
        Quadrature::uniform(grid_n)
    }
}

/// Solves `L h = h`, `∫ h = 1` by power iteration and returns the density.
pub fn invariant_density(
    family: &dyn MapFamily,
    eps: f64,
    grid_n: usize,
    tol: f64,
) -> Result<GridDensity, SolverError> {
    invariant_density_with(family, eps, grid_n, tol, &SolveOptions::default())
        .map(|solve| solve.density)
}

/// Power iteration with an exact-operator stopping certificate.
///
/// Iterates the collocation matrix, renormalizing to unit mass each step.
/// Once successive iterates are within `0.05·tol` in L¹ the true residual
/// `‖L h − h‖₁` is evaluated with the pointwise operator; the solve is
/// accepted only when that certificate passes `tol`.
pub fn invariant_density_with(
    family: &dyn MapFamily,
    eps: f64,
    grid_n: usize,
    tol: f64,
    options: &SolveOptions,
) -> Result<InvariantSolve, SolverError> {
    check_grid_n(grid_n)?;
    check_tol(tol)?;
    let rows = op::collocation_rows(family, grid_n, eps)?;
    let quad = certificate_quadrature(family, eps, grid_n, options.refine_near_edge);

    let mut h = match &options.init {
        Some(init) => {
            if init.cells() != grid_n || init.order() != InterpOrder::Cubic {
                return Err(SolverError::InvalidParameter {
                    name: "options.init",
                    value: format!("{} cells, {:?}", init.cells(), init.order()),
                    requirement: "cubic density on the solve grid",
                });
            }
            init.clone()
        }
        None => GridDensity::constant(grid_n, 1.0),
    };
    let mass = h.integral_on(&quad);
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(SolverError::InvalidParameter {
            name: "options.init",
            value: format!("mass {mass:e}"),
            requirement: "positive finite mass",
        });
    }
    h.scale(1.0 / mass);

    let mut last_step = f64::INFINITY;
    let mut last_certificate = f64::NAN;
    for iteration in 1..=options.max_iterations {
        let mut next = rows.matvec(&h);
        let mass = next.integral_on(&quad);
        if !(mass > 1e-12) || !mass.is_finite() {
            return Err(SolverError::NonConvergence {
                what: "invariant density power iteration (mass collapse)",
                residual: mass,
                iterations: iteration,
            });
        }
        next.scale(1.0 / mass);
        last_step = next.linear_comb(1.0, &h, -1.0).norm_on(NormKind::L1, &quad);
        h = next;
        if last_step <= CERT_TRIGGER * tol {
            let image = op::apply(family, &h, eps)?;
            let residual = image.linear_comb(1.0, &h, -1.0).norm_on(NormKind::L1, &quad);
            if residual <= tol {
                return Ok(InvariantSolve {
                    density: h,
                    residual_l1: residual,
                    iterations: iteration,
                });
            }
            last_certificate = residual;
            // Once the iterate is stationary far below the certificate gap,
            // the gap is discretization bias that more matrix steps cannot
            // remove; burning the rest of the budget would not change it.
            if last_step <= 1e-4 * CERT_TRIGGER * tol {
                return Err(SolverError::NonConvergence {
                    what: "invariant density certificate (grid too coarse for this tolerance)",
                    residual,
                    iterations: iteration,
                });
            }
        }
    }
    Err(SolverError::NonConvergence {
        what: "invariant density power iteration",
        residual: if last_certificate.is_finite() {
            last_certificate
        } else {
            last_step
        },
        iterations: options.max_iterations,
    })
}

/// Solution of `(I − L) φ = q` with its certificate.
#[derive(Clone, Debug)]
pub struct ResolventSolve {
    /// Zero-mean solution of the resolvent equation.
    pub solution: GridDensity,
    /// Neumann terms summed (the source counts as the first term).
    pub terms_used: usize,
    /// `‖φ − L φ − q‖₁` measured with the exact pointwise operator.
    pub residual_l1: f64,
}

/// Solves `(I − L) φ = q` for zero-mean `q` by a Neumann series.
pub fn resolvent_solve(
    family: &dyn MapFamily,
    eps: f64,
    q: &GridDensity,
    tol: f64,
) -> Result<ResolventSolve, SolverError> {
    resolvent_solve_with(family, eps, q, tol, None)
}

/// Neumann series for the resolvent, with per-term mass projection.
///
/// Each term is re-centered by subtracting its mass times the invariant
/// density: the mass component sits on the eigenvalue-1 eigenspace and
/// would otherwise never decay. The series stops once a term falls below
/// `tol·‖q‖₁`. Pass the invariant density in `fixed_density` to skip the
/// internal solve.
pub fn resolvent_solve_with(
    family: &dyn MapFamily,
    eps: f64,
    q: &GridDensity,
    tol: f64,
    fixed_density: Option<&GridDensity>,
) -> Result<ResolventSolve, SolverError> {
    check_tol(tol)?;
    let grid_n = q.cells();
    check_grid_n(grid_n)?;
    let quad = certificate_quadrature(family, eps, grid_n, true);

    let mean = q.integral_on(&quad);
    if mean.abs() > 1e-8 {
        return Err(SolverError::NotZeroMean { mean });
    }
    let q_norm = q.norm_on(NormKind::L1, &quad);
    if q_norm == 0.0 {
        return Ok(ResolventSolve {
            solution: GridDensity::from_values(vec![0.0; grid_n + 1], q.order()),
            terms_used: 1,
            residual_l1: 0.0,
        });
    }

    let owned;
    let h = match fixed_density {
        Some(h) => {
            if h.cells() != grid_n {
                return Err(SolverError::InvalidParameter {
                    name: "fixed_density",
                    value: format!("{} cells", h.cells()),
                    requirement: "same grid as the source term",
                });
            }
            h
        }
        None => {
            owned = invariant_density(family, eps, grid_n, (tol * 1e-2).max(1e-12))?;
            &owned
        }
    };

    let rows = op::collocation_rows(family, grid_n, eps)?;
    let project = |f: &GridDensity| {
        let mass = f.integral_on(&quad);
        f.linear_comb(1.0, h, -mass)
    };

    const MAX_TERMS: usize = 10_000;
    const DIVERGENCE_FACTOR: f64 = 50.0;
    const DIVERGENCE_GRACE: usize = 20;

    let mut term = project(q);
    let mut phi = term.clone();
    let mut terms_used = 1usize;
    loop {
        let term_norm = term.norm_on(NormKind::L1, &quad);
        if term_norm <= tol * q_norm {
            break;
        }
        if terms_used >= MAX_TERMS
            || (terms_used >= DIVERGENCE_GRACE && term_norm > DIVERGENCE_FACTOR * q_norm)
        {
            return Err(SolverError::NonConvergence {
                what: "resolvent Neumann series",
                residual: term_norm,
                iterations: terms_used,
            });
        }
        term = project(&rows.matvec(&term));
        phi = phi.linear_comb(1.0, &term, 1.0);
        terms_used += 1;
    }

    let image = op::apply(family, &phi, eps)?;
    let residual = phi
        .linear_comb(1.0, &image, -1.0)
        .linear_comb(1.0, q, -1.0)
        .norm_on(NormKind::L1, &quad);
    Ok(ResolventSolve {
        solution: phi,
        terms_used,
        residual_l1: residual,
    })
}

/// Discrete spectrum of the collocation matrix next to the contraction
/// constants that bound the essential spectrum of the operator itself.
#[derive(Clone, Debug)]
pub struct SpectralDiagnostics {
    /// Modulus of the largest eigenvalue (1 up to discretization error).
    pub leading_eig: f64,
    /// Modulus of the second-largest eigenvalue.
    pub subdominant_modulus: f64,
    /// Lasota–Yorke contraction factor `sup 1/|T′|`.
    pub lambda_ly: f64,
    /// Lasota–Yorke additive constant `‖T″/T′²‖₂`.
    pub m_ly: f64,
    /// Essential spectral radius bound (equals `lambda_ly`).
    pub ess_radius_bound: f64,
    /// Eigenvalue moduli above the essential-radius bound, descending.
    pub moduli_above_ess: Vec<f64>,
    /// The sixteen largest moduli, descending, for stability comparisons.
    pub moduli_top: Vec<f64>,
}

/// Dense eigendecomposition of the collocation matrix.
///
/// `grid_n` is capped at 4096: the matrix is dense `(n+1)²` and the Schur
/// factorization is cubic in `n`.
pub fn spectrum(
    family: &dyn MapFamily,
    eps: f64,
    grid_n: usize,
) -> Result<SpectralDiagnostics, SolverError> {
    check_grid_n(grid_n)?;
    if grid_n > 4096 {
        return Err(SolverError::InvalidParameter {
            name: "grid_n",
            value: grid_n.to_string(),
            requirement: "at most 4096 cells for the dense eigensolve",
        });
    }
    let rows = op::collocation_rows(family, grid_n, eps)?;
    let dim = grid_n + 1;
    let mut matrix = DMatrix::<f64>::zeros(dim, dim);
    for (i, row) in rows.rows().iter().enumerate() {
        for &(j, v) in row {
            matrix[(i, j)] += v;
        }
    }
    let schur = nalgebra::linalg::Schur::try_new(matrix, 1e-12, 100_000)
        .ok_or_else(|| SolverError::Eigen("Schur iteration did not converge".to_string()))?;
    let mut moduli: Vec<f64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    moduli.sort_by(|a, b| b.total_cmp(a));

    let ly = ly_constants(family, eps, 1024)?;
    let above: Vec<f64> = moduli
        .iter()
        .copied()
        .take_while(|&m| m > ly.lambda)
        .collect();
    Ok(SpectralDiagnostics {
        leading_eig: moduli[0],
        subdominant_modulus: moduli[1],
        lambda_ly: ly.lambda,
        m_ly: ly.m,
        ess_radius_bound: ly.lambda,
        moduli_above_ess: above,
        moduli_top: moduli.into_iter().take(16).collect(),
    })
}
