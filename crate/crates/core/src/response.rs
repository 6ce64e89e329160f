//! Linear response of the invariant density to the family parameter.
//!
//! The derivative of the invariant density at `ε = 0` solves the resolvent
//! equation `(I − L₀) h₁ = q` with source `q = L₀(A h₀′ + B h₀)`, where the
//! coefficient fields are built from the parameter derivatives of the map:
//!
//! ```text
//!     A(x) = −∂_ε T(x) / T′(x)
//!     B(x) = ∂_ε T(x) · T″(x)/T′(x)² − ∂_ε T′(x)/T′(x)   (= A′(x))
//! ```
//!
//! Both coefficients stay bounded up to the turning point (`A → 0` there),
//! and the product `B/|T′|` vanishes at the cusp, so the source term is
//! finite everywhere and zero at the support edge. The finite-difference
//! validator re-derives the same object from invariant densities at small
//! `ε > 0` and checks that `(h_ε − h₀)/ε` approaches the resolvent solution
//! as `ε` shrinks.

use crate::error::{MapError, SolverError};
use crate::grid::{GridDensity, NormKind, Quadrature};
use crate::map::{self, MapFamily, CUSP_GUARD};
use crate::op;
use crate::solver::{self, SolveOptions};
use rayon::prelude::*;

/// Fraction of the domain refined around the support edge in certificate
/// quadratures.
pub const EDGE_BAND: f64 = 0.05;

/// Mass tolerance on densities fed to the source-term assembly.
const MASS_TOL: f64 = 1e-8;

/// `A(x) = −∂_ε T(x)/T′(x)`: first-order horizontal displacement of the
/// branch inverses per unit `ε`.
pub fn coefficient_a<F: MapFamily + ?Sized>(family: &F, x: f64, eps: f64) -> Result<f64, MapError> {
    let (eps_deriv, d1) = coefficient_inputs(family, x, eps)?;
    Ok(-eps_deriv / d1)
}

/// `B(x) = ∂_ε T·T″/T′² − ∂_ε T′/T′`, the spatial derivative of
/// [`coefficient_a`].
pub fn coefficient_b<F: MapFamily + ?Sized>(family: &F, x: f64, eps: f64) -> Result<f64, MapError> {
    let (eps_deriv, d1) = coefficient_inputs(family, x, eps)?;
    let r2 = (family.d2(x, eps) / d1) / d1;
    Ok(eps_deriv * r2 - family.eps_deriv_d1(x, eps) / d1)
}

fn coefficient_inputs<F: MapFamily + ?Sized>(
    family: &F,
    x: f64,
    eps: f64,
) -> Result<(f64, f64), MapError> {
    map::check_eps(family, eps)?;
    map::check_x(x)?;
    let dist = (x - family.turning_point()).abs();
    if dist <= CUSP_GUARD {
        return Err(MapError::CuspProximity {
            dist,
            guard: CUSP_GUARD,
        });
    }
    Ok((family.eps_deriv(x, eps), family.d1(x, eps)))
}

/// Source term `q = L₀(A h₀′ + B h₀)` of the resolvent equation, sampled on
/// a uniform grid.
///
/// `h0` must be the unperturbed invariant density (unit mass within 1e-8).
/// The coefficients are evaluated per preimage through the cusp-offset
/// bookkeeping, so the assembly stays finite arbitrarily close to the
/// support edge; nodes past the edge are exactly zero.
pub fn response_term<F: MapFamily + ?Sized>(
    family: &F,
    h0: &GridDensity,
    grid_n: usize,
) -> Result<GridDensity, SolverError> {
    if grid_n < 128 {
        return Err(SolverError::InvalidParameter {
            name: "grid_n",
            value: grid_n.to_string(),
            requirement: "at least 128 cells",
        });
    }
    let quad = Quadrature::uniform_refined(h0.cells(), family.turning_image(0.0), EDGE_BAND);
    let mass = h0.integral_on(&quad);
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(SolverError::NotNormalized { mass });
    }

    let bound = family.turning_image(0.0);
    let mut values = Vec::with_capacity(grid_n + 1);
    for i in 0..=grid_n {
        let x = i as f64 / grid_n as f64;
        if x > bound {
            values.push(0.0);
            continue;
        }
        let v = op::transfer_sum(family, x, 0.0, |p, w| {
            if w.w0 == 0.0 {
                return 0.0;
            }
            let d1 = family.d1_off(p.branch, p.cusp_offset, 0.0);
            let r2 = (family.d2_off(p.branch, p.cusp_offset, 0.0) / d1) / d1;
            let eps_deriv = family.eps_deriv_off(p.branch, p.cusp_offset, 0.0);
            let eps_deriv_d1 = family.eps_deriv_d1_off(p.branch, p.cusp_offset, 0.0);
            let a = -eps_deriv / d1;
            let b = eps_deriv * r2 - eps_deriv_d1 / d1;
            (a * h0.eval_deriv(p.y) + b * h0.eval(p.y)) * w.w0
        })?;
        values.push(v);
    }
    Ok(GridDensity::from_values(values, h0.order()))
}

/// `‖(L h)′ − h′‖₁` for an invariant density `h` at parameter `eps`.
///
/// The operator image of the fixed point is the fixed point, so its
/// derivative must reproduce `h′`; the gap measures the combined
/// interpolation and weight error of the derivative action.
pub fn deriv_consistency_l1<F: MapFamily + ?Sized>(
    family: &F,
    h: &GridDensity,
    eps: f64,
) -> Result<f64, SolverError> {
    let h1 = h.derivative();
    let image = op::apply_derivative(family, h, &h1, eps)?;
    let quad = Quadrature::uniform_refined(h.cells(), family.turning_image(eps), EDGE_BAND);
    Ok(image.linear_comb(1.0, &h1, -1.0).norm_on(NormKind::L1, &quad))
}

/// Everything produced by a response computation, including the
/// finite-difference validation when it ran.
#[derive(Clone, Debug)]
pub struct ResponseReport {
    /// Unperturbed invariant density.
    pub h0: GridDensity,
    /// Resolvent source term.
    pub q: GridDensity,
    /// Response density `h₁` (zero-mean resolvent solution).
    pub response: GridDensity,
    /// Measured mass of `q` (must be ~0).
    pub q_mean: f64,
    /// Neumann terms consumed by the resolvent solve.
    pub resolvent_terms: usize,
    /// Exact-operator residual of the resolvent solution.
    pub resolvent_residual_l1: f64,
    /// Derivative self-consistency of `h0` (see [`deriv_consistency_l1`]).
    pub deriv_consistency_l1: f64,
    /// Parameters probed by the finite-difference validator (empty when it
    /// did not run).
    pub eps_list: Vec<f64>,
    /// Finite-difference quotients `(h_ε − h₀)/ε`, aligned with `eps_list`;
    /// a failed solve leaves a zero density in its slot.
    pub fd_quotients: Vec<GridDensity>,
    /// `‖quotient − response‖₁`, aligned with `eps_list`; NaN marks a
    /// failed solve.
    pub deltas: Vec<f64>,
    /// Last delta over first delta, when at least two solves succeeded.
    pub delta_ratio: Option<f64>,
    /// Whether the deltas certify the response: strictly decreasing and
    /// final ratio at most 1/2. `None` when fewer than two parameters were
    /// available to compare.
    pub fd_pass: Option<bool>,
    /// Parameters whose invariant-density solve failed.
    pub failed_eps: Vec<f64>,
}

/// Computes `h₀`, the source term, and the response density at `ε = 0`.
pub fn linear_response(
    family: &dyn MapFamily,
    grid_n: usize,
    tol: f64,
) -> Result<ResponseReport, SolverError> {
    linear_response_with(family, grid_n, tol, tol)
}

/// [`linear_response`] with separate fixed-point and resolvent tolerances.
pub fn linear_response_with(
    family: &dyn MapFamily,
    grid_n: usize,
    fixed_point_tol: f64,
    resolvent_tol: f64,
) -> Result<ResponseReport, SolverError> {
    let h0 = solver::invariant_density(family, 0.0, grid_n, fixed_point_tol)?;
    let q = response_term(family, &h0, grid_n)?;
    let quad = Quadrature::uniform_refined(grid_n, family.turning_image(0.0), EDGE_BAND);
    let q_mean = q.integral_on(&quad);
    let resolvent = solver::resolvent_solve_with(family, 0.0, &q, resolvent_tol, Some(&h0))?;
    let deriv_consistency = deriv_consistency_l1(family, &h0, 0.0)?;
    Ok(ResponseReport {
        h0,
        q,
        response: resolvent.solution,
        q_mean,
        resolvent_terms: resolvent.terms_used,
        resolvent_residual_l1: resolvent.residual_l1,
        deriv_consistency_l1: deriv_consistency,
        eps_list: Vec::new(),
        fd_quotients: Vec::new(),
        deltas: Vec::new(),
        delta_ratio: None,
        fd_pass: None,
        failed_eps: Vec::new(),
    })
}

/// Switches for [`validate_fd_with`].
#[derive(Clone, Debug, Default)]
pub struct ValidateOptions {
    /// Compare the quotients against the zero density instead of the
    /// computed response. The validation is then expected to fail; a pass
    /// would mean the deltas cannot distinguish the response from nothing.
    pub null_response: bool,
    /// Overrides the resolvent tolerance when set (the fixed-point solves
    /// keep `tol`).
    pub resolvent_tol: Option<f64>,
}

/// Finite-difference validation of the response density.
///
/// For each `ε` in `eps_list` (strictly decreasing, inside `(0, eps_max)`)
/// the invariant density `h_ε` is solved on the same grid and the quotient
/// `(h_ε − h₀)/ε` is compared to the response in L¹. First-order accuracy
/// of the quotient means the deltas must decrease with `ε`; the report
/// passes when they decrease strictly and the last is at most half the
/// first.
pub fn validate_fd(
    family: &dyn MapFamily,
    grid_n: usize,
    eps_list: &[f64],
    tol: f64,
) -> Result<ResponseReport, SolverError> {
    validate_fd_with(family, grid_n, eps_list, tol, &ValidateOptions::default())
}

/// [`validate_fd`] with control switches.
pub fn validate_fd_with(
    family: &dyn MapFamily,
    grid_n: usize,
    eps_list: &[f64],
    tol: f64,
    options: &ValidateOptions,
) -> Result<ResponseReport, SolverError> {
    if eps_list.is_empty() {
        return Err(SolverError::InvalidParameter {
            name: "eps_list",
            value: "[]".to_string(),
            requirement: "at least one parameter value",
        });
    }
    for pair in eps_list.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(SolverError::InvalidParameter {
                name: "eps_list",
                value: format!("{pair:?}"),
                requirement: "strictly decreasing values",
            });
        }
    }
    for &eps in eps_list {
        if !(eps > 0.0 && eps < family.eps_max()) {
            return Err(SolverError::InvalidParameter {
                name: "eps_list",
                value: format!("{eps}"),
                requirement: "values strictly inside (0, eps_max)",
            });
        }
    }

    let resolvent_tol = options.resolvent_tol.unwrap_or(tol);
    let mut report = linear_response_with(family, grid_n, tol, resolvent_tol)?;
    let reference = if options.null_response {
        GridDensity::from_values(vec![0.0; grid_n + 1], report.response.order())
    } else {
        report.response.clone()
    };

    let h0 = &report.h0;
    let solves: Vec<Result<GridDensity, SolverError>> = eps_list
        .par_iter()
        .map(|&eps| solver::invariant_density_with(
            family,
            eps,
            grid_n,
            tol,
            &SolveOptions {
                init: Some(h0.clone()),
                ..SolveOptions::default()
            },
        )
        .map(|solve| solve.density))
        .collect();

    let quad = Quadrature::uniform(grid_n);
    let zero = GridDensity::from_values(vec![0.0; grid_n + 1], report.response.order());
    let mut deltas = Vec::with_capacity(eps_list.len());
    let mut quotients = Vec::with_capacity(eps_list.len());
    let mut failed = Vec::new();
    for (&eps, solve) in eps_list.iter().zip(solves) {
        match solve {
            Ok(h_eps) => {
                let quotient = h_eps.linear_comb(1.0 / eps, h0, -1.0 / eps);
                deltas.push(
                    quotient
                        .linear_comb(1.0, &reference, -1.0)
                        .norm_on(NormKind::L1, &quad),
                );
                quotients.push(quotient);
            }
            Err(_) => {
                deltas.push(f64::NAN);
                quotients.push(zero.clone());
                failed.push(eps);
            }
        }
    }

    let good: Vec<f64> = deltas.iter().copied().filter(|d| d.is_finite()).collect();
    let delta_ratio = if good.len() >= 2 {
        Some(good[good.len() - 1] / good[0])
    } else {
        None
    };
    let fd_pass = if !failed.is_empty() {
        Some(false)
    } else if good.len() < 2 {
        None
    } else {
        let decreasing = good.windows(2).all(|w| w[1] < w[0]);
        Some(decreasing && good[good.len() - 1] <= 0.5 * good[0])
    };

    report.eps_list = eps_list.to_vec();
    report.fd_quotients = quotients;
    report.deltas = deltas;
    report.delta_ratio = delta_ratio;
    report.fd_pass = fd_pass;
    report.failed_eps = failed;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::CuspTentExample;
    use approx::assert_relative_eq;

    fn example() -> CuspTentExample {
        CuspTentExample
    }

    #[test]
    fn coefficients_match_the_closed_form_at_a_quarter() {
        let fam = example();
        assert_relative_eq!(
            coefficient_a(&fam, 0.25, 0.0).unwrap(),
            0.24510264942250371295,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            coefficient_b(&fam, 0.25, 0.0).unwrap(),
            0.93909884837142334243,
            max_relative = 1e-14
        );
    }

    #[test]
    fn coefficient_b_is_one_at_the_left_endpoint() {
        // ∂_εT vanishes with T at x = 0, so only the slope-ratio term
        // survives and it telescopes to exactly 1.
        assert_eq!(coefficient_b(&example(), 0.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn coefficients_reject_the_guard_band() {
        let fam = example();
        assert!(matches!(
            coefficient_a(&fam, 0.5, 0.0),
            Err(MapError::CuspProximity { .. })
        ));
        assert!(matches!(
            coefficient_b(&fam, 0.5 + 1e-16, 0.02),
            Err(MapError::CuspProximity { .. })
        ));
    }

    #[test]
    fn coefficient_b_is_the_derivative_of_coefficient_a() {
        let fam = example();
        let h = 1e-6;
        for &x in &[0.1, 0.3, 0.62, 0.85] {
            let fd = (coefficient_a(&fam, x + h, 0.03).unwrap()
                - coefficient_a(&fam, x - h, 0.03).unwrap())
                / (2.0 * h);
            assert_relative_eq!(
                coefficient_b(&fam, x, 0.03).unwrap(),
                fd,
                max_relative = 1e-6
            );
        }
    }

    // The mass defect of the assembled source scales like the cube of the
    // grid spacing; 1024 cells keep it clear of the 1e-8 gate.
    #[test]
    fn source_term_is_zero_mean_and_vanishes_at_the_edge() {
        let fam = example();
        let n = 1024;
        let h0 = solver::invariant_density(&fam, 0.0, n, 1e-9).unwrap();
        let q = response_term(&fam, &h0, n).unwrap();
        let quad = Quadrature::uniform_refined(n, 1.0, EDGE_BAND);
        assert!(q.integral_on(&quad).abs() <= 1e-8, "mass {}", q.integral_on(&quad));
        assert_eq!(q.values()[n], 0.0);
        assert!(q.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn source_term_rejects_an_unnormalized_density() {
        let fam = example();
        let bad = GridDensity::constant(256, 2.0);
        assert!(matches!(
            response_term(&fam, &bad, 256),
            Err(SolverError::NotNormalized { .. })
        ));
    }

    #[test]
    fn fixed_point_derivative_is_self_consistent() {
        let fam = example();
        let h0 = solver::invariant_density(&fam, 0.0, 512, 1e-9).unwrap();
        let gap = deriv_consistency_l1(&fam, &h0, 0.0).unwrap();
        assert!(gap <= 1e-3, "derivative self-consistency {gap}");
    }

    #[test]
    fn validator_rejects_a_bad_parameter_list() {
        let fam = example();
        for list in [&[][..], &[0.01, 0.04][..], &[0.2][..], &[0.04, 0.04][..]] {
            assert!(matches!(
                validate_fd(&fam, 256, list, 1e-8),
                Err(SolverError::InvalidParameter { name: "eps_list", .. })
            ));
        }
    }

    #[test]
    fn finite_differences_converge_to_the_response() {
        let fam = example();
        let report = validate_fd(&fam, 1024, &[0.08, 0.02], 1e-9).unwrap();
        assert_eq!(report.deltas.len(), 2);
        assert!(report.failed_eps.is_empty());
        assert!(report.deltas[1] < report.deltas[0], "deltas {:?}", report.deltas);
        assert_eq!(report.fd_quotients.len(), 2);
        assert!(report.q_mean.abs() <= 1e-8);
        assert!(report.fd_pass.is_some());
    }

    #[test]
    fn null_control_fails_the_validation() {
        let fam = example();
        let options = ValidateOptions {
            null_response: true,
            ..ValidateOptions::default()
        };
        let report = validate_fd_with(&fam, 1024, &[0.08, 0.02], 1e-9, &options).unwrap();
        assert_eq!(report.fd_pass, Some(false));
    }

    #[test]
    fn single_parameter_gives_no_verdict() {
        let fam = example();
        let report = validate_fd(&fam, 1024, &[0.04], 1e-9).unwrap();
        assert_eq!(report.fd_pass, None);
        assert_eq!(report.delta_ratio, None);
        assert_eq!(report.deltas.len(), 1);
    }

    #[test]
    fn response_term_rejects_a_coarse_grid() {
        let fam = example();
        let h0 = GridDensity::constant(64, 1.0);
        assert!(matches!(
            response_term(&fam, &h0, 64),
            Err(SolverError::InvalidParameter { name: "grid_n", .. })
        ));
    }
}
