//! Transfer operator of a two-branch expanding interval map.
//!
//! The operator pushes densities forward: `(L f)(x) = Σ_y f(y) / |T'(y)|`
//! over the (at most two) preimages `y` of `x`.  Points beyond the image of
//! the turning point have no preimage, so `L f` vanishes there identically.
//!
//! Everything the operator and its derivative actions need at a preimage is
//! a rational expression in `T'`, `T''`, `T'''` evaluated at that preimage.
//! Near the turning point the individual derivatives blow up but every
//! combination used here tends to zero; [`OperatorWeights::at`] evaluates
//! them through ratio chains whose intermediates stay inside f64 range for
//! any offset at or above [`CUSP_WEIGHT_FLOOR`], and snaps everything to the
//! exact limit value `0` below that floor.
//!
//! Derivative actions implemented on top of the same weights (validated
//! against central finite differences of `L f` in the tests):
//!
//! * `(L f)'  = Σ  f'(y)/(|T'|·T') − f(y)·T''/(|T'|·T'²)`
//! * `(L f)'' = Σ  f''(y)/|T'|³ − f'(y)·3σT''/T'⁴ − f(y)·σ(T'''/T'⁴ − 3T''²/T'⁵)`
//!
//! where `σ = sign(T')` on the branch.  Both follow from differentiating
//! `f(y(x))/|T'(y(x))|` through the branch inverse; the σ factors matter on
//! decreasing branches and are easy to drop when the weights are written
//! with absolute values pulled out.

use crate::error::MapError;
use crate::grid::{cubic_eval_stencil, GridDensity, InterpOrder, NormKind, Quadrature};
use crate::map::{check_eps, Branch, MapFamily, Preimage, CUSP_WEIGHT_FLOOR};
use crate::quad::{integrate_graded, GradedMesh};

/// Branch-local weight bundle at one preimage.
///
/// Every action coefficient tends to zero at the turning point, so the
/// bundle snaps to all-zero when the preimage sits closer than
/// [`CUSP_WEIGHT_FLOOR`].  (`w1` alone diverges there, like
/// `offset^(β+1)/8`-slowly; it only ever enters the operator multiplied by
/// `w0`, which vanishes faster, so it is snapped with the rest.)
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorWeights {
    /// `1/|T'|` — density weight.
    pub w0: f64,
    /// `T''/(|T'|·T')`.
    pub w1: f64,
    /// `T''/(|T'|·T'²)` — first-derivative action coefficient on `f`.
    pub g1a: f64,
    /// `T''/T'³`.
    pub g1b: f64,
    /// `T'''·|T'|/T'⁴`.
    pub g2: f64,
    /// `2·|T'|·T''²/T'⁵`.
    pub g3: f64,
    /// `T''²/T'⁴`.
    pub g4: f64,
    /// `1/(|T'|·T')` — first-derivative action coefficient on `f'`.
    deriv_f1: f64,
    /// `3·sign(T')·T''/T'⁴`.
    second_f1: f64,
    /// `sign(T')·(T'''/T'⁴ − 3·T''²/T'⁵)`.
    second_f0: f64,
}

impl OperatorWeights {
    const ZERO: OperatorWeights = OperatorWeights {
        w0: 0.0,
        w1: 0.0,
        g1a: 0.0,
        g1b: 0.0,
        g2: 0.0,
        g3: 0.0,
        g4: 0.0,
        deriv_f1: 0.0,
        second_f1: 0.0,
        second_f0: 0.0,
    };

    /// Weights at the point of `branch` lying `offset` away from the turning
    /// point.  Everything is assembled from the tame ratios `T''/T'²` and
    /// `T'''/T'²`, which keeps every intermediate comfortably inside f64
    /// range for any offset at or above the floor.
    pub fn at<F: MapFamily + ?Sized>(family: &F, branch: Branch, offset: f64, eps: f64) -> Self {
        if offset < CUSP_WEIGHT_FLOOR {
            return Self::ZERO;
        }
        let d1 = family.d1_off(branch, offset, eps);
        let d2 = family.d2_off(branch, offset, eps);
        let d3 = family.d3_off(branch, offset, eps);
        let a1 = d1.abs();
        let sign = if d1 > 0.0 { 1.0 } else { -1.0 };
        let w0 = 1.0 / a1;
        let r2 = (d2 / d1) / d1;
        let r3 = (d3 / d1) / d1;
        let deriv_f1 = sign / (d1 * d1);
        let g1a = r2 * w0;
        let g4 = r2 * r2;
        OperatorWeights {
            w0,
            w1: sign * r2,
            g1a,
            g1b: r2 / d1,
            g2: r3 * w0,
            g3: 2.0 * sign * g4,
            g4,
            deriv_f1,
            second_f1: 3.0 * r2 * deriv_f1,
            second_f0: r3 * deriv_f1 - 3.0 * g4 * w0,
        }
    }

    /// Weights at an already-located preimage.
    pub fn at_preimage<F: MapFamily + ?Sized>(family: &F, p: &Preimage, eps: f64) -> Self {
        Self::at(family, p.branch, p.cusp_offset, eps)
    }

    /// Coefficient of `f'` in the first-derivative action: `1/(|T'|·T')`.
    pub fn first_deriv_on_f1(&self) -> f64 {
        self.deriv_f1
    }

    /// Coefficient of `−f` in the first-derivative action: `g1a`.
    pub fn first_deriv_on_f0(&self) -> f64 {
        self.g1a
    }

    /// Coefficient of `f''` in the second-derivative action: `w0³`.
    pub fn second_deriv_on_f2(&self) -> f64 {
        self.w0 * self.w0 * self.w0
    }

    /// Coefficient of `−f'` in the second-derivative action:
    /// `3·sign(T')·T''/T'⁴`.
    pub fn second_deriv_on_f1(&self) -> f64 {
        self.second_f1
    }

    /// Coefficient of `−f` in the second-derivative action:
    /// `sign(T')·(T'''/T'⁴ − 3·T''²/T'⁵)`.
    pub fn second_deriv_on_f0(&self) -> f64 {
        self.second_f0
    }
}

/// Sums `term(preimage, weights)` over the preimages of `x`.
///
/// Returns exactly `0.0` for `x` beyond the turning-point image: such points
/// have no preimage, so the sum is empty.  This is the single primitive the
/// pointwise and grid-level operator actions are built on.
pub fn transfer_sum<F, G>(family: &F, x: f64, eps: f64, mut term: G) -> Result<f64, MapError>
where
    F: MapFamily + ?Sized,
    G: FnMut(&Preimage, &OperatorWeights) -> f64,
{
    check_eps(family, eps)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(MapError::OutOfDomain { x });
    }
    if x > family.turning_image(eps) {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for branch in Branch::BOTH {
        let p = family.branch_inverse(branch, x, eps)?;
        let w = OperatorWeights::at_preimage(family, &p, eps);
        acc += term(&p, &w);
    }
    Ok(acc)
}

/// `(L f)(x)` for a single point.
pub fn apply_at<F: MapFamily + ?Sized>(
    family: &F,
    f: &GridDensity,
    eps: f64,
    x: f64,
) -> Result<f64, MapError> {
    transfer_sum(family, x, eps, |p, w| w.w0 * f.eval(p.y))
}

/// `(L f)'(x)` for a single point; `f1` must hold `f'`.
pub fn apply_derivative_at<F: MapFamily + ?Sized>(
    family: &F,
    f: &GridDensity,
    f1: &GridDensity,
    eps: f64,
    x: f64,
) -> Result<f64, MapError> {
    transfer_sum(family, x, eps, |p, w| {
        w.first_deriv_on_f1() * f1.eval(p.y) - w.first_deriv_on_f0() * f.eval(p.y)
    })
}

/// `(L f)''(x)` for a single point; `f1`, `f2` must hold `f'`, `f''`.
pub fn apply_second_derivative_at<F: MapFamily + ?Sized>(
    family: &F,
    f: &GridDensity,
    f1: &GridDensity,
    f2: &GridDensity,
    eps: f64,
    x: f64,
) -> Result<f64, MapError> {
    transfer_sum(family, x, eps, |p, w| {
        w.second_deriv_on_f2() * f2.eval(p.y)
            - w.second_deriv_on_f1() * f1.eval(p.y)
            - w.second_deriv_on_f0() * f.eval(p.y)
    })
}

fn apply_on_nodes<F, G>(family: &F, n: usize, eps: f64, mut point: G) -> Result<Vec<f64>, MapError>
where
    F: MapFamily + ?Sized,
    G: FnMut(f64) -> Result<f64, MapError>,
{
    let bound = family.turning_image(eps);
    let mut values = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = i as f64 / n as f64;
        values.push(if x > bound { 0.0 } else { point(x)? });
    }
    Ok(values)
}

/// `L f` sampled on the nodes of `f`'s grid.
pub fn apply<F: MapFamily + ?Sized>(
    family: &F,
    f: &GridDensity,
    eps: f64,
) -> Result<GridDensity, MapError> {
    let values = apply_on_nodes(family, f.cells(), eps, |x| apply_at(family, f, eps, x))?;
    Ok(GridDensity::from_values(values, f.order()))
}

/// `(L f)'` sampled on the nodes of `f`'s grid.
pub fn apply_derivative<F: MapFamily + ?Sized>(
    family: &F,
    f: &GridDensity,
    f1: &GridDensity,
    eps: f64,
) -> Result<GridDensity, MapError> {
    let values = apply_on_nodes(family, f.cells(), eps, |x| {
        apply_derivative_at(family, f, f1, eps, x)
    })?;
    Ok(GridDensity::from_values(values, f.order()))
}

/// `(L f)''` sampled on the nodes of `f`'s grid.
pub fn apply_second_derivative<F: MapFamily + ?Sized>(
    family: &F,
    f: &GridDensity,
    f1: &GridDensity,
    f2: &GridDensity,
    eps: f64,
) -> Result<GridDensity, MapError> {
    let values = apply_on_nodes(family, f.cells(), eps, |x| {
        apply_second_derivative_at(family, f, f1, f2, eps, x)
    })?;
    Ok(GridDensity::from_values(values, f.order()))
}

/// The two branch contributions to `L f`, kept separate.
///
/// `psi[b](x) = f(y_b(x)) / |T'(y_b(x))|` on `[0, a)` and `0` beyond, where
/// `y_b` is the branch-`b` inverse and `a` the turning-point image.  Their
/// sum reproduces `L f` node for node.
pub struct PsiPair {
    pub left: GridDensity,
    pub right: GridDensity,
}

/// Splits `L f` into its per-branch components on `f`'s grid.
pub fn psi_components<F: MapFamily + ?Sized>(
    family: &F,
    f: &GridDensity,
    eps: f64,
) -> Result<PsiPair, MapError> {
    check_eps(family, eps)?;
    let n = f.cells();
    let bound = family.turning_image(eps);
    let mut left = Vec::with_capacity(n + 1);
    let mut right = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = i as f64 / n as f64;
        if x >= bound {
            left.push(0.0);
            right.push(0.0);
            continue;
        }
        for (branch, out) in [(Branch::Left, &mut left), (Branch::Right, &mut right)] {
            let p = family.branch_inverse(branch, x, eps)?;
            let w = OperatorWeights::at_preimage(family, &p, eps);
            out.push(w.w0 * f.eval(p.y));
        }
    }
    Ok(PsiPair {
        left: GridDensity::from_values(left, f.order()),
        right: GridDensity::from_values(right, f.order()),
    })
}

/// Sparse collocation of the operator on an `n`-cell cubic grid.
///
/// Row `i` holds the coefficients expressing `(L f)(x_i)` as a linear
/// combination of nodal values of `f`: two branches × a 4-point cubic
/// stencil, so at most 8 entries.  Rows for nodes beyond the turning-point
/// image are empty.  Building the rows costs two inverse solves per node;
/// every subsequent application is a sparse mat-vec.
pub struct CollocationRows {
    n: usize,
    eps: f64,
    rows: Vec<Vec<(usize, f64)>>,
}

/// Builds the collocation rows for `family` at `eps`.
pub fn collocation_rows<F: MapFamily + ?Sized>(
    family: &F,
    n: usize,
    eps: f64,
) -> Result<CollocationRows, MapError> {
    check_eps(family, eps)?;
    assert!(n >= 8, "collocation needs at least 8 cells, got {n}");
    let bound = family.turning_image(eps);
    let mut rows = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = i as f64 / n as f64;
        let mut row = Vec::new();
        if x <= bound {
            for branch in Branch::BOTH {
                let p = family.branch_inverse(branch, x, eps)?;
                let w = OperatorWeights::at_preimage(family, &p, eps);
                if w.w0 == 0.0 {
                    continue;
                }
                let (base, coeff) = cubic_eval_stencil(n, p.y);
                for (j, &c) in coeff.iter().enumerate() {
                    if c != 0.0 {
                        row.push((base + j, w.w0 * c));
                    }
                }
            }
        }
        rows.push(row);
    }
    Ok(CollocationRows { n, eps, rows })
}

impl CollocationRows {
    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    /// Applies the collocated operator to nodal values of a cubic density.
    pub fn matvec(&self, f: &GridDensity) -> GridDensity {
        assert_eq!(f.cells(), self.n, "grid size mismatch");
        assert_eq!(
            f.order(),
            InterpOrder::Cubic,
            "collocation rows assume cubic interpolation"
        );
        let v = f.values();
        let values = self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, c)| c * v[j]).sum())
            .collect();
        GridDensity::from_values(values, InterpOrder::Cubic)
    }
}

/// Contraction data for the first-derivative inequality
/// `‖(L f)'‖₁ ≤ λ·‖f'‖₁ + m·‖f‖₂`.
#[derive(Debug, Clone, Copy)]
pub struct LyConstants {
    /// `sup 1/|T'|` — the derivative-loss factor; `< 1` for expanding maps.
    pub lambda: f64,
    /// `‖T''/T'²‖₂` over the whole interval.
    pub m: f64,
}

/// Largest value of `g` over both branches, sampled on `samples` log-spaced
/// offsets per branch spanning `[1e-12, branch width]`, endpoints included.
fn sup_over_offsets<F, G>(family: &F, samples: usize, g: G) -> f64
where
    F: MapFamily + ?Sized,
    G: Fn(Branch, f64) -> f64,
{
    let c = family.turning_point();
    let mut sup = f64::NEG_INFINITY;
    for branch in Branch::BOTH {
        let width = match branch {
            Branch::Left => c,
            Branch::Right => 1.0 - c,
        };
        let lo: f64 = 1e-12;
        let ratio = (width / lo).ln();
        for k in 0..=samples {
            let off = lo * (ratio * k as f64 / samples as f64).exp();
            sup = sup.max(g(branch, off.min(width)));
        }
    }
    sup
}

/// Integrates `g` against both branches with cusp-graded meshes and returns
/// the L² norm `sqrt(∫ g²)`.
fn l2_over_interval<F, G>(family: &F, grid_size: usize, g: G) -> f64
where
    F: MapFamily + ?Sized,
    G: Fn(Branch, f64) -> f64,
{
    let c = family.turning_point();
    let mesh = GradedMesh {
        outer_cells_per_unit: grid_size.max(64),
        ..GradedMesh::default()
    };
    let mut total = 0.0;
    for branch in Branch::BOTH {
        let width = match branch {
            Branch::Left => c,
            Branch::Right => 1.0 - c,
        };
        total += integrate_graded(|off| g(branch, off).powi(2), width, &mesh);
    }
    total.sqrt()
}

/// Measures `λ` and `m` for the first-derivative inequality.
///
/// `λ` is a sampled supremum (the weight is continuous and maximal away from
/// the turning point); `m` is a graded-mesh quadrature of the integrable
/// singularity at the turning point.
pub fn ly_constants<F: MapFamily + ?Sized>(
    family: &F,
    eps: f64,
    grid_size: usize,
) -> Result<LyConstants, MapError> {
    check_eps(family, eps)?;
    let samples = grid_size.max(256);
    let lambda = sup_over_offsets(family, samples, |b, off| {
        1.0 / family.d1_off(b, off, eps).abs()
    });
    let m = l2_over_interval(family, grid_size, |b, off| {
        let d1 = family.d1_off(b, off, eps);
        (family.d2_off(b, off, eps) / d1) / d1
    });
    Ok(LyConstants { lambda, m })
}

/// Contraction data for the second-derivative inequality
/// `‖(L f)''‖₁ ≤ λ²·‖f''‖₁ + first_weight_sup·‖f'‖₁ + zero_weight_l2·‖f‖₂`.
///
/// The last two constants are norms of the action coefficients pulled back
/// through the change of variables `x = T(y)` (one factor `|T'|` each).
#[derive(Debug, Clone, Copy)]
pub struct SecondOrderConstants {
    /// `λ²` — loss factor on `‖f''‖₁`.
    pub lambda_sq: f64,
    /// `sup 3·|T''|/|T'|³`; the maximum sits in the interior, not at the
    /// turning point or the endpoints.
    pub first_weight_sup: f64,
    /// `‖T'''/T'³ − 3·T''²/T'⁴‖₂`.
    pub zero_weight_l2: f64,
}

/// Measures the constants of the second-derivative inequality.
pub fn second_order_constants<F: MapFamily + ?Sized>(
    family: &F,
    eps: f64,
    grid_size: usize,
) -> Result<SecondOrderConstants, MapError> {
    let LyConstants { lambda, .. } = ly_constants(family, eps, grid_size)?;
    let samples = grid_size.max(1024);
    let first_weight_sup = sup_over_offsets(family, samples, |b, off| {
        let w = OperatorWeights::at(family, b, off, eps);
        (3.0 * w.g1a).abs()
    });
    let zero_weight_l2 = l2_over_interval(family, grid_size, |b, off| {
        let d1 = family.d1_off(b, off, eps);
        let r2 = (family.d2_off(b, off, eps) / d1) / d1;
        let r3 = (family.d3_off(b, off, eps) / d1) / d1;
        r3 / d1 - 3.0 * r2 * r2
    });
    Ok(SecondOrderConstants {
        lambda_sq: lambda * lambda,
        first_weight_sup,
        zero_weight_l2,
    })
}

/// Measured norm ratios of the operator and its branch components on a test
/// suite, against their analytic bounds.
#[derive(Debug, Clone, Copy)]
pub struct L2BoundReport {
    /// max over the suite of `‖L f‖₂ / ‖f‖₂`.
    pub max_ratio: f64,
    /// Analytic bound on `max_ratio` for two-branch maps.
    pub ratio_bound: f64,
    /// max over suite and branches of `‖ψ_b‖₂² / ‖f‖₂²`.
    pub max_branch_ratio_sq: f64,
    /// Analytic bound `sup 1/|T'|` on `max_branch_ratio_sq`.
    pub branch_bound: f64,
    pub ok: bool,
}

/// Checks `‖L f‖₂ ≤ 2‖f‖₂` and the per-branch bound
/// `‖ψ_b‖₂² ≤ sup(1/|T'|)·‖f‖₂²` on a suite of densities.
pub fn l2_bound_check<F: MapFamily + ?Sized>(
    family: &F,
    eps: f64,
    suite: &[GridDensity],
) -> Result<L2BoundReport, MapError> {
    let LyConstants { lambda, .. } = ly_constants(family, eps, 256)?;
    let mut max_ratio: f64 = 0.0;
    let mut max_branch_ratio_sq: f64 = 0.0;
    for f in suite {
        let q = Quadrature::uniform_refined(f.cells(), family.turning_image(eps), 0.05);
        let f_l2 = f.norm_on(NormKind::L2, &q);
        assert!(f_l2 > 0.0, "test suite must avoid the zero function");
        let lf = apply(family, f, eps)?;
        max_ratio = max_ratio.max(lf.norm_on(NormKind::L2, &q) / f_l2);
        let psi = psi_components(family, f, eps)?;
        for part in [&psi.left, &psi.right] {
            let r = part.norm_on(NormKind::L2, &q) / f_l2;
            max_branch_ratio_sq = max_branch_ratio_sq.max(r * r);
        }
    }
    // Sampled-node norms carry quadrature error; the analytic bounds hold
    // with strict inequality, so a hair of slack separates the two sources.
    let slack = 1.0 + 1e-6;
    let ratio_bound = 2.0;
    Ok(L2BoundReport {
        max_ratio,
        ratio_bound,
        max_branch_ratio_sq,
        branch_bound: lambda,
        ok: max_ratio <= ratio_bound * slack && max_branch_ratio_sq <= lambda * slack,
    })
}

/// Norm of a density in the requested sense; forwards to the grid layer so
/// operator callers need only this module.
pub fn norm(f: &GridDensity, kind: NormKind) -> f64 {
    f.norm(kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::CuspTentExample;
    use crate::map::TentFamily;
    use approx::assert_relative_eq;

    const FAM: CuspTentExample = CuspTentExample;

    #[test]
    fn weights_vanish_below_floor_and_at_zero_offset() {
        for off in [0.0, 1e-300, 0.5 * CUSP_WEIGHT_FLOOR] {
            let w = OperatorWeights::at(&FAM, Branch::Left, off, 0.0);
            assert_eq!(w, OperatorWeights::ZERO);
        }
    }

    #[test]
    fn weights_stay_finite_down_to_the_floor() {
        for &off in &[1e-60, 1e-40, 1e-20, 1e-10, 1e-4, 0.2] {
            for branch in Branch::BOTH {
                let w = OperatorWeights::at(&FAM, branch, off, 0.05);
                for (name, v) in [
                    ("w0", w.w0),
                    ("w1", w.w1),
                    ("g1a", w.g1a),
                    ("g1b", w.g1b),
                    ("g2", w.g2),
                    ("g3", w.g3),
                    ("g4", w.g4),
                ] {
                    assert!(v.is_finite(), "{name} not finite at offset {off:e}: {v}");
                }
                assert!(w.w0 > 0.0);
            }
        }
    }

    #[test]
    fn weight_identities_against_raw_derivatives() {
        // Moderate offset: raw powers are still representable, so the
        // chained forms can be checked against the naive ones.
        let (branch, off, eps) = (Branch::Right, 0.01, 0.02);
        let d1 = FAM.d1_off(branch, off, eps);
        let d2 = FAM.d2_off(branch, off, eps);
        let d3 = FAM.d3_off(branch, off, eps);
        let w = OperatorWeights::at(&FAM, branch, off, eps);
        assert_relative_eq!(w.w0, 1.0 / d1.abs(), max_relative = 1e-14);
        assert_relative_eq!(w.w1, d2 / (d1.abs() * d1), max_relative = 1e-14);
        assert_relative_eq!(w.g1a, d2 / (d1.abs() * d1 * d1), max_relative = 1e-14);
        assert_relative_eq!(w.g1b, d2 / (d1 * d1 * d1), max_relative = 1e-14);
        assert_relative_eq!(w.g2, d3 * d1.abs() / d1.powi(4), max_relative = 1e-14);
        assert_relative_eq!(
            w.g3,
            2.0 * d1.abs() * d2 * d2 / d1.powi(5),
            max_relative = 1e-14
        );
        assert_relative_eq!(w.g4, d2 * d2 / d1.powi(4), max_relative = 1e-14);
        assert_relative_eq!(
            w.first_deriv_on_f1(),
            1.0 / (d1.abs() * d1),
            max_relative = 1e-14
        );
        let sign = d1.signum();
        assert_relative_eq!(
            w.second_deriv_on_f1(),
            3.0 * sign * d2 / d1.powi(4),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            w.second_deriv_on_f0(),
            sign * (d3 / d1.powi(4) - 3.0 * d2 * d2 / d1.powi(5)),
            max_relative = 1e-14
        );
    }

    #[test]
    fn weight_sign_pattern_across_branches_of_a_symmetric_family() {
        // Same offset, mirrored branches: T' and T''' flip sign, T'' does
        // not.  Weights built from even powers of T' (and the f-coefficient
        // of the second-derivative action) coincide; the rest flip.
        let (off, eps) = (0.07, 0.03);
        let l = OperatorWeights::at(&FAM, Branch::Left, off, eps);
        let r = OperatorWeights::at(&FAM, Branch::Right, off, eps);
        for (same, a, b) in [
            (true, l.w0, r.w0),
            (true, l.g1a, r.g1a),
            (true, l.g4, r.g4),
            (true, l.second_deriv_on_f2(), r.second_deriv_on_f2()),
            (true, l.second_deriv_on_f0(), r.second_deriv_on_f0()),
            (false, l.w1, r.w1),
            (false, l.g1b, r.g1b),
            (false, l.g2, r.g2),
            (false, l.g3, r.g3),
            (false, l.first_deriv_on_f1(), r.first_deriv_on_f1()),
            (false, l.second_deriv_on_f1(), r.second_deriv_on_f1()),
        ] {
            let expect = if same { b } else { -b };
            assert_relative_eq!(a, expect, max_relative = 1e-13);
        }
    }

    #[test]
    fn constant_density_image_at_the_origin() {
        // Both preimages of 0 are endpoints with |T'| = 25/16, so
        // (L 1)(0) = 2·16/25 = 1.28 exactly at eps = 0.
        let f = GridDensity::constant(64, 1.0);
        let v = apply_at(&FAM, &f, 0.0, 0.0).unwrap();
        assert_relative_eq!(v, 1.28, max_relative = 1e-13);
    }

    #[test]
    fn image_vanishes_beyond_the_turning_point_image() {
        let f = GridDensity::constant(128, 1.0);
        let eps = 0.05;
        let lf = apply(&FAM, &f, eps).unwrap();
        let bound = FAM.turning_image(eps);
        for i in 0..=128 {
            let x = lf.node(i);
            if x > bound {
                assert_eq!(lf.values()[i], 0.0, "node {x} past {bound} must be 0");
            }
        }
        assert_eq!(apply_at(&FAM, &f, eps, 0.97).unwrap(), 0.0);
        assert_eq!(apply_at(&FAM, &f, eps, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn matvec_agrees_with_pointwise_application() {
        let f = GridDensity::sample(200, InterpOrder::Cubic, |x| 1.0 + 0.3 * (5.0 * x).sin());
        let eps = 0.03;
        let rows = collocation_rows(&FAM, 200, eps).unwrap();
        let via_rows = rows.matvec(&f);
        let direct = apply(&FAM, &f, eps).unwrap();
        for i in 0..=200 {
            assert!(
                (via_rows.values()[i] - direct.values()[i]).abs() < 1e-13,
                "row/pointwise mismatch at node {i}"
            );
        }
    }

    #[test]
    fn rows_are_sparse_and_empty_past_the_image_bound() {
        let eps = 0.05;
        let rows = collocation_rows(&FAM, 256, eps).unwrap();
        let bound = FAM.turning_image(eps);
        for (i, row) in rows.rows().iter().enumerate() {
            let x = i as f64 / 256.0;
            assert!(row.len() <= 8, "row {i} has {} entries", row.len());
            if x > bound {
                assert!(row.is_empty(), "row {i} at x={x} should be empty");
            }
        }
    }

    #[test]
    fn psi_components_sum_to_the_full_image() {
        let f = GridDensity::sample(128, InterpOrder::Cubic, |x| 1.0 + x * (1.0 - x));
        let eps = 0.02;
        let psi = psi_components(&FAM, &f, eps).unwrap();
        let lf = apply(&FAM, &f, eps).unwrap();
        for i in 0..=128 {
            let x = lf.node(i);
            let sum = psi.left.values()[i] + psi.right.values()[i];
            // At x == bound `apply` carries the limit value 0 through the
            // weights while the indicator zeroes the components directly.
            let tol = if x < FAM.turning_image(eps) { 1e-13 } else { 1e-30 };
            assert!(
                (sum - lf.values()[i]).abs() <= tol,
                "branch split broken at node {i}"
            );
        }
    }

    #[test]
    fn first_derivative_action_matches_finite_differences() {
        let n = 256;
        let f = GridDensity::sample(n, InterpOrder::Cubic, |x| (2.0 * x).cos() + 0.5 * x);
        let f1 = GridDensity::sample(n, InterpOrder::Cubic, |x| -2.0 * (2.0 * x).sin() + 0.5);
        let eps = 0.04;
        let h = 1e-5;
        for &x in &[0.11, 0.34, 0.52, 0.78, 0.9] {
            let fd = (apply_at(&FAM, &f, eps, x + h).unwrap()
                - apply_at(&FAM, &f, eps, x - h).unwrap())
                / (2.0 * h);
            let exact = apply_derivative_at(&FAM, &f, &f1, eps, x).unwrap();
            assert!(
                (fd - exact).abs() < 1e-6 * (1.0 + exact.abs()),
                "x={x}: fd {fd} vs exact {exact}"
            );
        }
    }

    #[test]
    fn second_derivative_action_matches_finite_differences() {
        let n = 256;
        let f = GridDensity::sample(n, InterpOrder::Cubic, |x| (2.0 * x).cos() + 0.5 * x);
        let f1 = GridDensity::sample(n, InterpOrder::Cubic, |x| -2.0 * (2.0 * x).sin() + 0.5);
        let f2 = GridDensity::sample(n, InterpOrder::Cubic, |x| -4.0 * (2.0 * x).cos());
        let eps = 0.04;
        let h = 1e-5;
        for &x in &[0.11, 0.34, 0.52, 0.78, 0.9] {
            let fd = (apply_derivative_at(&FAM, &f, &f1, eps, x + h).unwrap()
                - apply_derivative_at(&FAM, &f, &f1, eps, x - h).unwrap())
                / (2.0 * h);
            let exact = apply_second_derivative_at(&FAM, &f, &f1, &f2, eps, x).unwrap();
            assert!(
                (fd - exact).abs() < 1e-4 * (1.0 + exact.abs()),
                "x={x}: fd {fd} vs exact {exact}"
            );
        }
    }

    #[test]
    fn contraction_constants_at_the_unperturbed_map() {
        let ly = ly_constants(&FAM, 0.0, 512).unwrap();
        // sup 1/|T'| is attained at the interval endpoints: 16/25.
        assert_relative_eq!(ly.lambda, 0.64, max_relative = 1e-12);
        assert_relative_eq!(ly.m, 4.98177886823777, max_relative = 1e-9);
    }

    #[test]
    fn second_order_constants_at_the_unperturbed_map() {
        let c = second_order_constants(&FAM, 0.0, 1024).unwrap();
        assert_relative_eq!(c.lambda_sq, 0.4096, max_relative = 1e-12);
        // Interior maximum of 3|T''|/|T'|³ near offset 4.6e-3; the sampled
        // sup sits at most a hair below the true one.
        assert_relative_eq!(c.first_weight_sup, 14.651615678232938, max_relative = 2e-2);
        assert!(c.first_weight_sup <= 14.651615678233);
        assert_relative_eq!(c.zero_weight_l2, 174.05601536574654, max_relative = 1e-6);
    }

    #[test]
    fn tent_map_weights_have_no_curvature_terms() {
        let tent = TentFamily;
        let w = OperatorWeights::at(&tent, Branch::Right, 0.2, 0.0);
        assert_relative_eq!(w.w0, 0.5, max_relative = 1e-15);
        assert_relative_eq!(w.first_deriv_on_f1(), -0.25, max_relative = 1e-15);
        assert_eq!(
            (w.w1, w.g1a, w.g1b, w.g2, w.g3, w.g4),
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        );
        assert_eq!((w.second_deriv_on_f1(), w.second_deriv_on_f0()), (0.0, 0.0));
    }

    #[test]
    fn l2_bounds_hold_on_a_smooth_suite() {
        let suite = vec![
            GridDensity::constant(128, 1.0),
            GridDensity::sample(128, InterpOrder::Cubic, |x| 1.0 + 0.5 * (3.0 * x).sin()),
            GridDensity::sample(128, InterpOrder::Cubic, |x| (-(x - 0.4).powi(2) * 8.0).exp()),
        ];
        let report = l2_bound_check(&FAM, 0.02, &suite).unwrap();
        assert!(report.ok, "{report:?}");
        assert!(report.max_ratio > 0.5, "suspiciously small ratio");
    }
}
