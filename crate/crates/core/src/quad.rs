//! Deterministic composite Gauss–Legendre quadrature.
//!
//! Every integral in the crate reduces to 8-point Gauss–Legendre rules on an
//! explicit list of cells, accumulated with fixed-order pairwise summation.
//! Integrands with an integrable power singularity at a known point are
//! integrated on a geometrically graded mesh whose cells halve toward the
//! singularity; the innermost cell still keeps all quadrature nodes strictly
//! away from it.

/// Abscissae of the 8-point Gauss–Legendre rule on `[-1, 1]` (positive half).
const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_80,
    0.525_532_409_916_328_99,
    0.796_666_477_413_626_74,
    0.960_289_856_497_536_23,
];

/// Weights paired with [`GL8_X`].
const GL8_W: [f64; 4] = [
    0.362_683_783_378_361_98,
    0.313_706_645_877_887_29,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Fixed-order pairwise sum.  Deterministic for a fixed input order and
/// accurate to `O(log n)` rounding errors.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// 8-point Gauss–Legendre approximation of `∫_lo^hi f`.
pub fn gl8<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (lo + hi);
    let mut acc = 0.0;
    for k in 0..4 {
        acc += GL8_W[k] * (f(mid - half * GL8_X[k]) + f(mid + half * GL8_X[k]));
    }
    acc * half
}

/// Composite integral over an explicit cell list.
pub fn integrate_cells<F: Fn(f64) -> f64>(f: &F, cells: &[(f64, f64)]) -> f64 {
    let parts: Vec<f64> = cells.iter().map(|&(lo, hi)| gl8(f, lo, hi)).collect();
    pairwise_sum(&parts)
}

/// Uniform subdivision of `[lo, hi]` into `n` cells.
pub fn uniform_cells(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    assert!(n > 0 && hi > lo);
    let width = hi - lo;
    (0..n)
        .map(|i| {
            (
                lo + width * (i as f64 / n as f64),
                lo + width * ((i + 1) as f64 / n as f64),
            )
        })
        .collect()
}

/// Parameters of the graded mesh used next to the cusp.
#[derive(Clone, Copy, Debug)]
pub struct GradedMesh {
    /// Distance from the singular point at which grading starts.
    pub inner_radius: f64,
    /// Number of halvings inside the graded zone.
    pub levels: u32,
    /// Cells per unit length on the plain part of the domain.
    pub outer_cells_per_unit: usize,
}

impl Default for GradedMesh {
    fn default() -> Self {
        GradedMesh {
            inner_radius: 1e-2,
            levels: 40,
            outer_cells_per_unit: 256,
        }
    }
}

/// Integrates `t ↦ f(t)` over `(0, width]`, where `t` is the distance from a
/// singular point at `t = 0` and `f` may blow up like `t^p` with `p > -1`.
///
/// Cells halve toward 0 for `mesh.levels` levels inside `mesh.inner_radius`;
/// the leftover sliver `(0, inner · 2^-levels]` is integrated with a single
/// rule whose nodes stay strictly positive, so `f` is never evaluated at 0.
pub fn integrate_graded<F: Fn(f64) -> f64>(f: F, width: f64, mesh: &GradedMesh) -> f64 {
    assert!(width > 0.0);
    let inner = mesh.inner_radius.min(width);
    let mut cells: Vec<(f64, f64)> = Vec::with_capacity(mesh.levels as usize + 2);
    // Innermost sliver first so the smallest contributions accumulate first.
    let mut edge = inner * 0.5f64.powi(mesh.levels as i32);
    cells.push((0.0, edge));
    for _ in 0..mesh.levels {
        cells.push((edge, 2.0 * edge));
        edge *= 2.0;
    }
    if width > inner {
        let n = ((width - inner) * mesh.outer_cells_per_unit as f64).ceil() as usize;
        cells.extend(uniform_cells(inner, width, n.max(1)));
    }
    // gl8 only evaluates at interior nodes, so the (0, edge] cell never
    // touches t = 0.
    integrate_cells(&f, &cells)
}
