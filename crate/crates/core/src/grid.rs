//! Densities sampled on a uniform grid over `[0, 1]` with local polynomial
//! interpolation, plus quadrature-backed norms.

use crate::quad::{self, pairwise_sum};

/// Interpolation order between grid nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterpOrder {
    /// Piecewise linear (used for histogram-style densities).
    Linear,
    /// Piecewise cubic on the local 4-point stencil.
    Cubic,
}

/// Norms computed from a grid density's interpolant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L1,
    L2,
    /// `‖f‖₁ + ‖f′‖₁`
    W11,
    /// `‖f‖₁ + ‖f′‖₁ + ‖f″‖₁`
    W21,
}

/// A density on the uniform grid `x_i = i / n`, `i = 0..=n`.
///
/// Values between nodes are defined by the interpolant of [`InterpOrder`];
/// evaluation outside `[0, 1]` clamps to the endpoints.  The nodes are always
/// uniform — local resolution control happens in quadrature cells, not in the
/// node layout.
#[derive(Clone, Debug)]
pub struct GridDensity {
    n: usize,
    values: Vec<f64>,
    order: InterpOrder,
}

impl GridDensity {
    /// Density from explicit node values (`values.len() == n + 1`).
    pub fn from_values(values: Vec<f64>, order: InterpOrder) -> Self {
        assert!(values.len() >= 4, "need at least 4 nodes for interpolation");
        GridDensity {
            n: values.len() - 1,
            values,
            order,
        }
    }

    /// Density sampling `f` at the nodes of an `n`-cell grid.
    pub fn sample<F: Fn(f64) -> f64>(n: usize, order: InterpOrder, f: F) -> Self {
        let values = (0..=n).map(|i| f(i as f64 / n as f64)).collect();
        GridDensity { n, values, order }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        GridDensity {
            n,
            values: vec![value; n + 1],
            order: InterpOrder::Cubic,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    /// Number of cells (nodes are `cells + 1`).
    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> InterpOrder {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    /// Cell index and local coordinate of `x` (clamped into `[0, 1]`).
    fn locate(&self, x: f64) -> (usize, f64) {
        let x = x.clamp(0.0, 1.0);
        let scaled = x * self.n as f64;
        let cell = (scaled.floor() as usize).min(self.n - 1);
        (cell, scaled - cell as f64)
    }

    /// Interpolant value at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let (cell, t) = self.locate(x);
        match self.order {
            InterpOrder::Linear => {
                self.values[cell] * (1.0 - t) + self.values[cell + 1] * t
            }
            InterpOrder::Cubic => {
                let (base, s) = self.stencil(cell, t);
                let v = &self.values[base..base + 4];
                lagrange3(v, s)
            }
        }
    }

    /// Derivative of the interpolant at `x`.
    pub fn eval_deriv(&self, x: f64) -> f64 {
        let (cell, t) = self.locate(x);
        match self.order {
            InterpOrder::Linear => (self.values[cell + 1] - self.values[cell]) * self.n as f64,
            InterpOrder::Cubic => {
                let (base, s) = self.stencil(cell, t);
                let v = &self.values[base..base + 4];
                lagrange3_d1(v, s) * self.n as f64
            }
        }
    }

    /// Second derivative of the interpolant at `x` (zero for linear order).
    pub fn eval_deriv2(&self, x: f64) -> f64 {
        let (cell, t) = self.locate(x);
        match self.order {
            InterpOrder::Linear => 0.0,
            InterpOrder::Cubic => {
                let (base, s) = self.stencil(cell, t);
                let v = &self.values[base..base + 4];
                lagrange3_d2(v, s) * (self.n as f64) * (self.n as f64)
            }
        }
    }

    /// 4-point stencil for `cell`, clamped at the ends; returns the base node
    /// index and the local coordinate relative to that base.
    fn stencil(&self, cell: usize, t: f64) -> (usize, f64) {
        let base = cell.saturating_sub(1).min(self.n - 3);
        (base, t + (cell - base) as f64)
    }

    /// Node-sampled derivative of the interpolant.
    pub fn derivative(&self) -> GridDensity {
        let values = (0..=self.n)
            .map(|i| self.eval_deriv(i as f64 / self.n as f64))
            .collect();
        GridDensity {
            n: self.n,
            values,
            order: self.order,
        }
    }

    /// Pointwise linear combination `a·self + b·other` (same grid required).
    pub fn linear_comb(&self, a: f64, other: &GridDensity, b: f64) -> GridDensity {
        assert_eq!(self.n, other.n, "grid size mismatch");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&u, &v)| a * u + b * v)
            .collect();
        GridDensity {
            n: self.n,
            values,
            order: self.order,
        }
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    /// `∫₀¹ f` over the given quadrature cells.
    pub fn integral_on(&self, q: &Quadrature) -> f64 {
        q.integrate(|x| self.eval(x))
    }

    /// `∫₀¹ f` on the density's own cells.
    pub fn integral(&self) -> f64 {
        self.integral_on(&Quadrature::uniform(self.n))
    }

    /// Norm of the interpolant over the given quadrature cells.
    pub fn norm_on(&self, kind: NormKind, q: &Quadrature) -> f64 {
        match kind {
            NormKind::L1 => q.integrate(|x| self.eval(x).abs()),
            NormKind::L2 => q.integrate(|x| self.eval(x).powi(2)).max(0.0).sqrt(),
            NormKind::W11 => {
                q.integrate(|x| self.eval(x).abs()) + q.integrate(|x| self.eval_deriv(x).abs())
            }
            NormKind::W21 => {
                q.integrate(|x| self.eval(x).abs())
                    + q.integrate(|x| self.eval_deriv(x).abs())
                    + q.integrate(|x| self.eval_deriv2(x).abs())
            }
        }
    }

    /// Norm on the density's own cells.
    pub fn norm(&self, kind: NormKind) -> f64 {
        self.norm_on(kind, &Quadrature::uniform(self.n))
    }

    /// `‖self − other‖₁` on the finer of the two grids.
    pub fn l1_distance(&self, other: &GridDensity) -> f64 {
        let q = Quadrature::uniform(self.n.max(other.cells()));
        q.integrate(|x| (self.eval(x) - other.eval(x)).abs())
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Stencil base index and cubic Lagrange coefficients for evaluation at `x`
/// on an `n`-cell uniform grid: `f(x) ≈ Σ_k coeff[k] · f(node(base + k))`.
pub fn cubic_eval_stencil(n: usize, x: f64) -> (usize, [f64; 4]) {
    assert!(n >= 3);
    let x = x.clamp(0.0, 1.0);
    let scaled = x * n as f64;
    let cell = (scaled.floor() as usize).min(n - 1);
    let base = cell.saturating_sub(1).min(n - 3);
    let s = scaled - base as f64;
    let l0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
    let l1 = s * (s - 2.0) * (s - 3.0) / 2.0;
    let l2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
    let l3 = s * (s - 1.0) * (s - 2.0) / 6.0;
    (base, [l0, l1, l2, l3])
}

/// Cubic Lagrange basis on integer nodes 0..=3, evaluated at `s ∈ [0, 3]`.
fn lagrange3(v: &[f64], s: f64) -> f64 {
    let l0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
    let l1 = s * (s - 2.0) * (s - 3.0) / 2.0;
    let l2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
    let l3 = s * (s - 1.0) * (s - 2.0) / 6.0;
    v[0] * l0 + v[1] * l1 + v[2] * l2 + v[3] * l3
}

fn lagrange3_d1(v: &[f64], s: f64) -> f64 {
    let l0 = -(3.0 * s * s - 12.0 * s + 11.0) / 6.0;
    let l1 = (3.0 * s * s - 10.0 * s + 6.0) / 2.0;
    let l2 = -(3.0 * s * s - 8.0 * s + 3.0) / 2.0;
    let l3 = (3.0 * s * s - 6.0 * s + 2.0) / 6.0;
    v[0] * l0 + v[1] * l1 + v[2] * l2 + v[3] * l3
}

fn lagrange3_d2(v: &[f64], s: f64) -> f64 {
    v[0] * -(s - 2.0) + v[1] * (3.0 * s - 5.0) + v[2] * -(3.0 * s - 4.0) + v[3] * (s - 1.0)
}

/// An explicit quadrature cell list over `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Quadrature {
    cells: Vec<(f64, f64)>,
}

impl Quadrature {
    /// One cell per grid cell.
    pub fn uniform(n: usize) -> Self {
        Quadrature {
            cells: quad::uniform_cells(0.0, 1.0, n),
        }
    }

    /// Uniform cells, with every cell intersecting `[center − radius,
    /// center + radius]` split in two.
    pub fn uniform_refined(n: usize, center: f64, radius: f64) -> Self {
        let mut cells = Vec::with_capacity(n + n / 8);
        for (lo, hi) in quad::uniform_cells(0.0, 1.0, n) {
            if hi >= center - radius && lo <= center + radius {
                let mid = 0.5 * (lo + hi);
                cells.push((lo, mid));
                cells.push((mid, hi));
            } else {
                cells.push((lo, hi));
            }
        }
        Quadrature { cells }
    }

    pub fn cells(&self) -> &[(f64, f64)] {
        &self.cells
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let parts: Vec<f64> = self.cells.iter().map(|&(lo, hi)| quad::gl8(&f, lo, hi)).collect();
        pairwise_sum(&parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_reproduces_cubics_exactly() {
        let f = |x: f64| 2.0 * x.powi(3) - x * x + 0.5 * x - 0.25;
        let g = GridDensity::sample(64, InterpOrder::Cubic, f);
        for k in 0..200 {
            let x = k as f64 / 199.0;
            assert!((g.eval(x) - f(x)).abs() < 1e-14, "value at {x}");
            let d = 6.0 * x * x - 2.0 * x + 0.5;
            assert!((g.eval_deriv(x) - d).abs() < 1e-12, "deriv at {x}");
            let d2 = 12.0 * x - 2.0;
            assert!((g.eval_deriv2(x) - d2).abs() < 1e-10, "second deriv at {x}");
        }
    }

    #[test]
    fn linear_interpolation_between_nodes() {
        let g = GridDensity::from_values(vec![0.0, 1.0, 0.0, 1.0, 0.0], InterpOrder::Linear);
        assert!((g.eval(0.125) - 0.5).abs() < 1e-15);
        assert!((g.eval_deriv(0.1) - 4.0).abs() < 1e-12);
        assert_eq!(g.eval_deriv2(0.3), 0.0);
    }

    #[test]
    fn norms_of_identity_density() {
        // f(x) = x: ‖f‖₁ = 1/2, ‖f‖₂ = 1/√3, ‖f‖_{W11} = 3/2.
        let g = GridDensity::sample(128, InterpOrder::Cubic, |x| x);
        assert!((g.norm(NormKind::L1) - 0.5).abs() < 1e-13);
        assert!((g.norm(NormKind::L2) - 0.577_350_269_189_625_76).abs() < 1e-10);
        assert!((g.norm(NormKind::W11) - 1.5).abs() < 1e-12);
        assert!((g.norm(NormKind::W21) - 1.5).abs() < 1e-10);
    }

    #[test]
    fn interpolation_error_fourth_order() {
        // Halving the cell width must shrink the max error by roughly 2^4.
        let f = |x: f64| (2.5 * x).sin();
        let err = |n: usize| {
            let g = GridDensity::sample(n, InterpOrder::Cubic, f);
            (0..1000)
                .map(|k| {
                    let x = k as f64 / 999.0;
                    (g.eval(x) - f(x)).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(32), err(64));
        let rate = e1 / e2;
        assert!(rate > 10.0 && rate < 26.0, "rate {rate} (errors {e1:e}, {e2:e})");
    }

    #[test]
    fn refined_quadrature_still_integrates_exactly() {
        let q = Quadrature::uniform_refined(64, 0.96, 0.05);
        assert!(q.cells().len() > 64);
        let val = q.integrate(|x| x * x);
        assert!((val - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn clamped_evaluation_outside_domain() {
        let g = GridDensity::sample(16, InterpOrder::Cubic, |x| 1.0 + x);
        assert!((g.eval(-0.5) - 1.0).abs() < 1e-14);
        assert!((g.eval(1.5) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn eval_stencil_matches_direct_evaluation() {
        let g = GridDensity::sample(48, InterpOrder::Cubic, |x| (3.0 * x).cos() + x * x);
        for k in 0..=200 {
            let x = k as f64 / 200.0;
            let (base, coeff) = cubic_eval_stencil(48, x);
            let via_stencil: f64 = (0..4).map(|j| coeff[j] * g.values()[base + j]).sum();
            assert!(
                (via_stencil - g.eval(x)).abs() < 1e-13,
                "stencil/eval mismatch at x={x}"
            );
        }
    }
}
