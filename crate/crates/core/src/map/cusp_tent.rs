//! The built-in cusp-tent family.
//!
//! `T_ε(x) = (1 − ε)·S(x)` on `[0, 1]`, where in terms of the folded
//! coordinate `u = |1 − 2x| ∈ (0, 1]`
//!
//! ```text
//! S(x) = 1 − (3/4)·u − (1/4)·u^{1/8}
//! ```
//!
//! Both branches share this expression; `S` is symmetric about the turning
//! point `c = 1/2`, increasing on the left branch and decreasing on the
//! right.  The derivative magnitude `|S′| = 3/2 + u^{−7/8}/16` attains its
//! minimum `25/16` at the endpoints and blows up at the cusp with exponent
//! `β = −7/8`, so `|T_ε′| ≥ (1 − ε)·25/16 > 1` for all `ε ∈ [0, 1/10)`.
//! The image bound is `a(ε) = 1 − ε`.

use super::{Branch, MapFamily, Preimage, prev_double, next_double};
use crate::error::MapError;

const C: f64 = 0.5;
const BETA: f64 = -0.875;
const EPS_MAX: f64 = 0.1;

pub struct CuspTentExample;

impl CuspTentExample {
    pub const NAME: &'static str = "cusp-tent-example";

    pub fn new() -> Self {
        CuspTentExample
    }

    /// Folded coordinate `u = |1 − 2x|`.  Exact in floating point for every
    /// representable `x`: `2x` is a scaling by a power of two and the
    /// subtraction `1 − 2x` is exact whenever `2x ∈ [1/2, 2]` (Sterbenz) and
    /// harmless elsewhere.
    fn fold(x: f64) -> f64 {
        (1.0 - 2.0 * x).abs()
    }

    fn s_value(u: f64) -> f64 {
        1.0 - 0.75 * u - 0.25 * u.powf(0.125)
    }

    /// `|S′|(u) = 3/2 + u^{−7/8}/16`.
    fn s_d1_mag(u: f64) -> f64 {
        1.5 + 0.0625 * u.powf(-0.875)
    }

    /// `S″(u) = (7/64)·u^{−15/8}` (positive on both branches).
    fn s_d2(u: f64) -> f64 {
        (7.0 / 64.0) * u.powf(-1.875)
    }

    /// `|S‴|(u) = (105/256)·u^{−23/8}`.
    fn s_d3_mag(u: f64) -> f64 {
        (105.0 / 256.0) * u.powf(-2.875)
    }

    fn branch_sign(branch: Branch) -> f64 {
        match branch {
            Branch::Left => 1.0,
            Branch::Right => -1.0,
        }
    }

    fn branch_of(x: f64) -> Branch {
        if x < C { Branch::Left } else { Branch::Right }
    }
}

impl Default for CuspTentExample {
    fn default() -> Self {
        Self::new()
    }
}

impl MapFamily for CuspTentExample {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn turning_point(&self) -> f64 {
        C
    }

    fn cusp_exponent(&self) -> f64 {
        BETA
    }

    fn eps_max(&self) -> f64 {
        EPS_MAX
    }

    fn turning_image(&self, eps: f64) -> f64 {
        1.0 - eps
    }

    fn value(&self, x: f64, eps: f64) -> f64 {
        (1.0 - eps) * Self::s_value(Self::fold(x))
    }

    fn d1(&self, x: f64, eps: f64) -> f64 {
        let sign = Self::branch_sign(Self::branch_of(x));
        sign * (1.0 - eps) * Self::s_d1_mag(Self::fold(x))
    }

    fn d2(&self, x: f64, eps: f64) -> f64 {
        (1.0 - eps) * Self::s_d2(Self::fold(x))
    }

    fn d3(&self, x: f64, eps: f64) -> f64 {
        let sign = Self::branch_sign(Self::branch_of(x));
        sign * (1.0 - eps) * Self::s_d3_mag(Self::fold(x))
    }

    fn eps_deriv(&self, x: f64, eps: f64) -> f64 {
        let _ = eps;
        -Self::s_value(Self::fold(x))
    }

    fn eps_deriv_d1(&self, x: f64, eps: f64) -> f64 {
        let _ = eps;
        let sign = Self::branch_sign(Self::branch_of(x));
        -sign * Self::s_d1_mag(Self::fold(x))
    }

    fn value_off(&self, branch: Branch, off: f64, eps: f64) -> f64 {
        let _ = branch;
        (1.0 - eps) * Self::s_value(2.0 * off)
    }

    fn d1_off(&self, branch: Branch, off: f64, eps: f64) -> f64 {
        Self::branch_sign(branch) * (1.0 - eps) * Self::s_d1_mag(2.0 * off)
    }

    fn d2_off(&self, branch: Branch, off: f64, eps: f64) -> f64 {
        let _ = branch;
        (1.0 - eps) * Self::s_d2(2.0 * off)
    }

    fn d3_off(&self, branch: Branch, off: f64, eps: f64) -> f64 {
        Self::branch_sign(branch) * (1.0 - eps) * Self::s_d3_mag(2.0 * off)
    }

    fn eps_deriv_off(&self, branch: Branch, off: f64, eps: f64) -> f64 {
        let _ = (branch, eps);
        -Self::s_value(2.0 * off)
    }

    fn eps_deriv_d1_off(&self, branch: Branch, off: f64, eps: f64) -> f64 {
        let _ = eps;
        -Self::branch_sign(branch) * Self::s_d1_mag(2.0 * off)
    }

    /// Inversion in the root coordinate `v = u^{1/8}`.
    ///
    /// With `s = x / (1 − ε)` and `r = 1 − s`, the branch equation becomes
    /// `g(v) = (3/4)v⁸ + (1/4)v − r = 0` on `[0, 1]`: a strictly increasing,
    /// convex polynomial, so Newton from any overestimate of the root
    /// converges monotonically.  Solving for `v` instead of `y` keeps full
    /// relative precision in the cusp offset `u/2 = v⁸/2` even when `y`
    /// itself rounds to the turning point.
    fn branch_inverse(&self, branch: Branch, x: f64, eps: f64) -> Result<Preimage, MapError> {
        let a = 1.0 - eps;
        if !(0.0..=a).contains(&x) {
            return Err(MapError::NoPreimage { x, bound: a });
        }
        let r = (a - x) / a; // r ∈ [0, 1]; a − x is exact for x near a (Sterbenz)
        let v = if r == 0.0 {
            0.0
        } else {
            // Overestimates of the root: g(4r) ≥ 0 and g((4r/3)^{1/8}) ≥ 0.
            let mut v = (4.0 * r).min((4.0 * r / 3.0).powf(0.125)).min(1.0);
            let mut iterations = 0u32;
            loop {
                iterations += 1;
                let v4 = (v * v) * (v * v);
                let g = 0.75 * (v4 * v4) + 0.25 * v - r;
                let gp = 6.0 * v4 * v4 / v + 0.25; // g′(v) = 6v⁷ + 1/4
                let step = g / gp;
                let mut v_new = v - step;
                if !(v_new > 0.0) {
                    // Not reachable from a monotone descent; guards rounding.
                    v_new = 0.5 * v;
                }
                if step.abs() <= 1e-17 * v || v_new == v {
                    v = v_new;
                    break;
                }
                v = v_new;
                if iterations >= super::INVERSE_MAX_ITER {
                    let v4 = (v * v) * (v * v);
                    let res = a * (0.75 * (v4 * v4) + 0.25 * v - r).abs();
                    if res > super::INVERSE_TOL {
                        return Err(MapError::RootFind {
                            residual: res,
                            iterations,
                        });
                    }
                    break;
                }
            }
            v
        };
        let v4 = (v * v) * (v * v);
        let u = v4 * v4;
        let off = 0.5 * u;
        let y = match branch {
            Branch::Left => (C - off).clamp(0.0, prev_double(C)),
            Branch::Right => (C + off).clamp(next_double(C), 1.0),
        };
        Ok(Preimage {
            branch,
            y,
            cusp_offset: off,
        })
    }
}
