//! Map families: two full monotone branches on `[0, c)` and `(c, 1]`, both
//! mapping onto `[0, a(ε))`, with derivative blow-up of exponent `β ∈ (−1,
//! −3/4)` at the turning point `c`.
//!
//! Points returned by branch inversion carry their distance to the turning
//! point (`cusp_offset`) alongside the plain coordinate.  Near `c` the
//! coordinate loses all resolution — consecutive doubles around `c` map to
//! values split by `~|Δ|^{1/8}` — while the offset stays meaningful at any
//! magnitude, so every weight evaluated at a preimage goes through the
//! offset-parametrised methods.

mod cusp_tent;
mod tent;

pub use cusp_tent::CuspTentExample;
pub use tent::TentFamily;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::MapError;

/// Derivative queries closer to the turning point than this are rejected;
/// reciprocal-derivative weights are reported as their vanishing limit 0.
pub const CUSP_GUARD: f64 = 1e-15;

/// Offsets below this floor are treated as sitting exactly at the turning
/// point when operator weights are evaluated.  At `off = 1e-60` every weight
/// with a vanishing limit is below `10^-37`, and all intermediate powers of
/// the derivatives stay inside f64 range.
pub const CUSP_WEIGHT_FLOOR: f64 = 1e-60;

/// Residual tolerance for branch inversion.
pub const INVERSE_TOL: f64 = 1e-14;

/// Iteration cap for branch inversion.
pub const INVERSE_MAX_ITER: u32 = 200;

/// The two monotone branches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// Domain `[0, c)`, increasing.
    Left,
    /// Domain `(c, 1]`, decreasing.
    Right,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Left, Branch::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Left => "left",
            Branch::Right => "right",
        }
    }
}

/// A branch preimage: the coordinate plus its exact distance to the turning
/// point.  `y` is always strictly inside the branch domain; `cusp_offset` may
/// be far below the resolution of `y` itself.
#[derive(Clone, Copy, Debug)]
pub struct Preimage {
    pub branch: Branch,
    pub y: f64,
    pub cusp_offset: f64,
}

/// A one-parameter family of full-branched interval maps `T_ε` with a cusp at
/// a fixed turning point.
///
/// Implementations must satisfy: both branches are strictly monotone and map
/// onto `[0, a(ε))`; `value`, `d1`–`d3` are coherent (each is the derivative
/// of the previous); `eps_deriv`/`eps_deriv_d1` are the ε-derivatives of
/// `value`/`d1`.  The `_off` methods evaluate the same quantities
/// parametrised by the distance `off = |x − c| > 0`; the defaults reconstruct
/// `x` by subtraction, which is adequate only for `off ≳ 1e-16` — families
/// with closed-form cusp behaviour should override them.
pub trait MapFamily: Send + Sync {
    /// Registry name.
    fn name(&self) -> &str;

    /// Turning point `c`.
    fn turning_point(&self) -> f64;

    /// Cusp exponent `β` claimed by the family.
    fn cusp_exponent(&self) -> f64;

    /// Parameter range is `[0, eps_max)`.
    fn eps_max(&self) -> f64;

    /// Image bound `a(ε)` of both branches, in closed form.
    fn turning_image(&self, eps: f64) -> f64;

    /// `T_ε(x)` for `x ≠ c`.
    fn value(&self, x: f64, eps: f64) -> f64;

    /// `T_ε′(x)`.
    fn d1(&self, x: f64, eps: f64) -> f64;

    /// `T_ε″(x)`.
    fn d2(&self, x: f64, eps: f64) -> f64;

    /// `T_ε‴(x)`.
    fn d3(&self, x: f64, eps: f64) -> f64;

    /// `∂_ε T_ε(x)`.
    fn eps_deriv(&self, x: f64, eps: f64) -> f64;

    /// `∂_ε T_ε′(x)`.
    fn eps_deriv_d1(&self, x: f64, eps: f64) -> f64;

    fn value_off(&self, branch: Branch, off: f64, eps: f64) -> f64 {
        self.value(branch_point(self.turning_point(), branch, off), eps)
    }

    fn d1_off(&self, branch: Branch, off: f64, eps: f64) -> f64 {
        self.d1(branch_point(self.turning_point(), branch, off), eps)
    }

    fn d2_off(&self, branch: Branch, off: f64, eps: f64) -> f64 {
        self.d2(branch_point(self.turning_point(), branch, off), eps)
    }

    fn d3_off(&self, branch: Branch, off: f64, eps: f64) -> f64 {
        self.d3(branch_point(self.turning_point(), branch, off), eps)
    }

    fn eps_deriv_off(&self, branch: Branch, off: f64, eps: f64) -> f64 {
        self.eps_deriv(branch_point(self.turning_point(), branch, off), eps)
    }

    fn eps_deriv_d1_off(&self, branch: Branch, off: f64, eps: f64) -> f64 {
        self.eps_deriv_d1(branch_point(self.turning_point(), branch, off), eps)
    }

    /// Solves `T_ε(y) = x` on the branch.  Fails with [`MapError::NoPreimage`]
    /// for `x` outside `[0, a(ε)]`.  The default is a bracketed bisection with
    /// Newton polish on the coordinate; its offset resolution bottoms out near
    /// one ulp of `c`.
    fn branch_inverse(&self, branch: Branch, x: f64, eps: f64) -> Result<Preimage, MapError> {
        bisect_newton_inverse(self, branch, x, eps)
    }
}

/// `x` at distance `off` from `c` on the given side, nudged strictly inside
/// the branch domain.
fn branch_point(c: f64, branch: Branch, off: f64) -> f64 {
    match branch {
        Branch::Left => (c - off).clamp(0.0, prev_double(c)),
        Branch::Right => (c + off).clamp(next_double(c), 1.0),
    }
}

pub(crate) fn prev_double(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

pub(crate) fn next_double(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

pub fn check_eps(family: &(impl MapFamily + ?Sized), eps: f64) -> Result<(), MapError> {
    if !(0.0..family.eps_max()).contains(&eps) {
        return Err(MapError::EpsilonOutOfRange {
            eps,
            eps_max: family.eps_max(),
        });
    }
    Ok(())
}

pub fn check_x(x: f64) -> Result<(), MapError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(MapError::OutOfDomain { x });
    }
    Ok(())
}

/// Checked map evaluation: rejects `x` outside `[0, 1]`, `x` exactly at the
/// turning point, and `ε` outside `[0, eps_max)`.
pub fn eval(family: &(impl MapFamily + ?Sized), x: f64, eps: f64) -> Result<f64, MapError> {
    check_eps(family, eps)?;
    check_x(x)?;
    if x == family.turning_point() {
        return Err(MapError::AtTurningPoint { x });
    }
    Ok(family.value(x, eps))
}

/// Checked derivative of the requested order (1, 2, or 3).  Queries inside
/// the cusp guard band are rejected because the one-sided derivatives diverge
/// there.
pub fn derivative(
    family: &(impl MapFamily + ?Sized),
    x: f64,
    eps: f64,
    order: u8,
) -> Result<f64, MapError> {
    check_eps(family, eps)?;
    check_x(x)?;
    let dist = (x - family.turning_point()).abs();
    if dist < CUSP_GUARD {
        return Err(MapError::CuspProximity {
            dist,
            guard: CUSP_GUARD,
        });
    }
    match order {
        1 => Ok(family.d1(x, eps)),
        2 => Ok(family.d2(x, eps)),
        3 => Ok(family.d3(x, eps)),
        order => Err(MapError::BadOrder { order }),
    }
}

/// Checked `(∂_ε T, ∂_ε T′)` pair.  The derivative component shares the cusp
/// guard of [`derivative`].
pub fn perturbation_derivs(
    family: &(impl MapFamily + ?Sized),
    x: f64,
    eps: f64,
) -> Result<(f64, f64), MapError> {
    check_eps(family, eps)?;
    check_x(x)?;
    let dist = (x - family.turning_point()).abs();
    if dist < CUSP_GUARD {
        return Err(MapError::CuspProximity {
            dist,
            guard: CUSP_GUARD,
        });
    }
    Ok((family.eps_deriv(x, eps), family.eps_deriv_d1(x, eps)))
}

/// `1/|T_ε′(x)|` with the guard-band convention: inside the guard the weight
/// is reported as its true limit 0.
pub fn inv_abs_d1(family: &(impl MapFamily + ?Sized), x: f64, eps: f64) -> f64 {
    let dist = (x - family.turning_point()).abs();
    if dist < CUSP_GUARD {
        return 0.0;
    }
    1.0 / family.d1(x, eps).abs()
}

/// Checked branch inversion.
pub fn branch_inverse(
    family: &(impl MapFamily + ?Sized),
    branch: Branch,
    x: f64,
    eps: f64,
) -> Result<Preimage, MapError> {
    check_eps(family, eps)?;
    let a = family.turning_image(eps);
    if !(0.0..=a).contains(&x) {
        return Err(MapError::NoPreimage { x, bound: a });
    }
    family.branch_inverse(branch, x, eps)
}

/// Bracketed bisection with Newton polish on the coordinate.  The bracket is
/// guaranteed by branch monotonicity; the map value is extended continuously
/// to `c` by `a(ε)` for bracketing only.
fn bisect_newton_inverse(
    family: &(impl MapFamily + ?Sized),
    branch: Branch,
    x: f64,
    eps: f64,
) -> Result<Preimage, MapError> {
    let c = family.turning_point();
    let a = family.turning_image(eps);
    let value_at = |y: f64| -> f64 {
        if (y - c).abs() < CUSP_GUARD {
            a
        } else {
            family.value(y, eps)
        }
    };
    // f(y) = ±(T(y) − x), oriented so f(lo) ≤ 0 ≤ f(hi).
    let (mut lo, mut hi, sign) = match branch {
        Branch::Left => (0.0f64, c, 1.0f64),
        Branch::Right => (c, 1.0f64, -1.0f64),
    };
    let mut best = 0.5 * (lo + hi);
    let mut best_res = f64::INFINITY;
    let mut iterations = 0u32;
    while iterations < INVERSE_MAX_ITER {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let fm = sign * (value_at(mid) - x);
        if fm.abs() < best_res {
            best_res = fm.abs();
            best = mid;
        }
        if fm.abs() <= INVERSE_TOL {
            break;
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= (c.abs() + 1.0) * f64::EPSILON {
            break;
        }
    }
    // Newton polish, kept inside the bracket and away from the guard band.
    let mut y = best;
    for _ in 0..8 {
        if best_res <= INVERSE_TOL * 0.01 {
            break;
        }
        if (y - c).abs() < CUSP_GUARD {
            break;
        }
        let d = family.d1(y, eps);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let step = (family.value(y, eps) - x) / d;
        let y_new = y - step;
        let inside = match branch {
            Branch::Left => (0.0..c).contains(&y_new),
            Branch::Right => (c..=1.0).contains(&y_new) && y_new > c,
        };
        if !inside {
            break;
        }
        let res = (value_at(y_new) - x).abs();
        if res >= best_res {
            break;
        }
        best_res = res;
        y = y_new;
    }
    // A residual above tolerance with a collapsed bracket is a representation
    // limit, not a solver failure; a wide bracket is a real failure.
    if best_res > INVERSE_TOL && (hi - lo).abs() > 4.0 * f64::EPSILON {
        return Err(MapError::RootFind {
            residual: best_res,
            iterations,
        });
    }
    let y = match branch {
        Branch::Left => y.clamp(0.0, prev_double(c)),
        Branch::Right => y.clamp(next_double(c), 1.0),
    };
    Ok(Preimage {
        branch,
        y,
        cusp_offset: (y - c).abs(),
    })
}

/// Name-keyed family registry with the built-in families pre-registered.
pub struct FamilyRegistry {
    entries: BTreeMap<String, Arc<dyn MapFamily>>,
}

impl FamilyRegistry {
    pub fn empty() -> Self {
        FamilyRegistry {
            entries: BTreeMap::new(),
        }
    }

    /// Registry holding the built-in families.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(CuspTentExample::new()));
        reg.register(Arc::new(TentFamily::new()));
        reg
    }

    /// Registers (or replaces) a family under its own name.
    pub fn register(&mut self, family: Arc<dyn MapFamily>) {
        self.entries.insert(family.name().to_string(), family);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn MapFamily>> {
        self.entries.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(|s| s.as_str()).collect()
    }
}
