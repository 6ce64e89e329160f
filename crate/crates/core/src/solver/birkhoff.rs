//! Ergodic-average cross-check: long-orbit time averages against space
//! averages over the computed invariant density.
//!
//! Orbits are seeded deterministically (SplitMix64, one stream per orbit),
//! burned in, and averaged with compensated summation; orbit means are then
//! combined with a pairwise sum so the result is independent of thread
//! scheduling.

use crate::error::SolverError;
use crate::grid::{GridDensity, Quadrature};
use crate::map::MapFamily;
use crate::quad::pairwise_sum;
use crate::solver::rng::SplitMix64;
use rayon::prelude::*;

const BURN_IN: usize = 1000;
const MIN_ORBIT_LEN: usize = 100_000;
/// Internal solve used when no density is supplied.
const DENSITY_GRID: usize = 2048;
const DENSITY_TOL: f64 = 1e-10;

/// Observable averaged along orbits and against the density.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    /// Constant 1; both averages are 1 by construction, so the gap isolates
    /// normalization error.
    Unit,
    /// Identity `x ↦ x`.
    Position,
}

impl Observable {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Observable::Unit => 1.0,
            Observable::Position => x,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Observable::Unit => "one",
            Observable::Position => "x",
        }
    }
}

/// Time average, space average, and their gap.
#[derive(Clone, Copy, Debug)]
pub struct BirkhoffCheck {
    pub time_avg: f64,
    pub space_avg: f64,
    pub gap: f64,
}

/// Runs the ergodic check, solving for the invariant density internally.
pub fn birkhoff_check(
    family: &dyn MapFamily,
    eps: f64,
    observable: Observable,
    orbit_len: usize,
    n_orbits: usize,
    seed: u64,
) -> Result<BirkhoffCheck, SolverError> {
    let h = crate::solver::invariant_density(family, eps, DENSITY_GRID, DENSITY_TOL)?;
    birkhoff_check_with_density(family, eps, observable, orbit_len, n_orbits, seed, &h)
}

/// Runs the ergodic check against a caller-supplied invariant density.
pub fn birkhoff_check_with_density(
    family: &dyn MapFamily,
    eps: f64,
    observable: Observable,
    orbit_len: usize,
    n_orbits: usize,
    seed: u64,
    density: &GridDensity,
) -> Result<BirkhoffCheck, SolverError> {
    if orbit_len < MIN_ORBIT_LEN {
        return Err(SolverError::InvalidParameter {
            name: "orbit_len",
            value: orbit_len.to_string(),
            requirement: "at least 100000 steps",
        });
    }
    if n_orbits == 0 {
        return Err(SolverError::InvalidParameter {
            name: "n_orbits",
            value: "0".to_string(),
            requirement: "at least one orbit",
        });
    }
    crate::map::check_eps(family, eps)?;

    let means: Vec<f64> = (0..n_orbits)
        .into_par_iter()
        .map(|k| orbit_mean(family, eps, observable, orbit_len, seed.wrapping_add(k as u64)))
        .collect();
    let time_avg = pairwise_sum(&means) / n_orbits as f64;

    let quad = Quadrature::uniform_refined(density.cells(), family.turning_image(eps), 0.05);
    let space_avg = quad.integrate(|x| observable.eval(x) * density.eval(x));

    Ok(BirkhoffCheck {
        time_avg,
        space_avg,
        gap: (time_avg - space_avg).abs(),
    })
}

fn orbit_mean(
    family: &dyn MapFamily,
    eps: f64,
    observable: Observable,
    orbit_len: usize,
    stream_seed: u64,
) -> f64 {
    let c = family.turning_point();
    let mut rng = SplitMix64::new(stream_seed);
    // Start well inside (0, 1): the endpoints are fixed or pre-fixed points
    // and would trap the orbit.
    let mut x = 0.05 + 0.9 * rng.next_unit();
    let step = |x: f64| -> f64 {
        // An exact hit on the turning point is nudged off by one guard
        // width so the orbit stays in the two-branch region.
        let x = if x == c { c - 1e-15 } else { x };
        family.value(x, eps).clamp(0.0, 1.0)
    };
    for _ in 0..BURN_IN {
        x = step(x);
    }
    // Kahan-compensated accumulation: orbit sums run to 1e7 terms and a
    // naive sum would lose the low bits the certificate compares.
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for _ in 0..orbit_len {
        let term = observable.eval(x) - carry;
        let tentative = sum + term;
        carry = (tentative - sum) - term;
        sum = tentative;
        x = step(x);
    }
    sum / orbit_len as f64
}
