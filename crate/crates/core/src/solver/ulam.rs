//! Ulam histogram oracle: a discretization of the transfer operator that is
//! independent of the collocation scheme.
//!
//! The transition matrix is built from exact interval algebra. Bin `i` maps
//! under branch `b` to the interval between the branch images of its edges;
//! running the construction backwards, the preimage of bin `j` under branch
//! `b` is the interval between consecutive branch preimages of the bin
//! edges. `P[i][j]` is the fraction of bin `i` covered by those preimage
//! intervals, so each row telescopes to exactly 1 for bins inside the
//! domain. A Monte Carlo fallback re-derives any row whose telescoped sum
//! drifts past 1e-12; for the built-in families it never fires.

use crate::error::SolverError;
use crate::grid::{GridDensity, InterpOrder};
use crate::map::{Branch, MapFamily};
use crate::quad::pairwise_sum;

const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-13;
const STATIONARY_MAX_ITER: usize = 200_000;
const START_GAP_TOL: f64 = 1e-8;

/// Stationary histogram density with build diagnostics.
#[derive(Clone, Debug)]
pub struct UlamSolve {
    /// Node-averaged stationary density (linear interpolation).
    pub density: GridDensity,
    /// Largest deviation of a telescoped row sum from 1.
    pub row_sum_max_dev: f64,
    /// Rows rebuilt by the Monte Carlo fallback.
    pub mc_rows: usize,
    /// Power-method iterations for the stationary vector.
    pub iterations: usize,
}

/// Stationary density of the Ulam transition matrix.
pub fn ulam_oracle(
    family: &dyn MapFamily,
    eps: f64,
    bins: usize,
    mc_per_bin: usize,
) -> Result<GridDensity, SolverError> {
    ulam_oracle_with(family, eps, bins, mc_per_bin).map(|solve| solve.density)
}

/// Full Ulam solve with row-sum and uniqueness diagnostics.
///
/// The stationary vector is computed twice, from a uniform start and from a
/// ramp start; a disagreement beyond 1e-8 in L¹ is reported as
/// [`SolverError::NotUnique`].
pub fn ulam_oracle_with(
    family: &dyn MapFamily,
    eps: f64,
    bins: usize,
    mc_per_bin: usize,
) -> Result<UlamSolve, SolverError> {
    if bins < 256 {
        return Err(SolverError::InvalidParameter {
            name: "bins",
            value: bins.to_string(),
            requirement: "at least 256 bins",
        });
    }
    if mc_per_bin == 0 {
        return Err(SolverError::InvalidParameter {
            name: "mc_per_bin",
            value: "0".to_string(),
            requirement: "at least 1 sample per bin",
        });
    }
    crate::map::check_eps(family, eps)?;

    let c = family.turning_point();
    let bound = family.turning_image(eps);
    let width = 1.0 / bins as f64;

    // Branch preimages of the bin edges. Edges above the image bound pull
    // back to the turning point: the preimage interval collapses and the
    // corresponding bins receive no mass.
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); bins];
    for branch in Branch::BOTH {
        let mut cuts = Vec::with_capacity(bins + 1);
        for k in 0..=bins {
            let x = k as f64 * width;
            if x >= bound {
                cuts.push(c);
            } else {
                cuts.push(family.branch_inverse(branch, x, eps)?.y);
            }
        }
        for j in 0..bins {
            let (lo, hi) = if cuts[j] <= cuts[j + 1] {
                (cuts[j], cuts[j + 1])
            } else {
                (cuts[j + 1], cuts[j])
            };
            if hi <= lo {
                continue;
            }
            let first = ((lo / width).floor() as usize).min(bins - 1);
            let last = ((hi / width).floor() as usize).min(bins - 1);
            #[allow(clippy::needless_range_loop)]
            for i in first..=last {
                let cell_lo = i as f64 * width;
                let cell_hi = (i + 1) as f64 * width;
                let overlap = hi.min(cell_hi) - lo.max(cell_lo);
                if overlap > 0.0 {
                    rows[i].push((j, overlap / width));
                }
            }
        }
    }

    let mut row_sum_max_dev = 0.0f64;
    let mut mc_rows = 0usize;
    for (i, row) in rows.iter_mut().enumerate() {
        let parts: Vec<f64> = row.iter().map(|&(_, p)| p).collect();
        let dev = (pairwise_sum(&parts) - 1.0).abs();
        row_sum_max_dev = row_sum_max_dev.max(dev);
        if dev > ROW_SUM_TOL {
            *row = mc_row(family, eps, bins, i, mc_per_bin);
            mc_rows += 1;
        }
    }

    let uniform = vec![1.0 / bins as f64; bins];
    let ramp: Vec<f64> = {
        let raw: Vec<f64> = (0..bins).map(|i| 1.0 + i as f64 / bins as f64).collect();
        let total = pairwise_sum(&raw);
        raw.into_iter().map(|v| v / total).collect()
    };
    let (pi_a, it_a) = stationary(&rows, uniform)?;
    let (pi_b, _) = stationary(&rows, ramp)?;
    let gap: f64 = pi_a
        .iter()
        .zip(&pi_b)
        .map(|(a, b)| (a - b).abs())
        .sum();
    if gap > START_GAP_TOL {
        return Err(SolverError::NotUnique { gap });
    }

    // Node values average the two adjacent bin densities; the result is
    // renormalized so the linear interpolant integrates to exactly 1.
    let mut nodes = Vec::with_capacity(bins + 1);
    nodes.push(pi_a[0] / width);
    for k in 1..bins {
        nodes.push((pi_a[k - 1] + pi_a[k]) / (2.0 * width));
    }
    nodes.push(pi_a[bins - 1] / width);
    let mut density = GridDensity::from_values(nodes, InterpOrder::Linear);
    let mass = density.integral();
    if !(mass > 0.0) {
        return Err(SolverError::NonConvergence {
            what: "Ulam stationary vector (mass collapse)",
            residual: mass,
            iterations: it_a,
        });
    }
    density.scale(1.0 / mass);

    Ok(UlamSolve {
        density,
        row_sum_max_dev,
        mc_rows,
        iterations: it_a,
    })
}

/// Monte Carlo fallback for a single transition row, seeded by the row
/// index so rebuilt rows are reproducible.
fn mc_row(
    family: &dyn MapFamily,
    eps: f64,
    bins: usize,
    i: usize,
    mc_per_bin: usize,
) -> Vec<(usize, f64)> {
    let width = 1.0 / bins as f64;
    let mut rng = crate::solver::rng::SplitMix64::new(i as u64);
    let mut counts = vec![0usize; bins];
    for _ in 0..mc_per_bin {
        let x = (i as f64 + rng.next_unit()) * width;
        let y = family.value(x, eps).clamp(0.0, 1.0);
        let j = ((y / width).floor() as usize).min(bins - 1);
        counts[j] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .filter(|&(_, n)| n > 0)
        .map(|(j, n)| (j, n as f64 / mc_per_bin as f64))
        .collect()
}

/// Left power iteration `v ← vP` with per-step renormalization.
fn stationary(
    rows: &[Vec<(usize, f64)>],
    start: Vec<f64>,
) -> Result<(Vec<f64>, usize), SolverError> {
    let bins = rows.len();
    let mut v = start;
    for iteration in 1..=STATIONARY_MAX_ITER {
        let mut next = vec![0.0f64; bins];
        for (i, row) in rows.iter().enumerate() {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for &(j, p) in row {
                next[j] += vi * p;
            }
        }
        let total = pairwise_sum(&next);
        if !(total > 0.0) || !total.is_finite() {
            return Err(SolverError::NonConvergence {
                what: "Ulam stationary vector (mass collapse)",
                residual: total,
                iterations: iteration,
            });
        }
        for x in &mut next {
            *x /= total;
        }
        let step: f64 = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if step <= STATIONARY_TOL {
            return Ok((v, iteration));
        }
    }
    Err(SolverError::NonConvergence {
        what: "Ulam stationary vector",
        residual: f64::NAN,
        iterations: STATIONARY_MAX_ITER,
    })
}
