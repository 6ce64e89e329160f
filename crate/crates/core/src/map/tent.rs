//! Bounded-slope tent map, used as a negative control for the assumption
//! audit: its branch derivatives stay at ±2 instead of diverging at the
//! turning point, so the cusp-exponent check must fail on it.

use super::{Branch, MapFamily};

pub struct TentFamily;

impl TentFamily {
    pub const NAME: &'static str = "tent";

    pub fn new() -> Self {
        TentFamily
    }
}

impl Default for TentFamily {
    fn default() -> Self {
        Self::new()
    }
}

impl MapFamily for TentFamily {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn turning_point(&self) -> f64 {
        0.5
    }

    /// The slopes are bounded, so the honest exponent is 0.
    fn cusp_exponent(&self) -> f64 {
        0.0
    }

    fn eps_max(&self) -> f64 {
        0.1
    }

    /// The family is constant in ε: both branches always reach 1.
    fn turning_image(&self, _eps: f64) -> f64 {
        1.0
    }

    fn value(&self, x: f64, _eps: f64) -> f64 {
        if x < 0.5 { 2.0 * x } else { 2.0 - 2.0 * x }
    }

    fn d1(&self, x: f64, _eps: f64) -> f64 {
        if x < 0.5 { 2.0 } else { -2.0 }
    }

    fn d2(&self, _x: f64, _eps: f64) -> f64 {
        0.0
    }

    fn d3(&self, _x: f64, _eps: f64) -> f64 {
        0.0
    }

    fn eps_deriv(&self, _x: f64, _eps: f64) -> f64 {
        0.0
    }

    fn eps_deriv_d1(&self, _x: f64, _eps: f64) -> f64 {
        0.0
    }

    fn value_off(&self, _branch: Branch, off: f64, _eps: f64) -> f64 {
        1.0 - 2.0 * off
    }

    fn d1_off(&self, branch: Branch, _off: f64, _eps: f64) -> f64 {
        match branch {
            Branch::Left => 2.0,
            Branch::Right => -2.0,
        }
    }
}
