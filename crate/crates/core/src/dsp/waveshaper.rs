//! Memoryless arctan saturation.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2};

use crate::error::{Error, Result};

pub fn waveshape_sample(x: f64, g_distort: f64) -> f64 {
    FRAC_2_PI * (g_distort * FRAC_PI_2 * x).atan()
}

/// `y = (2/π)·atan(g·(π/2)·x)`; output magnitude stays below 1.
pub fn waveshape(x: &[f64], g_distort: f64) -> Result<Vec<f64>> {
    if !(g_distort > 0.0) || !g_distort.is_finite() {
        return Err(Error::param(
            "g_distort",
            format!("must be > 0, got {g_distort}"),
        ));
    }
    Ok(x.iter().map(|&v| waveshape_sample(v, g_distort)).collect())
}
