//! Linear-phase FIR equalizer designed by frequency sampling.
//!
//! The 1000 magnitude bins are read as a zero-phase spectrum of an odd
//! 1999-point DFT, inverse transformed, rotated so the peak sits at the
//! centre tap, and tapered with a symmetric Hann window.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::signal::{EqParams, EQ_BINS};

/// Impulse response length for a [`EQ_BINS`]-bin response.
pub const EQ_TAPS: usize = 2 * EQ_BINS - 1;

fn tap_window(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|m| 0.5 - 0.5 * (2.0 * PI * m as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Impulse response for any number of bins `B`; `2B − 1` taps, centre tap `B − 1`.
pub fn impulse_response_from(fr_mag: &[f64]) -> Vec<f64> {
    let bins = fr_mag.len();
    let n = 2 * bins - 1;
    let centre = bins - 1;
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    spec[0].re = fr_mag[0];
    for k in 1..bins {
        spec[k].re = fr_mag[k];
        spec[n - k].re = fr_mag[k];
    }
    fft::inverse_plan(n).process(&mut spec);
    let window = tap_window(n);
    (0..n)
        .map(|m| spec[(m + n - centre) % n].re / n as f64 * window[m])
        .collect()
}

/// Transpose of [`impulse_response_from`] (the design is linear in the bins).
pub fn impulse_response_adjoint(grad_taps: &[f64]) -> Vec<f64> {
    let n = grad_taps.len();
    let bins = n.div_ceil(2);
    let centre = bins - 1;
    let window = tap_window(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (m, (&g, &w)) in grad_taps.iter().zip(&window).enumerate() {
        buf[(m + n - centre) % n].re = g * w;
    }
    fft::forward_plan(n).process(&mut buf);
    (0..bins)
        .map(|k| {
            let mult = if k == 0 { 1.0 } else { 2.0 };
            mult * buf[k].re / n as f64
        })
        .collect()
}

pub fn impulse_response(eq: &EqParams) -> Vec<f64> {
    impulse_response_from(eq.fr_mag())
}

/// Same-length convolution aligned on the kernel's centre tap.
pub fn convolve_same(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let centre = (kernel.len() - 1) / 2;
    let full = fft::convolve_full(x, kernel);
    full[centre..centre + x.len()].to_vec()
}

/// Gradients of [`convolve_same`] with respect to the signal and the kernel.
pub fn convolve_same_adjoint(x: &[f64], kernel: &[f64], grad_out: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let centre = (kernel.len() - 1) / 2;
    let len = x.len();
    let rev_k: Vec<f64> = kernel.iter().rev().copied().collect();
    let gx_full = fft::convolve_full(grad_out, &rev_k);
    let grad_x = gx_full[centre..centre + len].to_vec();
    let rev_x: Vec<f64> = x.iter().rev().copied().collect();
    let gk_full = fft::convolve_full(grad_out, &rev_x);
    let grad_k = (0..kernel.len())
        .map(|m| {
            let p = m as isize - centre as isize + len as isize - 1;
            if p >= 0 && (p as usize) < gk_full.len() {
                gk_full[p as usize]
            } else {
                0.0
            }
        })
        .collect();
    (grad_x, grad_k)
}

pub fn equalize(x: &[f64], eq: &EqParams) -> Result<Vec<f64>> {
    if eq.fr_mag().len() != EQ_BINS {
        return Err(Error::LengthMismatch {
            what: "equalizer bins",
            expected: EQ_BINS,
            actual: eq.fr_mag().len(),
        });
    }
    if x.is_empty() {
        return Ok(Vec::new());
    }
    Ok(convolve_same(x, &impulse_response(eq)))
}
