//! STFT magnitudes and the multi-scale spectral loss.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::signal::AudioBuffer;

/// Analysis sizes of the loss, coarsest first.
pub const FFT_SIZES: [usize; 6] = [2048, 1024, 512, 256, 128, 64];

/// Offset inside the log-magnitude term.
pub const LOG_EPS: f64 = 1e-6;

pub(crate) fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn check_size(fft_size: usize) -> Result<()> {
    if FFT_SIZES.contains(&fft_size) {
        Ok(())
    } else {
        Err(Error::param(
            "fft_size",
            format!("{fft_size} is not one of {FFT_SIZES:?}"),
        ))
    }
}

/// Complex STFT with centred zero padding, Hann window and hop `n/4`.
#[derive(Debug, Clone)]
pub struct Stft {
    pub fft_size: usize,
    pub frames: usize,
    pub bins: usize,
    /// Row-major `frames × bins`.
    pub values: Vec<Complex64>,
}

impl Stft {
    pub fn hop(&self) -> usize {
        self.fft_size / 4
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.norm()).collect()
    }
}

pub fn frame_count(len: usize, fft_size: usize) -> usize {
    1 + len / (fft_size / 4)
}

pub fn stft(x: &[f64], fft_size: usize) -> Result<Stft> {
    check_size(fft_size)?;
    if x.is_empty() {
        return Err(Error::Empty("STFT input"));
    }
    let n = fft_size;
    let hop = n / 4;
    let pad = n / 2;
    let frames = frame_count(x.len(), n);
    let bins = n / 2 + 1;
    let window = periodic_hann(n);
    let plan = fft::forward_plan(n);
    let mut values = Vec::with_capacity(frames * bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for f in 0..frames {
        let start = (f * hop) as isize - pad as isize;
        for (t, slot) in buf.iter_mut().enumerate() {
            let idx = start + t as isize;
            let v = if idx >= 0 && (idx as usize) < x.len() {
                x[idx as usize]
            } else {
                0.0
            };
            *slot = Complex64::new(v * window[t], 0.0);
        }
        plan.process(&mut buf);
        values.extend_from_slice(&buf[..bins]);
    }
    Ok(Stft {
        fft_size: n,
        frames,
        bins,
        values,
    })
}

/// Magnitude matrix (row-major `frames × bins`).
pub fn stft_mag(x: &[f64], fft_size: usize) -> Result<Vec<f64>> {
    Ok(stft(x, fft_size)?.magnitude())
}

/// Gradient of `Σ grad_mag ⊙ |STFT(x)|` with respect to `x`.
///
/// Bins with zero magnitude contribute nothing (subgradient 0).
pub fn stft_mag_adjoint(spec: &Stft, len: usize, grad_mag: &[f64]) -> Vec<f64> {
    let n = spec.fft_size;
    let hop = spec.hop();
    let pad = n / 2;
    let window = periodic_hann(n);
    let plan = fft::inverse_plan(n);
    let mut out = vec![0.0; len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for f in 0..spec.frames {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        let row = &spec.values[f * spec.bins..(f + 1) * spec.bins];
        let grow = &grad_mag[f * spec.bins..(f + 1) * spec.bins];
        for k in 0..spec.bins {
            let m = row[k].norm();
            if m > 0.0 && grow[k] != 0.0 {
                buf[k] = row[k] * (grow[k] / m);
            }
        }
        plan.process(&mut buf);
        let start = (f * hop) as isize - pad as isize;
        for t in 0..n {
            let idx = start + t as isize;
            if idx >= 0 && (idx as usize) < len {
                out[idx as usize] += window[t] * buf[t].re;
            }
        }
    }
    out
}

/// Magnitude spectrograms of one signal at every loss scale.
#[derive(Debug, Clone)]
pub struct SpectrogramSet {
    pub scales: Vec<(usize, Vec<f64>)>,
}

impl SpectrogramSet {
    pub fn new(x: &[f64]) -> Result<Self> {
        let scales = FFT_SIZES
            .iter()
            .map(|&n| Ok((n, stft_mag(x, n)?)))
            .collect::<Result<_>>()?;
        Ok(Self { scales })
    }
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.carry
    }
}

/// Linear and log L1 terms for one pair of magnitude matrices.
pub fn scale_loss(a: &[f64], b: &[f64]) -> f64 {
    let count = a.len() as f64;
    let mut acc = CompensatedSum::default();
    for (&x, &y) in a.iter().zip(b) {
        acc.add((x - y).abs());
        acc.add(((x + LOG_EPS).ln() - (y + LOG_EPS).ln()).abs());
    }
    acc.total() / count
}

pub fn mssl_sets(a: &SpectrogramSet, b: &SpectrogramSet) -> f64 {
    a.scales
        .iter()
        .zip(&b.scales)
        .map(|((_, x), (_, y))| scale_loss(x, y))
        .sum()
}

pub fn mssl_samples(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what: "loss operands",
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(mssl_sets(&SpectrogramSet::new(a)?, &SpectrogramSet::new(b)?))
}

/// Sum over the six scales of mean |ΔA| plus mean |Δ log A|.
pub fn mssl(a: &AudioBuffer, b: &AudioBuffer) -> Result<f64> {
    if a.sample_rate() != b.sample_rate() {
        return Err(Error::RateMismatch(a.sample_rate(), b.sample_rate()));
    }
    mssl_samples(a.samples(), b.samples())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn buf(x: Vec<f64>) -> AudioBuffer {
        AudioBuffer::new(x, 16_000).unwrap()
    }

    #[test]
    fn frame_geometry() {
        for &n in &FFT_SIZES {
            let s = stft(&noise(16_000, 1), n).unwrap();
            assert_eq!(s.frames, 1 + 16_000 / (n / 4));
            assert_eq!(s.bins, n / 2 + 1);
            assert_eq!(s.values.len(), s.frames * s.bins);
        }
        let s = stft(&[0.5], 2048).unwrap();
        assert_eq!(s.frames, 1);
        assert!(stft(&[0.0; 10], 100).is_err());
    }

    #[test]
    fn silence_has_zero_magnitude() {
        for &n in &FFT_SIZES {
            assert!(stft_mag(&vec![0.0; 3000], n).unwrap().iter().all(|&m| m == 0.0));
        }
    }

    #[test]
    fn bin_centred_sinusoid_has_one_dominant_bin() {
        let n = 512;
        let k0 = 37;
        let x: Vec<f64> = (0..8192)
            .map(|t| (2.0 * PI * k0 as f64 * t as f64 / n as f64).sin())
            .collect();
        let s = stft(&x, n).unwrap();
        let mags = s.magnitude();
        // interior frames only; edge frames see the padding
        for f in 2..s.frames - 2 {
            let row = &mags[f * s.bins..(f + 1) * s.bins];
            let peak = row[k0];
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, k0);
            for (k, &m) in row.iter().enumerate() {
                // Hann main lobe spans ±1 bin
                if k.abs_diff(k0) > 1 {
                    assert!(20.0 * (peak / m.max(1e-300)).log10() >= 20.0, "bin {k}");
                }
            }
        }
    }

    #[test]
    fn parseval_with_window_overlap_constant() {
        // Zero edges keep every sample inside full frame coverage.
        for &n in &FFT_SIZES {
            let mut x = vec![0.0; 12_000];
            let body = noise(8000, 2);
            x[2000..10_000].copy_from_slice(&body);
            let s = stft(&x, n).unwrap();
            let mut spec_energy = 0.0;
            for f in 0..s.frames {
                for k in 0..s.bins {
                    let e = s.values[f * s.bins + k].norm_sqr();
                    let mult = if k == 0 || k == s.bins - 1 { 1.0 } else { 2.0 };
                    spec_energy += mult * e;
                }
            }
            let time_energy: f64 = x.iter().map(|v| v * v).sum();
            // Σ_f w²(t − f·hop) = 3/8 · n / hop = 1.5 for periodic Hann at hop n/4.
            let expected = n as f64 * 1.5 * time_energy;
            assert!((spec_energy / expected - 1.0).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn mssl_identity_and_phase_invariance() {
        let x = buf(noise(4000, 3));
        assert_eq!(mssl(&x, &x).unwrap(), 0.0);
        let neg = buf(x.samples().iter().map(|v| -v).collect());
        assert!(mssl(&x, &neg).unwrap() < 1e-12);
    }

    #[test]
    fn mssl_rejects_mismatch() {
        let a = buf(noise(100, 1));
        assert!(mssl(&a, &buf(noise(101, 1))).is_err());
        let b = AudioBuffer::new(noise(100, 1), 8000).unwrap();
        assert!(matches!(mssl(&a, &b), Err(Error::RateMismatch(16_000, 8000))));
    }

    #[test]
    fn mssl_grows_with_noise_gain() {
        let x = noise(8000, 4);
        let shape = noise(8000, 5);
        let at = |g: f64| {
            let y: Vec<f64> = x.iter().zip(&shape).map(|(a, b)| a + g * b).collect();
            mssl_samples(&x, &y).unwrap()
        };
        let (a, b, c) = (at(0.01), at(0.1), at(1.0));
        assert!(a < b && b < c, "{a} {b} {c}");
    }

    #[test]
    fn mssl_symmetric() {
        let a = noise(3000, 6);
        let b = noise(3000, 7);
        let ab = mssl_samples(&a, &b).unwrap();
        let ba = mssl_samples(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!(ab > 0.0);
    }

    #[test]
    fn magnitude_adjoint_matches_finite_difference() {
        let x = noise(700, 8);
        let w = noise(10_000, 9);
        for &n in &[256usize, 64] {
            let s = stft(&x, n).unwrap();
            let gm: Vec<f64> = w[..s.values.len()].to_vec();
            let g = stft_mag_adjoint(&s, x.len(), &gm);
            let f = |y: &[f64]| -> f64 {
                stft_mag(y, n).unwrap().iter().zip(&gm).map(|(a, b)| a * b).sum()
            };
            for &i in &[0usize, 5, 350, 699] {
                let h = 1e-6;
                let mut p = x.clone();
                p[i] += h;
                let mut m = x.clone();
                m[i] -= h;
                let fd = (f(&p) - f(&m)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6 * fd.abs().max(1.0), "n={n} i={i}: {fd} vs {}", g[i]);
            }
        }
    }
}
