//! The simulator as a differentiable function of its free parameters.
//!
//! [`simulate_var`] records the whole two-chain forward pass on a tape, using
//! primitive ops for the pointwise arithmetic and adjoint-carrying nodes for
//! the resamplers, the smoother, the FIR design, the convolutions and the
//! STFT. [`probe`] evaluates the same objective on plain reals through the
//! `dsp` functions and fingerprints every branch decision; the two routes are
//! compared by the finite-difference check.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, LN_10};
use std::hash::Hasher;

use crate::autodiff::{value_and_grad_on, Probe, Tape, Var};
use crate::dsp::drc::{self, DownsampleGrid, UpsampleGrid};
use crate::dsp::{eq, waveshaper};
use crate::error::{Error, Result};
use crate::reparam::{self, FreeParams};
use crate::signal::{self, ChannelParams, GainConvention, DB_FLOOR};
use crate::spectral::{self, SpectrogramSet, LOG_EPS};

/// Non-trainable settings of one forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub lambda: f64,
    pub ds_factor: usize,
    pub convention: GainConvention,
}

impl ModelConfig {
    pub fn of(p: &ChannelParams) -> Self {
        Self {
            lambda: p.lambda,
            ds_factor: p.ds_factor,
            convention: p.gain_convention,
        }
    }

    pub fn template(&self) -> ChannelParams {
        let mut p = ChannelParams::neutral(self.ds_factor);
        p.lambda = self.lambda;
        p.gain_convention = self.convention;
        p
    }
}

/// One training example: the clean input, the white noise fed to the noise
/// chain, and the target's magnitude spectrograms.
#[derive(Debug, Clone)]
pub struct Example {
    pub clean: Vec<f64>,
    pub noise: Vec<f64>,
    pub target: SpectrogramSet,
}

impl Example {
    pub fn new(clean: Vec<f64>, noise: Vec<f64>, target: &[f64]) -> Result<Self> {
        if clean.is_empty() {
            return Err(Error::Empty("clean input"));
        }
        for (what, len) in [("noise", noise.len()), ("target", target.len())] {
            if len != clean.len() {
                return Err(Error::LengthMismatch {
                    what,
                    expected: clean.len(),
                    actual: len,
                });
            }
        }
        Ok(Self {
            clean,
            noise,
            target: SpectrogramSet::new(target)?,
        })
    }
}

fn downsample_var<'t>(x: Var<'t>, grid: DownsampleGrid) -> Var<'t> {
    let y = grid.apply(&x.value());
    x.tape().custom(
        "downsample",
        y,
        &[x],
        Box::new(move |g, _| vec![grid.adjoint(g)]),
    )
}

fn upsample_var<'t>(x: Var<'t>, grid: UpsampleGrid) -> Var<'t> {
    let y = grid.apply(&x.value());
    x.tape()
        .custom("upsample", y, &[x], Box::new(move |g, _| vec![grid.adjoint(g)]))
}

fn smooth_var<'t>(g_d: Var<'t>, attack: Var<'t>, release: Var<'t>) -> Result<Var<'t>> {
    let input = g_d.value();
    let (aa, ar) = (attack.scalar_value(), release.scalar_value());
    let fwd = drc::smooth_values(&input, aa, ar)?;
    let out = fwd.values.clone();
    Ok(g_d.tape().custom(
        "smooth",
        out,
        &[g_d, attack, release],
        Box::new(move |g, _| {
            let (gx, ga, gr) = drc::smooth_adjoint(&input, &fwd, aa, ar, g);
            vec![gx, vec![ga], vec![gr]]
        }),
    ))
}

fn fir_design_var(mags: Var<'_>) -> Var<'_> {
    let taps = eq::impulse_response_from(&mags.value());
    mags.tape().custom(
        "fir_design",
        taps,
        &[mags],
        Box::new(|g, _| vec![eq::impulse_response_adjoint(g)]),
    )
}

fn convolve_var<'t>(x: Var<'t>, kernel: Var<'t>) -> Var<'t> {
    let xs = x.value();
    let ks = kernel.value();
    let y = eq::convolve_same(&xs, &ks);
    x.tape().custom(
        "convolve",
        y,
        &[x, kernel],
        Box::new(move |g, needs| {
            let (gx, gk) = eq::convolve_same_adjoint(&xs, &ks, g);
            vec![
                if needs[0] { gx } else { Vec::new() },
                if needs[1] { gk } else { Vec::new() },
            ]
        }),
    )
}

fn stft_mag_var(x: Var<'_>, fft_size: usize) -> Result<Var<'_>> {
    let xs = x.value();
    let spec = spectral::stft(&xs, fft_size)?;
    let mags = spec.magnitude();
    let len = xs.len();
    Ok(x.tape().custom(
        "stft_mag",
        mags,
        &[x],
        Box::new(move |g, _| vec![spectral::stft_mag_adjoint(&spec, len, g)]),
    ))
}

/// Records `s_out + λ·n_out` on the tape.
pub fn simulate_var<'t>(
    free: Var<'t>,
    clean: &[f64],
    noise: &[f64],
    cfg: &ModelConfig,
) -> Result<Var<'t>> {
    let tape = free.tape();
    let len = clean.len();
    if len == 0 {
        return Err(Error::Empty("clean input"));
    }

    let g_distort = free.index(reparam::G_DISTORT).exp();
    let x = tape.constant(clean.to_vec());
    let shaped = (x * g_distort).scale(FRAC_PI_2).atan().scale(FRAC_2_PI);

    let x_db = shaped.abs().max_scalar(DB_FLOOR).log10().scale(20.0);
    let threshold = free.index(reparam::THRESHOLD);
    let ratio = free.index(reparam::RATIO).softplus() + 1.0;
    let slope = match cfg.convention {
        GainConvention::Reduction => ratio.recip() - 1.0,
        GainConvention::Literal => ratio.recip(),
    };
    let gain = (x_db - threshold).max_scalar(0.0) * slope;
    let down = DownsampleGrid::new(len, cfg.ds_factor)?;
    let up = UpsampleGrid::new(down.out_len(), cfg.ds_factor, len)?;
    let gain = downsample_var(gain, down);
    let gain = smooth_var(
        gain,
        free.index(reparam::ALPHA_ATTACK).sigmoid(),
        free.index(reparam::ALPHA_RELEASE).sigmoid(),
    )?;
    let gain = upsample_var(gain, up);
    let y_db = x_db + gain + free.index(reparam::MAKEUP);
    let signs = signal::signs(&shaped.value());
    let compressed = y_db.scale(LN_10 / 20.0).exp().mul_const(signs);

    let audio_taps = fir_design_var(
        free.slice(reparam::EQ_AUDIO.start, reparam::EQ_AUDIO.len())
            .softplus(),
    );
    let audio = convolve_var(compressed, audio_taps);

    let noise_taps = fir_design_var(
        free.slice(reparam::EQ_NOISE.start, reparam::EQ_NOISE.len())
            .softplus(),
    );
    let white = tape.constant(noise.to_vec());
    let noise_out = convolve_var(white, noise_taps) * free.index(reparam::NOISE_AMP).exp();
    Ok(audio + noise_out.scale(cfg.lambda))
}

/// Records the multi-scale spectral loss against fixed target spectrograms.
pub fn loss_var<'t>(sim: Var<'t>, target: &SpectrogramSet) -> Result<Var<'t>> {
    let tape = sim.tape();
    let mut total: Option<Var<'t>> = None;
    for (n, mags) in &target.scales {
        let a = stft_mag_var(sim, *n)?;
        if a.len() != mags.len() {
            return Err(Error::LengthMismatch {
                what: "target spectrogram",
                expected: a.len(),
                actual: mags.len(),
            });
        }
        let b = tape.constant(mags.clone());
        let log_b = tape.constant(mags.iter().map(|m| (m + LOG_EPS).ln()).collect());
        let lin = (a - b).abs().mean();
        let log = ((a + LOG_EPS).ln() - log_b).abs().mean();
        let term = lin + log;
        total = Some(match total {
            Some(t) => t + term,
            None => term,
        });
    }
    total.ok_or(Error::Empty("target spectrogram set"))
}

/// Loss and gradient with respect to the free parameters.
pub fn loss_and_grad(free: &FreeParams, ex: &Example, cfg: &ModelConfig) -> Result<(f64, Vec<f64>)> {
    loss_and_grad_on(&Tape::new(), free, ex, cfg)
}

/// As [`loss_and_grad`] on a caller-supplied (possibly fault-injected) tape.
pub fn loss_and_grad_on(
    tape: &Tape,
    free: &FreeParams,
    ex: &Example,
    cfg: &ModelConfig,
) -> Result<(f64, Vec<f64>)> {
    value_and_grad_on(tape, free.as_slice(), |_, u| {
        let sim = simulate_var(u, &ex.clean, &ex.noise, cfg)?;
        loss_var(sim, &ex.target)
    })
}

/// Plain forward pass that also fingerprints its branch decisions.
pub fn simulate_traced(
    p: &ChannelParams,
    clean: &[f64],
    noise: &[f64],
    kinks: &mut impl Hasher,
) -> Result<Vec<f64>> {
    let shaped = waveshaper::waveshape(clean, p.g_distort)?;
    for &v in &shaped {
        kinks.write_u8((v.abs() > DB_FLOOR) as u8 | ((v > 0.0) as u8) << 1);
    }
    let trace = drc::drc_trace(&shaped, &p.drc, p.ds_factor, p.gain_convention)?;
    for &x in &trace.x_db {
        kinks.write_u8((x > p.drc.threshold_db) as u8);
    }
    for &a in &trace.smoothed.attack {
        kinks.write_u8(a as u8);
    }
    let audio = eq::equalize(&trace.output, &p.eq_audio)?;
    let shaped_noise = eq::equalize(noise, &p.eq_noise)?;
    Ok(audio
        .iter()
        .zip(&shaped_noise)
        .map(|(s, n)| s + p.lambda * p.noise_amplitude * n)
        .collect())
}

fn loss_traced(sim: &[f64], target: &SpectrogramSet, kinks: &mut impl Hasher) -> Result<f64> {
    let mut total = 0.0;
    for (n, b) in &target.scales {
        let a = spectral::stft_mag(sim, *n)?;
        for (x, y) in a.iter().zip(b) {
            kinks.write_u8(if x > y { 1 } else if x < y { 2 } else { 3 });
        }
        total += spectral::scale_loss(&a, b);
    }
    Ok(total)
}

/// Loss on plain reals with a branch fingerprint, for the finite-difference oracle.
pub fn probe(free: &[f64], ex: &Example, cfg: &ModelConfig) -> Result<Probe> {
    let p = FreeParams::from_vec(free.to_vec())?.to_params(&cfg.template())?;
    let mut h = DefaultHasher::new();
    let sim = simulate_traced(&p, &ex.clean, &ex.noise, &mut h)?;
    let value = loss_traced(&sim, &ex.target, &mut h)?;
    Ok(Probe {
        value,
        kinks: h.finish(),
    })
}

/// Plain loss without the fingerprint.
pub fn loss(p: &ChannelParams, ex: &Example) -> Result<f64> {
    let mut h = DefaultHasher::new();
    let sim = simulate_traced(p, &ex.clean, &ex.noise, &mut h)?;
    loss_traced(&sim, &ex.target, &mut h)
}
