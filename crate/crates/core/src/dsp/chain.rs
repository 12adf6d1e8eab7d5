//! The two-chain forward model: audio chain plus weighted noise chain.

use crate::dsp::{drc, eq, noise, waveshaper};
use crate::dsp::noise::NoiseSource;
use crate::error::{Error, Result};
use crate::signal::{AudioBuffer, ChannelParams};

/// Separate outputs of the two chains before mixing.
#[derive(Debug, Clone)]
pub struct ChainOutputs {
    pub audio: Vec<f64>,
    /// Noise chain output before the `lambda` weight.
    pub noise: Vec<f64>,
}

pub fn audio_chain(clean: &[f64], p: &ChannelParams) -> Result<Vec<f64>> {
    let shaped = waveshaper::waveshape(clean, p.g_distort)?;
    let compressed = drc::drc(&shaped, &p.drc, p.ds_factor, p.gain_convention)?;
    eq::equalize(&compressed, &p.eq_audio)
}

pub fn noise_chain(src: &NoiseSource, p: &ChannelParams) -> Result<Vec<f64>> {
    let white = noise::white_noise(src)?;
    let mut shaped = eq::equalize(&white, &p.eq_noise)?;
    for v in &mut shaped {
        *v *= p.noise_amplitude;
    }
    Ok(shaped)
}

pub fn chain_outputs(clean: &AudioBuffer, src: &NoiseSource, p: &ChannelParams) -> Result<ChainOutputs> {
    p.validate()?;
    if clean.is_empty() {
        return Err(Error::Empty("clean input"));
    }
    if src.length != clean.len() {
        return Err(Error::LengthMismatch {
            what: "noise source",
            expected: clean.len(),
            actual: src.length,
        });
    }
    Ok(ChainOutputs {
        audio: audio_chain(clean.samples(), p)?,
        noise: noise_chain(src, p)?,
    })
}

/// `s_out + lambda · n_out`, same length and rate as `clean`.
pub fn forward(clean: &AudioBuffer, src: &NoiseSource, p: &ChannelParams) -> Result<AudioBuffer> {
    let parts = chain_outputs(clean, src, p)?;
    let mixed = parts
        .audio
        .iter()
        .zip(&parts.noise)
        .map(|(s, n)| s + p.lambda * n)
        .collect();
    AudioBuffer::new(mixed, clean.sample_rate())
}
