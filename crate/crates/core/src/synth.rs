//! Synthetic speech-like material and a reference channel for self-recovery runs.
//!
//! Utterances alternate voiced stretches (a gliding glottal pulse train shaped
//! by three formant resonators) with short fricative noise bursts, separated
//! by pauses. A faint hiss runs under everything, well below the activity
//! threshold, so that spectral valleys are not empty.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::{forward, NoiseSource};
use crate::error::{Error, Result};
use crate::signal::{AudioBuffer, ChannelParams, DrcParams, EqParams};

/// Two-pole resonator at `freq` Hz with bandwidth `bw` Hz.
struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bw: f64, rate: f64) -> Self {
        let r = (-PI * bw / rate).exp();
        let theta = 2.0 * PI * freq / rate;
        Self {
            a1: 2.0 * r * theta.cos(),
            a2: -r * r,
            gain: 1.0 - r,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn tick(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Aspiration noise mixed into voiced segments.
const BREATH: f64 = 0.1;
/// Background hiss under everything, relative to the 0.8 peak.
const HISS: f64 = 3e-4;

const VOWELS: [[f64; 3]; 5] = [
    [730.0, 1090.0, 2440.0],
    [530.0, 1840.0, 2480.0],
    [270.0, 2290.0, 3010.0],
    [570.0, 840.0, 2410.0],
    [300.0, 870.0, 2240.0],
];

fn voiced(len: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    let formants = VOWELS[rng.gen_range(0..VOWELS.len())];
    let mut res: Vec<Resonator> = formants
        .iter()
        .map(|&f| Resonator::new(f * rng.gen_range(0.9..1.1), 80.0 + 0.05 * f, rate))
        .collect();
    let f0_start = rng.gen_range(90.0..240.0);
    let f0_end = f0_start * rng.gen_range(0.8..1.25);
    let mut phase = 0.0;
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let frac = i as f64 / len as f64;
        let f0 = f0_start + (f0_end - f0_start) * frac;
        phase += f0 / rate;
        // band-limited-ish glottal pulse: sum of decaying harmonics
        let mut src = 0.0;
        let mut k = 1.0;
        while k * f0 < 0.45 * rate {
            src += (2.0 * PI * k * phase).sin() / k.powf(0.8);
            k += 1.0;
        }
        let y: f64 = res.iter_mut().map(|r| r.tick(src)).sum();
        out.push(y + BREATH * rng.gen_range(-1.0..1.0));
    }
    out
}

fn fricative(len: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut res = Resonator::new(rng.gen_range(2500.0..0.4 * rate), 1500.0, rate);
    (0..len).map(|_| 6.0 * res.tick(rng.gen_range(-1.0..1.0))).collect()
}

fn envelope(len: usize, ramp: usize) -> impl Fn(usize) -> f64 {
    let ramp = ramp.min(len / 2).max(1);
    move |i| {
        let edge = i.min(len - 1 - i);
        if edge >= ramp {
            1.0
        } else {
            0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
        }
    }
}

/// Speech-like clean signal of `seconds` at `sample_rate`, peak-normalized to 0.8.
pub fn speech_like(seconds: f64, sample_rate: u32, seed: u64) -> Result<AudioBuffer> {
    if !(seconds > 0.0) {
        return Err(Error::param("seconds", format!("must be > 0, got {seconds}")));
    }
    let rate = sample_rate as f64;
    let total = (seconds * rate).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(total);
    while out.len() < total {
        let utterance_end = out.len() + (rng.gen_range(0.6..2.0) * rate) as usize;
        while out.len() < utterance_end.min(total) {
            let (seg, level) = if rng.gen_bool(0.8) {
                let n = (rng.gen_range(0.08..0.3) * rate) as usize;
                (voiced(n, rate, &mut rng), rng.gen_range(0.3..1.0))
            } else {
                let n = (rng.gen_range(0.04..0.12) * rate) as usize;
                (fricative(n, rate, &mut rng), rng.gen_range(0.1..0.4))
            };
            let env = envelope(seg.len(), (0.01 * rate) as usize);
            out.extend(seg.iter().enumerate().map(|(i, v)| level * env(i) * v));
        }
        let pause = (rng.gen_range(0.06..0.25) * rate) as usize;
        out.extend(std::iter::repeat_n(0.0, pause));
    }
    out.truncate(total);
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.8 / peak);
    }
    for v in &mut out {
        *v += HISS * rng.gen_range(-1.0..1.0);
    }
    AudioBuffer::new(out, sample_rate)
}

/// Reference channel: hard waveshaping, 8:1 compression, a telephone-like
/// bandpass on the audio path and pink-shaped noise.
pub fn reference_params(ds_factor: usize) -> Result<ChannelParams> {
    let nyquist = 8000.0;
    let (lo, hi) = (300.0 / nyquist, 3400.0 / nyquist);
    let stop = 0.1;
    let bandpass = EqParams::from_fn(|f| {
        let rise = smoothstep((f - 0.5 * lo) / (0.5 * lo));
        let fall = smoothstep((hi + 0.05 - f) / 0.05);
        stop + (1.2 - stop) * rise * fall
    })?;
    let pink = EqParams::from_fn(|f| 1.0 / (f.max(0.01) / 0.01).sqrt())?;
    ChannelParams::new(
        4.0,
        DrcParams::new(-24.0, 8.0, 0.6, 0.9, 4.0)?,
        bandpass,
        pink,
        0.002,
        1.0,
        ds_factor,
    )
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Aligned clean/noisy streams produced chunk by chunk, each chunk with
/// its own noise seed derived from `seed`.
pub fn parallel_corpus(
    clean: &AudioBuffer,
    params: &ChannelParams,
    chunk_len: usize,
    seed: u64,
) -> Result<AudioBuffer> {
    if chunk_len == 0 {
        return Err(Error::param("chunk_len", "must be >= 1"));
    }
    let mut noisy = Vec::with_capacity(clean.len());
    for (i, chunk) in clean.samples().chunks(chunk_len).enumerate() {
        let buf = AudioBuffer::new(chunk.to_vec(), clean.sample_rate())?;
        let src = NoiseSource::new(chunk_seed(seed, i as u64), chunk.len());
        noisy.extend_from_slice(forward(&buf, &src, params)?.samples());
    }
    AudioBuffer::new(noisy, clean.sample_rate())
}

/// Seed of chunk `index` under a base seed (splitmix64 finalizer).
pub fn chunk_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
