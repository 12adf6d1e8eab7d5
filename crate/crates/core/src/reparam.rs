//! Unconstrained coordinates for the trainable parameters.
//!
//! | slot        | map                      |
//! |-------------|--------------------------|
//! | g_distort   | `exp(u)`                 |
//! | T, g_makeup | identity (dB)            |
//! | R           | `1 + softplus(u)`        |
//! | α_A, α_R    | `sigmoid(u)`             |
//! | EQ bins     | `softplus(u)`            |
//! | noise amp.  | `exp(u)`                 |

use std::ops::Range;

use rand::Rng;

use crate::autodiff::{sigmoid, softplus};
use crate::error::{Error, Result};
use crate::signal::{ChannelParams, DrcParams, EqParams, EQ_BINS, TRAINABLE_COUNT};

pub const G_DISTORT: usize = 0;
pub const THRESHOLD: usize = 1;
pub const RATIO: usize = 2;
pub const ALPHA_ATTACK: usize = 3;
pub const ALPHA_RELEASE: usize = 4;
pub const MAKEUP: usize = 5;
pub const EQ_AUDIO: Range<usize> = 6..6 + EQ_BINS;
pub const EQ_NOISE: Range<usize> = 6 + EQ_BINS..6 + 2 * EQ_BINS;
pub const NOISE_AMP: usize = 6 + 2 * EQ_BINS;

/// Smallest EQ magnitude given a finite coordinate by the inverse map.
const MIN_BIN: f64 = 1e-12;

pub(crate) fn softplus_inv(y: f64) -> f64 {
    let y = y.max(MIN_BIN);
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Human-readable name of a coordinate, for reports.
pub fn slot_name(i: usize) -> String {
    match i {
        G_DISTORT => "g_distort".into(),
        THRESHOLD => "drc.T".into(),
        RATIO => "drc.R".into(),
        ALPHA_ATTACK => "drc.alpha_A".into(),
        ALPHA_RELEASE => "drc.alpha_R".into(),
        MAKEUP => "drc.g_makeup".into(),
        NOISE_AMP => "noise_amplitude".into(),
        i if EQ_AUDIO.contains(&i) => format!("eq_audio[{}]", i - EQ_AUDIO.start),
        i if EQ_NOISE.contains(&i) => format!("eq_noise[{}]", i - EQ_NOISE.start),
        i => format!("#{i}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeParams {
    values: Vec<f64>,
}

impl FreeParams {
    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if values.len() != TRAINABLE_COUNT {
            return Err(Error::LengthMismatch {
                what: "free parameter vector",
                expected: TRAINABLE_COUNT,
                actual: values.len(),
            });
        }
        Ok(Self { values })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// A random starting point: roughly flat EQs with per-bin jitter,
    /// moderate distortion and compression, quiet noise.
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut v = vec![0.0; TRAINABLE_COUNT];
        v[G_DISTORT] = rng.gen_range(0.5f64.ln()..4f64.ln());
        v[THRESHOLD] = rng.gen_range(-40.0..-10.0);
        v[RATIO] = rng.gen_range(-1.0..2.0);
        v[ALPHA_ATTACK] = rng.gen_range(0.0..3.0);
        v[ALPHA_RELEASE] = rng.gen_range(0.0..3.0);
        v[MAKEUP] = rng.gen_range(-3.0..3.0);
        for range in [EQ_AUDIO, EQ_NOISE] {
            let base = softplus_inv(rng.gen_range(0.3..1.5));
            for slot in &mut v[range] {
                *slot = base + rng.gen_range(-0.2..0.2);
            }
        }
        v[NOISE_AMP] = rng.gen_range(0.005f64.ln()..0.1f64.ln());
        Self { values: v }
    }

    /// Inverse map; EQ bins at zero are lifted to a tiny positive floor.
    pub fn from_params(p: &ChannelParams) -> Self {
        let mut v = vec![0.0; TRAINABLE_COUNT];
        v[G_DISTORT] = p.g_distort.ln();
        v[THRESHOLD] = p.drc.threshold_db;
        v[RATIO] = softplus_inv(p.drc.ratio - 1.0);
        v[ALPHA_ATTACK] = logit(p.drc.alpha_attack);
        v[ALPHA_RELEASE] = logit(p.drc.alpha_release);
        v[MAKEUP] = p.drc.g_makeup;
        for (slot, &m) in v[EQ_AUDIO].iter_mut().zip(p.eq_audio.fr_mag()) {
            *slot = softplus_inv(m);
        }
        for (slot, &m) in v[EQ_NOISE].iter_mut().zip(p.eq_noise.fr_mag()) {
            *slot = softplus_inv(m);
        }
        v[NOISE_AMP] = p.noise_amplitude.ln();
        Self { values: v }
    }

    /// Forward map; non-trainable fields are copied from `template`.
    pub fn to_params(&self, template: &ChannelParams) -> Result<ChannelParams> {
        let v = &self.values;
        let p = ChannelParams {
            g_distort: v[G_DISTORT].exp(),
            drc: DrcParams {
                threshold_db: v[THRESHOLD],
                ratio: 1.0 + softplus(v[RATIO]),
                alpha_attack: sigmoid(v[ALPHA_ATTACK]),
                alpha_release: sigmoid(v[ALPHA_RELEASE]),
                g_makeup: v[MAKEUP],
            },
            eq_audio: EqParams::new(v[EQ_AUDIO].iter().map(|&u| softplus(u)).collect())?,
            eq_noise: EqParams::new(v[EQ_NOISE].iter().map(|&u| softplus(u)).collect())?,
            noise_amplitude: v[NOISE_AMP].exp(),
            lambda: template.lambda,
            ds_factor: template.ds_factor,
            gain_convention: template.gain_convention,
        };
        p.validate()?;
        Ok(p)
    }
}
