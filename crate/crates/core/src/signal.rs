//! Signal and parameter types shared by every stage of the simulator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitude floor used before taking logarithms (−100 dB).
pub const DB_FLOOR: f64 = 1e-5;

/// Number of magnitude bins in every equalizer.
pub const EQ_BINS: usize = 1000;

/// Default sample rate for generated audio.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Number of trainable scalars in a [`ChannelParams`].
pub const TRAINABLE_COUNT: usize = 2 * EQ_BINS + 1 + 5 + 1;

/// Mono audio with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::param("sample_rate", "must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("audio sample {i} is {}", samples[i])));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}

/// `20·log10(max(|x|, DB_FLOOR))`.
pub fn amp_to_db(x: f64) -> f64 {
    20.0 * x.abs().max(DB_FLOOR).log10()
}

/// Inverse of [`amp_to_db`] with an explicit sign in {−1, 0, 1}.
pub fn db_to_amp(db: f64, sign: f64) -> f64 {
    sign * 10f64.powf(db / 20.0)
}

pub fn to_db(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| amp_to_db(v)).collect()
}

pub fn from_db(db: &[f64], sign: &[f64]) -> Result<Vec<f64>> {
    if db.len() != sign.len() {
        return Err(Error::LengthMismatch {
            what: "sign track",
            expected: db.len(),
            actual: sign.len(),
        });
    }
    Ok(db.iter().zip(sign).map(|(&d, &s)| db_to_amp(d, s)).collect())
}

/// Per-sample sign with `signum(0) = 0`, so exact silence stays silent.
pub fn signs(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 })
        .collect()
}

/// Which form of the hard-knee static gain the compressor uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainConvention {
    /// `(1/R − 1)·(x_dB − T)` above threshold; never positive.
    #[default]
    Reduction,
    /// `(x_dB − T)/R` above threshold, added as printed. Kept for audit only.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrcParams {
    #[serde(rename = "T")]
    pub threshold_db: f64,
    #[serde(rename = "R")]
    pub ratio: f64,
    #[serde(rename = "alpha_A")]
    pub alpha_attack: f64,
    #[serde(rename = "alpha_R")]
    pub alpha_release: f64,
    pub g_makeup: f64,
}

impl DrcParams {
    pub fn new(
        threshold_db: f64,
        ratio: f64,
        alpha_attack: f64,
        alpha_release: f64,
        g_makeup: f64,
    ) -> Result<Self> {
        let p = Self {
            threshold_db,
            ratio,
            alpha_attack,
            alpha_release,
            g_makeup,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unity ratio, no makeup: passes audio through unchanged.
    pub fn transparent() -> Self {
        Self {
            threshold_db: -20.0,
            ratio: 1.0,
            alpha_attack: 0.5,
            alpha_release: 0.5,
            g_makeup: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        finite("T", self.threshold_db)?;
        finite("g_makeup", self.g_makeup)?;
        if !(self.ratio >= 1.0) || !self.ratio.is_finite() {
            return Err(Error::param("R", format!("ratio must be >= 1, got {}", self.ratio)));
        }
        check_open_unit("alpha_A", self.alpha_attack)?;
        check_open_unit("alpha_R", self.alpha_release)?;
        Ok(())
    }
}

/// Magnitude response sampled on [`EQ_BINS`] uniform bins from DC to Nyquist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EqParams {
    fr_mag: Vec<f64>,
}

impl EqParams {
    pub fn new(fr_mag: Vec<f64>) -> Result<Self> {
        if fr_mag.len() != EQ_BINS {
            return Err(Error::LengthMismatch {
                what: "equalizer bins",
                expected: EQ_BINS,
                actual: fr_mag.len(),
            });
        }
        if let Some(i) = fr_mag.iter().position(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::param(
                "fr_mag",
                format!("bin {i} must be finite and >= 0, got {}", fr_mag[i]),
            ));
        }
        Ok(Self { fr_mag })
    }

    pub fn flat(gain: f64) -> Self {
        Self {
            fr_mag: vec![gain; EQ_BINS],
        }
    }

    /// Builds a response from a function of normalized frequency in [0, 1] (1 = Nyquist).
    pub fn from_fn(f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            (0..EQ_BINS)
                .map(|k| f(k as f64 / (EQ_BINS - 1) as f64))
                .collect(),
        )
    }

    pub fn fr_mag(&self) -> &[f64] {
        &self.fr_mag
    }
}

impl TryFrom<Vec<f64>> for EqParams {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        EqParams::new(v)
    }
}

impl From<EqParams> for Vec<f64> {
    fn from(eq: EqParams) -> Self {
        eq.fr_mag
    }
}

/// Full parameter set of both chains plus the fixed hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub g_distort: f64,
    pub drc: DrcParams,
    pub eq_audio: EqParams,
    pub eq_noise: EqParams,
    pub noise_amplitude: f64,
    pub lambda: f64,
    pub ds_factor: usize,
    pub gain_convention: GainConvention,
}

impl ChannelParams {
    pub fn new(
        g_distort: f64,
        drc: DrcParams,
        eq_audio: EqParams,
        eq_noise: EqParams,
        noise_amplitude: f64,
        lambda: f64,
        ds_factor: usize,
    ) -> Result<Self> {
        let p = Self {
            g_distort,
            drc,
            eq_audio,
            eq_noise,
            noise_amplitude,
            lambda,
            ds_factor,
            gain_convention: GainConvention::Reduction,
        };
        p.validate()?;
        Ok(p)
    }

    /// A near-transparent chain: mild waveshaping, unity compressor, flat EQs.
    pub fn neutral(ds_factor: usize) -> Self {
        Self {
            g_distort: 1.0,
            drc: DrcParams::transparent(),
            eq_audio: EqParams::flat(1.0),
            eq_noise: EqParams::flat(1.0),
            noise_amplitude: 0.01,
            lambda: 1.0,
            ds_factor,
            gain_convention: GainConvention::Reduction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_distort > 0.0) || !self.g_distort.is_finite() {
            return Err(Error::param(
                "g_distort",
                format!("must be > 0, got {}", self.g_distort),
            ));
        }
        self.drc.validate()?;
        EqParams::new(self.eq_audio.fr_mag.clone())?;
        EqParams::new(self.eq_noise.fr_mag.clone())?;
        if !(self.noise_amplitude > 0.0) || !self.noise_amplitude.is_finite() {
            return Err(Error::param(
                "noise_amplitude",
                format!("must be > 0, got {}", self.noise_amplitude),
            ));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::param("lambda", format!("must be >= 0, got {}", self.lambda)));
        }
        if self.ds_factor == 0 {
            return Err(Error::param("ds_factor", "must be >= 1"));
        }
        Ok(())
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn trainable_count(&self) -> usize {
        self.eq_audio.fr_mag.len() + self.eq_noise.fr_mag.len() + 1 + 5 + 1
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {v}")))
    }
}

fn check_open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must lie strictly inside (0, 1), got {v}")))
    }
}
