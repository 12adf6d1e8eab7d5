use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ChannelParams, DrcParams, EqParams, GainConvention, DEFAULT_SAMPLE_RATE};

/// Parameter document: every trainable value plus λ, ds_factor and the
/// sample rate the EQ bins refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredParams {
    pub params: ChannelParams,
    pub sample_rate: u32,
}

impl StoredParams {
    pub fn new(params: ChannelParams, sample_rate: u32) -> Self {
        Self { params, sample_rate }
    }
}

impl From<ChannelParams> for StoredParams {
    fn from(params: ChannelParams) -> Self {
        Self::new(params, DEFAULT_SAMPLE_RATE)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    g_distort: f64,
    drc: DrcParams,
    eq_audio: EqParams,
    eq_noise: EqParams,
    noise_amplitude: f64,
    lambda: f64,
    ds_factor: usize,
    sample_rate: u32,
}

pub fn params_to_json(p: &StoredParams) -> Result<String> {
    let doc = Document {
        g_distort: p.params.g_distort,
        drc: p.params.drc.clone(),
        eq_audio: p.params.eq_audio.clone(),
        eq_noise: p.params.eq_noise.clone(),
        noise_amplitude: p.params.noise_amplitude,
        lambda: p.params.lambda,
        ds_factor: p.params.ds_factor,
        sample_rate: p.sample_rate,
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Schema(e.to_string()))
}

pub fn params_from_json(text: &str) -> Result<StoredParams> {
    let doc: Document = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    if doc.sample_rate == 0 {
        return Err(Error::Schema("sample_rate must be > 0".into()));
    }
    let params = ChannelParams {
        g_distort: doc.g_distort,
        drc: doc.drc,
        eq_audio: doc.eq_audio,
        eq_noise: doc.eq_noise,
        noise_amplitude: doc.noise_amplitude,
        lambda: doc.lambda,
        ds_factor: doc.ds_factor,
        gain_convention: GainConvention::Reduction,
    };
    params.validate()?;
    Ok(StoredParams::new(params, doc.sample_rate))
}

pub fn save_params(p: &StoredParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = params_to_json(p)?;
    std::fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_params(path: impl AsRef<Path>) -> Result<StoredParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    params_from_json(&text)
}
