use std::path::Path;

use hound::{SampleFormat as HoundFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::signal::AudioBuffer;

/// On-disk sample encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleFormat {
    #[default]
    Pcm16,
    Float32,
}

fn hound_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        hound::Error::Unsupported => Error::UnsupportedCodec {
            path: path.to_path_buf(),
            reason: "format not handled".into(),
        },
        other => Error::MalformedWav {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

/// Reads a PCM16 or float32 WAV as mono, averaging channels.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let reader = WavReader::open(path).map_err(|e| hound_error(path, e))?;
    let spec = reader.spec();
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (HoundFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        (HoundFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (fmt, bits) => {
            return Err(Error::UnsupportedCodec {
                path: path.to_path_buf(),
                reason: format!("{bits}-bit {fmt:?} samples; only 16-bit PCM and 32-bit float are read"),
            })
        }
    }
    .map_err(|e| hound_error(path, e))?;
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::MalformedWav {
            path: path.to_path_buf(),
            reason: "zero channels".into(),
        });
    }
    let mono = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    AudioBuffer::new(mono, spec.sample_rate)
}

/// Writes mono audio. PCM16 output clamps to [−1, 1] before quantizing.
pub fn save_wav(buf: &AudioBuffer, path: impl AsRef<Path>, format: SampleFormat) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate(),
        bits_per_sample: match format {
            SampleFormat::Pcm16 => 16,
            SampleFormat::Float32 => 32,
        },
        sample_format: match format {
            SampleFormat::Pcm16 => HoundFormat::Int,
            SampleFormat::Float32 => HoundFormat::Float,
        },
    };
    let mut w = WavWriter::create(path, spec).map_err(|e| hound_error(path, e))?;
    for &x in buf.samples() {
        let r = match format {
            SampleFormat::Pcm16 => {
                let q = (x.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0);
                w.write_sample(q as i16)
            }
            SampleFormat::Float32 => w.write_sample(x as f32),
        };
        r.map_err(|e| hound_error(path, e))?;
    }
    w.finalize().map_err(|e| hound_error(path, e))
}
