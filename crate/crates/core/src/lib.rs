//! Trainable, explainable distortion-channel simulator.
//!
//! Clean speech runs through an audio chain (arctan waveshaper, hard-knee
//! compressor with a companded gain smoother, FIR equalizer) while seeded
//! white noise runs through a noise chain (FIR equalizer, gain). The sum
//! `s_out + λ·n_out` imitates a degraded transmission channel. About two
//! thousand parameters are fitted with Adam against a multi-scale spectral
//! loss from a few seconds of parallel clean/noisy audio.

pub mod autodiff;
pub mod bench;
pub mod dsp;
pub mod error;
pub mod gradcheck;
mod fft;
pub mod io;
pub mod model;
pub mod optim;
pub mod reparam;
pub mod signal;
pub mod spectral;
pub mod synth;
pub mod train;

pub use error::{Error, ErrorClass, Result};
pub use reparam::FreeParams;
pub use signal::{AudioBuffer, ChannelParams, DrcParams, EqParams, GainConvention};
