//! The forward signal chains on plain reals.

pub mod chain;
pub mod drc;
pub mod eq;
pub mod noise;
pub mod waveshaper;

pub use chain::{forward, ChainOutputs};
pub use drc::{downsample_gain, drc, drc_static_gain, smooth_gain, upsample_gain, GainTrack};
pub use eq::{equalize, EQ_TAPS};
pub use noise::{white_noise, NoiseSource};
pub use waveshaper::waveshape;
