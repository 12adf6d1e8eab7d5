//! WAV files and parameter documents.

mod params;
mod wav;

pub use params::{load_params, params_from_json, params_to_json, save_params, StoredParams};
pub use wav::{load_wav, save_wav, SampleFormat};
