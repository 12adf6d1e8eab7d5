//! Full-chain gradient verification: tape gradient of the spectral loss
//! against central finite differences over every free parameter.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{fd_check, Fault, FdConfig, FdReport, Tape};
use crate::dsp::{white_noise, NoiseSource};
use crate::error::Result;
use crate::model::{self, Example, ModelConfig};
use crate::reparam::FreeParams;
use crate::signal::GainConvention;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub seed: u64,
    pub len: usize,
    pub ds_factor: usize,
    pub fd: FdConfig,
    pub fault: Option<Fault>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            len: 1000,
            ds_factor: 16,
            fd: FdConfig::default(),
            fault: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckOutcome {
    pub loss: f64,
    pub report: FdReport,
    pub elapsed: Duration,
}

/// Random input, random parameters, and a target produced by the chain at a
/// second random parameter set with different noise.
pub fn random_problem(seed: u64, len: usize, ds_factor: usize) -> Result<(FreeParams, Example, ModelConfig)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clean: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let noise = white_noise(&NoiseSource::new(rng.gen(), len))?;
    let cfg = ModelConfig {
        lambda: 1.0,
        ds_factor,
        convention: GainConvention::Reduction,
    };
    let at = FreeParams::random(&mut rng);
    let other = FreeParams::random(&mut rng).to_params(&cfg.template())?;
    let target_noise = white_noise(&NoiseSource::new(rng.gen(), len))?;
    let mut sink = std::collections::hash_map::DefaultHasher::new();
    let target = model::simulate_traced(&other, &clean, &target_noise, &mut sink)?;
    Ok((at, Example::new(clean, noise, &target)?, cfg))
}

pub fn check_full_chain(cfg: &GradCheckConfig) -> Result<GradCheckOutcome> {
    let start = Instant::now();
    let (at, ex, model_cfg) = random_problem(cfg.seed, cfg.len, cfg.ds_factor)?;
    let tape = match cfg.fault {
        Some(f) => Tape::with_fault(f),
        None => Tape::new(),
    };
    let (loss, grad) = model::loss_and_grad_on(&tape, &at, &ex, &model_cfg)?;
    let objective = |u: &[f64]| {
        model::probe(u, &ex, &model_cfg).unwrap_or(crate::autodiff::Probe {
            value: f64::NAN,
            kinks: u64::MAX,
        })
    };
    let report = fd_check(objective, at.as_slice(), &grad, &cfg.fd);
    Ok(GradCheckOutcome {
        loss,
        report,
        elapsed: start.elapsed(),
    })
}
