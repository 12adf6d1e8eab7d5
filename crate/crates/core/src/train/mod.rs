//! Chunking, speech-activity selection, the fitting loop and evaluation.

mod log;

pub use log::{read_log, write_log, StepRecord};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::value_and_grad;
use crate::dsp::{forward, white_noise, NoiseSource};
use crate::error::{Error, Result};
use crate::model::{self, ModelConfig};
use crate::optim::{Adam, AdamConfig};
use crate::reparam::{self, FreeParams};
use crate::signal::{amp_to_db, AudioBuffer, ChannelParams, GainConvention};
use crate::spectral::{mssl, SpectrogramSet};
use crate::synth::chunk_seed;

pub const S2T_WINDOW_SECS: f64 = 0.025;
pub const S2T_HOP_SECS: f64 = 0.010;
/// Windows quieter than the chunk peak by more than this are inactive.
pub const S2T_RANGE_DB: f64 = 50.0;

/// Fraction of 25 ms windows (10 ms hop) whose RMS level is within 50 dB of
/// the loudest window.
pub fn compute_s2t(clean: &AudioBuffer) -> f64 {
    let rate = clean.sample_rate() as f64;
    let win = ((S2T_WINDOW_SECS * rate).round() as usize).max(1);
    let hop = ((S2T_HOP_SECS * rate).round() as usize).max(1);
    let x = clean.samples();
    if x.is_empty() {
        return 0.0;
    }
    let count = if x.len() <= win { 1 } else { 1 + (x.len() - win) / hop };
    let levels: Vec<f64> = (0..count)
        .map(|w| {
            let frame = &x[w * hop..(w * hop + win).min(x.len())];
            let ms = frame.iter().map(|v| v * v).sum::<f64>() / frame.len() as f64;
            ms.sqrt()
        })
        .collect();
    let peak = levels.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let floor = amp_to_db(peak) - S2T_RANGE_DB;
    let active = levels
        .iter()
        .filter(|&&l| l > 0.0 && 20.0 * l.log10() > floor)
        .count();
    active as f64 / count as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkPair {
    pub clean: AudioBuffer,
    pub noisy: AudioBuffer,
    pub s2t: f64,
    /// Position of the chunk in the source streams.
    pub index: usize,
}

/// Splits aligned streams into back-to-back one-second pairs; a trailing
/// partial second is dropped.
pub fn chunk_streams(clean: &AudioBuffer, noisy: &AudioBuffer) -> Result<Vec<ChunkPair>> {
    if clean.sample_rate() != noisy.sample_rate() {
        return Err(Error::RateMismatch(clean.sample_rate(), noisy.sample_rate()));
    }
    if clean.len() != noisy.len() {
        return Err(Error::LengthMismatch {
            what: "noisy stream",
            expected: clean.len(),
            actual: noisy.len(),
        });
    }
    let rate = clean.sample_rate();
    let n = rate as usize;
    (0..clean.len() / n)
        .map(|i| {
            let c = AudioBuffer::new(clean.samples()[i * n..(i + 1) * n].to_vec(), rate)?;
            let y = AudioBuffer::new(noisy.samples()[i * n..(i + 1) * n].to_vec(), rate)?;
            Ok(ChunkPair {
                s2t: compute_s2t(&c),
                clean: c,
                noisy: y,
                index: i,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChunkDataset {
    pub pairs: Vec<ChunkPair>,
}

impl ChunkDataset {
    pub fn new(pairs: Vec<ChunkPair>) -> Result<Self> {
        if let Some(first) = pairs.first() {
            let rate = first.clean.sample_rate();
            for p in &pairs {
                if p.clean.len() != rate as usize || p.noisy.len() != rate as usize {
                    return Err(Error::LengthMismatch {
                        what: "chunk",
                        expected: rate as usize,
                        actual: p.clean.len().max(p.noisy.len()),
                    });
                }
                if p.clean.sample_rate() != rate || p.noisy.sample_rate() != rate {
                    return Err(Error::RateMismatch(rate, p.noisy.sample_rate()));
                }
            }
        }
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn total_duration_secs(&self) -> f64 {
        self.pairs.len() as f64
    }

    pub fn sample_rate(&self) -> Option<u32> {
        self.pairs.first().map(|p| p.clean.sample_rate())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    /// Learning rate at the last step; cosine decay from `lr`.
    pub lr_final: f64,
    /// Step-size multiplier for the dB-valued slots (threshold, makeup).
    pub db_lr_scale: f64,
    pub ds_factor: usize,
    pub lambda: f64,
    pub seed: u64,
    pub s2t_lo: f64,
    pub s2t_hi: f64,
    pub duration_secs: usize,
    pub log_every: usize,
    pub convention: GainConvention,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 1500,
            lr: 0.03,
            lr_final: 0.001,
            db_lr_scale: 30.0,
            ds_factor: 16,
            lambda: 1.0,
            seed: 0,
            s2t_lo: 0.8,
            s2t_hi: 1.0,
            duration_secs: 10,
            log_every: 1,
            convention: GainConvention::Reduction,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.s2t_lo && self.s2t_lo < self.s2t_hi && self.s2t_hi <= 1.0) {
            return Err(Error::param(
                "s2t range",
                format!("need 0 <= lo < hi <= 1, got [{}, {})", self.s2t_lo, self.s2t_hi),
            ));
        }
        if self.duration_secs == 0 {
            return Err(Error::param("duration", "must be a positive number of seconds"));
        }
        if self.ds_factor == 0 {
            return Err(Error::param("ds_factor", "must be >= 1"));
        }
        for (name, v) in [("lr", self.lr), ("lr_final", self.lr_final), ("db_lr_scale", self.db_lr_scale)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::param("lambda", format!("must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            lambda: self.lambda,
            ds_factor: self.ds_factor,
            convention: self.convention,
        }
    }

    /// Cosine schedule from `lr` at step 0 to `lr_final` at the last step.
    pub fn lr_at(&self, step: usize) -> f64 {
        if self.steps <= 1 {
            return self.lr;
        }
        let t = step as f64 / (self.steps - 1) as f64;
        let c = 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
        self.lr_final + (self.lr - self.lr_final) * c
    }
}

/// Seeded uniform choice of `duration_secs` chunks whose s2t lies in `[lo, hi)`.
pub fn select_chunks(pairs: &[ChunkPair], cfg: &TrainConfig) -> Result<ChunkDataset> {
    cfg.validate()?;
    let mut qualifying: Vec<&ChunkPair> = pairs
        .iter()
        .filter(|p| p.s2t >= cfg.s2t_lo && p.s2t < cfg.s2t_hi)
        .collect();
    if qualifying.len() < cfg.duration_secs {
        return Err(Error::Insufficient(format!(
            "{} of {} chunks have s2t in [{}, {}), {} needed",
            qualifying.len(),
            pairs.len(),
            cfg.s2t_lo,
            cfg.s2t_hi,
            cfg.duration_secs
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    qualifying.shuffle(&mut rng);
    let mut chosen: Vec<ChunkPair> = qualifying[..cfg.duration_secs].iter().map(|p| (*p).clone()).collect();
    chosen.sort_by_key(|p| p.index);
    ChunkDataset::new(chosen)
}

/// Chunks the streams and selects from them.
pub fn select_from_streams(clean: &AudioBuffer, noisy: &AudioBuffer, cfg: &TrainConfig) -> Result<ChunkDataset> {
    select_chunks(&chunk_streams(clean, noisy)?, cfg)
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ChannelParams,
    pub initial: ChannelParams,
    /// Mean loss of the initial parameters over the training chunks
    /// (pinned seeds of the first epoch).
    pub initial_loss: f64,
    pub history: Vec<StepRecord>,
    /// Mean step loss of each (possibly partial) epoch.
    pub epoch_losses: Vec<f64>,
    /// Epoch whose end-of-epoch parameters were returned; `None` for zero steps.
    pub best_epoch: Option<usize>,
}

/// Noise seed pinned to a training step.
pub fn step_noise_seed(run_seed: u64, step: usize) -> u64 {
    chunk_seed(run_seed ^ 0x005E_ED0F_7A1E, step as u64)
}

/// Fits from a random initial point drawn with `cfg.seed`.
pub fn fit(data: &ChunkDataset, cfg: &TrainConfig) -> Result<FitResult> {
    fit_from(data, cfg, initial_point(cfg.seed))
}

/// The random starting point used by [`fit`] for a run seed.
pub fn initial_point(seed: u64) -> FreeParams {
    FreeParams::random(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// One chunk per step; epochs visit the chunks in a seeded shuffled order.
pub fn fit_from(data: &ChunkDataset, cfg: &TrainConfig, init: FreeParams) -> Result<FitResult> {
    fit_with_observer(data, cfg, init, |_| {})
}

pub fn fit_with_observer(
    data: &ChunkDataset,
    cfg: &TrainConfig,
    init: FreeParams,
    mut observe: impl FnMut(&StepRecord),
) -> Result<FitResult> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let model_cfg = cfg.model();
    let template = model_cfg.template();
    let initial = init.to_params(&template)?;
    let targets: Vec<SpectrogramSet> = data
        .pairs
        .iter()
        .map(|p| SpectrogramSet::new(p.noisy.samples()))
        .collect::<Result<_>>()?;

    let mut initial_loss = 0.0;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut order_rng = ChaCha8Rng::seed_from_u64(chunk_seed(cfg.seed, u64::MAX));
    for (i, pair) in data.pairs.iter().enumerate() {
        let noise = white_noise(&NoiseSource::new(step_noise_seed(cfg.seed, i), pair.clean.len()))?;
        let ex = model::Example {
            clean: pair.clean.samples().to_vec(),
            noise,
            target: targets[i].clone(),
        };
        initial_loss += model::loss(&initial, &ex)?;
    }
    initial_loss /= data.len() as f64;

    let mut u = init.into_vec();
    let mut adam = Adam::new(u.len(), AdamConfig::default());
    let mut history = Vec::with_capacity(cfg.steps);
    let mut epoch_losses = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut epoch_sum = 0.0;
    let mut epoch_count = 0usize;

    for step in 0..cfg.steps {
        let pos = step % data.len();
        if pos == 0 {
            order.shuffle(&mut order_rng);
        }
        let chunk = order[pos];
        let pair = &data.pairs[chunk];
        let noise = white_noise(&NoiseSource::new(step_noise_seed(cfg.seed, step), pair.clean.len()))?;
        let clean = pair.clean.samples();
        let target = &targets[chunk];
        let (loss, grad) = value_and_grad(&u, |_, v| {
            let sim = model::simulate_var(v, clean, &noise, &model_cfg)?;
            model::loss_var(sim, target)
        })
        .map_err(|e| match e {
            Error::NonFinite(msg) => Error::NonFinite(format!("step {step} (chunk {}): {msg}", pair.index)),
            other => other,
        })?;
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let record = StepRecord {
            step,
            epoch: step / data.len(),
            chunk: pair.index,
            loss,
            grad_norm,
            lr: cfg.lr_at(step),
        };
        if cfg.log_every > 0 && step % cfg.log_every == 0 {
            observe(&record);
        }
        history.push(record);

        let before = [u[reparam::THRESHOLD], u[reparam::MAKEUP]];
        adam.step_with_lr(&mut u, &grad, cfg.lr_at(step))?;
        // Adam's step is scale-free, so the dB slots get a longer stride directly.
        for (slot, old) in [reparam::THRESHOLD, reparam::MAKEUP].into_iter().zip(before) {
            u[slot] = old + cfg.db_lr_scale * (u[slot] - old);
        }

        epoch_sum += loss;
        epoch_count += 1;
        if epoch_count == data.len() || step + 1 == cfg.steps {
            let mean = epoch_sum / epoch_count as f64;
            let epoch = epoch_losses.len();
            epoch_losses.push(mean);
            if best.as_ref().is_none_or(|(b, _, _)| mean < *b) {
                best = Some((mean, epoch, u.clone()));
            }
            epoch_sum = 0.0;
            epoch_count = 0;
        }
    }

    let (params, best_epoch) = match best {
        Some((_, e, v)) => (FreeParams::from_vec(v)?.to_params(&template)?, Some(e)),
        None => (initial.clone(), None),
    };
    Ok(FitResult {
        params,
        initial,
        initial_loss,
        history,
        epoch_losses,
        best_epoch,
    })
}

/// How evaluation draws the noise-chain input.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalNoise {
    /// OS-seeded draws.
    Fresh,
    /// Seeds derived from a base seed and the chunk position.
    Seeded(u64),
    /// One explicit seed per pair.
    Pinned(Vec<u64>),
}

/// Mean MSSL between `forward(clean)` and the noisy target over the pairs.
pub fn evaluate(params: &ChannelParams, test: &ChunkDataset, noise: &EvalNoise) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if let EvalNoise::Pinned(seeds) = noise {
        if seeds.len() != test.len() {
            return Err(Error::LengthMismatch {
                what: "pinned noise seeds",
                expected: test.len(),
                actual: seeds.len(),
            });
        }
    }
    let mut fresh = rand::thread_rng();
    let mut total = 0.0;
    for (i, pair) in test.pairs.iter().enumerate() {
        let seed = match noise {
            EvalNoise::Fresh => fresh.gen(),
            EvalNoise::Seeded(base) => chunk_seed(*base, pair.index as u64),
            EvalNoise::Pinned(seeds) => seeds[i],
        };
        let sim = forward(&pair.clean, &NoiseSource::new(seed, pair.clean.len()), params)?;
        total += mssl(&sim, &pair.noisy)?;
    }
    Ok(total / test.len() as f64)
}
