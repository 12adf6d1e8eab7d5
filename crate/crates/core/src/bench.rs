//! Timing of the companded smoother and, optionally, full training runs
//! across `ds_factor` values.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::drc::{smooth_adjoint_into, smooth_values_into, DownsampleGrid, Smoothed};
use crate::error::{Error, Result};
use crate::signal::DEFAULT_SAMPLE_RATE;
use crate::synth;
use crate::train::{self, ChunkDataset, EvalNoise, TrainConfig};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub ds_factors: Vec<usize>,
    pub seconds: f64,
    pub repeats: usize,
    /// Also train on a synthetic target at every factor.
    pub full: Option<TrainConfig>,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            ds_factors: vec![2, 4, 8, 16],
            seconds: 60.0,
            repeats: 5,
            full: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub ds_factor: usize,
    pub track_len: usize,
    /// Median over repeats of one smoother forward plus adjoint pass.
    pub smoothing: Duration,
    pub train_time: Option<Duration>,
    pub trained_mssl: Option<f64>,
}

/// Median wall time of the smoother (forward and adjoint) on a gain track
/// of `len` samples at audio rate, after companding by `ds_factor`.
/// Buffers are allocated once outside the timed region.
pub fn time_smoothing(len: usize, ds_factor: usize, repeats: usize, seed: u64) -> Result<(usize, Duration)> {
    if repeats == 0 {
        return Err(Error::param("repeats", "must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let audio_rate: Vec<f64> = (0..len).map(|_| -rng.gen_range(0.0..30.0)).collect();
    let grid = DownsampleGrid::new(len, ds_factor)?;
    let track = grid.apply(&audio_rate);
    let grad: Vec<f64> = (0..track.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut fwd = Smoothed {
        values: Vec::with_capacity(track.len()),
        attack: Vec::with_capacity(track.len()),
    };
    let mut grad_in = vec![0.0; track.len()];
    let mut pass = || -> Result<f64> {
        smooth_values_into(&track, 0.6, 0.9, &mut fwd)?;
        let (ga, gr) = smooth_adjoint_into(&track, &fwd, 0.6, 0.9, &grad, &mut grad_in);
        Ok(grad_in[0] + ga + gr)
    };
    // Enough inner passes that one measurement spans a few milliseconds.
    let probe = Instant::now();
    std::hint::black_box(pass()?);
    let once = probe.elapsed().max(Duration::from_nanos(100));
    let inner = (Duration::from_millis(20).as_nanos() / once.as_nanos()).clamp(1, 100_000) as u32;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        for _ in 0..inner {
            std::hint::black_box(pass()?);
        }
        times.push(t.elapsed() / inner);
    }
    times.sort();
    Ok((track.len(), times[times.len() / 2]))
}

/// Synthetic parallel corpus from the reference channel.
pub fn synthetic_corpus(seconds: f64, seed: u64) -> Result<Vec<train::ChunkPair>> {
    let rate = DEFAULT_SAMPLE_RATE;
    let clean = synth::speech_like(seconds, rate, seed)?;
    let truth = synth::reference_params(16)?;
    let noisy = synth::parallel_corpus(&clean, &truth, rate as usize, seed.wrapping_add(1))?;
    train::chunk_streams(&clean, &noisy)
}

/// Splits chunks into the selected training set and every other chunk
/// with the same s2t band as a test set.
pub fn split_train_test(pairs: &[train::ChunkPair], cfg: &TrainConfig) -> Result<(ChunkDataset, ChunkDataset)> {
    let train_set = train::select_chunks(pairs, cfg)?;
    let used: Vec<usize> = train_set.pairs.iter().map(|p| p.index).collect();
    let test = pairs
        .iter()
        .filter(|p| !used.contains(&p.index) && p.s2t >= cfg.s2t_lo && p.s2t < cfg.s2t_hi)
        .cloned()
        .collect();
    Ok((train_set, ChunkDataset::new(test)?))
}

pub fn run(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.ds_factors.is_empty() {
        return Err(Error::Empty("ds_factor list"));
    }
    let len = (cfg.seconds * DEFAULT_SAMPLE_RATE as f64).round() as usize;
    if len == 0 {
        return Err(Error::param("seconds", "must cover at least one sample"));
    }
    let corpus = match &cfg.full {
        Some(_) => Some(synthetic_corpus(cfg.seconds.max(1.0), cfg.seed)?),
        None => None,
    };
    let mut rows = Vec::with_capacity(cfg.ds_factors.len());
    for &ds in &cfg.ds_factors {
        let (track_len, smoothing) = time_smoothing(len, ds, cfg.repeats, cfg.seed)?;
        let mut row = BenchRow {
            ds_factor: ds,
            track_len,
            smoothing,
            train_time: None,
            trained_mssl: None,
        };
        if let (Some(base), Some(pairs)) = (&cfg.full, &corpus) {
            let tc = TrainConfig {
                ds_factor: ds,
                ..base.clone()
            };
            let (train_set, test) = split_train_test(pairs, &tc)?;
            let t = Instant::now();
            let fit = train::fit(&train_set, &tc)?;
            row.train_time = Some(t.elapsed());
            let eval_set = if test.is_empty() { &train_set } else { &test };
            row.trained_mssl = Some(train::evaluate(&fit.params, eval_set, &EvalNoise::Seeded(cfg.seed))?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Tab-separated table with a header line.
pub fn format_table(rows: &[BenchRow]) -> String {
    let mut out = String::from("ds_factor\ttrack_len\tsmoothing_us\ttrain_s\tmssl\n");
    for r in rows {
        let train = r.train_time.map_or("-".into(), |d| format!("{:.2}", d.as_secs_f64()));
        let mssl = r.trained_mssl.map_or("-".into(), |m| format!("{m:.5}"));
        out.push_str(&format!(
            "{}\t{}\t{:.2}\t{}\t{}\n",
            r.ds_factor,
            r.track_len,
            r.smoothing.as_secs_f64() * 1e6,
            train,
            mssl
        ));
    }
    out
}
