use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use chansim_core::autodiff::{Fault, FdStatus, FAULTABLE_OPS};
use chansim_core::bench::{self, BenchConfig};
use chansim_core::dsp::{forward, NoiseSource};
use chansim_core::gradcheck::{self, GradCheckConfig};
use chansim_core::io::{load_params, load_wav, save_params, save_wav, SampleFormat, StoredParams};
use chansim_core::reparam::slot_name;
use chansim_core::synth::chunk_seed;
use chansim_core::train::{self, ChunkDataset, EvalNoise, TrainConfig};
use chansim_core::{AudioBuffer, Error};

use crate::args::*;
use crate::manifest::{beside, Failure, Manifest};
use crate::CliError;

fn format_of(f: WavFormat) -> SampleFormat {
    match f {
        WavFormat::Pcm16 => SampleFormat::Pcm16,
        WavFormat::Float32 => SampleFormat::Float32,
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let clean = load_wav(&a.clean)?;
    let noisy = load_wav(&a.noisy)?;
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        steps: a.steps,
        lr: a.lr,
        lr_final: a.lr * defaults.lr_final / defaults.lr,
        ds_factor: a.ds_factor,
        seed: a.seed,
        s2t_lo: a.s2t_lo,
        s2t_hi: a.s2t_hi,
        duration_secs: a.duration_sec,
        ..defaults
    };
    cfg.validate()?;
    let data = train::select_from_streams(&clean, &noisy, &cfg)?;
    eprintln!(
        "training on {} chunks ({:?}) for {} steps",
        data.len(),
        data.pairs.iter().map(|p| p.index).collect::<Vec<_>>(),
        cfg.steps
    );
    let init = train::initial_point(cfg.seed);
    let every = (cfg.steps / 20).max(1);
    let fit = train::fit_with_observer(&data, &cfg, init, |r| {
        if r.step % every == 0 {
            eprintln!("step {:>6}  epoch {:>4}  loss {:.5}  |grad| {:.3e}", r.step, r.epoch, r.loss, r.grad_norm);
        }
    })?;

    let stored = StoredParams::new(fit.params.clone(), clean.sample_rate());
    save_params(&stored, &a.out_params)?;
    let log_path = a.log.clone().unwrap_or_else(|| {
        let mut name = a.out_params.file_name().unwrap_or_default().to_os_string();
        name.push(".log.jsonl");
        a.out_params.with_file_name(name)
    });
    let mut log = std::io::BufWriter::new(std::fs::File::create(&log_path).map_err(|e| io_err(&log_path, e))?);
    train::write_log(&mut log, &fit.history)?;

    let mut m = Manifest::new(
        "train",
        Some(a.seed),
        json!({
            "steps": cfg.steps, "lr": cfg.lr, "lr_final": cfg.lr_final, "db_lr_scale": cfg.db_lr_scale,
            "ds_factor": cfg.ds_factor, "lambda": cfg.lambda, "s2t_lo": cfg.s2t_lo, "s2t_hi": cfg.s2t_hi,
            "duration_sec": cfg.duration_secs,
        }),
    );
    m.inputs = vec![a.clean.clone(), a.noisy.clone()];
    m.outputs = vec![a.out_params.clone(), log_path];
    m.result = Some(json!({
        "chunks": data.pairs.iter().map(|p| p.index).collect::<Vec<_>>(),
        "initial_loss": fit.initial_loss,
        "epoch_losses": fit.epoch_losses,
        "best_epoch": fit.best_epoch,
    }));
    m.write(&beside(&a.out_params))?;
    let best = fit.best_epoch.map(|e| fit.epoch_losses[e]);
    println!(
        "initial loss {:.5}; best epoch loss {}",
        fit.initial_loss,
        best.map_or("-".into(), |b| format!("{b:.5}"))
    );
    Ok(())
}

fn warn_rate(stored: &StoredParams, input: &AudioBuffer, path: &Path) {
    if stored.sample_rate != input.sample_rate() {
        eprintln!(
            "warning: {} is {} Hz but the parameters were fitted at {} Hz",
            path.display(),
            input.sample_rate(),
            stored.sample_rate
        );
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let stored = load_params(&a.params)?;
    let clean = load_wav(&a.input)?;
    warn_rate(&stored, &clean, &a.input);
    let mut params = stored.params.clone();
    if let Some(l) = a.lambda {
        params = params.with_lambda(l)?;
    }
    let out = forward(&clean, &NoiseSource::new(a.noise_seed, clean.len()), &params)?;
    save_wav(&out, &a.out, format_of(a.format))?;
    let mut m = Manifest::new(
        "simulate",
        Some(a.noise_seed),
        json!({ "lambda": params.lambda, "format": format!("{:?}", a.format) }),
    );
    m.inputs = vec![a.params.clone(), a.input.clone()];
    m.outputs = vec![a.out.clone()];
    m.write(&beside(&a.out))
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Core(Error::MissingFile(dir.to_path_buf()))
        } else {
            io_err(dir, e)
        }
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        let is_wav = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if is_wav && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn lambda_tag(lambda: f64) -> String {
    format!("lambda{lambda:.2}")
}

pub fn augment(a: &AugmentArgs) -> Result<(), CliError> {
    if a.lambdas.is_empty() {
        return Err(CliError::Usage("--lambdas needs at least one value".into()));
    }
    if let Some(bad) = a.lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(CliError::Usage(format!("lambda must be >= 0, got {bad}")));
    }
    let stored = load_params(&a.params)?;
    let inputs = wav_files(&a.in_dir)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| io_err(&a.out_dir, e))?;

    let results: Vec<Result<Vec<PathBuf>, Failure>> = inputs
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let run = || -> Result<Vec<PathBuf>, CliError> {
                let clean = load_wav(path)?;
                warn_rate(&stored, &clean, path);
                // one noise draw per input, shared by all its λ variants
                let src = NoiseSource::new(chunk_seed(a.seed, i as u64), clean.len());
                let stem = path.file_stem().unwrap_or_default().to_string_lossy();
                let mut outs = Vec::with_capacity(a.lambdas.len());
                for &l in &a.lambdas {
                    let p = stored.params.clone().with_lambda(l)?;
                    let y = forward(&clean, &src, &p)?;
                    let out = a.out_dir.join(format!("{stem}_{}.wav", lambda_tag(l)));
                    save_wav(&y, &out, format_of(a.format))?;
                    outs.push(out);
                }
                Ok(outs)
            };
            run().map_err(|e| {
                eprintln!("{}: {e}", path.display());
                Failure {
                    input: path.clone(),
                    error: e.to_string(),
                }
            })
        })
        .collect();

    let mut m = Manifest::new(
        "augment",
        Some(a.seed),
        json!({ "lambdas": a.lambdas, "format": format!("{:?}", a.format) }),
    );
    m.inputs.push(a.params.clone());
    m.inputs.extend(inputs.iter().cloned());
    for r in results {
        match r {
            Ok(outs) => m.outputs.extend(outs),
            Err(f) => m.failures.push(f),
        }
    }
    m.write(&a.out_dir.join("manifest.json"))?;
    println!("{} outputs, {} failed inputs", m.outputs.len(), m.failures.len());
    if m.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial(m.failures.len()))
    }
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let stored = load_params(&a.params)?;
    let clean = load_wav(&a.clean)?;
    let noisy = load_wav(&a.noisy)?;
    warn_rate(&stored, &clean, &a.clean);
    let pairs = train::chunk_streams(&clean, &noisy)?;
    if pairs.is_empty() {
        return Err(Error::Insufficient("recordings are shorter than one second".into()).into());
    }
    let data = ChunkDataset::new(pairs)?;
    let loss = train::evaluate(&stored.params, &data, &EvalNoise::Seeded(a.seed))?;
    println!("mssl\t{loss:.6}\tchunks\t{}", data.len());
    std::fs::create_dir_all(&a.out_dir).map_err(|e| io_err(&a.out_dir, e))?;
    let mut m = Manifest::new("eval", Some(a.seed), json!({ "chunks": data.len() }));
    m.inputs = vec![a.params.clone(), a.clean.clone(), a.noisy.clone()];
    m.result = Some(json!({ "mssl": loss }));
    m.write(&a.out_dir.join("eval-manifest.json"))
}

pub fn bench(a: &BenchArgs) -> Result<(), CliError> {
    let cfg = BenchConfig {
        ds_factors: a.ds_factors.clone(),
        seconds: a.seconds,
        repeats: a.repeats,
        full: a.full.then(|| TrainConfig {
            steps: a.steps,
            seed: a.seed,
            ..TrainConfig::default()
        }),
        seed: a.seed,
    };
    let rows = bench::run(&cfg)?;
    let table = bench::format_table(&rows);
    print!("{table}");
    std::fs::create_dir_all(&a.out_dir).map_err(|e| io_err(&a.out_dir, e))?;
    let table_path = a.out_dir.join("bench.tsv");
    std::fs::write(&table_path, &table).map_err(|e| io_err(&table_path, e))?;
    let mut m = Manifest::new(
        "bench",
        Some(a.seed),
        json!({ "ds_factors": a.ds_factors, "seconds": a.seconds, "repeats": a.repeats,
                "full": a.full, "steps": a.steps }),
    );
    m.outputs = vec![table_path];
    m.write(&a.out_dir.join("bench-manifest.json"))
}

fn parse_fault(text: &str) -> Result<Fault, CliError> {
    let (op, factor) = text
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--fault expects op=factor, got `{text}`")))?;
    let op = FAULTABLE_OPS
        .iter()
        .find(|o| **o == op)
        .ok_or_else(|| CliError::Usage(format!("unknown op `{op}`; one of {FAULTABLE_OPS:?}")))?;
    let factor = factor
        .parse()
        .map_err(|_| CliError::Usage(format!("bad fault factor `{factor}`")))?;
    Ok(Fault { op, factor })
}

pub fn check_grad(a: &CheckGradArgs) -> Result<(), CliError> {
    let fault = a.fault.as_deref().map(parse_fault).transpose()?;
    let cfg = GradCheckConfig {
        seed: a.seed,
        len: a.len,
        ds_factor: a.ds_factor,
        fault,
        ..GradCheckConfig::default()
    };
    let out = gradcheck::check_full_chain(&cfg)?;
    let r = &out.report;
    println!(
        "seed {}  loss {:.6}  checked {}  pass {}  fail {}  near-kink {}  negligible {}  max-rel {:.3e}  {:.1}s",
        a.seed,
        out.loss,
        r.entries.len(),
        r.count(FdStatus::Pass),
        r.count(FdStatus::Fail),
        r.count(FdStatus::NearKink),
        r.count(FdStatus::Negligible),
        r.max_rel_error(),
        out.elapsed.as_secs_f64()
    );
    for e in r.failures().take(10) {
        println!(
            "  {:<16} analytic {:+.6e}  numeric {:+.6e}  rel {:.3e}",
            slot_name(e.index),
            e.analytic,
            e.numeric,
            e.rel_error
        );
    }
    std::fs::create_dir_all(&a.out_dir).map_err(|e| io_err(&a.out_dir, e))?;
    let mut m = Manifest::new(
        "check-grad",
        Some(a.seed),
        json!({ "len": a.len, "ds_factor": a.ds_factor, "fault": a.fault,
                "step": cfg.fd.step, "tolerance": cfg.fd.tolerance }),
    );
    m.result = Some(json!({
        "passed": r.passed(),
        "fail": r.count(FdStatus::Fail),
        "max_rel_error": r.max_rel_error(),
    }));
    m.write(&a.out_dir.join("check-grad-manifest.json"))?;
    if r.passed() {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(CliError::Check(r.count(FdStatus::Fail)))
    }
}
