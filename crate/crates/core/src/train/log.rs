//! Per-step training records as JSON lines.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    /// Source position of the chunk used at this step.
    pub chunk: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub lr: f64,
}

pub fn write_log(out: &mut impl Write, records: &[StepRecord]) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Schema(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::Io {
            path: "<training log>".into(),
            source: e,
        })?;
    }
    Ok(())
}

pub fn read_log(input: impl BufRead) -> Result<Vec<StepRecord>> {
    input
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, line)| {
            let line = line.map_err(|e| Error::Io {
                path: "<training log>".into(),
                source: e,
            })?;
            serde_json::from_str(&line).map_err(|e| Error::Schema(format!("log line {}: {e}", i + 1)))
        })
        .collect()
}
