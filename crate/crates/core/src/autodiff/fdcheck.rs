//! Central finite-difference oracle for tape gradients.

/// One evaluation of a plain-real objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub value: f64,
    /// Fingerprint of every branch decision taken (threshold masks,
    /// attack/release switches, signs inside absolute values). Two probes
    /// with equal fingerprints lie on the same smooth piece.
    pub kinks: u64,
}

impl Probe {
    pub fn smooth(value: f64) -> Self {
        Self { value, kinks: 0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Gradients no larger than this (in both routes) are not compared.
    pub min_grad: f64,
    /// Extra attempts with the step divided by 10 when a kink is crossed.
    pub retries: u32,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            step: 1e-4,
            tolerance: 1e-3,
            min_grad: 1e-8,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdStatus {
    Pass,
    Fail,
    /// Both gradients are below `min_grad`.
    Negligible,
    /// Every step tried crossed a branch kink.
    NearKink,
}

#[derive(Debug, Clone, Copy)]
pub struct FdEntry {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    pub step: f64,
    pub status: FdStatus,
}

#[derive(Debug, Clone)]
pub struct FdReport {
    pub entries: Vec<FdEntry>,
    pub tolerance: f64,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.status != FdStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &FdEntry> {
        self.entries.iter().filter(|e| e.status == FdStatus::Fail)
    }

    pub fn count(&self, status: FdStatus) -> usize {
        self.entries.iter().filter(|e| e.status == status).count()
    }

    pub fn max_rel_error(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.status == FdStatus::Pass || e.status == FdStatus::Fail)
            .map(|e| e.rel_error)
            .fold(0.0, f64::max)
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Compares `analytic` against `(f(u+h) − f(u−h)) / 2h` for every coordinate.
pub fn fd_check<F>(objective: F, at: &[f64], analytic: &[f64], cfg: &FdConfig) -> FdReport
where
    F: Fn(&[f64]) -> Probe,
{
    assert_eq!(at.len(), analytic.len(), "gradient length");
    assert!(cfg.step > 0.0, "step must be positive");
    let centre = objective(at).kinks;
    let mut point = at.to_vec();
    let entries = (0..at.len())
        .map(|i| {
            let mut h = cfg.step;
            let mut numeric = None;
            for _ in 0..=cfg.retries {
                point[i] = at[i] + h;
                let plus = objective(&point);
                point[i] = at[i] - h;
                let minus = objective(&point);
                point[i] = at[i];
                if plus.kinks == centre && minus.kinks == centre {
                    numeric = Some((plus.value - minus.value) / (2.0 * h));
                    break;
                }
                h /= 10.0;
            }
            let a = analytic[i];
            match numeric {
                None => FdEntry {
                    index: i,
                    analytic: a,
                    numeric: f64::NAN,
                    rel_error: f64::NAN,
                    step: h * 10.0,
                    status: FdStatus::NearKink,
                },
                Some(n) => {
                    let rel = relative_error(a, n);
                    let status = if a.abs().max(n.abs()) <= cfg.min_grad {
                        FdStatus::Negligible
                    } else if rel < cfg.tolerance {
                        FdStatus::Pass
                    } else {
                        FdStatus::Fail
                    };
                    FdEntry {
                        index: i,
                        analytic: a,
                        numeric: n,
                        rel_error: rel,
                        step: h,
                        status,
                    }
                }
            }
        })
        .collect();
    FdReport {
        entries,
        tolerance: cfg.tolerance,
    }
}
