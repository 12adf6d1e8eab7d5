//! Hard-knee compressor with a companded gain smoother.
//!
//! The static gain is computed at audio rate, linearly resampled down by
//! `ds_factor`, run through the one-pole attack/release recursion at the
//! reduced rate, then brought back to audio rate by Hann overlap-add. Only
//! the recursion is sequential, so its cost is `O(L / ds_factor)`.
//!
//! Each resampling step is a fixed linear map; the grids below carry the
//! weights so the same maps (and their transposes) serve both the plain
//! forward pass and the gradient tape.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::signal::{self, DrcParams, GainConvention};

/// A gain curve in dB, at audio rate (`rate_divisor == 1`) or reduced rate.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTrack {
    pub values: Vec<f64>,
    pub rate_divisor: usize,
}

impl GainTrack {
    pub fn audio_rate(values: Vec<f64>) -> Self {
        Self {
            values,
            rate_divisor: 1,
        }
    }
}

/// Slope applied to the overshoot `max(x_dB − T, 0)`.
pub fn static_slope(ratio: f64, convention: GainConvention) -> f64 {
    match convention {
        GainConvention::Reduction => 1.0 / ratio - 1.0,
        GainConvention::Literal => 1.0 / ratio,
    }
}

pub fn drc_static_gain(
    x_db: &[f64],
    threshold_db: f64,
    ratio: f64,
    convention: GainConvention,
) -> Result<GainTrack> {
    if !(ratio >= 1.0) {
        return Err(Error::param("R", format!("ratio must be >= 1, got {ratio}")));
    }
    let slope = static_slope(ratio, convention);
    Ok(GainTrack::audio_rate(
        x_db.iter()
            .map(|&x| if x > threshold_db { slope * (x - threshold_db) } else { 0.0 })
            .collect(),
    ))
}

/// Linear-interpolation sampling positions for the downsampler.
#[derive(Debug, Clone)]
pub struct DownsampleGrid {
    src_len: usize,
    index: Vec<usize>,
    frac: Vec<f64>,
}

impl DownsampleGrid {
    pub fn new(src_len: usize, ds_factor: usize) -> Result<Self> {
        if src_len == 0 {
            return Err(Error::Empty("gain track"));
        }
        if ds_factor == 0 {
            return Err(Error::param("ds_factor", "must be >= 1"));
        }
        let m = src_len.div_ceil(ds_factor);
        let mut index = Vec::with_capacity(m);
        let mut frac = Vec::with_capacity(m);
        for k in 0..m {
            let pos = if m == 1 {
                0.0
            } else {
                (k * (src_len - 1)) as f64 / (m - 1) as f64
            };
            let mut i = pos.floor() as usize;
            let mut f = pos - i as f64;
            if i >= src_len - 1 {
                i = src_len - 1;
                f = 0.0;
            }
            index.push(i);
            frac.push(f);
        }
        Ok(Self {
            src_len,
            index,
            frac,
        })
    }

    pub fn out_len(&self) -> usize {
        self.index.len()
    }

    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        debug_assert_eq!(g.len(), self.src_len);
        self.index
            .iter()
            .zip(&self.frac)
            .map(|(&i, &f)| {
                if f == 0.0 {
                    g[i]
                } else {
                    (1.0 - f) * g[i] + f * g[i + 1]
                }
            })
            .collect()
    }

    /// Transpose of [`apply`](Self::apply).
    pub fn adjoint(&self, grad_out: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.src_len];
        for ((&i, &f), &g) in self.index.iter().zip(&self.frac).zip(grad_out) {
            out[i] += (1.0 - f) * g;
            if f != 0.0 {
                out[i + 1] += f * g;
            }
        }
        out
    }
}

pub fn downsample_gain(g: &GainTrack, ds_factor: usize) -> Result<GainTrack> {
    let grid = DownsampleGrid::new(g.values.len(), ds_factor)?;
    Ok(GainTrack {
        values: grid.apply(&g.values),
        rate_divisor: g.rate_divisor * ds_factor,
    })
}

/// Output of the attack/release recursion with the branch taken at each step.
#[derive(Debug, Clone)]
pub struct Smoothed {
    pub values: Vec<f64>,
    /// `true` where the attack coefficient was used. Entry 0 is unused.
    pub attack: Vec<bool>,
}

fn check_alpha(name: &'static str, a: f64) -> Result<()> {
    // Zero is admitted here: it is the memoryless limit of the recursion.
    if (0.0..1.0).contains(&a) {
        Ok(())
    } else {
        Err(Error::param(name, format!("must lie in (0, 1), got {a}")))
    }
}

pub fn smooth_values(g_d: &[f64], alpha_attack: f64, alpha_release: f64) -> Result<Smoothed> {
    let mut out = Smoothed {
        values: Vec::with_capacity(g_d.len()),
        attack: Vec::with_capacity(g_d.len()),
    };
    smooth_values_into(g_d, alpha_attack, alpha_release, &mut out)?;
    Ok(out)
}

/// As [`smooth_values`], reusing the buffers of `out`.
pub fn smooth_values_into(g_d: &[f64], alpha_attack: f64, alpha_release: f64, out: &mut Smoothed) -> Result<()> {
    check_alpha("alpha_A", alpha_attack)?;
    check_alpha("alpha_R", alpha_release)?;
    let Some(&first) = g_d.first() else {
        return Err(Error::Empty("gain track"));
    };
    out.values.clear();
    out.attack.clear();
    let mut prev = first;
    out.values.push(first);
    out.attack.push(false);
    for &x in &g_d[1..] {
        let up = x > prev;
        let a = if up { alpha_attack } else { alpha_release };
        prev = a * prev + (1.0 - a) * x;
        out.values.push(prev);
        out.attack.push(up);
    }
    Ok(())
}

pub fn smooth_gain(g_d: &GainTrack, alpha_attack: f64, alpha_release: f64) -> Result<GainTrack> {
    Ok(GainTrack {
        values: smooth_values(&g_d.values, alpha_attack, alpha_release)?.values,
        rate_divisor: g_d.rate_divisor,
    })
}

/// Gradients of the smoother with respect to (input track, α_A, α_R).
pub fn smooth_adjoint(
    g_d: &[f64],
    fwd: &Smoothed,
    alpha_attack: f64,
    alpha_release: f64,
    grad_out: &[f64],
) -> (Vec<f64>, f64, f64) {
    let mut grad_in = vec![0.0; g_d.len()];
    let (ga, gr) = smooth_adjoint_into(g_d, fwd, alpha_attack, alpha_release, grad_out, &mut grad_in);
    (grad_in, ga, gr)
}

/// As [`smooth_adjoint`], writing the input gradient into `grad_in`.
pub fn smooth_adjoint_into(
    g_d: &[f64],
    fwd: &Smoothed,
    alpha_attack: f64,
    alpha_release: f64,
    grad_out: &[f64],
    grad_in: &mut [f64],
) -> (f64, f64) {
    let n = g_d.len();
    let (mut ga, mut gr) = (0.0, 0.0);
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let lam = grad_out[t] + carry;
        if t == 0 {
            grad_in[0] = lam;
            break;
        }
        let a = if fwd.attack[t] { alpha_attack } else { alpha_release };
        grad_in[t] = (1.0 - a) * lam;
        let da = lam * (fwd.values[t - 1] - g_d[t]);
        if fwd.attack[t] {
            ga += da;
        } else {
            gr += da;
        }
        carry = a * lam;
    }
    (ga, gr)
}

/// Hann overlap-add weights: each output sample blends at most two
/// neighbouring reduced-rate values.
#[derive(Debug, Clone)]
pub struct UpsampleGrid {
    src_len: usize,
    left: Vec<usize>,
    w_left: Vec<f64>,
    w_right: Vec<f64>,
}

impl UpsampleGrid {
    pub fn new(src_len: usize, us_factor: usize, target_len: usize) -> Result<Self> {
        if src_len == 0 {
            return Err(Error::Empty("gain track"));
        }
        if us_factor == 0 {
            return Err(Error::param("us_factor", "must be >= 1"));
        }
        if target_len > src_len * us_factor {
            return Err(Error::param(
                "us_factor",
                format!(
                    "{src_len} values at hop {us_factor} cover {} samples, {target_len} requested",
                    src_len * us_factor
                ),
            ));
        }
        let hop = us_factor as f64;
        let hann = |d: f64| 0.5 * (1.0 + (PI * d / hop).cos());
        let mut left = Vec::with_capacity(target_len);
        let mut w_left = Vec::with_capacity(target_len);
        let mut w_right = Vec::with_capacity(target_len);
        for t in 0..target_len {
            let k = t / us_factor;
            let d = (t - k * us_factor) as f64;
            let wl = hann(d);
            let wr = if k + 1 < src_len && d > 0.0 { hann(d - hop) } else { 0.0 };
            let norm = wl + wr;
            left.push(k);
            w_left.push(wl / norm);
            w_right.push(wr / norm);
        }
        Ok(Self {
            src_len,
            left,
            w_left,
            w_right,
        })
    }

    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        debug_assert_eq!(g.len(), self.src_len);
        self.left
            .iter()
            .zip(self.w_left.iter().zip(&self.w_right))
            .map(|(&k, (&wl, &wr))| {
                let mut v = wl * g[k];
                if wr != 0.0 {
                    v += wr * g[k + 1];
                }
                v
            })
            .collect()
    }

    pub fn adjoint(&self, grad_out: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.src_len];
        for ((&k, (&wl, &wr)), &g) in self
            .left
            .iter()
            .zip(self.w_left.iter().zip(&self.w_right))
            .zip(grad_out)
        {
            out[k] += wl * g;
            if wr != 0.0 {
                out[k + 1] += wr * g;
            }
        }
        out
    }
}

pub fn upsample_gain(g_ds: &GainTrack, us_factor: usize, target_len: usize) -> Result<GainTrack> {
    let grid = UpsampleGrid::new(g_ds.values.len(), us_factor, target_len)?;
    Ok(GainTrack {
        values: grid.apply(&g_ds.values),
        rate_divisor: (g_ds.rate_divisor / us_factor).max(1),
    })
}

/// Every intermediate of one compressor pass.
#[derive(Debug, Clone)]
pub struct DrcTrace {
    pub x_db: Vec<f64>,
    pub static_gain: Vec<f64>,
    pub downsampled: Vec<f64>,
    pub smoothed: Smoothed,
    pub upsampled: Vec<f64>,
    pub output: Vec<f64>,
}

pub fn drc_trace(
    x: &[f64],
    p: &DrcParams,
    ds_factor: usize,
    convention: GainConvention,
) -> Result<DrcTrace> {
    p.validate()?;
    if x.is_empty() {
        return Err(Error::Empty("compressor input"));
    }
    let x_db = signal::to_db(x);
    let static_gain = drc_static_gain(&x_db, p.threshold_db, p.ratio, convention)?.values;
    let down = DownsampleGrid::new(x.len(), ds_factor)?;
    let downsampled = down.apply(&static_gain);
    let smoothed = smooth_values(&downsampled, p.alpha_attack, p.alpha_release)?;
    let up = UpsampleGrid::new(down.out_len(), ds_factor, x.len())?;
    let upsampled = up.apply(&smoothed.values);
    let sign = signal::signs(x);
    let output = x_db
        .iter()
        .zip(&upsampled)
        .zip(&sign)
        .map(|((&xd, &g), &s)| signal::db_to_amp(xd + g + p.g_makeup, s))
        .collect();
    Ok(DrcTrace {
        x_db,
        static_gain,
        downsampled,
        smoothed,
        upsampled,
        output,
    })
}

pub fn drc(
    x: &[f64],
    p: &DrcParams,
    ds_factor: usize,
    convention: GainConvention,
) -> Result<Vec<f64>> {
    Ok(drc_trace(x, p, ds_factor, convention)?.output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn static_gain_examples() {
        let t = -20.0;
        let g = drc_static_gain(&[t - 10.0], t, 4.0, GainConvention::Reduction).unwrap();
        assert_eq!(g.values, vec![0.0]);
        let g = drc_static_gain(&[-50.0, -3.0, 0.0], t, 1.0, GainConvention::Reduction).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
        let g = drc_static_gain(&[t + 12.0], t, 4.0, GainConvention::Reduction).unwrap();
        assert!((g.values[0] + 9.0).abs() < 1e-12);
        let g = drc_static_gain(&[t + 12.0], t, 4.0, GainConvention::Literal).unwrap();
        assert!((g.values[0] - 3.0).abs() < 1e-12);
        assert!(drc_static_gain(&[0.0], t, 0.5, GainConvention::Reduction).is_err());
    }

    #[test]
    fn downsample_examples() {
        let g = GainTrack::audio_rate(vec![0.0, -2.0, -4.0, -6.0]);
        assert_eq!(downsample_gain(&g, 1).unwrap().values, g.values);
        let d = downsample_gain(&g, 2).unwrap();
        assert_eq!(d.values, vec![0.0, -6.0]);
        assert_eq!(d.rate_divisor, 2);
        let c = GainTrack::audio_rate(vec![-3.5; 101]);
        for ds in [1, 2, 3, 7, 16, 200] {
            let d = downsample_gain(&c, ds).unwrap();
            assert_eq!(d.values.len(), 101usize.div_ceil(ds));
            assert!(d.values.iter().all(|&v| (v + 3.5).abs() < 1e-12));
        }
        assert!(downsample_gain(&GainTrack::audio_rate(vec![]), 2).is_err());
    }

    #[test]
    fn smooth_examples() {
        let c = vec![-4.0; 50];
        assert!(close(&smooth_values(&c, 0.9, 0.3).unwrap().values, &c, 1e-12));
        let x = vec![0.0, -3.0, 1.0, -7.0, 2.0];
        assert_eq!(smooth_values(&x, 0.0, 0.0).unwrap().values, x);
        let y = smooth_values(&[0.0, -6.0], 0.2, 0.5).unwrap().values;
        assert_eq!(y, vec![0.0, -3.0]);
        assert!(smooth_values(&x, 1.0, 0.5).is_err());
        assert!(smooth_values(&x, 0.5, -0.1).is_err());
    }

    #[test]
    fn upsample_examples() {
        for us in [1, 2, 4, 8, 16, 64] {
            let m = 13;
            let target = m * us - us / 2;
            let y = upsample_gain(
                &GainTrack {
                    values: vec![-2.5; m],
                    rate_divisor: us,
                },
                us,
                target,
            )
            .unwrap();
            assert_eq!(y.values.len(), target);
            assert!(y.values.iter().all(|&v| (v + 2.5).abs() < 1e-12), "us={us}");
        }
        let x = vec![0.0, -1.0, 4.0];
        assert!(close(
            &upsample_gain(&GainTrack::audio_rate(x.clone()), 1, 3).unwrap().values,
            &x,
            1e-15
        ));
        assert!(UpsampleGrid::new(3, 4, 13).is_err());
    }

    /// Brute-force overlap-add with explicit Hann weights on every window.
    fn overlap_add_oracle(g: &[f64], us: usize, target: usize) -> Vec<f64> {
        let mut num = vec![0.0; target];
        let mut den = vec![0.0; target];
        for (k, &v) in g.iter().enumerate() {
            let centre = (k * us) as f64;
            for (t, (n, d)) in num.iter_mut().zip(den.iter_mut()).enumerate() {
                let dist = t as f64 - centre;
                if dist.abs() < us as f64 {
                    let w = 0.5 - 0.5 * (2.0 * PI * (dist + us as f64) / (2 * us) as f64).cos();
                    *n += w * v;
                    *d += w;
                }
            }
        }
        num.iter().zip(&den).map(|(n, d)| n / d).collect()
    }

    #[test]
    fn two_point_upsample_matches_oracle() {
        let y = upsample_gain(&GainTrack::audio_rate(vec![0.0, -6.0]), 4, 8)
            .unwrap()
            .values;
        let expected = overlap_add_oracle(&[0.0, -6.0], 4, 8);
        assert!(close(&y, &expected, 1e-12), "{y:?} vs {expected:?}");
        assert!(y.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(y[0], 0.0);
        assert!((y[7] + 6.0).abs() < 1e-12);
    }

    #[test]
    fn drc_identity_at_unity_ratio() {
        let x: Vec<f64> = (0..500).map(|i| 0.9 * ((i as f64) * 0.37).sin() + 0.05).collect();
        let p = DrcParams::new(-30.0, 1.0, 0.7, 0.9, 0.0).unwrap();
        for ds in [1, 4, 16] {
            let y = drc(&x, &p, ds, GainConvention::Reduction).unwrap();
            assert!(close(&y, &x, 1e-12));
        }
    }

    #[test]
    fn drc_makeup_gain() {
        let x = vec![0.3, -0.2, 0.01, -0.7];
        let p = DrcParams::new(-30.0, 1.0, 0.7, 0.9, 6.0).unwrap();
        let y = drc(&x, &p, 1, GainConvention::Reduction).unwrap();
        let k = 10f64.powf(6.0 / 20.0);
        assert!((k - 1.995_262_3).abs() < 1e-6);
        for (a, b) in x.iter().zip(&y) {
            assert!((b - a * k).abs() < 1e-12);
        }
    }

    /// Per-sample reference compressor at ds_factor = 1, written from scratch.
    fn step_oracle(x: &[f64], p: &DrcParams) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len());
        let mut state: Option<f64> = None;
        for &v in x {
            let xdb = 20.0 * v.abs().max(1e-5).log10();
            let g = if xdb > p.threshold_db {
                (1.0 / p.ratio - 1.0) * (xdb - p.threshold_db)
            } else {
                0.0
            };
            let s = match state {
                None => g,
                Some(prev) if g > prev => p.alpha_attack * prev + (1.0 - p.alpha_attack) * g,
                Some(prev) => p.alpha_release * prev + (1.0 - p.alpha_release) * g,
            };
            state = Some(s);
            out.push(v.signum() * 10f64.powf((xdb + s + p.g_makeup) / 20.0));
        }
        out
    }

    #[test]
    fn step_response_overshoots_then_settles_nine_db_down() {
        let t = -20.0;
        let lo = 10f64.powf(-30.0 / 20.0);
        let hi = 10f64.powf((t + 12.0) / 20.0);
        let x: Vec<f64> = (0..4000).map(|i| if i < 1000 { lo } else { hi }).collect();
        let p = DrcParams::new(t, 4.0, 0.99, 0.99, 0.0).unwrap();
        let y = drc(&x, &p, 1, GainConvention::Reduction).unwrap();
        assert!(close(&y, &step_oracle(&x, &p), 1e-12));
        // before the step the level is below threshold: untouched
        assert!((y[500] - lo).abs() < 1e-12);
        // right after the step the reduction has not engaged yet
        assert!(y[1000] > 0.9 * hi);
        let settled_db = 20.0 * y[3999].log10();
        assert!((settled_db - (t + 3.0)).abs() < 1e-3, "{settled_db}");
    }

    proptest! {
        #[test]
        fn static_gain_never_positive(xs in proptest::collection::vec(-120.0f64..20.0, 1..64),
                                      t in -60.0f64..0.0, r in 1.0001f64..30.0) {
            let g = drc_static_gain(&xs, t, r, GainConvention::Reduction).unwrap();
            for (x, v) in xs.iter().zip(&g.values) {
                prop_assert!(*v <= 0.0);
                prop_assert_eq!(*v == 0.0, *x <= t);
            }
        }

        #[test]
        fn smoother_stays_in_input_range(xs in proptest::collection::vec(-40.0f64..0.0, 1..200),
                                         a in 0.0f64..0.999, r in 0.0f64..0.999) {
            let y = smooth_values(&xs, a, r).unwrap().values;
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in y {
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }

        #[test]
        fn resampling_adjoints_are_transposes(len in 2usize..300, ds in 1usize..20, seed in 0u64..1000) {
            let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5 };
            let down = DownsampleGrid::new(len, ds).unwrap();
            let up = UpsampleGrid::new(down.out_len(), ds, len).unwrap();
            let x: Vec<f64> = (0..len).map(|_| next()).collect();
            let z: Vec<f64> = (0..down.out_len()).map(|_| next()).collect();
            let lhs: f64 = down.apply(&x).iter().zip(&z).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&down.adjoint(&z)).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() < 1e-9);
            let lhs: f64 = up.apply(&z).iter().zip(&x).map(|(a, b)| a * b).sum();
            let rhs: f64 = z.iter().zip(&up.adjoint(&x)).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}
