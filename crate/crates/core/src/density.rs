//! Gaussian kernel density estimates on the integer grid `0..=100`.
//!
//! Each kernel is truncated to the grid and renormalized on its own before
//! the kernels are averaged, so every sample contributes exactly `1/n` of
//! the mass.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scalar::log_sum_exp;

pub const GRID_MAX: usize = 100;
/// Smallest bandwidth used; degenerate samples are floored to it.
pub const BANDWIDTH_FLOOR: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("kernel density estimation needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {0} is not finite")]
    NonFinite(usize),
    #[error("unknown bandwidth rule '{0}' (expected scott, silverman or isj)")]
    UnknownRule(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BandwidthRule {
    #[default]
    Scott,
    Silverman,
    /// Improved Sheather-Jones plug-in (Botev's diffusion estimator).
    SheatherJones,
}

impl fmt::Display for BandwidthRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BandwidthRule::Scott => "scott",
            BandwidthRule::Silverman => "silverman",
            BandwidthRule::SheatherJones => "isj",
        })
    }
}

impl FromStr for BandwidthRule {
    type Err = DensityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "scott" => Ok(BandwidthRule::Scott),
            "silverman" => Ok(BandwidthRule::Silverman),
            "isj" | "sj" | "sheather-jones" | "sheatherjones" => Ok(BandwidthRule::SheatherJones),
            _ => Err(DensityError::UnknownRule(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KDEModel {
    /// Sorted samples.
    samples: Vec<f64>,
    pub bandwidth: f64,
    pub rule: BandwidthRule,
    /// Set when the bandwidth rule collapsed and the floor was applied.
    pub floored: bool,
}

impl KDEModel {
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Model with an explicit bandwidth.
    pub fn with_bandwidth(samples: &[f64], bandwidth: f64) -> Result<Self, DensityError> {
        let samples = checked_sorted(samples)?;
        Ok(KDEModel {
            samples,
            bandwidth: bandwidth.max(BANDWIDTH_FLOOR),
            rule: BandwidthRule::Scott,
            floored: bandwidth < BANDWIDTH_FLOOR,
        })
    }
}

fn checked_sorted(samples: &[f64]) -> Result<Vec<f64>, DensityError> {
    if samples.len() < 2 {
        return Err(DensityError::TooFewSamples(samples.len()));
    }
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(DensityError::NonFinite(i));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

pub fn fit_kde(samples: &[f64], rule: BandwidthRule) -> Result<KDEModel, DensityError> {
    let samples = checked_sorted(samples)?;
    let raw = match rule {
        BandwidthRule::Scott => scott_bandwidth(&samples),
        BandwidthRule::Silverman => silverman_bandwidth(&samples),
        BandwidthRule::SheatherJones => isj_bandwidth(&samples),
    };
    let floored = !(raw >= BANDWIDTH_FLOOR);
    if floored {
        log::warn!("degenerate sample: {rule} bandwidth {raw} floored to {BANDWIDTH_FLOOR}");
    }
    Ok(KDEModel {
        samples,
        bandwidth: if floored { BANDWIDTH_FLOOR } else { raw },
        rule,
        floored,
    })
}

/// Normalized density over `0..=GRID_MAX`.
pub fn evaluate(model: &KDEModel) -> Vec<f64> {
    let grid: Vec<f64> = (0..=GRID_MAX).map(|g| g as f64).collect();
    let inv = 1.0 / (2.0 * model.bandwidth * model.bandwidth);
    let mut density = vec![0.0; grid.len()];
    let mut logk = vec![0.0; grid.len()];
    for &s in &model.samples {
        for (l, &g) in logk.iter_mut().zip(&grid) {
            *l = -(g - s) * (g - s) * inv;
        }
        let lz = log_sum_exp(&logk);
        for (d, &l) in density.iter_mut().zip(&logk) {
            *d += (l - lz).exp();
        }
    }
    let total: f64 = density.iter().sum();
    density.iter_mut().for_each(|d| *d /= total);
    density
}

fn std_dev(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn scott_bandwidth(samples: &[f64]) -> f64 {
    std_dev(samples) * (samples.len() as f64).powf(-0.2)
}

/// `0.9 min(sd, IQR / 1.34) n^(-1/5)`; falls back to `sd` when the IQR is 0.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sd = std_dev(&sorted);
    let iqr = percentile(&sorted, 0.75) - percentile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (samples.len() as f64).powf(-0.2)
}

const ISJ_BINS: usize = 1 << 10;

/// Improved Sheather-Jones bandwidth from a binned DCT of the data.
pub fn isj_bandwidth(samples: &[f64]) -> f64 {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span <= 0.0 {
        return 0.0;
    }
    let (lo, hi) = (lo - 0.1 * span, hi + 0.1 * span);
    let range = hi - lo;

    let mut uniq = samples.to_vec();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    let n_unique = uniq.len() as f64;

    let mut hist = vec![0.0; ISJ_BINS];
    // linear binning onto bin centres keeps the estimate reflection-symmetric
    let last = (ISJ_BINS - 1) as f64;
    for &x in samples {
        let u = ((x - lo) / range * ISJ_BINS as f64 - 0.5).clamp(0.0, last);
        let j = u.floor();
        let w = u - j;
        let j = j as usize;
        hist[j] += 1.0 - w;
        if w > 0.0 {
            hist[j + 1] += w;
        }
    }
    let total = samples.len() as f64;
    hist.iter_mut().for_each(|h| *h /= total);

    let a = dct2(&hist);
    let i_sq: Vec<f64> = (1..ISJ_BINS).map(|i| (i * i) as f64).collect();
    let a2: Vec<f64> = a[1..].iter().map(|x| x * x).collect();

    let fixed = |t: f64| t - isj_fixed_point(t, n_unique, &i_sq, &a2);
    let t = bisect(fixed, 0.0, 0.1).unwrap_or_else(|| 0.28 * n_unique.powf(-0.4));
    t.sqrt() * range
}

/// Type-II DCT, unnormalized: `y_k = 2 sum_n x_n cos(pi k (2n + 1) / 2N)`.
fn dct2(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            2.0 * x
                .iter()
                .enumerate()
                .map(|(j, &v)| v * (PI * k as f64 * (2 * j + 1) as f64 / (2 * n) as f64).cos())
                .sum::<f64>()
        })
        .collect()
}

fn isj_fixed_point(t: f64, n: f64, i_sq: &[f64], a2: &[f64]) -> f64 {
    const L: i32 = 7;
    let functional = |s: i32, time: f64| -> f64 {
        0.5 * PI.powi(2 * s)
            * i_sq
                .iter()
                .zip(a2)
                .map(|(&i, &a)| i.powi(s) * a * (-i * PI * PI * time).exp())
                .sum::<f64>()
    };
    let mut f = functional(L, t);
    for s in (2..L).rev() {
        let k0 = (1..2 * s).step_by(2).map(f64::from).product::<f64>() / (2.0 * PI).sqrt();
        let c = (1.0 + 0.5f64.powf(f64::from(s) + 0.5)) / 3.0;
        let time = (2.0 * c * k0 / (n * f)).powf(2.0 / (3.0 + 2.0 * f64::from(s)));
        f = functional(s, time);
    }
    (2.0 * n * PI.sqrt() * f).powf(-0.4)
}

fn bisect(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<f64> {
    let (mut a, mut b) = (lo + 1e-12, hi);
    let (mut fa, fb) = (f(a), f(b));
    if !fa.is_finite() || !fb.is_finite() || fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if !fm.is_finite() {
            return None;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    Some(0.5 * (a + b))
}
