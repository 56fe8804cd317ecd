//! Frequency-based prediction of per-sample retrieval success.
//!
//! A sample's frequency is the geometric mean of its concepts' pretraining
//! frequencies. After IQR outlier removal on that quantity, a logistic
//! model `P(y = 1) = σ(β0 + β1 · log10 f_avg)` is fitted by iteratively
//! reweighted least squares with a small ridge term on the slope, and
//! bootstrap replicates give percentile confidence intervals. The slope's
//! significance comes from a likelihood-ratio test against the
//! intercept-only model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::PredictorError;

/// Geometric mean of positive counts, computed in log space.
pub fn sample_frequency(freqs: &[u64]) -> Result<f64, PredictorError> {
    if let Some(index) = freqs.iter().position(|&f| f == 0) {
        return Err(PredictorError::NonPositiveFrequency { index, value: 0.0 });
    }
    let as_real: Vec<f64> = freqs.iter().map(|&f| f as f64).collect();
    geometric_mean(&as_real)
}

/// Geometric mean of positive reals, computed in log space.
pub fn geometric_mean(values: &[f64]) -> Result<f64, PredictorError> {
    if values.is_empty() {
        return Err(PredictorError::EmptyFrequencies);
    }
    let mut log_sum = 0.0;
    for (index, &value) in values.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(PredictorError::NonPositiveFrequency { index, value });
        }
        log_sum += value.ln();
    }
    Ok((log_sum / values.len() as f64).exp())
}

/// Quantile of ascending `sorted` by linear interpolation between order
/// statistics at position `(n - 1) · p`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IqrSpace {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IqrConfig {
    pub space: IqrSpace,
    pub multiplier: f64,
}

impl Default for IqrConfig {
    fn default() -> Self {
        Self {
            space: IqrSpace::Log,
            multiplier: 1.5,
        }
    }
}

/// Keep-mask of values inside `[Q1 − m·IQR, Q3 + m·IQR]`, aligned to input
/// order. In log space the fences are computed on `log10(v)`.
pub fn iqr_filter(values: &[f64], cfg: IqrConfig) -> Result<Vec<bool>, PredictorError> {
    if values.len() < 4 {
        return Err(PredictorError::TooFewValues {
            n: values.len(),
            min: 4,
        });
    }
    if !(cfg.multiplier > 0.0) {
        return Err(PredictorError::InvalidConfig("IQR multiplier must be positive".into()));
    }
    let transformed = values
        .iter()
        .enumerate()
        .map(|(index, &v)| match cfg.space {
            IqrSpace::Log if v > 0.0 && v.is_finite() => Ok(v.log10()),
            IqrSpace::Linear if v.is_finite() => Ok(v),
            _ => Err(PredictorError::NonPositiveFrequency { index, value: v }),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut sorted = transformed.clone();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - cfg.multiplier * iqr, q3 + cfg.multiplier * iqr);
    Ok(transformed.iter().map(|&t| t >= lo && t <= hi).collect())
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Settings for [`fit_logistic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub bootstrap: usize,
    pub seed: u64,
    pub ci_level: f64,
    pub ridge: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            bootstrap: 1000,
            seed: 0,
            ci_level: 0.95,
            ridge: 1e-6,
            max_iter: 100,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub beta0: f64,
    pub beta1: f64,
    pub n_used: usize,
    pub bootstrap_betas: Vec<(f64, f64)>,
    pub ci_level: f64,
    /// Percentile interval for `beta0`, `None` without bootstrap replicates.
    pub ci_beta0: Option<(f64, f64)>,
    pub ci_beta1: Option<(f64, f64)>,
    pub p_value: f64,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    pub converged: bool,
}

impl LogisticFit {
    /// `σ(beta0 + beta1 · log10 f_avg)`.
    pub fn predict(&self, f_avg: f64) -> f64 {
        predict(self.beta0, self.beta1, f_avg)
    }

    /// Percentile band of the predicted probability over bootstrap replicates.
    pub fn predict_band(&self, f_avg: f64) -> Option<(f64, f64)> {
        if self.bootstrap_betas.is_empty() {
            return None;
        }
        let mut preds: Vec<f64> = self
            .bootstrap_betas
            .iter()
            .map(|&(b0, b1)| predict(b0, b1, f_avg))
            .collect();
        preds.sort_by(f64::total_cmp);
        let tail = (1.0 - self.ci_level) / 2.0;
        Some((quantile(&preds, tail), quantile(&preds, 1.0 - tail)))
    }
}

pub fn predict(beta0: f64, beta1: f64, f_avg: f64) -> f64 {
    sigmoid(beta0 + beta1 * f_avg.log10())
}

#[derive(Debug, Clone, Copy)]
struct Irls {
    beta0: f64,
    beta1: f64,
    converged: bool,
}

/// Penalized log-likelihood with per-point multiplicities.
fn objective(x: &[f64], y: &[f64], w: &[f64], b0: f64, b1: f64, ridge: f64) -> f64 {
    log_likelihood(x, y, w, b0, b1) - 0.5 * ridge * b1 * b1
}

fn log_likelihood(x: &[f64], y: &[f64], w: &[f64], b0: f64, b1: f64) -> f64 {
    x.iter()
        .zip(y)
        .zip(w)
        .map(|((&xi, &yi), &wi)| {
            let z = b0 + b1 * xi;
            wi * (yi * z - softplus(z))
        })
        .sum()
}

fn irls(x: &[f64], y: &[f64], w: &[f64], ridge: f64, max_iter: usize, tol: f64) -> Irls {
    let total: f64 = w.iter().sum();
    let positives: f64 = y.iter().zip(w).map(|(yi, wi)| yi * wi).sum();
    let mean = (positives / total).clamp(1e-12, 1.0 - 1e-12);
    let (mut b0, mut b1) = ((mean / (1.0 - mean)).ln(), 0.0);
    let mut current = objective(x, y, w, b0, b1, ridge);
    for _ in 0..max_iter {
        let (mut g0, mut g1) = (0.0, -ridge * b1);
        let (mut h00, mut h01, mut h11) = (0.0, 0.0, ridge);
        for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
            let p = sigmoid(b0 + b1 * xi);
            let r = wi * (yi - p);
            let v = wi * p * (1.0 - p);
            g0 += r;
            g1 += r * xi;
            h00 += v;
            h01 += v * xi;
            h11 += v * xi * xi;
        }
        let det = h00 * h11 - h01 * h01;
        if !(det > 0.0) || !det.is_finite() {
            return Irls {
                beta0: b0,
                beta1: b1,
                converged: false,
            };
        }
        let d0 = (h11 * g0 - h01 * g1) / det;
        let d1 = (h00 * g1 - h01 * g0) / det;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let (n0, n1) = (b0 + step * d0, b1 + step * d1);
            let next = objective(x, y, w, n0, n1, ridge);
            if next >= current - 1e-12 * current.abs() {
                b0 = n0;
                b1 = n1;
                current = next;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        let moved = step * d0.abs().max(d1.abs());
        if !accepted || moved < tol * (1.0 + b0.abs().max(b1.abs())) {
            return Irls {
                beta0: b0,
                beta1: b1,
                converged: accepted,
            };
        }
    }
    Irls {
        beta0: b0,
        beta1: b1,
        converged: false,
    }
}

/// Fits `P(y = 1) = σ(β0 + β1 · log10 f_avg)` to `(y, f_avg)` pairs with
/// bootstrap replicates.
///
/// Replicate `b` draws its resample from its own ChaCha stream `b` under
/// `cfg.seed`, so results do not depend on thread scheduling.
pub fn fit_logistic(data: &[(bool, f64)], cfg: &FitConfig) -> Result<LogisticFit, PredictorError> {
    if data.len() < 2 {
        return Err(PredictorError::TooFewValues {
            n: data.len(),
            min: 2,
        });
    }
    if !(cfg.ci_level > 0.0 && cfg.ci_level < 1.0) {
        return Err(PredictorError::InvalidConfig("ci_level must lie in (0, 1)".into()));
    }
    if !(cfg.ridge >= 0.0) {
        return Err(PredictorError::InvalidConfig("ridge must be non-negative".into()));
    }
    let x = data
        .iter()
        .enumerate()
        .map(|(index, &(_, f))| {
            if f > 0.0 && f.is_finite() {
                Ok(f.log10())
            } else {
                Err(PredictorError::NonPositiveFrequency { index, value: f })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let y: Vec<f64> = data.iter().map(|&(hit, _)| f64::from(u8::from(hit))).collect();
    let positives = y.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == y.len() {
        return Err(PredictorError::DegenerateLabels {
            value: u8::from(positives > 0),
        });
    }

    let ones = vec![1.0; x.len()];
    let base = irls(&x, &y, &ones, cfg.ridge, cfg.max_iter, cfg.tol);
    let ll = log_likelihood(&x, &y, &ones, base.beta0, base.beta1);
    let mean = positives as f64 / y.len() as f64;
    let ll_null = positives as f64 * mean.ln() + (y.len() - positives) as f64 * (1.0 - mean).ln();
    let statistic = (2.0 * (ll - ll_null)).max(0.0);
    let p_value = ChiSquared::new(1.0)
        .expect("one degree of freedom is valid")
        .sf(statistic)
        .clamp(0.0, 1.0);

    let bootstrap_betas = (0..cfg.bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let n = x.len();
            let mut weights = vec![0.0; n];
            for _attempt in 0..1000 {
                weights.iter_mut().for_each(|w| *w = 0.0);
                for _ in 0..n {
                    weights[rng.gen_range(0..n)] += 1.0;
                }
                let pos: f64 = weights.iter().zip(&y).map(|(w, yi)| w * yi).sum();
                if pos > 0.0 && pos < n as f64 {
                    let fit = irls(&x, &y, &weights, cfg.ridge, cfg.max_iter, cfg.tol);
                    return Ok((fit.beta0, fit.beta1));
                }
            }
            Err(PredictorError::DegenerateLabels {
                value: u8::from(positives * 2 > n),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let interval = |pick: fn(&(f64, f64)) -> f64| {
        if bootstrap_betas.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = bootstrap_betas.iter().map(pick).collect();
        v.sort_by(f64::total_cmp);
        let tail = (1.0 - cfg.ci_level) / 2.0;
        Some((quantile(&v, tail), quantile(&v, 1.0 - tail)))
    };

    Ok(LogisticFit {
        beta0: base.beta0,
        beta1: base.beta1,
        n_used: data.len(),
        ci_beta0: interval(|b| b.0),
        ci_beta1: interval(|b| b.1),
        bootstrap_betas,
        ci_level: cfg.ci_level,
        p_value,
        log_likelihood: ll,
        null_log_likelihood: ll_null,
        converged: base.converged,
    })
}

/// A fit together with the IQR step that preceded it.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredFit {
    pub fit: LogisticFit,
    pub n_dropped_iqr: usize,
    pub keep_mask: Vec<bool>,
}

/// IQR-filters on `f_avg`, then fits the kept points.
pub fn filter_and_fit(
    data: &[(bool, f64)],
    iqr: IqrConfig,
    cfg: &FitConfig,
) -> Result<FilteredFit, PredictorError> {
    let freqs: Vec<f64> = data.iter().map(|&(_, f)| f).collect();
    let keep_mask = iqr_filter(&freqs, iqr)?;
    let kept: Vec<(bool, f64)> = data
        .iter()
        .zip(&keep_mask)
        .filter(|(_, &k)| k)
        .map(|(&d, _)| d)
        .collect();
    let fit = fit_logistic(&kept, cfg)?;
    Ok(FilteredFit {
        n_dropped_iqr: data.len() - kept.len(),
        fit,
        keep_mask,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallBin {
    pub lo_log10: f64,
    pub hi_log10: f64,
    pub center_log10: f64,
    /// `None` for an empty bin.
    pub mean_recall: Option<f64>,
    pub count: usize,
}

impl RecallBin {
    pub fn center(&self) -> f64 {
        10f64.powf(self.center_log10)
    }
}

/// Mean success per equal-width bin of `log10 f_avg`.
///
/// The last bin is closed on the right. When every point has the same
/// frequency all of them land in the first bin.
pub fn binned_recall(data: &[(bool, f64)], n_bins: usize) -> Result<Vec<RecallBin>, PredictorError> {
    if n_bins < 2 {
        return Err(PredictorError::InvalidConfig("need at least two bins".into()));
    }
    if data.is_empty() {
        return Err(PredictorError::TooFewValues { n: 0, min: 1 });
    }
    let logs = data
        .iter()
        .enumerate()
        .map(|(index, &(_, f))| {
            if f > 0.0 && f.is_finite() {
                Ok(f.log10())
            } else {
                Err(PredictorError::NonPositiveFrequency { index, value: f })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let mut hits = vec![0usize; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (&l, &(y, _)) in logs.iter().zip(data) {
        let bin = if width > 0.0 {
            (((l - lo) / width) as usize).min(n_bins - 1)
        } else {
            0
        };
        counts[bin] += 1;
        hits[bin] += usize::from(y);
    }
    Ok((0..n_bins)
        .map(|i| {
            let b_lo = lo + width * i as f64;
            let b_hi = if i + 1 == n_bins { hi } else { lo + width * (i + 1) as f64 };
            RecallBin {
                lo_log10: b_lo,
                hi_log10: b_hi,
                center_log10: 0.5 * (b_lo + b_hi),
                mean_recall: (counts[i] > 0).then(|| hits[i] as f64 / counts[i] as f64),
                count: counts[i],
            }
        })
        .collect())
}
