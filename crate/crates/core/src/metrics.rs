//! Accuracy loss: mean relative error against the golden run, with per-point
//! errors capped at 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("approximate output has {approx} points but the golden output has {golden}")]
    LengthMismatch { approx: usize, golden: usize },
    #[error("golden output point {0} is not finite")]
    GoldenNotFinite(usize),
    #[error("histogram thresholds must be ascending")]
    UnsortedThresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub mre: f64,
    pub errors: Vec<f64>,
}

/// Capped relative error of one point. A zero golden value is matched only
/// by an exact zero.
#[inline]
pub fn relative_error(approx: f64, golden: f64) -> f64 {
    if !approx.is_finite() {
        return 1.0;
    }
    if golden == 0.0 {
        return if approx == 0.0 { 0.0 } else { 1.0 };
    }
    ((approx - golden).abs() / golden.abs()).min(1.0)
}

pub fn mean_relative_error(approx: &[f64], golden: &[f64]) -> Result<AccuracySummary, MetricsError> {
    if approx.len() != golden.len() {
        return Err(MetricsError::LengthMismatch {
            approx: approx.len(),
            golden: golden.len(),
        });
    }
    if let Some(i) = golden.iter().position(|g| !g.is_finite()) {
        return Err(MetricsError::GoldenNotFinite(i));
    }
    let errors: Vec<f64> = approx
        .iter()
        .zip(golden)
        .map(|(&a, &g)| relative_error(a, g))
        .collect();
    let mre = if errors.is_empty() {
        0.0
    } else {
        errors.iter().sum::<f64>() / errors.len() as f64
    };
    Ok(AccuracySummary { mre, errors })
}

/// Fractions of per-point errors relative to a list of thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub thresholds: Vec<f64>,
    /// Fraction of points strictly below each threshold.
    pub below: Vec<f64>,
    /// Bucket fractions: `[0, t0)`, `[t0, t1)`, ..., `[t_last, inf)`. Sums to 1.
    pub buckets: Vec<f64>,
}

pub fn error_distribution(
    summary: &AccuracySummary,
    thresholds: &[f64],
) -> Result<ErrorDistribution, MetricsError> {
    if thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(MetricsError::UnsortedThresholds);
    }
    let n = summary.errors.len();
    let mut counts = vec![0usize; thresholds.len() + 1];
    for &e in &summary.errors {
        let bucket = thresholds.partition_point(|&t| t <= e);
        counts[bucket] += 1;
    }
    let frac = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    let mut below = Vec::with_capacity(thresholds.len());
    let mut acc = 0;
    for &c in &counts[..thresholds.len()] {
        acc += c;
        below.push(frac(acc));
    }
    Ok(ErrorDistribution {
        thresholds: thresholds.to_vec(),
        below,
        buckets: if n == 0 {
            // an empty output has nothing to distribute; report it all as exact
            std::iter::once(1.0).chain(std::iter::repeat_n(0.0, thresholds.len())).collect()
        } else {
            counts.into_iter().map(frac).collect()
        },
    })
}
