use serde::{Deserialize, Serialize};

use super::dist::t_two_sided_p;
use crate::errors::{PoolstatError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p_value: f64,
    /// `(mean(a) − mean(b)) / sd(a)`.
    pub glass_delta: f64,
    pub mean_diff: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// Paired t-test of `a` against `b` with Glass's Δ standardised by `a`.
pub fn paired_t(a: &[f64], b: &[f64]) -> Result<PairedTResult> {
    if a.len() != b.len() {
        return Err(PoolstatError::invalid("paired samples differ in length"));
    }
    let n = a.len();
    if n < 2 {
        return Err(PoolstatError::invalid("paired t-test needs n ≥ 2"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean_diff = mean(&diffs);
    let sd_diff = sample_sd(&diffs);
    let sd_a = sample_sd(a);
    let glass_delta = if mean_diff == 0.0 { 0.0 } else { mean_diff / sd_a };
    if sd_diff == 0.0 {
        if mean_diff == 0.0 {
            return Ok(PairedTResult {
                t: 0.0,
                df: (n - 1) as f64,
                p_value: 1.0,
                glass_delta,
                mean_diff,
            });
        }
        return Err(PoolstatError::invalid("differences have zero variance"));
    }
    let t = mean_diff / (sd_diff / (n as f64).sqrt());
    let df = (n - 1) as f64;
    Ok(PairedTResult {
        t,
        df,
        p_value: t_two_sided_p(t, df)?,
        glass_delta,
        mean_diff,
    })
}
