use serde::{Deserialize, Serialize};

use super::dist::{noncentral_t_cdf, t_quantile};
use crate::errors::{PoolstatError, Result};

/// Upper bound for the sample-size search.
const MAX_N: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub pilot_t: f64,
    pub pilot_n: usize,
    pub alpha: f64,
    /// Power of the two-sided test at the pilot sample size.
    pub achieved_power: f64,
    pub required_n: usize,
    pub target_power: f64,
}

/// Power of a two-sided paired t-test with standardised effect `d` and `n` pairs.
pub fn achieved_power(d: f64, n: usize, alpha: f64) -> Result<f64> {
    if n < 2 {
        return Err(PoolstatError::invalid("power needs n ≥ 2"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(PoolstatError::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    let df = (n - 1) as f64;
    let crit = t_quantile(1.0 - alpha / 2.0, df)?;
    let ncp = d * (n as f64).sqrt();
    let upper = 1.0 - noncentral_t_cdf(crit, df, ncp)?;
    let lower = noncentral_t_cdf(-crit, df, ncp)?;
    Ok((upper + lower).clamp(0.0, 1.0))
}

/// Achieved power of a pilot paired t-test and the sample size needed for `target_power`.
///
/// The effect size is `d = t / sqrt(n)`. The search walks upward from n = 2 and
/// accepts the first n whose power, and that of the next three sizes, reaches the target.
pub fn power_pairedt(pilot_t: f64, pilot_n: usize, alpha: f64, target_power: f64) -> Result<PowerResult> {
    if !(target_power > 0.0 && target_power < 1.0) {
        return Err(PoolstatError::invalid(format!("target power {target_power} outside (0, 1)")));
    }
    if pilot_n < 2 {
        return Err(PoolstatError::invalid("pilot sample needs n ≥ 2"));
    }
    if !pilot_t.is_finite() {
        return Err(PoolstatError::invalid("pilot t must be finite"));
    }
    let d = pilot_t / (pilot_n as f64).sqrt();
    let achieved = achieved_power(d, pilot_n, alpha)?;
    if d == 0.0 {
        return Err(PoolstatError::invalid("zero effect size never reaches the target power"));
    }
    let mut n = 2;
    let required = loop {
        if n > MAX_N {
            return Err(PoolstatError::invalid(format!("required n exceeds {MAX_N}")));
        }
        if achieved_power(d, n, alpha)? >= target_power {
            let mut stable = true;
            for m in n + 1..=n + 3 {
                if achieved_power(d, m, alpha)? < target_power {
                    stable = false;
                    break;
                }
            }
            if stable {
                break n;
            }
        }
        n += 1;
    };
    Ok(PowerResult {
        pilot_t,
        pilot_n,
        alpha,
        achieved_power: achieved,
        required_n: required,
        target_power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_effect_is_alpha() {
        assert_abs_diff_eq!(achieved_power(0.0, 20, 0.05).unwrap(), 0.05, epsilon = 1e-7);
    }

    #[test]
    fn pilot_example() {
        let r = power_pairedt(4.21, 32, 0.05, 0.70).unwrap();
        assert_abs_diff_eq!(r.achieved_power, 0.983, epsilon = 0.0015);
        assert_eq!(r.required_n, 14);
        let d = 4.21 / 32f64.sqrt();
        assert!(achieved_power(d, 13, 0.05).unwrap() < 0.70);
    }

    #[test]
    fn bad_arguments() {
        assert!(power_pairedt(2.0, 10, 0.05, 1.0).is_err());
        assert!(power_pairedt(2.0, 1, 0.05, 0.7).is_err());
        assert!(power_pairedt(0.0, 10, 0.05, 0.7).is_err());
    }
}
