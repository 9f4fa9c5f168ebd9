//! Distribution functions needed by the tests: normal, central t, the
//! studentized range and the noncentral t.
//!
//! Central normal and t come from `statrs`. The studentized range and the
//! noncentral t are both mixtures over the scale variable `S = sqrt(χ²_ν / ν)`,
//! so they share one outer quadrature:
//!
//! ```text
//! P(Q ≤ q)  = ∫ g_ν(s) P(R_k ≤ q s) ds,   P(R_k ≤ w) = k ∫ φ(z) [Φ(z) − Φ(z − w)]^(k−1) dz
//! P(T' ≤ x) = ∫ g_ν(s) Φ(x s − δ) ds
//! ```
//!
//! Both integrals use composite 20-point Gauss–Legendre rules on fixed panels.

use std::sync::OnceLock;

use statrs::distribution::{ContinuousCDF, Continuous, StudentsT};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::errors::{PoolstatError, Result};

const GL_POINTS: usize = 20;

/// Nodes and weights of the Gauss–Legendre rule on [-1, 1].
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let mut rule = Vec::with_capacity(n);
        for i in 0..n {
            // Newton iteration from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        rule
    })
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]` split into `panels` pieces.
pub(crate) fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre();
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + h / 2.0;
        let mut s = 0.0;
        for &(x, w) in rule {
            s += w * f(mid + x * h / 2.0);
        }
        total += s * h / 2.0;
    }
    total
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 − Φ(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn students_t(df: f64) -> Result<StudentsT> {
    StudentsT::new(0.0, 1.0, df).map_err(|e| PoolstatError::invalid(format!("t distribution with df={df}: {e}")))
}

pub fn t_cdf(x: f64, df: f64) -> Result<f64> {
    Ok(students_t(df)?.cdf(x))
}

/// Two-sided p-value `P(|T_df| ≥ |t|)`.
pub fn t_two_sided_p(t: f64, df: f64) -> Result<f64> {
    let dist = students_t(df)?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

/// Quantile of the central t distribution, polished with Newton steps.
pub fn t_quantile(p: f64, df: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(PoolstatError::invalid(format!("probability {p} outside (0, 1)")));
    }
    let dist = students_t(df)?;
    let mut x = dist.inverse_cdf(p);
    for _ in 0..50 {
        let step = (dist.cdf(x) - p) / dist.pdf(x);
        x -= step;
        if step.abs() < 1e-14 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Integrates `h(s) g_ν(s)` where `g_ν` is the density of `sqrt(χ²_ν / ν)`.
fn scale_mixture(df: f64, h: impl Fn(f64) -> f64) -> f64 {
    let half = df / 2.0;
    let log_norm = half * df.ln() - ln_gamma(half) - (half - 1.0) * std::f64::consts::LN_2;
    let spread = 12.0 / (2.0 * df).sqrt();
    let lo = (1.0 - spread).max(0.0);
    let hi = 1.0 + spread;
    let density = |s: f64| {
        if s <= 0.0 {
            if df == 1.0 {
                log_norm.exp()
            } else {
                0.0
            }
        } else {
            (log_norm + (df - 1.0) * s.ln() - df * s * s / 2.0).exp()
        }
    };
    integrate(|s| density(s) * h(s), lo, hi, 80)
}

/// `P(R ≤ w)` for the range of `k` independent standard normals.
fn normal_range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let km1 = (k - 1) as i32;
    let inner = |z: f64| {
        let mass = if z > 0.0 {
            normal_sf(z - w) - normal_sf(z)
        } else {
            normal_cdf(z) - normal_cdf(z - w)
        };
        normal_pdf(z) * mass.powi(km1)
    };
    (k as f64 * integrate(inner, -8.5, 8.5, 34)).min(1.0)
}

fn check_range_args(q: f64, k: usize, df: f64) -> Result<()> {
    if k < 2 {
        return Err(PoolstatError::invalid("studentized range needs k ≥ 2"));
    }
    if !(df >= 1.0) {
        return Err(PoolstatError::invalid("studentized range needs df ≥ 1"));
    }
    if q.is_nan() || q < 0.0 {
        return Err(PoolstatError::invalid("studentized range needs q ≥ 0"));
    }
    Ok(())
}

/// `P(Q_{k,df} ≤ q)`; `df` may be `f64::INFINITY`.
pub fn studentized_range_cdf(q: f64, k: usize, df: f64) -> Result<f64> {
    check_range_args(q, k, df)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    let p = if df.is_infinite() {
        normal_range_cdf(q, k)
    } else {
        scale_mixture(df, |s| normal_range_cdf(q * s, k))
    };
    if !p.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&p) {
        return Err(PoolstatError::Quadrature(format!("P(Q ≤ {q}; k={k}, df={df}) evaluated to {p}")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Upper tail `P(Q_{k,df} > q)`, the Tukey HSD p-value.
pub fn studentized_range_sf(q: f64, k: usize, df: f64) -> Result<f64> {
    Ok((1.0 - studentized_range_cdf(q, k, df)?).clamp(0.0, 1.0))
}

/// CDF of the noncentral t distribution with `df` degrees of freedom and noncentrality `ncp`.
pub fn noncentral_t_cdf(x: f64, df: f64, ncp: f64) -> Result<f64> {
    if !(df >= 1.0) {
        return Err(PoolstatError::invalid("noncentral t needs df ≥ 1"));
    }
    if !ncp.is_finite() || ncp.abs() > 1e4 {
        return Err(PoolstatError::invalid(format!("noncentrality {ncp} out of range")));
    }
    if x.is_nan() {
        return Err(PoolstatError::invalid("x is NaN"));
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    if x == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    // Integrate the smaller tail for accuracy.
    let lower = scale_mixture(df, |s| normal_cdf(x * s - ncp));
    let upper = scale_mixture(df, |s| normal_sf(x * s - ncp));
    let p = if lower < upper { lower } else { 1.0 - upper };
    Ok(p.clamp(0.0, 1.0))
}
