use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::errors::{PoolstatError, Result};
use crate::model::{Strategy, VersionId};

/// z quantile for a two-sided 95% interval.
const Z_975: f64 = 1.959964;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauResult {
    pub tau: f64,
    /// Number of ranked systems.
    pub n: usize,
    /// Pairs tied in either score vector; they add nothing to the numerator.
    pub tied_pairs: usize,
    pub ci: Option<(f64, f64)>,
}

/// Kendall's tau-a between two score vectors over the same systems.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<TauResult> {
    if a.len() != b.len() {
        return Err(PoolstatError::invalid("score vectors differ in length"));
    }
    let n = a.len();
    if n < 2 {
        return Err(PoolstatError::invalid("Kendall's tau needs at least two systems"));
    }
    let mut balance: i64 = 0;
    let mut tied = 0;
    for i in 0..n {
        for j in i + 1..n {
            let s = (a[i] - a[j]).signum() * (b[i] - b[j]).signum();
            if a[i] == a[j] || b[i] == b[j] {
                tied += 1;
            } else if s > 0.0 {
                balance += 1;
            } else {
                balance -= 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(TauResult {
        tau: balance as f64 / pairs,
        n,
        tied_pairs: tied,
        ci: None,
    })
}

/// τ between two `run -> mean score` maps over their common runs.
pub fn kendall_tau_maps(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<TauResult> {
    if a.len() != b.len() || a.keys().any(|k| !b.contains_key(k)) {
        return Err(PoolstatError::invalid("the two rankings cover different runs"));
    }
    let xs: Vec<f64> = a.values().copied().collect();
    let ys: Vec<f64> = a.keys().map(|k| b[k]).collect();
    kendall_tau(&xs, &ys)
}

/// 95% interval from the Fisher z transform with variance `0.437 / (n − 4)`.
///
/// `|τ| = 1` gives the point interval `(τ, τ)`.
pub fn tau_fisher_ci(tau: f64, n: usize) -> Result<(f64, f64)> {
    if n < 5 {
        return Err(PoolstatError::invalid("tau interval needs n ≥ 5"));
    }
    if !(-1.0..=1.0).contains(&tau) {
        return Err(PoolstatError::invalid(format!("tau {tau} outside [-1, 1]")));
    }
    if tau.abs() == 1.0 {
        return Ok((tau, tau));
    }
    let z = tau.atanh();
    let se = (0.437 / (n as f64 - 4.0)).sqrt();
    Ok(((z - Z_975 * se).tanh(), (z + Z_975 * se).tanh()))
}

impl TauResult {
    pub fn with_ci(mut self) -> Result<Self> {
        self.ci = Some(tau_fisher_ci(self.tau, self.n)?);
        Ok(self)
    }
}

/// τ values for every unordered pair of qrels versions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TauTable {
    cells: BTreeMap<(VersionId, VersionId), f64>,
}

impl TauTable {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(a: &str, b: &str) -> (VersionId, VersionId) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }

    pub fn insert(&mut self, a: &str, b: &str, tau: f64) {
        self.cells.insert(Self::key(a, b), tau);
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        self.cells.get(&Self::key(a, b)).copied()
    }

    /// Plot-ready CSV of the full symmetric matrix over `versions`.
    pub fn to_csv(&self, versions: &[VersionId]) -> String {
        let mut out = String::from("version");
        for v in versions {
            out.push(',');
            out.push_str(v);
        }
        out.push('\n');
        for a in versions {
            out.push_str(a);
            for b in versions {
                let v = if a == b { Some(1.0) } else { self.get(a, b) };
                match v {
                    Some(t) => out.push_str(&format!(",{t:.4}")),
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauPartition {
    pub rnd_rnd: Vec<f64>,
    pub pri_pri: Vec<f64>,
    pub rnd_pri: Vec<f64>,
}

impl TauPartition {
    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn means(&self) -> (f64, f64, f64) {
        (Self::mean(&self.rnd_rnd), Self::mean(&self.pri_pri), Self::mean(&self.rnd_pri))
    }

    /// The three groups in `RND-RND, PRI-PRI, RND-PRI` order.
    pub fn groups(&self) -> Vec<(String, Vec<f64>)> {
        vec![
            ("RND-RND".to_string(), self.rnd_rnd.clone()),
            ("PRI-PRI".to_string(), self.pri_pri.clone()),
            ("RND-PRI".to_string(), self.rnd_pri.clone()),
        ]
    }
}

/// Splits the pairwise τ's into within-RND, within-PRI and across-strategy groups.
pub fn mean_tau_partition(table: &TauTable, versions: &[VersionId]) -> Result<TauPartition> {
    let mut part = TauPartition {
        rnd_rnd: Vec::new(),
        pri_pri: Vec::new(),
        rnd_pri: Vec::new(),
    };
    for (i, a) in versions.iter().enumerate() {
        for b in &versions[i + 1..] {
            let tau = table
                .get(a, b)
                .ok_or_else(|| PoolstatError::invalid(format!("missing tau for {a} vs {b}")))?;
            let sa = Strategy::of_version(a).ok_or_else(|| PoolstatError::UnknownVersion(a.clone()))?;
            let sb = Strategy::of_version(b).ok_or_else(|| PoolstatError::UnknownVersion(b.clone()))?;
            match (sa, sb) {
                (Strategy::Rnd, Strategy::Rnd) => part.rnd_rnd.push(tau),
                (Strategy::Pri, Strategy::Pri) => part.pri_pri.push(tau),
                _ => part.rnd_pri.push(tau),
            }
        }
    }
    if part.rnd_rnd.is_empty() || part.pri_pri.is_empty() || part.rnd_pri.is_empty() {
        return Err(PoolstatError::invalid("each strategy needs at least two versions"));
    }
    Ok(part)
}
