use serde::{Deserialize, Serialize};

use super::dist::studentized_range_sf;
use crate::errors::{PoolstatError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Design {
    /// Randomised block design: two-way ANOVA without replication.
    Paired,
    /// One-way layout with possibly unequal group sizes.
    Unpaired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub group_a: String,
    pub group_b: String,
    /// `mean(a) − mean(b)`.
    pub mean_diff: f64,
    pub q_statistic: f64,
    pub p_value: f64,
    /// `mean_diff / sqrt(residual_variance)`.
    pub effect_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyResult {
    pub design: Design,
    /// V_E2 for the paired design, V_E1 for the unpaired one.
    pub residual_variance: f64,
    pub residual_df: f64,
    pub groups: usize,
    pub means: Vec<(String, f64)>,
    /// Blocks kept after listwise deletion (paired design only).
    pub blocks_used: usize,
    pub pairwise: Vec<PairwiseComparison>,
}

impl TukeyResult {
    pub fn pair(&self, a: &str, b: &str) -> Option<&PairwiseComparison> {
        self.pairwise
            .iter()
            .find(|p| (p.group_a == a && p.group_b == b) || (p.group_a == b && p.group_b == a))
    }

    /// Statistics report: `pair diff q p ES`.
    pub fn report(&self) -> String {
        let mut out = String::from("pair\tdiff\tq\tp\tES\n");
        for c in &self.pairwise {
            out.push_str(&format!(
                "{}-{}\t{:.6}\t{:.4}\t{:.6}\t{:.3}\n",
                c.group_a, c.group_b, c.mean_diff, c.q_statistic, c.p_value, c.effect_size
            ));
        }
        out
    }
}

/// One Tukey comparison from summary statistics.
///
/// `se` is the standard error used for q; the effect size uses `sqrt(residual_variance)`.
fn compare(
    names: (&str, &str),
    diff: f64,
    se: f64,
    residual_variance: f64,
    groups: usize,
    df: f64,
) -> Result<PairwiseComparison> {
    let q = if diff == 0.0 { 0.0 } else { diff.abs() / se };
    let p = if q == 0.0 { 1.0 } else { studentized_range_sf(q, groups, df)? };
    Ok(PairwiseComparison {
        group_a: names.0.to_string(),
        group_b: names.1.to_string(),
        mean_diff: diff,
        q_statistic: q,
        p_value: p,
        effect_size: if residual_variance > 0.0 { diff / residual_variance.sqrt() } else { 0.0 },
    })
}

/// Paired comparison from table summaries: `k` treatments, `n` blocks, and V_E2.
pub fn tukey_paired_from_summary(diff: f64, residual_variance: f64, k: usize, n: usize) -> Result<PairwiseComparison> {
    if k < 2 || n < 2 {
        return Err(PoolstatError::invalid("paired Tukey needs k ≥ 2 and n ≥ 2"));
    }
    let df = ((k - 1) * (n - 1)) as f64;
    compare(("a", "b"), diff, (residual_variance / n as f64).sqrt(), residual_variance, k, df)
}

/// Tukey–Kramer comparison from summaries: group sizes, all `k` group sizes (for df) and V_E1.
pub fn tukey_unpaired_from_summary(
    diff: f64,
    residual_variance: f64,
    n_a: usize,
    n_b: usize,
    group_sizes: &[usize],
) -> Result<PairwiseComparison> {
    let k = group_sizes.len();
    let total: usize = group_sizes.iter().sum();
    if k < 2 || total <= k {
        return Err(PoolstatError::invalid("unpaired Tukey needs two groups and N > k"));
    }
    let se = (residual_variance * (1.0 / n_a as f64 + 1.0 / n_b as f64) / 2.0).sqrt();
    compare(("a", "b"), diff, se, residual_variance, k, (total - k) as f64)
}

/// Paired Tukey HSD over a blocks × treatments table.
///
/// `table[block][treatment]`; blocks containing any `None` are dropped.
pub fn tukey_hsd_paired(treatments: &[String], table: &[Vec<Option<f64>>]) -> Result<TukeyResult> {
    let k = treatments.len();
    if table.iter().any(|row| row.len() != k) {
        return Err(PoolstatError::invalid("every block needs one value per treatment"));
    }
    let rows: Vec<Vec<f64>> = table
        .iter()
        .filter_map(|row| row.iter().copied().collect::<Option<Vec<f64>>>())
        .collect();
    let n = rows.len();
    if k < 2 || n < 2 {
        return Err(PoolstatError::invalid("paired Tukey needs k ≥ 2 treatments and n ≥ 2 complete blocks"));
    }
    let grand = rows.iter().flatten().sum::<f64>() / (n * k) as f64;
    let treat_means: Vec<f64> = (0..k)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let block_means: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() / k as f64).collect();
    let mut ss_error = 0.0;
    for (i, r) in rows.iter().enumerate() {
        for j in 0..k {
            let e = r[j] - treat_means[j] - block_means[i] + grand;
            ss_error += e * e;
        }
    }
    let df = ((k - 1) * (n - 1)) as f64;
    let v = ss_error / df;
    let se = (v / n as f64).sqrt();
    let mut pairwise = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let diff = treat_means[a] - treat_means[b];
            pairwise.push(compare((&treatments[a], &treatments[b]), diff, se, v, k, df)?);
        }
    }
    Ok(TukeyResult {
        design: Design::Paired,
        residual_variance: v,
        residual_df: df,
        groups: k,
        means: treatments.iter().cloned().zip(treat_means).collect(),
        blocks_used: n,
        pairwise,
    })
}

/// Unpaired Tukey HSD (Tukey–Kramer for unequal sizes) over named groups.
pub fn tukey_hsd_unpaired(groups: &[(String, Vec<f64>)]) -> Result<TukeyResult> {
    let k = groups.len();
    if k < 2 || groups.iter().any(|(_, g)| g.len() < 2) {
        return Err(PoolstatError::invalid("unpaired Tukey needs ≥ 2 groups of ≥ 2 observations"));
    }
    let total: usize = groups.iter().map(|(_, g)| g.len()).sum();
    let means: Vec<f64> = groups
        .iter()
        .map(|(_, g)| g.iter().sum::<f64>() / g.len() as f64)
        .collect();
    let ss_within: f64 = groups
        .iter()
        .zip(&means)
        .map(|((_, g), m)| g.iter().map(|x| (x - m).powi(2)).sum::<f64>())
        .sum();
    let df = (total - k) as f64;
    let v = ss_within / df;
    let mut pairwise = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let (na, nb) = (groups[a].1.len() as f64, groups[b].1.len() as f64);
            let se = (v * (1.0 / na + 1.0 / nb) / 2.0).sqrt();
            let diff = means[a] - means[b];
            pairwise.push(compare((&groups[a].0, &groups[b].0), diff, se, v, k, df)?);
        }
    }
    Ok(TukeyResult {
        design: Design::Unpaired,
        residual_variance: v,
        residual_df: df,
        groups: k,
        means: groups.iter().map(|(n, _)| n.clone()).zip(means).collect(),
        blocks_used: 0,
        pairwise,
    })
}
