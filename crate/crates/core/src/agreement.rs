//! Inter-assessor agreement: ordinal Krippendorff's α and quadratic weighted κ.
//!
//! α is computed from the coincidence matrix of pairable labels. A unit with
//! `m ≥ 2` labels contributes every ordered pair of its labels with weight
//! `1 / (m - 1)`. With marginals `n_c` and total `n`, the ordinal distance is
//! `δ²(c, k) = (Σ_{g=c..k} n_g - (n_c + n_k) / 2)²` and
//!
//! ```text
//! D_o = (1/n) Σ_{c≠k} o(c,k) δ²(c,k)
//! D_e = (1/(n(n-1))) Σ_{c≠k} n_c n_k δ²(c,k)
//! α   = 1 - D_o / D_e        (α = 1 when D_e = 0)
//! ```
//!
//! ERROR labels enter as level 0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::errors::{PoolstatError, Result};
use crate::model::{LabelMatrix, RawLabel, Strategy, TopicId, VersionMap};

const LEVELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceMatrix {
    pub counts: [[f64; LEVELS]; LEVELS],
    pub marginals: [f64; LEVELS],
    pub total: f64,
    /// Units that contributed (two or more labels).
    pub units: usize,
}

impl CoincidenceMatrix {
    /// Accumulates units given as level lists; units with fewer than two labels are skipped.
    pub fn from_units<'a>(units: impl IntoIterator<Item = &'a [u8]>) -> Self {
        let mut counts = [[0.0; LEVELS]; LEVELS];
        let mut used = 0;
        for labels in units {
            let m = labels.len();
            if m < 2 {
                continue;
            }
            used += 1;
            let mut hist = [0usize; LEVELS];
            for &l in labels {
                hist[l as usize] += 1;
            }
            let w = 1.0 / (m - 1) as f64;
            for c in 0..LEVELS {
                for k in 0..LEVELS {
                    let pairs = if c == k { hist[c] * hist[c].saturating_sub(1) } else { hist[c] * hist[k] };
                    counts[c][k] += pairs as f64 * w;
                }
            }
        }
        let mut marginals = [0.0; LEVELS];
        for c in 0..LEVELS {
            marginals[c] = counts[c].iter().sum();
        }
        Self {
            counts,
            marginals,
            total: marginals.iter().sum(),
            units: used,
        }
    }

    pub fn ordinal_distance(&self, c: usize, k: usize) -> f64 {
        let (lo, hi) = if c <= k { (c, k) } else { (k, c) };
        let span: f64 = self.marginals[lo..=hi].iter().sum();
        let d = span - (self.marginals[lo] + self.marginals[hi]) / 2.0;
        d * d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub alpha: f64,
    pub observed_disagreement: f64,
    pub expected_disagreement: f64,
    pub unit_count: usize,
}

pub fn alpha_from_coincidences(cm: &CoincidenceMatrix) -> Result<AgreementResult> {
    if cm.units == 0 {
        return Err(PoolstatError::NoPairableUnits);
    }
    let n = cm.total;
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..LEVELS {
        for k in 0..LEVELS {
            if c == k {
                continue;
            }
            let d = cm.ordinal_distance(c, k);
            observed += cm.counts[c][k] * d;
            expected += cm.marginals[c] * cm.marginals[k] * d;
        }
    }
    observed /= n;
    expected /= n * (n - 1.0);
    let alpha = if expected == 0.0 { 1.0 } else { 1.0 - observed / expected };
    Ok(AgreementResult {
        alpha,
        observed_disagreement: observed,
        expected_disagreement: expected,
        unit_count: cm.units,
    })
}

/// Which labels of the matrix take part in an agreement computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Projection {
    All,
    RndOnly,
    PriOnly,
}

impl Projection {
    fn keeps(self, strategy: Option<Strategy>) -> bool {
        match self {
            Projection::All => true,
            Projection::RndOnly => strategy == Some(Strategy::Rnd),
            Projection::PriOnly => strategy == Some(Strategy::Pri),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Projection::All => "ALL",
            Projection::RndOnly => "RND",
            Projection::PriOnly => "PRI",
        }
    }
}

impl std::str::FromStr for Projection {
    type Err = PoolstatError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(Projection::All),
            "rnd" => Ok(Projection::RndOnly),
            "pri" => Ok(Projection::PriOnly),
            other => Err(PoolstatError::invalid(format!("unknown projection {other:?}"))),
        }
    }
}

fn unit_levels(matrix: &LabelMatrix, unit: usize, keep: &dyn Fn(usize) -> bool) -> Vec<u8> {
    matrix
        .row(unit)
        .iter()
        .enumerate()
        .filter(|(a, _)| keep(*a))
        .filter_map(|(_, l)| l.map(RawLabel::level))
        .collect()
}

fn alpha_over(matrix: &LabelMatrix, units: &[usize], keep: &dyn Fn(usize, usize) -> bool) -> Result<AgreementResult> {
    let rows: Vec<Vec<u8>> = units
        .iter()
        .map(|&u| unit_levels(matrix, u, &|a| keep(u, a)))
        .collect();
    alpha_from_coincidences(&CoincidenceMatrix::from_units(rows.iter().map(Vec::as_slice)))
}

/// Ordinal α over every unit of the matrix.
pub fn krippendorff_alpha_ordinal(matrix: &LabelMatrix) -> Result<AgreementResult> {
    let units: Vec<usize> = (0..matrix.units().len()).collect();
    alpha_over(matrix, &units, &|_, _| true)
}

/// Ordinal α over the labels selected by a projection; strategies come from the version map.
pub fn krippendorff_alpha_projected(matrix: &LabelMatrix, versions: &VersionMap, projection: Projection) -> Result<AgreementResult> {
    let units: Vec<usize> = (0..matrix.units().len()).collect();
    let keep = |u: usize, a: usize| projection_keeps(matrix, versions, projection, u, a);
    alpha_over(matrix, &units, &keep)
}

fn projection_keeps(matrix: &LabelMatrix, versions: &VersionMap, projection: Projection, unit: usize, assessor: usize) -> bool {
    if projection == Projection::All {
        return true;
    }
    let topic = &matrix.units()[unit].0;
    let strategy = versions
        .version(topic, &matrix.assessors()[assessor])
        .and_then(Strategy::of_version);
    projection.keeps(strategy)
}

/// α with one assessor's column replaced by NA.
pub fn leave_one_out_alpha(matrix: &LabelMatrix, assessor: &str) -> Result<AgreementResult> {
    let left_out = matrix.assessor_index(assessor)?;
    let units: Vec<usize> = (0..matrix.units().len()).collect();
    alpha_over(matrix, &units, &|_, a| a != left_out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerTopicAlpha {
    pub mean: f64,
    pub per_topic: Vec<(TopicId, AgreementResult)>,
    /// Topics whose α could not be computed, with the reason.
    pub failed: Vec<(TopicId, String)>,
}

impl PerTopicAlpha {
    pub fn alphas(&self) -> Vec<f64> {
        self.per_topic.iter().map(|(_, r)| r.alpha).collect()
    }
}

/// α of each topic's sub-matrix under a projection, and their arithmetic mean.
pub fn mean_per_topic_alpha(
    matrix: &LabelMatrix,
    versions: &VersionMap,
    topics: &[TopicId],
    projection: Projection,
) -> Result<PerTopicAlpha> {
    if topics.is_empty() {
        return Err(PoolstatError::EmptyTopicSet);
    }
    let mut by_topic: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (u, (t, _)) in matrix.units().iter().enumerate() {
        by_topic.entry(t.as_str()).or_default().push(u);
    }
    let keep = |u: usize, a: usize| projection_keeps(matrix, versions, projection, u, a);
    let mut per_topic = Vec::new();
    let mut failed = Vec::new();
    for topic in topics {
        let units = by_topic.get(topic.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        match alpha_over(matrix, units, &keep) {
            Ok(r) => per_topic.push((topic.clone(), r)),
            Err(e) => failed.push((topic.clone(), e.to_string())),
        }
    }
    let mean = if per_topic.is_empty() {
        f64::NAN
    } else {
        per_topic.iter().map(|(_, r)| r.alpha).sum::<f64>() / per_topic.len() as f64
    };
    Ok(PerTopicAlpha { mean, per_topic, failed })
}

/// Quadratic weighted κ between two raters over the same units, levels in `0..categories`.
pub fn quadratic_weighted_kappa(a: &[u8], b: &[u8], categories: usize) -> Result<f64> {
    if a.len() != b.len() {
        return Err(PoolstatError::invalid("label vectors differ in length"));
    }
    if a.is_empty() {
        return Err(PoolstatError::invalid("no units to compare"));
    }
    if categories < 2 {
        return Err(PoolstatError::invalid("need at least two categories"));
    }
    if let Some(&bad) = a.iter().chain(b).find(|&&l| l as usize >= categories) {
        return Err(PoolstatError::InvalidLevel(bad as i64));
    }
    let n = a.len() as f64;
    let mut observed = vec![vec![0.0; categories]; categories];
    let mut row = vec![0.0; categories];
    let mut col = vec![0.0; categories];
    for (&x, &y) in a.iter().zip(b) {
        observed[x as usize][y as usize] += 1.0 / n;
        row[x as usize] += 1.0 / n;
        col[y as usize] += 1.0 / n;
    }
    let scale = ((categories - 1) * (categories - 1)) as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..categories {
        for j in 0..categories {
            let w = ((i as f64) - (j as f64)).powi(2) / scale;
            num += w * observed[i][j];
            den += w * row[i] * col[j];
        }
    }
    if den == 0.0 {
        return Err(PoolstatError::DegenerateKappa);
    }
    Ok(1.0 - num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerTopicKappa {
    pub mean: f64,
    pub per_topic: Vec<(TopicId, f64)>,
    pub failed: Vec<(TopicId, String)>,
}

/// κ between two qrels versions on each topic's units, macro-averaged over topics.
pub fn mean_topic_kappa(
    matrix: &LabelMatrix,
    versions: &VersionMap,
    version_a: &str,
    version_b: &str,
    topics: &[TopicId],
) -> Result<PerTopicKappa> {
    if topics.is_empty() {
        return Err(PoolstatError::EmptyTopicSet);
    }
    let mut per_topic = Vec::new();
    let mut failed = Vec::new();
    for topic in topics {
        let pick = |version: &str| -> Result<usize> {
            let assessor = versions
                .assessor_for(topic, version)
                .ok_or_else(|| PoolstatError::UnknownVersion(format!("{version} on topic {topic}")))?;
            matrix.assessor_index(assessor)
        };
        let outcome = pick(version_a).and_then(|ia| {
            let ib = pick(version_b)?;
            let (mut la, mut lb) = (Vec::new(), Vec::new());
            for u in matrix.units_of_topic(topic) {
                if let (Some(x), Some(y)) = (matrix.get(u, ia), matrix.get(u, ib)) {
                    la.push(x.level());
                    lb.push(y.level());
                }
            }
            quadratic_weighted_kappa(&la, &lb, LEVELS)
        });
        match outcome {
            Ok(k) => per_topic.push((topic.clone(), k)),
            Err(e) => failed.push((topic.clone(), e.to_string())),
        }
    }
    let mean = if per_topic.is_empty() {
        f64::NAN
    } else {
        per_topic.iter().map(|(_, k)| k).sum::<f64>() / per_topic.len() as f64
    };
    Ok(PerTopicKappa { mean, per_topic, failed })
}

/// Agreement report rows: `scope projection alpha D_o D_e n_units`.
pub fn agreement_report(rows: &[(String, Projection, AgreementResult)]) -> String {
    let mut out = String::from("scope\tprojection\talpha\tD_o\tD_e\tn_units\n");
    for (scope, projection, r) in rows {
        out.push_str(&format!(
            "{scope}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
            projection.as_str(),
            r.alpha,
            r.observed_disagreement,
            r.expected_disagreement,
            r.unit_count
        ));
    }
    out
}
