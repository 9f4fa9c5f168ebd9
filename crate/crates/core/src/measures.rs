//! Graded-relevance evaluation measures at a cutoff.
//!
//! All four measures work on the relevance levels of the ranked documents and
//! on the level multiset of the topic (for the ideal ranking). Unjudged documents
//! count as level 0. Gains are exponential, `2^level - 1`.
//!
//! * nDCG@l: `Σ_{r≤l} g(r) / log2(r + 1)` divided by the same sum over the ideal list.
//! * Q@l: `(1 / min(l, R)) Σ_{r≤l} J(r) (C(r) + β cg(r)) / (r + β cg*(r))`.
//! * nERR@l: cascade with stop probability `g(r) / 2^H`, normalised by the ideal ERR@l.
//! * iRBU@l: `(1 - p) Σ_{r≤l} p^(r-1) J(r)`.
//!
//! A topic without relevant documents has no ideal ranking, so every measure
//! refuses it with [`PoolstatError::NoRelevantDocuments`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::errors::{PoolstatError, Result};
use crate::model::{DocId, Qrels, RankedRun, ScoreMatrix, TopicId, TopicQrels};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    /// Measurement depth l.
    pub cutoff: usize,
    /// Highest relevance level H.
    pub max_level: u8,
    /// iRBU patience p.
    pub persistence: f64,
    /// Q-measure β.
    pub beta: f64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            cutoff: 10,
            max_level: 2,
            persistence: 0.99,
            beta: 1.0,
        }
    }
}

impl MeasureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cutoff == 0 {
            return Err(PoolstatError::invalid("cutoff must be at least 1"));
        }
        if self.max_level == 0 {
            return Err(PoolstatError::invalid("max level must be at least 1"));
        }
        if !(self.persistence > 0.0 && self.persistence < 1.0) {
            return Err(PoolstatError::invalid("persistence must lie in (0, 1)"));
        }
        if !(self.beta >= 0.0) {
            return Err(PoolstatError::invalid("beta must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    Ndcg,
    Q,
    Nerr,
    Irbu,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::Ndcg, Measure::Q, Measure::Nerr, Measure::Irbu];

    pub fn id(self) -> &'static str {
        match self {
            Measure::Ndcg => "nDCG",
            Measure::Q => "Q",
            Measure::Nerr => "nERR",
            Measure::Irbu => "iRBU",
        }
    }

    /// Scores a ranked list of levels against the topic's full level multiset.
    pub fn evaluate_levels(self, ranked: &[u8], topic_levels: &[u8], config: &MeasureConfig) -> Result<f64> {
        match self {
            Measure::Ndcg => ndcg_levels(ranked, topic_levels, config),
            Measure::Q => q_levels(ranked, topic_levels, config),
            Measure::Nerr => nerr_levels(ranked, topic_levels, config),
            Measure::Irbu => irbu_levels(ranked, topic_levels, config),
        }
    }

    pub fn evaluate(self, ranked: &[DocId], judgments: &TopicQrels, config: &MeasureConfig) -> Result<f64> {
        let (ranked, levels) = to_levels(ranked, judgments);
        self.evaluate_levels(&ranked, &levels, config)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Measure {
    type Err = PoolstatError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ndcg" => Ok(Measure::Ndcg),
            "q" | "q-measure" => Ok(Measure::Q),
            "nerr" => Ok(Measure::Nerr),
            "irbu" => Ok(Measure::Irbu),
            other => Err(PoolstatError::invalid(format!("unknown measure {other:?}"))),
        }
    }
}

/// `2^level - 1`.
pub fn gain_of(level: u8, max_level: u8) -> Result<f64> {
    if level > max_level {
        return Err(PoolstatError::InvalidLevel(level as i64));
    }
    Ok(((1u64 << level) - 1) as f64)
}

fn to_levels(ranked: &[DocId], judgments: &TopicQrels) -> (Vec<u8>, Vec<u8>) {
    let ranked = ranked.iter().map(|d| judgments.get(d).copied().unwrap_or(0)).collect();
    let topic = judgments.values().copied().collect();
    (ranked, topic)
}

struct Prepared {
    gains: Vec<f64>,
    ideal: Vec<f64>,
    relevant: usize,
}

fn prepare(ranked: &[u8], topic_levels: &[u8], config: &MeasureConfig) -> Result<Prepared> {
    config.validate()?;
    if ranked.is_empty() {
        return Err(PoolstatError::EmptyRanking);
    }
    let relevant = topic_levels.iter().filter(|&&l| l >= 1).count();
    if relevant == 0 {
        return Err(PoolstatError::NoRelevantDocuments(String::new()));
    }
    let gains = ranked
        .iter()
        .take(config.cutoff)
        .map(|&l| gain_of(l, config.max_level))
        .collect::<Result<Vec<_>>>()?;
    let mut ideal = topic_levels
        .iter()
        .filter(|&&l| l >= 1)
        .map(|&l| gain_of(l, config.max_level))
        .collect::<Result<Vec<_>>>()?;
    ideal.sort_by(|a, b| b.total_cmp(a));
    Ok(Prepared { gains, ideal, relevant })
}

fn dcg(gains: &[f64], cutoff: usize) -> f64 {
    gains
        .iter()
        .take(cutoff)
        .enumerate()
        .map(|(i, g)| g / ((i + 2) as f64).log2())
        .sum()
}

fn ndcg_levels(ranked: &[u8], topic_levels: &[u8], config: &MeasureConfig) -> Result<f64> {
    let p = prepare(ranked, topic_levels, config)?;
    Ok(dcg(&p.gains, config.cutoff) / dcg(&p.ideal, config.cutoff))
}

fn q_levels(ranked: &[u8], topic_levels: &[u8], config: &MeasureConfig) -> Result<f64> {
    let p = prepare(ranked, topic_levels, config)?;
    let beta = config.beta;
    let mut relevant_so_far = 0.0;
    let mut cg = 0.0;
    let mut ideal_cg = 0.0;
    let mut sum = 0.0;
    for (i, &g) in p.gains.iter().enumerate() {
        let rank = (i + 1) as f64;
        cg += g;
        ideal_cg += p.ideal.get(i).copied().unwrap_or(0.0);
        if g > 0.0 {
            relevant_so_far += 1.0;
            sum += (relevant_so_far + beta * cg) / (rank + beta * ideal_cg);
        }
    }
    Ok(sum / config.cutoff.min(p.relevant) as f64)
}

fn err(gains: &[f64], cutoff: usize, max_level: u8) -> f64 {
    let denom = (1u64 << max_level) as f64;
    let mut continue_prob = 1.0;
    let mut total = 0.0;
    for (i, g) in gains.iter().take(cutoff).enumerate() {
        let stop = g / denom;
        total += continue_prob * stop / (i + 1) as f64;
        continue_prob *= 1.0 - stop;
    }
    total
}

fn nerr_levels(ranked: &[u8], topic_levels: &[u8], config: &MeasureConfig) -> Result<f64> {
    let p = prepare(ranked, topic_levels, config)?;
    Ok(err(&p.gains, config.cutoff, config.max_level) / err(&p.ideal, config.cutoff, config.max_level))
}

fn irbu_levels(ranked: &[u8], topic_levels: &[u8], config: &MeasureConfig) -> Result<f64> {
    let p = prepare(ranked, topic_levels, config)?;
    let persistence = config.persistence;
    let mut weight = 1.0;
    let mut sum = 0.0;
    for g in &p.gains {
        if *g > 0.0 {
            sum += weight;
        }
        weight *= persistence;
    }
    Ok((1.0 - persistence) * sum)
}

pub fn ndcg_at(ranked: &[DocId], judgments: &TopicQrels, config: &MeasureConfig) -> Result<f64> {
    Measure::Ndcg.evaluate(ranked, judgments, config)
}

pub fn q_at(ranked: &[DocId], judgments: &TopicQrels, config: &MeasureConfig) -> Result<f64> {
    Measure::Q.evaluate(ranked, judgments, config)
}

pub fn nerr_at(ranked: &[DocId], judgments: &TopicQrels, config: &MeasureConfig) -> Result<f64> {
    Measure::Nerr.evaluate(ranked, judgments, config)
}

pub fn irbu_at(ranked: &[DocId], judgments: &TopicQrels, config: &MeasureConfig) -> Result<f64> {
    Measure::Irbu.evaluate(ranked, judgments, config)
}

/// Topic × run matrix of one measure over `topics`.
///
/// Columns follow the run-tag order. A run that returned nothing for a topic
/// scores 0 there. A topic without relevant documents is an error: filter it
/// out first (see [`crate::robustness::valid_topics`]).
pub fn score_matrix(
    runs: &[RankedRun],
    qrels: &Qrels,
    measure: Measure,
    config: &MeasureConfig,
    topics: &[TopicId],
) -> Result<ScoreMatrix> {
    config.validate()?;
    let mut order: Vec<&RankedRun> = runs.iter().collect();
    order.sort_by(|a, b| a.run_tag.cmp(&b.run_tag));
    let empty = TopicQrels::new();
    let mut cells = Vec::with_capacity(topics.len() * runs.len());
    for topic in topics {
        let judgments = qrels.topic(topic).unwrap_or(&empty);
        if judgments.values().all(|&l| l == 0) {
            return Err(PoolstatError::NoRelevantDocuments(topic.clone()));
        }
        for run in &order {
            let ranked = run.ranking(topic);
            let score = if ranked.is_empty() {
                0.0
            } else {
                measure.evaluate(ranked, judgments, config).map_err(|e| match e {
                    PoolstatError::NoRelevantDocuments(_) => PoolstatError::NoRelevantDocuments(topic.clone()),
                    other => other,
                })?
            };
            cells.push(score);
        }
    }
    ScoreMatrix::new(
        measure.id(),
        qrels.version_id.clone(),
        config.cutoff,
        topics.to_vec(),
        order.iter().map(|r| r.run_tag.clone()).collect(),
        cells,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const CFG: MeasureConfig = MeasureConfig {
        cutoff: 10,
        max_level: 2,
        persistence: 0.99,
        beta: 1.0,
    };

    #[test]
    fn gains() {
        assert_eq!(gain_of(0, 2).unwrap(), 0.0);
        assert_eq!(gain_of(1, 2).unwrap(), 1.0);
        assert_eq!(gain_of(2, 2).unwrap(), 3.0);
        assert!(gain_of(3, 2).is_err());
    }

    // Worked example: levels [2, 0, 1] at ranks 1..3, topic holds one 2 and one 1.
    const RANKED: [u8; 3] = [2, 0, 1];
    const TOPIC: [u8; 2] = [2, 1];

    #[test]
    fn ndcg_worked_example() {
        let v = Measure::Ndcg.evaluate_levels(&RANKED, &TOPIC, &CFG).unwrap();
        let expected = 3.5 / (3.0 + 1.0 / 3f64.log2());
        assert_abs_diff_eq!(v, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.9639, epsilon = 1e-4);
    }

    #[test]
    fn q_worked_example() {
        let v = Measure::Q.evaluate_levels(&RANKED, &TOPIC, &CFG).unwrap();
        assert_abs_diff_eq!(v, 0.5 * (1.0 + 6.0 / 7.0), epsilon = 1e-12);
    }

    #[test]
    fn q_long_swap_can_lower_score() {
        let cfg = MeasureConfig { cutoff: 3, ..CFG };
        let before = Measure::Q.evaluate_levels(&[0, 2, 1], &[0, 2, 1], &cfg).unwrap();
        let after = Measure::Q.evaluate_levels(&[1, 2, 0], &[0, 2, 1], &cfg).unwrap();
        // (4/6 + 6/7) / 2 against (2/4 + 6/6) / 2.
        assert_abs_diff_eq!(before, (4.0 / 6.0 + 6.0 / 7.0) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(after, 0.75, epsilon = 1e-12);
        assert!(after < before);
    }

    #[test]
    fn nerr_worked_example() {
        let v = Measure::Nerr.evaluate_levels(&RANKED, &TOPIC, &CFG).unwrap();
        let err = 0.75 + 0.25 * 0.25 / 3.0;
        let ideal = 0.75 + 0.25 * 0.25 / 2.0;
        assert_abs_diff_eq!(v, err / ideal, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.9867, epsilon = 1e-4);
    }

    #[test]
    fn irbu_worked_example() {
        let cfg = MeasureConfig { cutoff: 3, ..CFG };
        let v = Measure::Irbu.evaluate_levels(&[1, 0, 1], &[1, 1], &cfg).unwrap();
        assert_abs_diff_eq!(v, 0.019801, epsilon = 1e-12);
    }

    #[test]
    fn irbu_all_relevant_is_geometric_sum() {
        let cfg = MeasureConfig { cutoff: 7, ..CFG };
        let v = Measure::Irbu.evaluate_levels(&[1; 7], &[1; 9], &cfg).unwrap();
        assert_abs_diff_eq!(v, 1.0 - 0.99f64.powi(7), epsilon = 1e-15);
    }

    #[test]
    fn nothing_relevant_in_top_l() {
        let cfg = MeasureConfig { cutoff: 2, ..CFG };
        let topic = [0, 0, 1, 2];
        for m in Measure::ALL {
            assert_eq!(m.evaluate_levels(&[0, 0, 1], &topic, &cfg).unwrap(), 0.0, "{m}");
        }
    }

    #[test]
    fn ideal_ranking_scores_one() {
        for m in [Measure::Ndcg, Measure::Q, Measure::Nerr] {
            assert_abs_diff_eq!(m.evaluate_levels(&[2, 1, 0], &TOPIC, &CFG).unwrap(), 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(Measure::Nerr.evaluate_levels(&[1], &[1], &CFG).unwrap(), 1.0);
    }

    #[test]
    fn refuses_topics_without_relevant_documents() {
        for m in Measure::ALL {
            assert!(matches!(
                m.evaluate_levels(&[0, 0], &[0, 0], &CFG),
                Err(PoolstatError::NoRelevantDocuments(_))
            ));
            assert!(matches!(m.evaluate_levels(&[], &[1], &CFG), Err(PoolstatError::EmptyRanking)));
        }
    }

    #[test]
    fn unjudged_documents_count_as_zero() {
        let mut judgments = TopicQrels::new();
        judgments.insert("a".into(), 2);
        judgments.insert("b".into(), 1);
        let ranked: Vec<DocId> = ["a", "unjudged", "b"].iter().map(|s| s.to_string()).collect();
        let v = ndcg_at(&ranked, &judgments, &CFG).unwrap();
        let w = Measure::Ndcg.evaluate_levels(&RANKED, &TOPIC, &CFG).unwrap();
        assert_eq!(v, w);
    }

    #[test]
    fn score_matrix_single_cell_and_duplicates() {
        let mut qrels = Qrels::new("PRI1");
        qrels.insert("t", "a", 2).unwrap();
        qrels.insert("t", "b", 1).unwrap();
        let run = RankedRun::new("r1", [("t", vec!["a", "x", "b"])]).unwrap();
        let m = score_matrix(std::slice::from_ref(&run), &qrels, Measure::Ndcg, &CFG, &["t".into()]).unwrap();
        assert_eq!(m.topics().len(), 1);
        assert_abs_diff_eq!(m.get(0, 0), 0.9639, epsilon = 1e-4);

        let mut twin = run.clone();
        twin.run_tag = "r0".into();
        let m = score_matrix(&[run, twin], &qrels, Measure::Q, &CFG, &["t".into()]).unwrap();
        assert_eq!(m.runs(), ["r0", "r1"]);
        assert_eq!(m.column(0), m.column(1));
    }

    #[test]
    fn score_matrix_rejects_unfiltered_topics() {
        let mut qrels = Qrels::new("v");
        qrels.insert("t", "a", 0).unwrap();
        let run = RankedRun::new("r", [("t", vec!["a"])]).unwrap();
        let err = score_matrix(&[run], &qrels, Measure::Ndcg, &CFG, &["t".into()]).unwrap_err();
        assert!(matches!(err, PoolstatError::NoRelevantDocuments(t) if t == "t"));
    }
}
