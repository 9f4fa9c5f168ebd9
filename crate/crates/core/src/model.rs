//! Domain types: labels, topics, runs, qrels, label matrices and score matrices.
//!
//! Everything here is immutable once built and cheap to share across threads.
//! Reading and writing the on-disk formats lives in [`crate::io`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::errors::{PoolstatError, Result};

pub type TopicId = String;
pub type DocId = String;
pub type RunTag = String;
pub type AssessorId = String;
pub type VersionId = String;

/// Highest relevance level used throughout the crate.
pub const MAX_LEVEL: u8 = 2;

/// The four buttons an assessor can click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RawLabel {
    #[serde(rename = "H.REL")]
    HighlyRelevant,
    #[serde(rename = "REL")]
    Relevant,
    #[serde(rename = "NONREL")]
    Nonrelevant,
    #[serde(rename = "ERROR")]
    Error,
}

impl RawLabel {
    pub const ALL: [RawLabel; 4] = [
        RawLabel::HighlyRelevant,
        RawLabel::Relevant,
        RawLabel::Nonrelevant,
        RawLabel::Error,
    ];

    /// Graded level used for qrels and agreement. ERROR collapses to 0.
    pub fn level(self) -> u8 {
        match self {
            RawLabel::HighlyRelevant => 2,
            RawLabel::Relevant => 1,
            RawLabel::Nonrelevant | RawLabel::Error => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RawLabel::HighlyRelevant => "H.REL",
            RawLabel::Relevant => "REL",
            RawLabel::Nonrelevant => "NONREL",
            RawLabel::Error => "ERROR",
        }
    }

    /// Inverse of [`RawLabel::level`] for the non-error labels.
    pub fn from_level(level: u8) -> Result<Self> {
        match level {
            0 => Ok(RawLabel::Nonrelevant),
            1 => Ok(RawLabel::Relevant),
            2 => Ok(RawLabel::HighlyRelevant),
            other => Err(PoolstatError::InvalidLevel(other as i64)),
        }
    }
}

impl fmt::Display for RawLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RawLabel {
    type Err = PoolstatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H.REL" => Ok(RawLabel::HighlyRelevant),
            "REL" => Ok(RawLabel::Relevant),
            "NONREL" => Ok(RawLabel::Nonrelevant),
            "ERROR" => Ok(RawLabel::Error),
            other => Err(PoolstatError::invalid(format!("unknown label {other:?}"))),
        }
    }
}

/// Document ordering strategy of a pool, and of the qrels version judged with it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Prioritised: pseudorelevance order.
    Pri,
    /// Randomised: seeded shuffle.
    Rnd,
}

impl Strategy {
    /// Strategy encoded in a version id such as `RND3` or `PRI1`.
    pub fn of_version(version: &str) -> Option<Self> {
        let upper = version.to_ascii_uppercase();
        if upper.starts_with("PRI") {
            Some(Strategy::Pri)
        } else if upper.starts_with("RND") {
            Some(Strategy::Rnd)
        } else {
            None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Pri => "PRI",
            Strategy::Rnd => "RND",
        }
    }
}

impl FromStr for Strategy {
    type Err = PoolstatError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pri" => Ok(Strategy::Pri),
            "rnd" => Ok(Strategy::Rnd),
            other => Err(PoolstatError::invalid(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub qid: TopicId,
    pub content: String,
    pub description: String,
}

/// A system's ranked output: per topic, document ids in rank order (rank 1 first).
#[derive(Debug, Clone, PartialEq)]
pub struct RankedRun {
    pub run_tag: RunTag,
    pub team_id: Option<String>,
    pub(crate) rankings: BTreeMap<TopicId, Vec<DocId>>,
    pub(crate) scores: BTreeMap<TopicId, Vec<f64>>,
}

impl RankedRun {
    /// Builds a run from rank-ordered lists; fails on duplicate documents within a topic.
    pub fn new<I, T, D>(run_tag: impl Into<String>, rankings: I) -> Result<Self>
    where
        I: IntoIterator<Item = (T, Vec<D>)>,
        T: Into<String>,
        D: Into<String>,
    {
        let mut map = BTreeMap::new();
        let mut scores = BTreeMap::new();
        for (topic, docs) in rankings {
            let topic = topic.into();
            let docs: Vec<DocId> = docs.into_iter().map(Into::into).collect();
            let mut seen = BTreeSet::new();
            for d in &docs {
                if !seen.insert(d.as_str()) {
                    return Err(PoolstatError::DuplicateDocument {
                        topic,
                        doc: d.clone(),
                    });
                }
            }
            let n = docs.len();
            scores.insert(topic.clone(), (0..n).map(|i| (n - i) as f64).collect());
            map.insert(topic, docs);
        }
        Ok(Self {
            run_tag: run_tag.into(),
            team_id: None,
            rankings: map,
            scores,
        })
    }

    pub fn with_team(mut self, team: impl Into<String>) -> Self {
        self.team_id = Some(team.into());
        self
    }

    /// Rank-ordered documents for a topic; empty when the run skipped it.
    pub fn ranking(&self, topic: &str) -> &[DocId] {
        self.rankings.get(topic).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn topics(&self) -> impl Iterator<Item = &TopicId> {
        self.rankings.keys()
    }

    pub fn covers(&self, topic: &str) -> bool {
        self.rankings.get(topic).is_some_and(|r| !r.is_empty())
    }

    pub fn rankings(&self) -> &BTreeMap<TopicId, Vec<DocId>> {
        &self.rankings
    }
}

/// Per-topic relevance levels for one topic.
pub type TopicQrels = BTreeMap<DocId, u8>;

/// Graded relevance judgments: topic -> (document -> level 0..=2).
///
/// Documents absent from a topic are unjudged. Measures treat them as level 0,
/// audits can still tell them apart with [`Qrels::is_judged`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    pub version_id: VersionId,
    entries: BTreeMap<TopicId, TopicQrels>,
}

impl Qrels {
    pub fn new(version_id: impl Into<String>) -> Self {
        Self {
            version_id: version_id.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, topic: impl Into<String>, doc: impl Into<String>, level: u8) -> Result<()> {
        if level > MAX_LEVEL {
            return Err(PoolstatError::InvalidLevel(level as i64));
        }
        let topic = topic.into();
        let doc = doc.into();
        let per_topic = self.entries.entry(topic.clone()).or_default();
        if per_topic.contains_key(&doc) {
            return Err(PoolstatError::DuplicateDocument { topic, doc });
        }
        per_topic.insert(doc, level);
        Ok(())
    }

    pub fn level(&self, topic: &str, doc: &str) -> u8 {
        self.entries
            .get(topic)
            .and_then(|t| t.get(doc))
            .copied()
            .unwrap_or(0)
    }

    pub fn is_judged(&self, topic: &str, doc: &str) -> bool {
        self.entries.get(topic).is_some_and(|t| t.contains_key(doc))
    }

    pub fn topic(&self, topic: &str) -> Option<&TopicQrels> {
        self.entries.get(topic)
    }

    pub fn topics(&self) -> impl Iterator<Item = &TopicId> {
        self.entries.keys()
    }

    /// Iterates `(topic, doc, level)` in topic then document order.
    pub fn iter(&self) -> impl Iterator<Item = (&TopicId, &DocId, u8)> {
        self.entries
            .iter()
            .flat_map(|(t, docs)| docs.iter().map(move |(d, l)| (t, d, *l)))
    }

    /// Total number of judged topicdocs.
    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_relevant(&self, topic: &str) -> usize {
        self.entries
            .get(topic)
            .map_or(0, |t| t.values().filter(|&&l| l >= 1).count())
    }

    /// Counts of levels 0, 1 and 2.
    pub fn level_histogram(&self) -> [usize; 3] {
        let mut hist = [0; 3];
        for (_, _, l) in self.iter() {
            hist[l as usize] += 1;
        }
        hist
    }

    pub fn remove(&mut self, topic: &str, doc: &str) -> Option<u8> {
        let per_topic = self.entries.get_mut(topic)?;
        let removed = per_topic.remove(doc);
        if per_topic.is_empty() {
            self.entries.remove(topic);
        }
        removed
    }

    /// Keeps only the entries for which `keep(topic, doc, level)` holds.
    pub fn filtered(&self, version_id: impl Into<String>, mut keep: impl FnMut(&str, &str, u8) -> bool) -> Qrels {
        let mut out = Qrels::new(version_id);
        for (t, d, l) in self.iter() {
            if keep(t, d, l) {
                out.entries.entry(t.clone()).or_default().insert(d.clone(), l);
            }
        }
        out
    }
}

/// Assessor × topicdoc grid of raw labels, `None` where the assessor did not judge the unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    units: Vec<(TopicId, DocId)>,
    assessors: Vec<AssessorId>,
    cells: Vec<Option<RawLabel>>,
    unit_index: HashMap<(TopicId, DocId), usize>,
}

impl LabelMatrix {
    pub fn new(units: Vec<(TopicId, DocId)>, assessors: Vec<AssessorId>) -> Result<Self> {
        let mut unit_index = HashMap::with_capacity(units.len());
        for (i, u) in units.iter().enumerate() {
            if unit_index.insert(u.clone(), i).is_some() {
                return Err(PoolstatError::DuplicateDocument {
                    topic: u.0.clone(),
                    doc: u.1.clone(),
                });
            }
        }
        let mut seen = BTreeSet::new();
        for a in &assessors {
            if !seen.insert(a) {
                return Err(PoolstatError::invalid(format!("duplicate assessor {a}")));
            }
        }
        let cells = vec![None; units.len() * assessors.len()];
        Ok(Self {
            units,
            assessors,
            cells,
            unit_index,
        })
    }

    pub fn units(&self) -> &[(TopicId, DocId)] {
        &self.units
    }

    pub fn assessors(&self) -> &[AssessorId] {
        &self.assessors
    }

    pub fn assessor_index(&self, assessor: &str) -> Result<usize> {
        self.assessors
            .iter()
            .position(|a| a == assessor)
            .ok_or_else(|| PoolstatError::UnknownAssessor(assessor.to_string()))
    }

    pub fn unit_index(&self, topic: &str, doc: &str) -> Option<usize> {
        self.unit_index.get(&(topic.to_string(), doc.to_string())).copied()
    }

    pub fn get(&self, unit: usize, assessor: usize) -> Option<RawLabel> {
        self.cells[unit * self.assessors.len() + assessor]
    }

    pub fn set(&mut self, unit: usize, assessor: usize, label: Option<RawLabel>) {
        let width = self.assessors.len();
        self.cells[unit * width + assessor] = label;
    }

    /// The labels of one unit, one slot per assessor.
    pub fn row(&self, unit: usize) -> &[Option<RawLabel>] {
        let width = self.assessors.len();
        &self.cells[unit * width..(unit + 1) * width]
    }

    /// Copy of the matrix with one assessor's column replaced by NA.
    pub fn without_assessor(&self, assessor: &str) -> Result<LabelMatrix> {
        let a = self.assessor_index(assessor)?;
        let mut out = self.clone();
        for u in 0..out.units.len() {
            out.set(u, a, None);
        }
        Ok(out)
    }

    /// Distinct topics in first-appearance order.
    pub fn topics(&self) -> Vec<TopicId> {
        let mut seen = BTreeSet::new();
        self.units
            .iter()
            .filter(|(t, _)| seen.insert(t.clone()))
            .map(|(t, _)| t.clone())
            .collect()
    }

    /// Indices of the units belonging to a topic.
    pub fn units_of_topic(&self, topic: &str) -> Vec<usize> {
        self.units
            .iter()
            .enumerate()
            .filter(|(_, (t, _))| t == topic)
            .map(|(i, _)| i)
            .collect()
    }

    /// Number of non-NA labels per raw label value.
    pub fn label_totals(&self) -> BTreeMap<RawLabel, usize> {
        let mut totals = BTreeMap::new();
        for label in self.cells.iter().flatten() {
            *totals.entry(*label).or_insert(0) += 1;
        }
        totals
    }
}

/// Which qrels version each assessor's labels on a topic belong to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VersionMap {
    map: BTreeMap<(TopicId, AssessorId), VersionId>,
}

impl VersionMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, topic: impl Into<String>, assessor: impl Into<String>, version: impl Into<String>) {
        self.map.insert((topic.into(), assessor.into()), version.into());
    }

    pub fn version(&self, topic: &str, assessor: &str) -> Option<&str> {
        self.map
            .get(&(topic.to_string(), assessor.to_string()))
            .map(String::as_str)
    }

    /// The assessor who produced `version` for `topic`, if any.
    pub fn assessor_for(&self, topic: &str, version: &str) -> Option<&str> {
        self.map
            .iter()
            .find(|((t, _), v)| t == topic && v.as_str() == version)
            .map(|((_, a), _)| a.as_str())
    }

    /// Sorted distinct version ids.
    pub fn versions(&self) -> Vec<VersionId> {
        let set: BTreeSet<_> = self.map.values().cloned().collect();
        set.into_iter().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.map
            .iter()
            .map(|((t, a), v)| (t.as_str(), a.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Topic × run grid of per-topic scores for one (measure, qrels) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub measure_id: String,
    pub qrels_version: VersionId,
    pub cutoff: usize,
    topics: Vec<TopicId>,
    runs: Vec<RunTag>,
    cells: Vec<f64>,
}

impl ScoreMatrix {
    /// `cells` is row-major: `cells[t * runs.len() + r]`.
    pub fn new(
        measure_id: impl Into<String>,
        qrels_version: impl Into<String>,
        cutoff: usize,
        topics: Vec<TopicId>,
        runs: Vec<RunTag>,
        cells: Vec<f64>,
    ) -> Result<Self> {
        if cells.len() != topics.len() * runs.len() {
            return Err(PoolstatError::invalid("score matrix shape mismatch"));
        }
        if let Some(bad) = cells.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(PoolstatError::invalid(format!("score {bad} outside [0, 1]")));
        }
        Ok(Self {
            measure_id: measure_id.into(),
            qrels_version: qrels_version.into(),
            cutoff,
            topics,
            runs,
            cells,
        })
    }

    pub fn topics(&self) -> &[TopicId] {
        &self.topics
    }

    pub fn runs(&self) -> &[RunTag] {
        &self.runs
    }

    pub fn get(&self, topic: usize, run: usize) -> f64 {
        self.cells[topic * self.runs.len() + run]
    }

    pub fn column(&self, run: usize) -> Vec<f64> {
        (0..self.topics.len()).map(|t| self.get(t, run)).collect()
    }

    /// Mean score of every run over the topics, in `runs()` order.
    pub fn run_means(&self) -> Vec<f64> {
        let nt = self.topics.len().max(1) as f64;
        (0..self.runs.len())
            .map(|r| self.column(r).iter().sum::<f64>() / nt)
            .collect()
    }

    /// `(run, mean)` pairs keyed by run tag.
    pub fn run_mean_map(&self) -> BTreeMap<RunTag, f64> {
        self.runs.iter().cloned().zip(self.run_means()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_mapping_is_fixed() {
        assert_eq!(RawLabel::HighlyRelevant.level(), 2);
        assert_eq!(RawLabel::Relevant.level(), 1);
        assert_eq!(RawLabel::Nonrelevant.level(), 0);
        assert_eq!(RawLabel::Error.level(), 0);
        for l in RawLabel::ALL {
            assert_eq!(l.as_str().parse::<RawLabel>().unwrap(), l);
        }
    }

    #[test]
    fn strategy_from_version() {
        assert_eq!(Strategy::of_version("RND3"), Some(Strategy::Rnd));
        assert_eq!(Strategy::of_version("PRI1"), Some(Strategy::Pri));
        assert_eq!(Strategy::of_version("gold"), None);
    }

    #[test]
    fn qrels_rejects_duplicates_and_bad_levels() {
        let mut q = Qrels::new("PRI1");
        q.insert("0101", "doc-A", 2).unwrap();
        assert!(matches!(
            q.insert("0101", "doc-A", 1),
            Err(PoolstatError::DuplicateDocument { .. })
        ));
        assert!(matches!(q.insert("0101", "doc-B", 3), Err(PoolstatError::InvalidLevel(3))));
        assert_eq!(q.level("0101", "doc-A"), 2);
        assert_eq!(q.level("0101", "missing"), 0);
        assert!(!q.is_judged("0101", "missing"));
    }

    #[test]
    fn run_rejects_duplicate_docs() {
        let err = RankedRun::new("sysX", [("0101", vec!["a", "a"])]).unwrap_err();
        assert!(matches!(err, PoolstatError::DuplicateDocument { .. }));
    }

    #[test]
    fn score_matrix_rejects_out_of_range() {
        let err = ScoreMatrix::new("ndcg", "PRI1", 10, vec!["t".into()], vec!["r".into()], vec![1.5]);
        assert!(err.is_err());
    }
}
