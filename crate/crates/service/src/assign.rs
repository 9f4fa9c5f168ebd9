//! Assignments: which pool (qrels version and presentation order) each assessor judges for a topic.

use std::collections::BTreeMap;
use std::path::Path;

use poolstat::io::{parse_topics_file, parse_version_map_file};
use poolstat::model::{AssessorId, DocId, Strategy, Topic, TopicId, VersionId, VersionMap};
use poolstat::pooling::{parse_pool_file, SplitMix64};

use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub assessor: AssessorId,
    pub topic: TopicId,
    pub version: VersionId,
    pub order: Vec<DocId>,
}

impl Assignment {
    pub fn contains(&self, doc: &str) -> bool {
        self.order.iter().any(|d| d == doc)
    }
}

/// Everything the service needs besides the event file.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    assignments: BTreeMap<(AssessorId, TopicId), Assignment>,
    topics: BTreeMap<TopicId, Topic>,
    versions: Vec<VersionId>,
}

impl Catalog {
    /// Joins a version map with presentation orders keyed by (topic, version).
    pub fn new(
        versions: &VersionMap,
        orders: &BTreeMap<(TopicId, VersionId), Vec<DocId>>,
        topics: Vec<Topic>,
    ) -> Result<Self, ServiceError> {
        let mut assignments = BTreeMap::new();
        for (topic, assessor, version) in versions.iter() {
            let order = orders
                .get(&(topic.to_string(), version.to_string()))
                .ok_or_else(|| ServiceError::Setup(format!("no {version} pool for topic {topic}")))?;
            assignments.insert(
                (assessor.to_string(), topic.to_string()),
                Assignment {
                    assessor: assessor.to_string(),
                    topic: topic.to_string(),
                    version: version.to_string(),
                    order: order.clone(),
                },
            );
        }
        Ok(Self {
            assignments,
            topics: topics.into_iter().map(|t| (t.qid.clone(), t)).collect(),
            versions: versions.versions(),
        })
    }

    /// Loads `versions.tsv`, `pools/<version>/<qid>.pool` and an optional topic file.
    pub fn load(version_map: &Path, pool_dir: &Path, topic_file: Option<&Path>) -> Result<Self, ServiceError> {
        let versions = parse_version_map_file(version_map)?;
        let mut orders = BTreeMap::new();
        for version in versions.versions() {
            let dir = pool_dir.join(&version);
            let entries = std::fs::read_dir(&dir).map_err(|e| ServiceError::io(&dir, e))?;
            for entry in entries {
                let path = entry.map_err(|e| ServiceError::io(&dir, e))?.path();
                if path.extension().is_some_and(|x| x == "pool") {
                    let pooled = parse_pool_file(&path)?;
                    orders.insert((pooled.pool.topic.clone(), version.clone()), pooled.presentation_order);
                }
            }
        }
        let topics = match topic_file {
            Some(p) => parse_topics_file(p)?,
            None => Vec::new(),
        };
        Self::new(&versions, &orders, topics)
    }

    pub fn assignment(&self, assessor: &str, topic: &str) -> Option<&Assignment> {
        self.assignments.get(&(assessor.to_string(), topic.to_string()))
    }

    pub fn assignments_of<'a>(&'a self, assessor: &'a str) -> impl Iterator<Item = &'a Assignment> + 'a {
        self.assignments.values().filter(move |a| a.assessor == assessor)
    }

    /// Assignments producing `version`, in topic order.
    pub fn assignments_for_version<'a>(&'a self, version: &'a str) -> impl Iterator<Item = &'a Assignment> + 'a {
        self.assignments.values().filter(move |a| a.version == version)
    }

    pub fn has_version(&self, version: &str) -> bool {
        self.versions.iter().any(|v| v == version)
    }

    pub fn topic(&self, topic: &str) -> Option<&Topic> {
        self.topics.get(topic)
    }
}

/// Seeded round-robin assignment of (topic, version) pairs to assessors.
///
/// The pairs are shuffled with splitmix64 and dealt in turn to the assessor
/// holding the fewest pools of that strategy (then the fewest pools overall).
/// An assessor never receives two versions of the same topic.
pub fn balanced_assignment(
    topics: &[TopicId],
    versions: &[VersionId],
    assessors: &[AssessorId],
    seed: u64,
) -> Result<VersionMap, ServiceError> {
    if assessors.len() < versions.len() {
        return Err(ServiceError::Setup(format!(
            "{} assessors cannot cover {} versions of a topic",
            assessors.len(),
            versions.len()
        )));
    }
    let mut deck: Vec<(&TopicId, &VersionId)> = topics.iter().flat_map(|t| versions.iter().map(move |v| (t, v))).collect();
    let mut rng = SplitMix64::new(seed);
    for i in (1..deck.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        deck.swap(i, j);
    }
    let mut map = VersionMap::new();
    let mut load = vec![0usize; assessors.len()];
    let mut by_strategy: BTreeMap<(usize, String), usize> = BTreeMap::new();
    let mut next = 0;
    for (topic, version) in deck {
        let bucket = Strategy::of_version(version).map_or(version.clone(), |s| s.as_str().to_string());
        // Fewest pools of this strategy, then fewest overall, scanning round-robin from `next`.
        let pick = (0..assessors.len())
            .map(|off| (next + off) % assessors.len())
            .filter(|&i| map.version(topic, &assessors[i]).is_none())
            .min_by_key(|&i| (by_strategy.get(&(i, bucket.clone())).copied().unwrap_or(0), load[i]))
            .ok_or_else(|| ServiceError::Setup(format!("no free assessor for topic {topic}")))?;
        map.insert(topic.clone(), assessors[pick].clone(), version.clone());
        load[pick] += 1;
        *by_strategy.entry((pick, bucket)).or_default() += 1;
        next = (pick + 1) % assessors.len();
    }
    Ok(map)
}
