//! Depth-k pools and their presentation orders.
//!
//! A pool for one topic is the union of the top-k documents of every run. Each
//! pooled document remembers how many runs placed it at or above depth k and the
//! sum of those ranks; the prioritised order sorts on exactly these two keys
//! (more runs first, then smaller rank sum) and finally on the document id.
//!
//! The randomised order is a Fisher–Yates shuffle of the id-sorted pool driven
//! by splitmix64, seeded with `seed ^ fnv1a64(topic id)`. For `i` from `n - 1`
//! down to `1` it swaps position `i` with position `next_u64() % (i + 1)`, so
//! the order is reproducible in any language.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::errors::{PoolstatError, Result};
use crate::io::{read_to_string, write_file};
use crate::model::{DocId, RankedRun, Strategy, TopicId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub depth: usize,
    pub strategy: Strategy,
    pub seed: u64,
}

impl PoolConfig {
    pub fn new(depth: usize, strategy: Strategy, seed: u64) -> Result<Self> {
        if depth == 0 {
            return Err(PoolstatError::invalid("pool depth must be at least 1"));
        }
        Ok(Self { depth, strategy, seed })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PooledDoc {
    pub doc: DocId,
    /// Runs that returned the document at rank ≤ k.
    pub run_count: usize,
    /// Sum of the document's ranks over those runs.
    pub rank_sum: usize,
}

/// The documents pooled for one topic, sorted by document id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pool {
    pub topic: TopicId,
    pub depth: usize,
    documents: Vec<PooledDoc>,
}

impl Pool {
    pub fn documents(&self) -> &[PooledDoc] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, doc: &str) -> Option<&PooledDoc> {
        self.documents
            .binary_search_by(|d| d.doc.as_str().cmp(doc))
            .ok()
            .map(|i| &self.documents[i])
    }

    pub fn contains(&self, doc: &str) -> bool {
        self.get(doc).is_some()
    }

    pub fn ordered(self, strategy: Strategy, seed: u64) -> PooledTopic {
        let order = match strategy {
            Strategy::Pri => order_pri(&self),
            Strategy::Rnd => order_rnd(&self, seed),
        };
        PooledTopic { pool: self, presentation_order: order }
    }
}

/// A pool together with the order in which assessors see it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PooledTopic {
    pub pool: Pool,
    pub presentation_order: Vec<DocId>,
}

impl PooledTopic {
    /// Pool file lines: `qid docid run_count rank_sum position`, in presentation order.
    pub fn to_pool_file(&self) -> String {
        let mut out = String::new();
        for (i, doc) in self.presentation_order.iter().enumerate() {
            let d = self.pool.get(doc).expect("order is a permutation of the pool");
            let _ = writeln!(out, "{} {} {} {} {}", self.pool.topic, d.doc, d.run_count, d.rank_sum, i + 1);
        }
        out
    }
}

/// Union of the top-`depth` documents of every run for `topic`.
pub fn build_pool(runs: &[RankedRun], topic: &str, depth: usize) -> Result<Pool> {
    if depth == 0 {
        return Err(PoolstatError::invalid("pool depth must be at least 1"));
    }
    let mut stats: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut covered = false;
    for run in runs {
        let ranking = run.ranking(topic);
        covered |= !ranking.is_empty();
        for (i, doc) in ranking.iter().take(depth).enumerate() {
            let e = stats.entry(doc.as_str()).or_insert((0, 0));
            e.0 += 1;
            e.1 += i + 1;
        }
    }
    if !covered {
        return Err(PoolstatError::TopicNotCovered(topic.to_string()));
    }
    Ok(Pool {
        topic: topic.to_string(),
        depth,
        documents: stats
            .into_iter()
            .map(|(doc, (run_count, rank_sum))| PooledDoc {
                doc: doc.to_string(),
                run_count,
                rank_sum,
            })
            .collect(),
    })
}

/// Pools every topic covered by at least one run.
pub fn build_pools(runs: &[RankedRun], depth: usize) -> Result<BTreeMap<TopicId, Pool>> {
    let mut topics: Vec<&TopicId> = runs.iter().flat_map(|r| r.topics()).collect();
    topics.sort();
    topics.dedup();
    topics
        .into_iter()
        .filter(|t| runs.iter().any(|r| r.covers(t)))
        .map(|t| build_pool(runs, t, depth).map(|p| (t.clone(), p)))
        .collect()
}

fn pri_cmp(a: &PooledDoc, b: &PooledDoc) -> Ordering {
    b.run_count
        .cmp(&a.run_count)
        .then(a.rank_sum.cmp(&b.rank_sum))
        .then_with(|| a.doc.cmp(&b.doc))
}

/// Pseudorelevance order: run count descending, rank sum ascending, document id ascending.
pub fn order_pri(pool: &Pool) -> Vec<DocId> {
    let mut docs: Vec<&PooledDoc> = pool.documents.iter().collect();
    docs.sort_by(|a, b| pri_cmp(a, b));
    docs.into_iter().map(|d| d.doc.clone()).collect()
}

/// Seeded shuffle of the id-sorted pool.
pub fn order_rnd(pool: &Pool, seed: u64) -> Vec<DocId> {
    let mut order: Vec<DocId> = pool.documents.iter().map(|d| d.doc.clone()).collect();
    let mut rng = SplitMix64::new(seed ^ fnv1a64(pool.topic.as_bytes()));
    for i in (1..order.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    order
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// splitmix64 generator (Steele, Lea and Flood).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

/// Reads a pool file back into `(docid, run_count, rank_sum)` rows in presentation order.
pub fn parse_pool_file(path: impl AsRef<Path>) -> Result<PooledTopic> {
    let path = path.as_ref();
    parse_pool_str(&read_to_string(path)?, &path.display().to_string())
}

pub fn parse_pool_str(text: &str, source_name: &str) -> Result<PooledTopic> {
    let mut topic: Option<String> = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(PoolstatError::parse(source_name, line_no, "expected qid docid run_count rank_sum position"));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| PoolstatError::parse(source_name, line_no, format!("bad number {s:?}")))
        };
        match &topic {
            None => topic = Some(f[0].to_string()),
            Some(t) if t != f[0] => {
                return Err(PoolstatError::parse(source_name, line_no, "pool file mixes topics"))
            }
            _ => {}
        }
        let position = num(f[4])?;
        if position != rows.len() + 1 {
            return Err(PoolstatError::parse(source_name, line_no, "positions must run 1, 2, 3, ..."));
        }
        rows.push(PooledDoc {
            doc: f[1].to_string(),
            run_count: num(f[2])?,
            rank_sum: num(f[3])?,
        });
    }
    let order: Vec<DocId> = rows.iter().map(|d| d.doc.clone()).collect();
    let mut documents = rows;
    documents.sort_by(|a, b| a.doc.cmp(&b.doc));
    if documents.windows(2).any(|w| w[0].doc == w[1].doc) {
        return Err(PoolstatError::parse(source_name, 0, "pool file repeats a document"));
    }
    Ok(PooledTopic {
        pool: Pool {
            topic: topic.unwrap_or_default(),
            depth: 0,
            documents,
        },
        presentation_order: order,
    })
}

/// Writes one `<qid>.pool` file per topic into `dir`.
pub fn write_pool_dir(dir: impl AsRef<Path>, pools: &[PooledTopic]) -> Result<()> {
    for p in pools {
        write_file(&dir.as_ref().join(format!("{}.pool", p.pool.topic)), &p.to_pool_file())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(tag: &str, docs: &[&str]) -> RankedRun {
        RankedRun::new(tag, [("t", docs.to_vec())]).unwrap()
    }

    fn stats(pool: &Pool) -> Vec<(&str, usize, usize)> {
        pool.documents()
            .iter()
            .map(|d| (d.doc.as_str(), d.run_count, d.rank_sum))
            .collect()
    }

    #[test]
    fn union_of_top_k() {
        let runs = [run("r1", &["A", "B"]), run("r2", &["B", "C"])];
        let pool = build_pool(&runs, "t", 2).unwrap();
        assert_eq!(stats(&pool), [("A", 1, 1), ("B", 2, 3), ("C", 1, 2)]);
        assert_eq!(order_pri(&pool), ["B", "A", "C"]);
    }

    #[test]
    fn depth_cutoff_excludes_lower_ranks() {
        let pool = build_pool(&[run("r", &["A", "B", "C"])], "t", 2).unwrap();
        assert_eq!(stats(&pool), [("A", 1, 1), ("B", 1, 2)]);
    }

    #[test]
    fn depth_beyond_run_length() {
        let runs = [run("r1", &["A"]), run("r2", &["B", "C"])];
        assert_eq!(build_pool(&runs, "t", 100).unwrap().len(), 3);
    }

    #[test]
    fn uncovered_topic_is_an_error() {
        let err = build_pool(&[run("r", &["A"])], "other", 5).unwrap_err();
        assert!(matches!(err, PoolstatError::TopicNotCovered(t) if t == "other"));
    }

    #[test]
    fn pri_ties_fall_back_to_docid() {
        let runs = [run("r1", &["z"]), run("r2", &["m"]), run("r3", &["a"])];
        let pool = build_pool(&runs, "t", 1).unwrap();
        assert_eq!(order_pri(&pool), ["a", "m", "z"]);
    }

    #[test]
    fn single_document_pool() {
        let pool = build_pool(&[run("r", &["only"])], "t", 3).unwrap();
        assert_eq!(order_pri(&pool), ["only"]);
        for seed in [0, 1, u64::MAX] {
            assert_eq!(order_rnd(&pool, seed), ["only"]);
        }
    }

    #[test]
    fn fnv_and_splitmix_reference_values() {
        // Reference vectors of the published algorithms.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        let mut rng = SplitMix64::new(1234567);
        assert_eq!(rng.next_u64(), 6457827717110365317);
        assert_eq!(rng.next_u64(), 3203168211198807973);
    }

    #[test]
    fn rnd_order_is_seeded() {
        let docs: Vec<String> = (0..100).map(|i| format!("d{i:03}")).collect();
        let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
        let pool = build_pool(&[run("r", &refs)], "t", 100).unwrap();
        assert_eq!(order_rnd(&pool, 7), order_rnd(&pool, 7));
        assert_ne!(order_rnd(&pool, 7), order_rnd(&pool, 8));
    }

    #[test]
    fn pool_file_round_trip() {
        let runs = [run("r1", &["A", "B"]), run("r2", &["B", "C"])];
        let topic = build_pool(&runs, "t", 2).unwrap().ordered(Strategy::Pri, 0);
        let text = topic.to_pool_file();
        assert_eq!(text, "t B 2 3 1\nt A 1 1 2\nt C 1 2 3\n");
        let back = parse_pool_str(&text, "p").unwrap();
        assert_eq!(back.presentation_order, topic.presentation_order);
        assert_eq!(back.pool.documents(), topic.pool.documents());
    }
}
