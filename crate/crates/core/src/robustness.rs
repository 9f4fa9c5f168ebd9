//! Reusability checks for a pooled collection: leave-one-team-out (LOTO)
//! qrels, rank-range filtering, topic exclusion and rank-position histograms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::errors::{PoolstatError, Result};
use crate::measures::{score_matrix, Measure, MeasureConfig};
use crate::model::{DocId, LabelMatrix, Qrels, RankedRun, RunTag, Strategy, TopicId, VersionId, VersionMap};
use crate::pooling::build_pool;
use crate::rankstats::tau::kendall_tau_maps;

/// Run tag to team id.
pub type TeamMap = BTreeMap<RunTag, String>;

fn team_of<'a>(team_map: &'a TeamMap, run: &RankedRun) -> Result<&'a str> {
    team_map
        .get(&run.run_tag)
        .map(String::as_str)
        .ok_or_else(|| PoolstatError::UnmappedRun(run.run_tag.clone()))
}

fn pooled_topics(runs: &[RankedRun], topics: Option<&[TopicId]>) -> Vec<TopicId> {
    match topics {
        Some(t) => t.to_vec(),
        None => {
            let set: BTreeSet<&TopicId> = runs.iter().flat_map(|r| r.topics()).collect();
            set.into_iter().cloned().collect()
        }
    }
}

/// For every pooled topicdoc, the set of teams whose runs placed it at rank ≤ `depth`.
pub fn contributing_teams(
    runs: &[RankedRun],
    team_map: &TeamMap,
    depth: usize,
    topics: Option<&[TopicId]>,
) -> Result<BTreeMap<(TopicId, DocId), BTreeSet<String>>> {
    for run in runs {
        team_of(team_map, run)?;
    }
    let mut out = BTreeMap::new();
    for topic in pooled_topics(runs, topics) {
        // Validates coverage and depth the same way pool construction does.
        build_pool(runs, &topic, depth)?;
        for run in runs {
            let team = team_of(team_map, run)?;
            for doc in run.ranking(&topic).iter().take(depth) {
                out.entry((topic.clone(), doc.clone()))
                    .or_insert_with(BTreeSet::new)
                    .insert(team.to_string());
            }
        }
    }
    Ok(out)
}

/// Pooled topicdocs contributed by `team` and by no other team.
pub fn unique_contributions(
    runs: &[RankedRun],
    team_map: &TeamMap,
    team: &str,
    depth: usize,
    topics: Option<&[TopicId]>,
) -> Result<BTreeSet<(TopicId, DocId)>> {
    if !runs.iter().any(|r| team_map.get(&r.run_tag).is_some_and(|t| t == team)) {
        return Err(PoolstatError::EmptyTeam(team.to_string()));
    }
    let teams = contributing_teams(runs, team_map, depth, topics)?;
    Ok(unique_from(&teams, team))
}

fn unique_from(teams: &BTreeMap<(TopicId, DocId), BTreeSet<String>>, team: &str) -> BTreeSet<(TopicId, DocId)> {
    teams
        .iter()
        .filter(|(_, set)| set.len() == 1 && set.contains(team))
        .map(|(key, _)| key.clone())
        .collect()
}

/// `qrels` without the given topicdocs; they become unjudged.
pub fn loto_qrels(qrels: &Qrels, removed: &BTreeSet<(TopicId, DocId)>, team: &str) -> Qrels {
    qrels.filtered(format!("{}-wo-{}", qrels.version_id, team), |t, d, _| {
        !removed.contains(&(t.to_string(), d.to_string()))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LotoTeam {
    pub team: String,
    pub unique_contributions: usize,
    pub loto_qrels_size: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VdipRow {
    pub run: RunTag,
    pub full_score: f64,
    pub loto_score: f64,
    pub team_left_out: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LotoReport {
    pub measure: String,
    pub qrels_version: VersionId,
    pub original_size: usize,
    pub teams: Vec<LotoTeam>,
    pub mean_tau: f64,
    pub vdip: Vec<VdipRow>,
}

impl LotoReport {
    /// `team unique loto_size tau`, then a `mean` row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("team\tunique\tloto_size\ttau\n");
        for t in &self.teams {
            let _ = writeln!(out, "{}\t{}\t{}\t{:.4}", t.team, t.unique_contributions, t.loto_qrels_size, t.tau);
        }
        let _ = writeln!(out, "mean\t\t{}\t{:.4}", self.original_size, self.mean_tau);
        out
    }

    /// V-dip plot data: `run,full_score,loto_score,team_left_out`.
    pub fn vdip_csv(&self) -> String {
        let mut out = String::from("run,full_score,loto_score,team_left_out\n");
        for r in &self.vdip {
            let _ = writeln!(out, "{},{:.6},{:.6},{}", r.run, r.full_score, r.loto_score, r.team_left_out);
        }
        out
    }
}

/// Leave-one-team-out experiment for one qrels version and one measure.
///
/// `pool_runs` define the pool and hence the unique contributions;
/// `eval_runs` are the systems being ranked. A team whose removal leaves every
/// run score unchanged gets τ = 1 even when some runs tie.
#[allow(clippy::too_many_arguments)]
pub fn loto_experiment(
    pool_runs: &[RankedRun],
    eval_runs: &[RankedRun],
    qrels: &Qrels,
    team_map: &TeamMap,
    measure: Measure,
    config: &MeasureConfig,
    depth: usize,
    topics: &[TopicId],
) -> Result<LotoReport> {
    if topics.is_empty() {
        return Err(PoolstatError::EmptyTopicSet);
    }
    let contributions = contributing_teams(pool_runs, team_map, depth, None)?;
    let full = score_matrix(eval_runs, qrels, measure, config, topics)?.run_mean_map();
    let team_names: BTreeSet<&str> = pool_runs
        .iter()
        .map(|r| team_of(team_map, r))
        .collect::<Result<_>>()?;
    let mut teams = Vec::new();
    let mut vdip = Vec::new();
    for team in team_names {
        let removed = unique_from(&contributions, team);
        let reduced = loto_qrels(qrels, &removed, team);
        let loto = score_matrix(eval_runs, &reduced, measure, config, topics)?.run_mean_map();
        let tau = if loto == full { 1.0 } else { kendall_tau_maps(&full, &loto)?.tau };
        for (run, score) in &full {
            vdip.push(VdipRow {
                run: run.clone(),
                full_score: *score,
                loto_score: loto[run],
                team_left_out: team.to_string(),
            });
        }
        teams.push(LotoTeam {
            team: team.to_string(),
            unique_contributions: removed.len(),
            loto_qrels_size: reduced.len(),
            tau,
        });
    }
    let mean_tau = teams.iter().map(|t| t.tau).sum::<f64>() / teams.len() as f64;
    Ok(LotoReport {
        measure: measure.id().to_string(),
        qrels_version: qrels.version_id.clone(),
        original_size: qrels.len(),
        teams,
        mean_tau,
        vdip,
    })
}

/// Keeps a qrels entry iff some run ranks that document within `[lo, hi]` for its topic.
pub fn rr_filter(qrels: &Qrels, runs: &[RankedRun], lo: usize, hi: usize) -> Result<Qrels> {
    if lo == 0 || lo > hi {
        return Err(PoolstatError::invalid(format!("rank range {lo}-{hi} needs 1 ≤ lo ≤ hi")));
    }
    let mut in_range: BTreeSet<(&str, &str)> = BTreeSet::new();
    for run in runs {
        for (topic, ranking) in run.rankings() {
            for doc in ranking.iter().take(hi).skip(lo - 1) {
                in_range.insert((topic.as_str(), doc.as_str()));
            }
        }
    }
    Ok(qrels.filtered(format!("{}-rr{lo}-{hi}", qrels.version_id), |t, d, _| in_range.contains(&(t, d))))
}

/// Header comment for a rank-range filtered qrels file.
pub fn rr_provenance(source_version: &str, lo: usize, hi: usize, runs: usize) -> String {
    format!("rr{lo}-{hi} filter of {source_version} over {runs} runs")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSelection {
    pub kept: Vec<TopicId>,
    /// Topics without a relevant document in at least one variant, with the first such variant.
    pub excluded: Vec<(TopicId, VersionId)>,
}

/// Topics of `universe` that have at least one relevant document in every qrels variant.
pub fn valid_topics(variants: &[&Qrels], universe: &[TopicId]) -> Result<TopicSelection> {
    if variants.is_empty() {
        return Err(PoolstatError::invalid("valid_topics needs at least one qrels version"));
    }
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for topic in universe {
        match variants.iter().find(|q| q.num_relevant(topic) == 0) {
            Some(q) => excluded.push((topic.clone(), q.version_id.clone())),
            None => kept.push(topic.clone()),
        }
    }
    if kept.is_empty() {
        return Err(PoolstatError::EmptyTopicSet);
    }
    Ok(TopicSelection { kept, excluded })
}

/// Presentation order of each (topic, qrels version).
pub type OrderMap = BTreeMap<(TopicId, VersionId), Vec<DocId>>;

/// Count of level ≥ 1 labels at each presentation rank `1..=max_rank`,
/// summed over topics and over the versions of one strategy.
pub fn rank_label_histogram(
    matrix: &LabelMatrix,
    versions: &VersionMap,
    orders: &OrderMap,
    strategy: Strategy,
    max_rank: usize,
) -> Result<Vec<usize>> {
    let selected: Vec<(&(TopicId, VersionId), &Vec<DocId>)> = orders
        .iter()
        .filter(|((_, v), _)| Strategy::of_version(v) == Some(strategy))
        .collect();
    if selected.is_empty() {
        return Err(PoolstatError::invalid(format!("no {} presentation orders", strategy.as_str())));
    }
    let min_pool = selected.iter().map(|(_, o)| o.len()).min().unwrap_or(0);
    if max_rank > min_pool {
        return Err(PoolstatError::invalid(format!(
            "max rank {max_rank} exceeds the smallest pool ({min_pool} documents)"
        )));
    }
    let mut counts = vec![0; max_rank];
    for ((topic, version), order) in selected {
        let assessor = versions.assessor_for(topic, version).ok_or_else(|| {
            PoolstatError::UnknownVersion(format!("{version} has no assessor for topic {topic}"))
        })?;
        let a = matrix.assessor_index(assessor)?;
        for (rank, doc) in order.iter().take(max_rank).enumerate() {
            let label = matrix.unit_index(topic, doc).and_then(|u| matrix.get(u, a));
            if label.is_some_and(|l| l.level() >= 1) {
                counts[rank] += 1;
            }
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(tag: &str, docs: &[&str]) -> RankedRun {
        RankedRun::new(tag, [("T1", docs.iter().map(|d| d.to_string()).collect::<Vec<_>>())]).unwrap()
    }

    fn teams(pairs: &[(&str, &str)]) -> TeamMap {
        pairs.iter().map(|(r, t)| (r.to_string(), t.to_string())).collect()
    }

    #[test]
    fn unique_contribution_cases() {
        let runs = vec![run("a1", &["x", "y"]), run("b1", &["x", "y"])];
        let tm = teams(&[("a1", "A"), ("b1", "B")]);
        assert!(unique_contributions(&runs, &tm, "A", 2, None).unwrap().is_empty());
        let solo = vec![run("a1", &["x", "y", "z"])];
        assert_eq!(unique_contributions(&solo, &tm, "A", 2, None).unwrap().len(), 2);
        assert!(matches!(unique_contributions(&runs, &tm, "C", 2, None), Err(PoolstatError::EmptyTeam(_))));
        let runs = vec![run("a1", &["x", "p"]), run("a2", &["q", "x"]), run("b1", &["x", "r"])];
        let tm = teams(&[("a1", "A"), ("a2", "A"), ("b1", "B")]);
        let u = unique_contributions(&runs, &tm, "A", 2, None).unwrap();
        let docs: Vec<&str> = u.iter().map(|(_, d)| d.as_str()).collect();
        assert_eq!(docs, ["p", "q"]);
    }

    #[test]
    fn rr_filter_ranges() {
        let mut q = Qrels::new("V");
        for (d, l) in [("a", 1), ("b", 0), ("c", 2), ("z", 1)] {
            q.insert("T1", d, l).unwrap();
        }
        let runs = vec![run("r", &["a", "b", "c"])];
        let all = rr_filter(&q, &runs, 1, 100).unwrap();
        assert_eq!(all.len(), 3);
        let tail = rr_filter(&q, &runs, 2, 3).unwrap();
        assert!(!tail.is_judged("T1", "a") && tail.is_judged("T1", "c"));
        assert!(rr_filter(&q, &runs, 3, 2).is_err());
    }

    #[test]
    fn topic_exclusion() {
        let mut a = Qrels::new("A");
        a.insert("1", "d", 1).unwrap();
        a.insert("2", "d", 0).unwrap();
        let mut b = Qrels::new("B");
        b.insert("1", "d", 2).unwrap();
        b.insert("2", "d", 1).unwrap();
        let universe = vec!["1".to_string(), "2".to_string()];
        let sel = valid_topics(&[&a, &b], &universe).unwrap();
        assert_eq!(sel.kept, ["1"]);
        assert_eq!(sel.excluded, [("2".to_string(), "A".to_string())]);
        assert!(valid_topics(&[&a], &["2".to_string()]).is_err());
    }
}
