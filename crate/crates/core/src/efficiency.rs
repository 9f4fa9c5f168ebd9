//! Assessor activity logs and the five efficiency criteria.
//!
//! | criterion | meaning                                                | outlier rule  |
//! |-----------|--------------------------------------------------------|---------------|
//! | TJ1D      | open_topic to first judgment                           | NA over 180 s |
//! | TF1RH     | open_topic to first REL or H.REL judgment              | NA over 30 min|
//! | TF1H      | open_topic to first H.REL judgment                     | NA over 30 min|
//! | ATBJ      | mean gap between consecutive judgments                 | gaps over 180 s dropped |
//! | NREJ      | judgments that changed an existing label               | none          |

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::errors::{PoolstatError, Result};
use crate::io::read_to_string;
use crate::model::{AssessorId, DocId, RawLabel, TopicId, VersionId, VersionMap};
use crate::rankstats::tukey::{tukey_hsd_paired, TukeyResult};

/// First-judgment and inter-judgment outlier threshold.
pub const OUTLIER_MS: i64 = 180_000;
/// Threshold beyond which TF1RH and TF1H become NA.
pub const FIND_LIMIT_MS: i64 = 1_800_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    OpenTopic,
    ViewDoc,
    Judge,
}

/// One line of the activity log. Unknown fields are ignored on input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityEvent {
    /// Milliseconds since the epoch.
    pub ts: i64,
    pub assessor: AssessorId,
    pub topic: TopicId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc: Option<DocId>,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<RawLabel>,
}

/// Events of one assessor on one topic, in timestamp order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Timeline {
    pub assessor: AssessorId,
    pub topic: TopicId,
    pub events: Vec<ActivityEvent>,
}

pub fn parse_activity_log(path: impl AsRef<Path>) -> Result<Vec<Timeline>> {
    let path = path.as_ref();
    parse_activity_log_str(&read_to_string(path)?, &path.display().to_string())
}

/// Groups a JSON-lines log into timelines keyed by (assessor, topic).
///
/// Out-of-order timestamps are logged and stable-sorted. A timeline whose first
/// event is not `open_topic` is an error naming that event's line.
pub fn parse_activity_log_str(text: &str, source_name: &str) -> Result<Vec<Timeline>> {
    let mut groups: BTreeMap<(AssessorId, TopicId), Vec<(usize, ActivityEvent)>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let event: ActivityEvent =
            serde_json::from_str(line).map_err(|e| PoolstatError::parse(source_name, line_no, e.to_string()))?;
        match event.action {
            Action::Judge if event.doc.is_none() || event.label.is_none() => {
                return Err(PoolstatError::parse(source_name, line_no, "judge event needs doc and label"));
            }
            Action::ViewDoc if event.doc.is_none() => {
                return Err(PoolstatError::parse(source_name, line_no, "view_doc event needs doc"));
            }
            _ => {}
        }
        groups
            .entry((event.assessor.clone(), event.topic.clone()))
            .or_default()
            .push((line_no, event));
    }
    let mut timelines = Vec::with_capacity(groups.len());
    for ((assessor, topic), mut events) in groups {
        if events.windows(2).any(|w| w[1].1.ts < w[0].1.ts) {
            log::warn!("{source_name}: timestamps for assessor {assessor}, topic {topic} are not monotone; sorting");
            events.sort_by_key(|(_, e)| e.ts);
        }
        let (line_no, first) = &events[0];
        if first.action != Action::OpenTopic {
            return Err(PoolstatError::parse(
                source_name,
                *line_no,
                format!("assessor {assessor}, topic {topic}: event before open_topic"),
            ));
        }
        timelines.push(Timeline {
            assessor,
            topic,
            events: events.into_iter().map(|(_, e)| e).collect(),
        });
    }
    Ok(timelines)
}

/// Efficiency criteria for one (topic, assessor); times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyStats {
    pub topic: TopicId,
    pub assessor: AssessorId,
    pub tj1d: Option<f64>,
    pub tf1rh: Option<f64>,
    pub tf1h: Option<f64>,
    /// `None` when no inter-judgment gap survives the outlier rule.
    pub atbj: Option<f64>,
    pub nrej: usize,
}

fn seconds(ms: i64) -> f64 {
    ms as f64 / 1000.0
}

pub fn efficiency_stats(timeline: &Timeline) -> EfficiencyStats {
    let start = timeline.events.first().map(|e| e.ts).unwrap_or(0);
    let judges: Vec<&ActivityEvent> = timeline.events.iter().filter(|e| e.action == Action::Judge).collect();
    let first_where = |pred: &dyn Fn(RawLabel) -> bool, limit: i64| {
        judges
            .iter()
            .find(|e| e.label.is_some_and(pred))
            .map(|e| e.ts - start)
            .filter(|&dt| dt <= limit)
            .map(seconds)
    };
    let tj1d = first_where(&|_| true, OUTLIER_MS);
    let tf1rh = first_where(&|l| l.level() >= 1, FIND_LIMIT_MS);
    let tf1h = first_where(&|l| l == RawLabel::HighlyRelevant, FIND_LIMIT_MS);
    let gaps: Vec<i64> = judges
        .windows(2)
        .map(|w| w[1].ts - w[0].ts)
        .filter(|&g| g <= OUTLIER_MS)
        .collect();
    let atbj = if gaps.is_empty() {
        None
    } else {
        Some(seconds(gaps.iter().sum::<i64>()) / gaps.len() as f64)
    };
    let mut current: BTreeMap<&str, RawLabel> = BTreeMap::new();
    let mut nrej = 0;
    for e in &judges {
        let (Some(doc), Some(label)) = (e.doc.as_deref(), e.label) else { continue };
        if let Some(prev) = current.insert(doc, label) {
            if prev != label {
                nrej += 1;
            }
        }
    }
    EfficiencyStats {
        topic: timeline.topic.clone(),
        assessor: timeline.assessor.clone(),
        tj1d,
        tf1rh,
        tf1h,
        atbj,
        nrej,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.3}"))
}

/// TSV `topic assessor TJ1D TF1RH TF1H ATBJ NREJ`.
pub fn efficiency_report(stats: &[EfficiencyStats]) -> String {
    let mut out = String::from("topic\tassessor\tTJ1D\tTF1RH\tTF1H\tATBJ\tNREJ\n");
    for s in stats {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.topic,
            s.assessor,
            fmt_opt(s.tj1d),
            fmt_opt(s.tf1rh),
            fmt_opt(s.tf1h),
            fmt_opt(s.atbj),
            s.nrej
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    Tj1d,
    Tf1rh,
    Tf1h,
    Atbj,
    Nrej,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [Criterion::Tj1d, Criterion::Tf1rh, Criterion::Tf1h, Criterion::Atbj, Criterion::Nrej];

    pub fn value(self, s: &EfficiencyStats) -> Option<f64> {
        match self {
            Criterion::Tj1d => s.tj1d,
            Criterion::Tf1rh => s.tf1rh,
            Criterion::Tf1h => s.tf1h,
            Criterion::Atbj => s.atbj,
            Criterion::Nrej => Some(s.nrej as f64),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Tj1d => "TJ1D",
            Criterion::Tf1rh => "TF1RH",
            Criterion::Tf1h => "TF1H",
            Criterion::Atbj => "ATBJ",
            Criterion::Nrej => "NREJ",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = PoolstatError;

    fn from_str(s: &str) -> Result<Self> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| PoolstatError::invalid(format!("unknown efficiency criterion {s}")))
    }
}

/// Topics × versions table of one criterion; missing or NA cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionTable {
    pub criterion: Criterion,
    pub topics: Vec<TopicId>,
    pub versions: Vec<VersionId>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl CriterionTable {
    /// Blocks with no NA in any version.
    pub fn complete_blocks(&self) -> usize {
        self.cells.iter().filter(|r| r.iter().all(Option::is_some)).count()
    }

    /// Paired Tukey HSD with topics as blocks and versions as treatments.
    pub fn tukey(&self) -> Result<TukeyResult> {
        tukey_hsd_paired(&self.versions, &self.cells)
    }
}

/// Arranges per-(topic, assessor) statistics into a topic × version table.
pub fn criterion_table(
    stats: &[EfficiencyStats],
    versions: &VersionMap,
    version_order: &[VersionId],
    criterion: Criterion,
) -> Result<CriterionTable> {
    let mut by_topic: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    for s in stats {
        let Some(version) = versions.version(&s.topic, &s.assessor) else {
            log::warn!("topic {} assessor {}: no version assignment, skipped", s.topic, s.assessor);
            continue;
        };
        let col = version_order
            .iter()
            .position(|v| v == version)
            .ok_or_else(|| PoolstatError::UnknownVersion(version.to_string()))?;
        let row = by_topic.entry(&s.topic).or_insert_with(|| vec![None; version_order.len()]);
        row[col] = criterion.value(s);
    }
    Ok(CriterionTable {
        criterion,
        topics: by_topic.keys().map(|t| t.to_string()).collect(),
        versions: version_order.to_vec(),
        cells: by_topic.into_values().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(ts: i64, action: Action, doc: Option<&str>, label: Option<RawLabel>) -> ActivityEvent {
        ActivityEvent {
            ts,
            assessor: "A1".into(),
            topic: "0001".into(),
            doc: doc.map(Into::into),
            action,
            label,
        }
    }

    fn timeline(events: Vec<ActivityEvent>) -> Timeline {
        Timeline { assessor: "A1".into(), topic: "0001".into(), events }
    }

    #[test]
    fn hand_trace() {
        let t = timeline(vec![
            ev(0, Action::OpenTopic, None, None),
            ev(10_000, Action::Judge, Some("d1"), Some(RawLabel::Nonrelevant)),
            ev(30_000, Action::Judge, Some("d2"), Some(RawLabel::HighlyRelevant)),
        ]);
        let s = efficiency_stats(&t);
        assert_eq!((s.tj1d, s.tf1rh, s.tf1h, s.atbj, s.nrej), (Some(10.0), Some(30.0), Some(30.0), Some(20.0), 0));
    }

    #[test]
    fn outlier_gaps_dropped() {
        let mut events = vec![ev(0, Action::OpenTopic, None, None)];
        let mut t = 5_000;
        for (i, gap) in [0, 10, 20, 200, 30].iter().enumerate() {
            t += gap * 1000;
            events.push(ev(t, Action::Judge, Some(&format!("d{i}")), Some(RawLabel::Relevant)));
        }
        assert_eq!(efficiency_stats(&timeline(events)).atbj, Some(20.0));
    }

    #[test]
    fn rejudgments_count_changes_only() {
        let t = timeline(vec![
            ev(0, Action::OpenTopic, None, None),
            ev(1, Action::Judge, Some("d"), Some(RawLabel::Relevant)),
            ev(2, Action::Judge, Some("d"), Some(RawLabel::Relevant)),
            ev(3, Action::Judge, Some("d"), Some(RawLabel::HighlyRelevant)),
            ev(4, Action::Judge, Some("d"), Some(RawLabel::Relevant)),
        ]);
        assert_eq!(efficiency_stats(&t).nrej, 2);
    }

    #[test]
    fn late_finds_are_na() {
        let t = timeline(vec![
            ev(0, Action::OpenTopic, None, None),
            ev(200_000, Action::Judge, Some("a"), Some(RawLabel::Relevant)),
            ev(1_900_000, Action::Judge, Some("b"), Some(RawLabel::HighlyRelevant)),
        ]);
        let s = efficiency_stats(&t);
        assert_eq!((s.tj1d, s.tf1rh, s.tf1h, s.atbj), (None, Some(200.0), None, None));
    }

    #[test]
    fn log_parsing() {
        assert!(parse_activity_log_str("", "log").unwrap().is_empty());
        let ok = r#"{"ts":0,"assessor":"A","topic":"1","action":"open_topic","seq":1}
{"ts":5,"assessor":"A","topic":"1","doc":"d","action":"judge","label":"REL"}"#;
        let t = parse_activity_log_str(ok, "log").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].events.len(), 2);
        let bad = r#"{"ts":0,"assessor":"A","topic":"1","action":"open_topic"}
{"ts":5,"assessor":"A","topic":"2","doc":"d","action":"judge","label":"REL"}"#;
        let err = parse_activity_log_str(bad, "log").unwrap_err().to_string();
        assert!(err.starts_with("log:2:"), "{err}");
        let unsorted = r#"{"ts":9,"assessor":"A","topic":"1","doc":"d","action":"judge","label":"REL"}
{"ts":0,"assessor":"A","topic":"1","action":"open_topic"}"#;
        let t = parse_activity_log_str(unsorted, "log").unwrap();
        assert_eq!(t[0].events[0].action, Action::OpenTopic);
    }
}
