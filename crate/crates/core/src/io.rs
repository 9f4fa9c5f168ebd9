//! Readers and writers for the plain-text file formats.
//!
//! | file          | line format                                   |
//! |---------------|-----------------------------------------------|
//! | run           | `qid Q0 docid rank score tag`                 |
//! | qrels         | `qid 0 docid level`                           |
//! | label matrix  | TSV, header `topic doc <assessor>...`, cells `0`/`1`/`2`/`NA` |
//! | version map   | TSV `topic assessor version`                  |
//! | team map      | TSV `run_tag team`                            |
//! | score matrix  | TSV, header `topic <run>...`, trailing `mean` row |
//!
//! Lines starting with `#` are comments in the qrels, version map and team map formats.
//! Every writer emits the canonical form, so `write(parse(x)) == x` for canonical input.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::errors::{PoolstatError, Result};
use crate::model::{
    DocId, LabelMatrix, Qrels, RankedRun, RawLabel, RunTag, ScoreMatrix, Topic, TopicId, VersionMap,
};

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| PoolstatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| PoolstatError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    fs::write(path, contents).map_err(|source| PoolstatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

// ---------------------------------------------------------------------------
// Runs

pub fn parse_run_file(path: impl AsRef<Path>) -> Result<RankedRun> {
    let path = path.as_ref();
    parse_run_str(&read_to_string(path)?, &path.display().to_string())
}

pub fn parse_run_str(text: &str, source_name: &str) -> Result<RankedRun> {
    struct Entry {
        rank: usize,
        doc: DocId,
        score: f64,
        line: usize,
    }
    let mut tag: Option<String> = None;
    let mut per_topic: BTreeMap<TopicId, Vec<Entry>> = BTreeMap::new();

    for (line_no, line) in data_lines(text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(PoolstatError::parse(
                source_name,
                line_no,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        if fields[1] != "Q0" {
            return Err(PoolstatError::parse(source_name, line_no, "second field must be Q0"));
        }
        let rank: usize = fields[3]
            .parse()
            .map_err(|_| PoolstatError::parse(source_name, line_no, format!("bad rank {:?}", fields[3])))?;
        if rank == 0 {
            return Err(PoolstatError::parse(source_name, line_no, "ranks start at 1"));
        }
        let score: f64 = fields[4]
            .parse()
            .map_err(|_| PoolstatError::parse(source_name, line_no, format!("bad score {:?}", fields[4])))?;
        match &tag {
            None => tag = Some(fields[5].to_string()),
            Some(t) if t != fields[5] => {
                return Err(PoolstatError::parse(
                    source_name,
                    line_no,
                    format!("run tag {} differs from {}", fields[5], t),
                ))
            }
            _ => {}
        }
        let entries = per_topic.entry(fields[0].to_string()).or_default();
        if let Some(prev) = entries.iter().find(|e| e.doc == fields[2]) {
            return Err(PoolstatError::parse(
                source_name,
                line_no,
                format!(
                    "topic {}: duplicate document {} (first at line {})",
                    fields[0], fields[2], prev.line
                ),
            ));
        }
        entries.push(Entry {
            rank,
            doc: fields[2].to_string(),
            score,
            line: line_no,
        });
    }

    let mut rankings = BTreeMap::new();
    let mut scores = BTreeMap::new();
    for (topic, mut entries) in per_topic {
        entries.sort_by_key(|e| e.rank);
        for (i, e) in entries.iter().enumerate() {
            if e.rank != i + 1 {
                return Err(PoolstatError::parse(
                    source_name,
                    e.line,
                    format!("topic {topic}: ranks are not contiguous, expected {} found {}", i + 1, e.rank),
                ));
            }
        }
        scores.insert(topic.clone(), entries.iter().map(|e| e.score).collect());
        rankings.insert(topic, entries.into_iter().map(|e| e.doc).collect());
    }

    Ok(RankedRun {
        run_tag: tag.unwrap_or_default(),
        team_id: None,
        rankings,
        scores,
    })
}

pub fn write_run(run: &RankedRun) -> String {
    let mut out = String::new();
    for (topic, docs) in &run.rankings {
        let scores = &run.scores[topic];
        for (i, (doc, score)) in docs.iter().zip(scores).enumerate() {
            let _ = writeln!(out, "{topic} Q0 {doc} {} {score} {}", i + 1, run.run_tag);
        }
    }
    out
}

/// Loads every regular file of a directory as a run, sorted by run tag.
pub fn load_run_dir(dir: impl AsRef<Path>) -> Result<Vec<RankedRun>> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|source| PoolstatError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut runs = paths.iter().map(parse_run_file).collect::<Result<Vec<_>>>()?;
    runs.sort_by(|a, b| a.run_tag.cmp(&b.run_tag));
    Ok(runs)
}

// ---------------------------------------------------------------------------
// Qrels

pub fn parse_qrels_file(path: impl AsRef<Path>, version_id: &str) -> Result<Qrels> {
    let path = path.as_ref();
    parse_qrels_str(&read_to_string(path)?, version_id, &path.display().to_string())
}

pub fn parse_qrels_str(text: &str, version_id: &str, source_name: &str) -> Result<Qrels> {
    let mut qrels = Qrels::new(version_id);
    for (line_no, line) in data_lines(text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(PoolstatError::parse(
                source_name,
                line_no,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        if fields[1] != "0" {
            return Err(PoolstatError::parse(source_name, line_no, "second field must be 0"));
        }
        let level: i64 = fields[3]
            .parse()
            .map_err(|_| PoolstatError::parse(source_name, line_no, format!("bad level {:?}", fields[3])))?;
        if !(0..=2).contains(&level) {
            return Err(PoolstatError::parse(
                source_name,
                line_no,
                PoolstatError::InvalidLevel(level).to_string(),
            ));
        }
        qrels
            .insert(fields[0], fields[2], level as u8)
            .map_err(|e| PoolstatError::parse(source_name, line_no, e.to_string()))?;
    }
    Ok(qrels)
}

/// Canonical qrels text; `header` lines are written as `# ` comments first.
pub fn write_qrels(qrels: &Qrels, header: &[&str]) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    for (t, d, l) in qrels.iter() {
        let _ = writeln!(out, "{t} 0 {d} {l}");
    }
    out
}

/// Builds the qrels of one assessor column: one entry per non-NA cell, ERROR mapped to 0.
pub fn assemble_qrels(matrix: &LabelMatrix, assessor: &str) -> Result<Qrels> {
    let a = matrix.assessor_index(assessor)?;
    let mut qrels = Qrels::new(assessor);
    for (u, (topic, doc)) in matrix.units().iter().enumerate() {
        if let Some(label) = matrix.get(u, a) {
            qrels.insert(topic.clone(), doc.clone(), label.level())?;
        }
    }
    Ok(qrels)
}

/// Builds a qrels version from the cells that the version map attributes to `version`.
pub fn assemble_version_qrels(matrix: &LabelMatrix, versions: &VersionMap, version: &str) -> Result<Qrels> {
    let mut qrels = Qrels::new(version);
    let mut found = false;
    for (u, (topic, doc)) in matrix.units().iter().enumerate() {
        for (a, assessor) in matrix.assessors().iter().enumerate() {
            if versions.version(topic, assessor) != Some(version) {
                continue;
            }
            found = true;
            if let Some(label) = matrix.get(u, a) {
                qrels.insert(topic.clone(), doc.clone(), label.level())?;
            }
        }
    }
    if !found {
        return Err(PoolstatError::UnknownVersion(version.to_string()));
    }
    Ok(qrels)
}

// ---------------------------------------------------------------------------
// Label matrix

pub fn parse_label_matrix_file(path: impl AsRef<Path>) -> Result<LabelMatrix> {
    let path = path.as_ref();
    parse_label_matrix_str(&read_to_string(path)?, &path.display().to_string())
}

fn parse_cell(s: &str) -> Option<Option<RawLabel>> {
    match s {
        "NA" => Some(None),
        "0" => Some(Some(RawLabel::Nonrelevant)),
        "1" => Some(Some(RawLabel::Relevant)),
        "2" => Some(Some(RawLabel::HighlyRelevant)),
        other => other.parse().ok().map(Some),
    }
}

pub fn parse_label_matrix_str(text: &str, source_name: &str) -> Result<LabelMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.is_empty());
    let Some((_, header)) = lines.next() else {
        return LabelMatrix::new(Vec::new(), Vec::new());
    };
    let head: Vec<&str> = header.split('\t').collect();
    if head.len() < 2 {
        return Err(PoolstatError::parse(source_name, 1, "header needs topic and doc columns"));
    }
    let assessors: Vec<String> = head[2..].iter().map(|s| s.to_string()).collect();

    let mut units = Vec::new();
    let mut rows = Vec::new();
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != head.len() {
            return Err(PoolstatError::parse(
                source_name,
                line_no,
                format!("expected {} columns, found {}", head.len(), fields.len()),
            ));
        }
        let mut row = Vec::with_capacity(assessors.len());
        for cell in &fields[2..] {
            let parsed = parse_cell(cell)
                .ok_or_else(|| PoolstatError::parse(source_name, line_no, format!("bad cell {cell:?}")))?;
            row.push(parsed);
        }
        units.push((fields[0].to_string(), fields[1].to_string()));
        rows.push((line_no, row));
    }
    let mut matrix = LabelMatrix::new(units, assessors).map_err(|e| PoolstatError::parse(source_name, 0, e.to_string()))?;
    for (u, (_, row)) in rows.into_iter().enumerate() {
        for (a, cell) in row.into_iter().enumerate() {
            matrix.set(u, a, cell);
        }
    }
    Ok(matrix)
}

pub fn write_label_matrix(matrix: &LabelMatrix) -> String {
    let mut out = String::from("topic\tdoc");
    for a in matrix.assessors() {
        out.push('\t');
        out.push_str(a);
    }
    out.push('\n');
    for (u, (topic, doc)) in matrix.units().iter().enumerate() {
        out.push_str(topic);
        out.push('\t');
        out.push_str(doc);
        for cell in matrix.row(u) {
            out.push('\t');
            match cell {
                None => out.push_str("NA"),
                Some(RawLabel::Error) => out.push_str("ERROR"),
                Some(l) => {
                    let _ = write!(out, "{}", l.level());
                }
            }
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Version and team maps

pub fn parse_version_map_file(path: impl AsRef<Path>) -> Result<VersionMap> {
    let path = path.as_ref();
    parse_version_map_str(&read_to_string(path)?, &path.display().to_string())
}

pub fn parse_version_map_str(text: &str, source_name: &str) -> Result<VersionMap> {
    let mut map = VersionMap::new();
    for (line_no, line) in data_lines(text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(PoolstatError::parse(source_name, line_no, "expected topic, assessor, version"));
        }
        if map.version(fields[0], fields[1]).is_some() {
            return Err(PoolstatError::parse(
                source_name,
                line_no,
                format!("topic {} assessor {} listed twice", fields[0], fields[1]),
            ));
        }
        map.insert(fields[0], fields[1], fields[2]);
    }
    Ok(map)
}

pub fn write_version_map(map: &VersionMap) -> String {
    let mut out = String::new();
    for (t, a, v) in map.iter() {
        let _ = writeln!(out, "{t}\t{a}\t{v}");
    }
    out
}

pub fn parse_team_map_file(path: impl AsRef<Path>) -> Result<BTreeMap<RunTag, String>> {
    let path = path.as_ref();
    parse_team_map_str(&read_to_string(path)?, &path.display().to_string())
}

pub fn parse_team_map_str(text: &str, source_name: &str) -> Result<BTreeMap<RunTag, String>> {
    let mut map = BTreeMap::new();
    for (line_no, line) in data_lines(text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(PoolstatError::parse(source_name, line_no, "expected run tag and team"));
        }
        if map.insert(fields[0].to_string(), fields[1].to_string()).is_some() {
            return Err(PoolstatError::parse(source_name, line_no, format!("run {} listed twice", fields[0])));
        }
    }
    Ok(map)
}

/// Reads a topic id list (one per line, `#` comments allowed).
pub fn parse_topic_list_file(path: impl AsRef<Path>) -> Result<Vec<TopicId>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    Ok(data_lines(&text)
        .flat_map(|(_, l)| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .collect())
}

// ---------------------------------------------------------------------------
// Topics

fn tag_contents<'a>(text: &'a str, tag: &str) -> Vec<(usize, &'a str)> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(start) = text[pos..].find(&open) {
        let body_start = pos + start + open.len();
        let Some(end) = text[body_start..].find(&close) else { break };
        out.push((pos + start, &text[body_start..body_start + end]));
        pos = body_start + end + close.len();
    }
    out
}

fn squash_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses topic fragments leniently: any sequence of `<qid>`, `<content>` and
/// `<description>` elements, with or without an enclosing root element.
pub fn parse_topics_str(text: &str) -> Result<Vec<Topic>> {
    let qids = tag_contents(text, "qid");
    let contents = tag_contents(text, "content");
    let descriptions = tag_contents(text, "description");
    let mut topics = Vec::with_capacity(qids.len());
    let mut seen = BTreeSet::new();
    for (i, (pos, qid)) in qids.iter().enumerate() {
        let next = qids.get(i + 1).map_or(usize::MAX, |(p, _)| *p);
        let within = |items: &[(usize, &str)]| {
            items
                .iter()
                .find(|(p, _)| *p > *pos && *p < next)
                .map(|(_, s)| squash_whitespace(s))
                .unwrap_or_default()
        };
        let qid = qid.trim().to_string();
        if !seen.insert(qid.clone()) {
            return Err(PoolstatError::invalid(format!("topic {qid} defined twice")));
        }
        topics.push(Topic {
            qid,
            content: within(&contents),
            description: within(&descriptions),
        });
    }
    Ok(topics)
}

pub fn parse_topics_file(path: impl AsRef<Path>) -> Result<Vec<Topic>> {
    parse_topics_str(&read_to_string(path.as_ref())?)
}

// ---------------------------------------------------------------------------
// Score matrices

/// Columns are written in run-tag order regardless of the matrix's internal order.
pub fn write_score_matrix(matrix: &ScoreMatrix) -> String {
    let mut order: Vec<usize> = (0..matrix.runs().len()).collect();
    order.sort_by(|&a, &b| matrix.runs()[a].cmp(&matrix.runs()[b]));
    let mut out = String::from("topic");
    for &r in &order {
        out.push('\t');
        out.push_str(&matrix.runs()[r]);
    }
    out.push('\n');
    for (t, topic) in matrix.topics().iter().enumerate() {
        out.push_str(topic);
        for &r in &order {
            let _ = write!(out, "\t{:.6}", matrix.get(t, r));
        }
        out.push('\n');
    }
    let means = matrix.run_means();
    out.push_str("mean");
    for &r in &order {
        let _ = write!(out, "\t{:.6}", means[r]);
    }
    out.push('\n');
    out
}

pub fn parse_score_matrix_str(text: &str, measure_id: &str, qrels_version: &str, cutoff: usize, source_name: &str) -> Result<ScoreMatrix> {
    let mut lines = data_lines(text);
    let Some((_, header)) = lines.next() else {
        return Err(PoolstatError::parse(source_name, 1, "empty score matrix"));
    };
    let runs: Vec<RunTag> = header.split('\t').skip(1).map(str::to_string).collect();
    let mut topics = Vec::new();
    let mut cells = Vec::new();
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields[0] == "mean" {
            break;
        }
        if fields.len() != runs.len() + 1 {
            return Err(PoolstatError::parse(source_name, line_no, "column count mismatch"));
        }
        topics.push(fields[0].to_string());
        for f in &fields[1..] {
            cells.push(
                f.parse::<f64>()
                    .map_err(|_| PoolstatError::parse(source_name, line_no, format!("bad score {f:?}")))?,
            );
        }
    }
    ScoreMatrix::new(measure_id, qrels_version, cutoff, topics, runs, cells)
}

pub fn parse_score_matrix_file(path: impl AsRef<Path>) -> Result<ScoreMatrix> {
    let path = path.as_ref();
    parse_score_matrix_str(&read_to_string(path)?, "unknown", "unknown", 0, &path.display().to_string())
}
