//! Text formats around scoring: score TSVs, label TSVs and the groups
//! manifest mapping image ids to row ranges.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use crate::bank::{aggregate_image, ScoreReport};
use crate::error::{Error, Result};
use crate::metrics::{Label, LabeledScores};

pub const VECTOR_HEADER: &str = "vector_index\tscore\tnearest_index";
pub const IMAGE_HEADER: &str = "image_id\timage_score";

/// Renders per-vector scores. Indices are offset by `first_index`.
pub fn format_vector_scores(report: &ScoreReport, first_index: usize) -> String {
    let mut out = String::with_capacity(32 * report.per_vector_scores.len() + 40);
    out.push_str(VECTOR_HEADER);
    out.push('\n');
    for (i, (s, j)) in report
        .per_vector_scores
        .iter()
        .zip(&report.nearest_index)
        .enumerate()
    {
        writeln!(out, "{}\t{s}\t{j}", first_index + i).expect("write to string");
    }
    out
}

/// A named contiguous range of query rows, `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub id: String,
    pub start: usize,
    pub end: usize,
}

/// Parses the groups manifest `{"<image_id>": [start, end], ...}`. Ranges are
/// half-open, non-empty and must not overlap. Returned sorted by start.
pub fn parse_groups(text: &str) -> Result<Vec<Group>> {
    let raw: BTreeMap<String, (u64, u64)> =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("groups manifest: {e}")))?;
    let mut groups = Vec::with_capacity(raw.len());
    for (id, (start, end)) in raw {
        if start >= end {
            return Err(Error::Format(format!(
                "groups manifest: range [{start}, {end}) of {id:?} is empty"
            )));
        }
        let to_usize = |v: u64| {
            usize::try_from(v)
                .map_err(|_| Error::Format(format!("groups manifest: {v} out of range")))
        };
        groups.push(Group {
            id,
            start: to_usize(start)?,
            end: to_usize(end)?,
        });
    }
    groups.sort_by(|a, b| (a.start, &a.id).cmp(&(b.start, &b.id)));
    for w in groups.windows(2) {
        if w[1].start < w[0].end {
            return Err(Error::Format(format!(
                "groups manifest: {:?} [{}, {}) overlaps {:?} [{}, {})",
                w[0].id, w[0].start, w[0].end, w[1].id, w[1].start, w[1].end
            )));
        }
    }
    Ok(groups)
}

/// Checks that every group fits in `n` query rows.
pub fn check_groups(groups: &[Group], n: usize) -> Result<()> {
    match groups.iter().find(|g| g.end > n) {
        Some(g) => Err(Error::Consistency(format!(
            "group {:?} ends at row {} but only {n} query vectors were given",
            g.id, g.end
        ))),
        None => Ok(()),
    }
}

/// Image scores for each group, in manifest order.
pub fn image_scores(groups: &[Group], scores: &[f64]) -> Result<Vec<(String, f64)>> {
    check_groups(groups, scores.len())?;
    groups
        .iter()
        .map(|g| Ok((g.id.clone(), aggregate_image(&scores[g.start..g.end])?)))
        .collect()
}

pub fn format_image_scores(rows: &[(String, f64)]) -> String {
    let mut out = String::from(IMAGE_HEADER);
    out.push('\n');
    for (id, s) in rows {
        writeln!(out, "{id}\t{s}").expect("write to string");
    }
    out
}

/// Parses either score TSV. The first column is the id, the second the score.
pub fn parse_score_table(text: &str) -> Result<Vec<(String, f64)>> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h.trim_end_matches('\r'),
        None => return Err(Error::Format("score table is empty (no header)".into())),
    };
    if !(header.starts_with(VECTOR_HEADER) || header.starts_with(IMAGE_HEADER)) {
        return Err(Error::Format(format!(
            "unrecognized score table header {header:?}"
        )));
    }
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for (no, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (id, score) = match (fields.next(), fields.next()) {
            (Some(id), Some(score)) if !id.is_empty() => (id, score),
            _ => {
                return Err(Error::Format(format!(
                    "score table line {}: expected at least two tab-separated fields",
                    no + 1
                )))
            }
        };
        let score: f64 = score.parse().map_err(|_| {
            Error::Format(format!("score table line {}: bad score {score:?}", no + 1))
        })?;
        if score.is_nan() {
            return Err(Error::Data(format!(
                "score table line {}: NaN score",
                no + 1
            )));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::Format(format!(
                "score table line {}: duplicate id {id:?}",
                no + 1
            )));
        }
        rows.push((id.to_string(), score));
    }
    Ok(rows)
}

/// Parses `id<TAB>label` rows with labels 0 (normal) or 1 (anomalous). A
/// leading `id<TAB>label` header line is optional.
pub fn parse_labels(text: &str) -> Result<HashMap<String, Label>> {
    let mut out = HashMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || (no == 0 && line == "id\tlabel") {
            continue;
        }
        let (id, flag) = line.split_once('\t').ok_or_else(|| {
            Error::Format(format!("label line {}: expected id<TAB>label", no + 1))
        })?;
        let label = match flag.trim() {
            "0" => Label::Normal,
            "1" => Label::Anomalous,
            other => {
                return Err(Error::Format(format!(
                    "label line {}: label must be 0 or 1, got {other:?}",
                    no + 1
                )))
            }
        };
        if out.insert(id.to_string(), label).is_some() {
            return Err(Error::Format(format!(
                "label line {}: duplicate id {id:?}",
                no + 1
            )));
        }
    }
    Ok(out)
}

/// Aligns scores with labels by id. Both sides must cover the same ids.
pub fn join_labels(
    scores: &[(String, f64)],
    labels: &HashMap<String, Label>,
) -> Result<LabeledScores> {
    let mut s = Vec::with_capacity(scores.len());
    let mut l = Vec::with_capacity(scores.len());
    for (id, score) in scores {
        let label = labels
            .get(id)
            .ok_or_else(|| Error::Consistency(format!("no label for id {id:?}")))?;
        s.push(*score);
        l.push(*label);
    }
    if labels.len() != scores.len() {
        let ids: HashSet<&str> = scores.iter().map(|(id, _)| id.as_str()).collect();
        let mut extra: Vec<&str> = labels
            .keys()
            .map(String::as_str)
            .filter(|k| !ids.contains(k))
            .collect();
        extra.sort_unstable();
        return Err(Error::Consistency(format!(
            "{} labeled ids have no score (first: {:?})",
            extra.len(),
            extra.first().copied().unwrap_or_default()
        )));
    }
    LabeledScores::new(s, l)
}
