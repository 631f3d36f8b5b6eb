//! Area under the ROC curve via the rank-sum statistic, with midranks for ties.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    Anomalous,
}

impl Label {
    pub fn from_flag(flag: u8) -> Result<Self> {
        match flag {
            0 => Ok(Label::Normal),
            1 => Ok(Label::Anomalous),
            other => Err(Error::Data(format!("label must be 0 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScores {
    scores: Vec<f64>,
    labels: Vec<Label>,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::shape(
                "labeled scores",
                format!("{} scores for {} labels", scores.len(), labels.len()),
            ));
        }
        if let Some(i) = scores.iter().position(|s| s.is_nan()) {
            return Err(Error::Data(format!("score {i} is NaN")));
        }
        Ok(LabeledScores { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn positives(&self) -> usize {
        self.labels
            .iter()
            .filter(|&&l| l == Label::Anomalous)
            .count()
    }

    pub fn negatives(&self) -> usize {
        self.labels.len() - self.positives()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalSummary {
    pub auroc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// `P(score_pos > score_neg) + ½·P(score_pos = score_neg)`.
pub fn auroc(data: &LabeledScores) -> Result<f64> {
    let n_pos = data.positives();
    let n_neg = data.negatives();
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUROC needs both classes ({n_pos} anomalous, {n_neg} normal)"
        )));
    }

    let mut order: Vec<usize> = (0..data.scores.len()).collect();
    order.sort_by(|&a, &b| data.scores[a].total_cmp(&data.scores[b]));

    // Rank sums are half-integers, so doubling keeps them exact in integers.
    let mut twice_pos_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && data.scores[order[j]] == data.scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j share the midrank (i+1+j)/2.
        let twice_midrank = (i + 1 + j) as u128;
        let pos_in_group = order[i..j]
            .iter()
            .filter(|&&k| data.labels[k] == Label::Anomalous)
            .count() as u128;
        twice_pos_rank_sum += twice_midrank * pos_in_group;
        i = j;
    }

    let p = n_pos as u128;
    let twice_u = twice_pos_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

pub fn evaluate(data: &LabeledScores) -> Result<EvalSummary> {
    Ok(EvalSummary {
        auroc: auroc(data)?,
        n_pos: data.positives(),
        n_neg: data.negatives(),
    })
}
