//! Exact ranking metrics over labelled scores.
//!
//! Higher score means "more anomalous" and the positive class is the
//! anomalous one. Ties are handled explicitly:
//!
//! * AUROC gives half credit to tied positive/negative pairs (Mann–Whitney).
//! * AUPRC is the average precision over positives in descending score
//!   order. Inside a block of tied scores holding `p` positives and `n`
//!   negatives, the `j`-th positive is credited with the precision reached
//!   after `j` positives and `j·n/p` negatives of the block, i.e. false
//!   positives are spread evenly between the block's true positives.

use serde::{Deserialize, Serialize};

use crate::dataset::ScoreTable;
use crate::error::{GadError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScores {
    pairs: Vec<(f64, bool)>,
}

impl LabeledScores {
    pub fn new(scores: &[f64], labels: &[bool]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(GadError::LengthMismatch {
                expected: scores.len(),
                found: labels.len(),
            });
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(GadError::NonFinite { group: i, row: 0, col: 0 });
        }
        Ok(Self {
            pairs: scores.iter().copied().zip(labels.iter().copied()).collect(),
        })
    }

    pub fn from_table(table: &ScoreTable, labels: &[bool]) -> Result<Self> {
        Self::new(table.scores(), labels)
    }

    pub fn pairs(&self) -> &[(f64, bool)] {
        &self.pairs
    }

    pub fn positives(&self) -> usize {
        self.pairs.iter().filter(|p| p.1).count()
    }

    pub fn negatives(&self) -> usize {
        self.pairs.len() - self.positives()
    }

    /// Swaps the roles of the classes and reverses the ranking: regular items
    /// become positives and low scores rank first.
    pub fn inverted(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(s, l)| (-s, !l)).collect(),
        }
    }

    /// Tied blocks in descending score order as `(positives, negatives)`.
    fn descending_blocks(&self) -> Vec<(usize, usize)> {
        let mut sorted = self.pairs.clone();
        sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut blocks = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let s = sorted[i].0;
            let (mut p, mut n) = (0, 0);
            while i < sorted.len() && sorted[i].0 == s {
                if sorted[i].1 {
                    p += 1;
                } else {
                    n += 1;
                }
                i += 1;
            }
            blocks.push((p, n));
        }
        blocks
    }
}

/// Probability that a random positive outscores a random negative, ties ½.
pub fn auroc(ls: &LabeledScores) -> Result<f64> {
    let pos = ls.positives();
    let neg = ls.negatives();
    if pos == 0 || neg == 0 {
        return Err(GadError::SingleClass);
    }
    // walk blocks from the top: each positive beats every negative below it
    let mut negatives_below = neg as f64;
    let mut wins = 0.0;
    for (p, n) in ls.descending_blocks() {
        negatives_below -= n as f64;
        wins += p as f64 * (negatives_below + 0.5 * n as f64);
    }
    Ok(wins / (pos as f64 * neg as f64))
}

/// Average precision with the tied-block rule described in the module docs.
pub fn auprc(ls: &LabeledScores) -> Result<f64> {
    let pos = ls.positives();
    if pos == 0 {
        return Err(GadError::NoPositives);
    }
    let (mut tp, mut fp) = (0.0f64, 0.0f64);
    let mut total = 0.0;
    for (p, n) in ls.descending_blocks() {
        let (pf, nf) = (p as f64, n as f64);
        for j in 1..=p {
            let jf = j as f64;
            let t = tp + jf;
            total += t / (t + fp + jf * nf / pf);
        }
        tp += pf;
        fp += nf;
    }
    Ok(total / pos as f64)
}

/// ROC curve points `(fpr, tpr)` at every distinct threshold, starting at (0, 0).
pub fn roc_curve(ls: &LabeledScores) -> Result<Vec<(f64, f64)>> {
    let pos = ls.positives() as f64;
    let neg = ls.negatives() as f64;
    if pos == 0.0 || neg == 0.0 {
        return Err(GadError::SingleClass);
    }
    let mut pts = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    for (p, n) in ls.descending_blocks() {
        tp += p as f64;
        fp += n as f64;
        pts.push((fp / neg, tp / pos));
    }
    Ok(pts)
}

/// Precision–recall points `(recall, precision)` at every distinct threshold.
pub fn pr_curve(ls: &LabeledScores) -> Result<Vec<(f64, f64)>> {
    let pos = ls.positives() as f64;
    if pos == 0.0 {
        return Err(GadError::NoPositives);
    }
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut pts = Vec::new();
    for (p, n) in ls.descending_blocks() {
        tp += p as f64;
        fp += n as f64;
        pts.push((tp / pos, tp / (tp + fp)));
    }
    Ok(pts)
}
