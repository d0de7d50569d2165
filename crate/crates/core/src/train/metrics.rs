//! Micro-averaged F1 and single-threshold calibration.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::icd::LabelVector;

/// Candidate thresholds `0.01, 0.02, …, 0.99`.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (1..=99).map(|i| i as f64 / 100.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Counts {
    /// `(precision, recall, f1)`, each 0 when its denominator is 0.
    pub fn prf(&self) -> (f64, f64, f64) {
        let (tp, fp, fn_) = (self.tp as f64, self.fp as f64, self.fn_ as f64);
        let p = if self.tp + self.fp == 0 { 0.0 } else { tp / (tp + fp) };
        let r = if self.tp + self.fn_ == 0 { 0.0 } else { tp / (tp + fn_) };
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub partition: String,
    pub threshold: f64,
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<Counts>,
}

impl MetricsReport {
    pub fn with_context(mut self, partition: &str, threshold: f64) -> Self {
        self.partition = partition.to_owned();
        self.threshold = threshold;
        self
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "partition,threshold,tp,fp,fn,precision,recall,f1\n{},{:.2},{},{},{},{:.6},{:.6},{:.6}\n",
            self.partition,
            self.threshold,
            self.counts.tp,
            self.counts.fp,
            self.counts.fn_,
            self.precision,
            self.recall,
            self.f1
        )
    }

    pub fn per_class_csv(&self, classes: &[String]) -> String {
        let mut s = String::from("class,tp,fp,fn\n");
        for (name, c) in classes.iter().zip(&self.per_class) {
            let _ = writeln!(s, "{name},{},{},{}", c.tp, c.fp, c.fn_);
        }
        s
    }
}

fn check_shapes(a: &[LabelVector], b: &[LabelVector]) -> Result<usize> {
    let c = b.first().map_or(0, LabelVector::len);
    if a.len() != b.len() || a.iter().chain(b).any(|v| v.len() != c) {
        return Err(Error::Shape {
            op: "micro_f1",
            lhs: vec![a.len(), a.first().map_or(0, LabelVector::len)],
            rhs: vec![b.len(), c],
        });
    }
    Ok(c)
}

/// Micro-averaged scores over every note-class cell.
pub fn micro_f1(pred: &[LabelVector], truth: &[LabelVector]) -> Result<MetricsReport> {
    let c = check_shapes(pred, truth)?;
    let mut per_class = vec![Counts::default(); c];
    for (p, t) in pred.iter().zip(truth) {
        for (j, (&pv, &tv)) in p.0.iter().zip(&t.0).enumerate() {
            match (pv == 1, tv == 1) {
                (true, true) => per_class[j].tp += 1,
                (true, false) => per_class[j].fp += 1,
                (false, true) => per_class[j].fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let counts = per_class.iter().fold(Counts::default(), |acc, k| Counts {
        tp: acc.tp + k.tp,
        fp: acc.fp + k.fp,
        fn_: acc.fn_ + k.fn_,
    });
    let (precision, recall, f1) = counts.prf();
    Ok(MetricsReport {
        partition: String::new(),
        threshold: f64::NAN,
        counts,
        precision,
        recall,
        f1,
        per_class,
    })
}

/// Positive where `score >= tau`.
pub fn binarize(scores: &[Vec<f64>], tau: f64) -> Vec<LabelVector> {
    scores
        .iter()
        .map(|row| LabelVector(row.iter().map(|&s| u8::from(s >= tau)).collect()))
        .collect()
}

fn check_scores(scores: &[Vec<f64>], labels: &[LabelVector]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("threshold calibration"));
    }
    let c = labels.first().map_or(0, LabelVector::len);
    if scores.len() != labels.len() || scores.iter().any(|r| r.len() != c) || labels.iter().any(|l| l.len() != c) {
        return Err(Error::Shape {
            op: "calibrate_threshold",
            lhs: vec![scores.len(), scores[0].len()],
            rhs: vec![labels.len(), c],
        });
    }
    Ok(())
}

/// Micro-F1 at `tau`.
pub fn f1_at(scores: &[Vec<f64>], labels: &[LabelVector], tau: f64) -> Result<f64> {
    check_scores(scores, labels)?;
    Ok(micro_f1(&binarize(scores, tau), labels)?.f1)
}

/// The grid threshold with the highest micro-F1; the smallest wins ties.
pub fn calibrate_threshold(scores: &[Vec<f64>], labels: &[LabelVector]) -> Result<f64> {
    check_scores(scores, labels)?;
    // Per grid point, count cells at or above it, split by truth.
    let mut pos_at = [0u64; 100];
    let mut neg_at = [0u64; 100];
    let mut positives = 0u64;
    for (row, y) in scores.iter().zip(labels) {
        for (&s, &t) in row.iter().zip(&y.0) {
            positives += u64::from(t == 1);
            for (i, tau) in threshold_grid().enumerate() {
                if s >= tau {
                    if t == 1 {
                        pos_at[i] += 1;
                    } else {
                        neg_at[i] += 1;
                    }
                } else {
                    break;
                }
            }
        }
    }
    // F1 = 2TP / (2TP + FP + FN), compared as exact fractions so equal
    // scores from different counts tie and the smallest threshold wins.
    let mut best: Option<(u128, u128, f64)> = None;
    for (i, tau) in threshold_grid().enumerate() {
        let tp = u128::from(pos_at[i]);
        let num = 2 * tp;
        let den = (2 * tp + u128::from(neg_at[i]) + u128::from(positives - pos_at[i])).max(1);
        if best.is_none_or(|(bn, bd, _)| num * bd > bn * den) {
            best = Some((num, den, tau));
        }
    }
    Ok(best.map_or(0.01, |b| b.2))
}
