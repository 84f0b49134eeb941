//! Binary classification metrics. Class 1 is the positive class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp: usize,
}

impl ConfusionMatrix {
    pub fn new(tn: usize, fp: usize, fn_: usize, tp: usize) -> Self {
        Self { tn, fp, fn_, tp }
    }

    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tn + self.tp, self.total())
    }

    /// Positive-class F1.
    pub fn f1(&self) -> f64 {
        f1(ratio(self.tp, self.tp + self.fp), ratio(self.tp, self.tp + self.fn_))
    }

    /// Precision, recall and support for class `c`.
    fn class_stats(&self, c: u8) -> (f64, f64, usize) {
        if c == 1 {
            (
                ratio(self.tp, self.tp + self.fp),
                ratio(self.tp, self.tp + self.fn_),
                self.tp + self.fn_,
            )
        } else {
            (
                ratio(self.tn, self.tn + self.fn_),
                ratio(self.tn, self.tn + self.fp),
                self.tn + self.fp,
            )
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn check_labels(y: &[u8]) -> Result<()> {
    match y.iter().find(|&&v| v > 1) {
        Some(v) => Err(Error::InvalidParameter(format!("label {v} is not 0 or 1"))),
        None => Ok(()),
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    check_labels(y_true)?;
    check_labels(y_pred)?;
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (0, 0) => cm.tn += 1,
            (0, _) => cm.fp += 1,
            (_, 0) => cm.fn_ += 1,
            _ => cm.tp += 1,
        }
    }
    Ok(cm)
}

/// Positive-class F1 of a prediction vector.
pub fn f1_binary(y_true: &[u8], y_pred: &[u8]) -> Result<f64> {
    Ok(confusion(y_true, y_pred)?.f1())
}

pub fn accuracy(y_true: &[u8], y_pred: &[u8]) -> Result<f64> {
    Ok(confusion(y_true, y_pred)?.accuracy())
}

/// Area under the ROC curve via the rank-sum statistic; tied scores count
/// one half.
pub fn auc(y_true: &[u8], scores: &[f64]) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(Error::LengthMismatch {
            expected: y_true.len(),
            found: scores.len(),
        });
    }
    check_labels(y_true)?;
    let n_pos = y_true.iter().filter(|&&v| v == 1).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        // Ranks i+1..=j share their average.
        let avg = (i + 1 + j) as f64 / 2.0;
        rank_sum += avg * idx[i..j].iter().filter(|&&k| y_true[k] == 1).count() as f64;
        i = j;
    }
    let np = n_pos as f64;
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    /// Index 0 is the negative class.
    pub per_class: [ClassMetrics; 2],
    pub macro_avg: AveragedMetrics,
    pub weighted_avg: AveragedMetrics,
    pub binary: AveragedMetrics,
    /// Absent when the evaluation set holds a single class.
    pub auc: Option<f64>,
}

pub fn metric_panel(cm: &ConfusionMatrix, y_true: &[u8], scores: &[f64]) -> Result<EvaluationReport> {
    if cm.total() != y_true.len() {
        return Err(Error::LengthMismatch {
            expected: cm.total(),
            found: y_true.len(),
        });
    }
    let per_class = [0u8, 1].map(|c| {
        let (precision, recall, support) = cm.class_stats(c);
        ClassMetrics {
            precision,
            recall,
            f1: f1(precision, recall),
            support,
        }
    });
    let avg = |w: [f64; 2]| {
        let s = w[0] + w[1];
        let m = |f: fn(&ClassMetrics) -> f64| {
            if s == 0.0 {
                0.0
            } else {
                (w[0] * f(&per_class[0]) + w[1] * f(&per_class[1])) / s
            }
        };
        AveragedMetrics {
            precision: m(|c| c.precision),
            recall: m(|c| c.recall),
            f1: m(|c| c.f1),
        }
    };
    let macro_avg = avg([1.0, 1.0]);
    let weighted_avg = avg([per_class[0].support as f64, per_class[1].support as f64]);
    let binary = AveragedMetrics {
        precision: per_class[1].precision,
        recall: per_class[1].recall,
        f1: per_class[1].f1,
    };
    let auc = match auc(y_true, scores) {
        Ok(a) => Some(a),
        Err(Error::SingleClass) => None,
        Err(e) => return Err(e),
    };
    Ok(EvaluationReport {
        confusion: *cm,
        accuracy: cm.accuracy(),
        per_class,
        macro_avg,
        weighted_avg,
        binary,
        auc,
    })
}

/// Confusion, metrics and AUC in one call.
pub fn evaluate(y_true: &[u8], y_pred: &[u8], scores: &[f64]) -> Result<EvaluationReport> {
    let cm = confusion(y_true, y_pred)?;
    metric_panel(&cm, y_true, scores)
}
