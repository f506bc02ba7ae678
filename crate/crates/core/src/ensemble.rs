//! Unweighted probability averaging and the evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Elementwise mean of the members' probability vectors.
pub fn average_probabilities<P: AsRef<[f64]>>(members: &[P]) -> Result<Vec<f64>> {
    let first = members
        .first()
        .ok_or_else(|| CoreError::invalid("ensemble", "no members"))?
        .as_ref();
    let k = first.len();
    let mut out = vec![0.0; k];
    for m in members {
        let m = m.as_ref();
        if m.len() != k {
            return Err(CoreError::invalid(
                "ensemble",
                format!("members disagree on K: {k} vs {}", m.len()),
            ));
        }
        for (o, p) in out.iter_mut().zip(m) {
            *o += p;
        }
    }
    let n = members.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    Ok(out)
}

/// Index of the largest probability; the lowest index wins ties.
pub fn predict_label(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// `[K, K]` counts with gold classes as rows and predictions as columns.
pub fn confusion_matrix(gold: &[usize], predicted: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    if gold.len() != predicted.len() {
        return Err(CoreError::invalid(
            "confusion matrix",
            format!(
                "{} gold labels, {} predictions",
                gold.len(),
                predicted.len()
            ),
        ));
    }
    let mut m = vec![vec![0; k]; k];
    for (&g, &p) in gold.iter().zip(predicted) {
        if g >= k || p >= k {
            return Err(CoreError::invalid(
                "confusion matrix",
                format!("class ({g}, {p}) outside K = {k}"),
            ));
        }
        m[g][p] += 1;
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall, F1 and support per class; zero denominators give 0.
pub fn class_metrics(confusion: &[Vec<usize>], labels: &[String]) -> Vec<ClassMetrics> {
    let k = confusion.len();
    (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = (0..k).map(|g| confusion[g][c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                label: labels.get(c).cloned().unwrap_or_else(|| c.to_string()),
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect()
}

/// Per-class F1 averaged with weights equal to each class's share of the gold labels.
pub fn weighted_f1(gold: &[usize], predicted: &[usize], k: usize) -> Result<f64> {
    if gold.is_empty() {
        return Err(CoreError::invalid("weighted F1", "empty evaluation set"));
    }
    let m = confusion_matrix(gold, predicted, k)?;
    Ok(weighted_from(&class_metrics(&m, &[]), gold.len()))
}

fn weighted_from(metrics: &[ClassMetrics], n: usize) -> f64 {
    metrics.iter().map(|c| c.support as f64 * c.f1).sum::<f64>() / n as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub labels: Vec<String>,
    pub documents: usize,
    /// Rows are gold classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub weighted_f1: f64,
}

impl EvaluationReport {
    pub fn new(gold: &[usize], predicted: &[usize], labels: &[String]) -> Result<Self> {
        if gold.is_empty() {
            return Err(CoreError::invalid("evaluation", "empty evaluation set"));
        }
        let confusion = confusion_matrix(gold, predicted, labels.len())?;
        let per_class = class_metrics(&confusion, labels);
        let correct: usize = (0..labels.len()).map(|c| confusion[c][c]).sum();
        Ok(EvaluationReport {
            labels: labels.to_vec(),
            documents: gold.len(),
            weighted_f1: weighted_from(&per_class, gold.len()),
            accuracy: ratio(correct, gold.len()),
            confusion,
            per_class,
        })
    }

    /// Confusion matrix as CSV: a `gold\predicted` header row of labels,
    /// then one row per gold label.
    pub fn confusion_csv(&self) -> String {
        let mut out = format!("gold\\predicted,{}\n", self.labels.join(","));
        for (label, row) in self.labels.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            out.push_str(&format!("{label},{}\n", cells.join(",")));
        }
        out
    }
}
