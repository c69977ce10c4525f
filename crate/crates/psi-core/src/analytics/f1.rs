use std::collections::BTreeSet;

use serde::Serialize;

use super::AnalyticsError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScores<L> {
    pub label: L,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold count.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport<L> {
    /// Sorted union of gold and predicted labels.
    pub labels: Vec<L>,
    pub per_class: Vec<ClassScores<L>>,
    /// `confusion[g][p]`: items with gold `labels[g]` predicted as `labels[p]`.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub n: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision, recall and F1 plus their support-weighted F1 mean.
/// Precision of a never-predicted class is 0, and so is F1 when P + R = 0.
pub fn weighted_f1<L: Ord + Clone>(gold: &[L], pred: &[L]) -> Result<EvalReport<L>, AnalyticsError> {
    if gold.len() != pred.len() {
        return Err(AnalyticsError::LengthMismatch {
            left: gold.len(),
            right: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let labels: Vec<L> = gold
        .iter()
        .chain(pred)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let idx = |l: &L| labels.binary_search(l).expect("label is in the union");
    let k = labels.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (g, p) in gold.iter().zip(pred) {
        confusion[idx(g)][idx(p)] += 1;
    }
    let n = gold.len();
    let mut per_class = Vec::with_capacity(k);
    let mut weighted = 0.0;
    let mut correct = 0;
    for c in 0..k {
        let tp = confusion[c][c];
        correct += tp;
        let support: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        weighted += support as f64 * f1;
        per_class.push(ClassScores {
            label: labels[c].clone(),
            precision,
            recall,
            f1,
            support,
        });
    }
    Ok(EvalReport {
        labels,
        per_class,
        confusion,
        accuracy: ratio(correct, n),
        weighted_f1: weighted / n as f64,
        n,
    })
}
