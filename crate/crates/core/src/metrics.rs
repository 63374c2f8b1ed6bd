//! Support-recovery metrics, classification metrics and trial aggregation.

use crate::error::{Error, Result};
use crate::graph::support_of;
use crate::online::predict_label;

/// Precision, recall, F1 and nonzero ratio of a learned support.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub nonzero_ratio: f64,
}

/// Support metrics of `w` against `wstar`. An empty learned support scores zero.
pub fn feature_metrics(w: &[f64], wstar: &[f64], tolerance: f64) -> Result<FeatureReport> {
    if w.len() != wstar.len() {
        return Err(Error::invalid(format!(
            "model has {} coordinates, truth has {}",
            w.len(),
            wstar.len()
        )));
    }
    let truth = support_of(wstar, tolerance);
    let learned = support_of(w, tolerance);
    let hit = truth.intersection_len(&learned) as f64;
    let (a, b) = (truth.len() as f64, learned.len() as f64);
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    Ok(FeatureReport {
        precision: ratio(hit, b),
        recall: ratio(hit, a),
        f1: ratio(2.0 * hit, a + b),
        nonzero_ratio: ratio(b, w.len() as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassReport {
    pub accuracy: f64,
    pub miss: u64,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
}

/// Accuracy under the sign rule, miss count and midrank AUC of raw scores.
///
/// With a single class the AUC is `None`; [`classification_auc`] reports that
/// case as [`Error::UndefinedAuc`].
pub fn classification_metrics(scores: &[f64], labels: &[f64]) -> Result<ClassReport> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    if let Some(y) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::invalid(format!("label must be +1 or -1, got {y}")));
    }
    let miss = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| (if s > 0.0 { 1.0 } else { -1.0 }) != y)
        .count() as u64;
    let n = scores.len() as f64;
    Ok(ClassReport {
        accuracy: 1.0 - miss as f64 / n,
        miss,
        auc: classification_auc(scores, labels).ok(),
    })
}

/// Mann-Whitney AUC with midranks for ties.
pub fn classification_auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] == 1.0 {
                rank_sum += midrank;
            }
        }
        i = j + 1;
    }
    let pos = labels.iter().filter(|&&y| y == 1.0).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::UndefinedAuc);
    }
    Ok((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

/// Scores `<w, x>` and labels of an evaluation set.
pub fn score_samples(w: &[f64], samples: &[crate::online::Sample]) -> (Vec<f64>, Vec<f64>) {
    samples
        .iter()
        .map(|s| (crate::graph::dot(w, &s.x), s.y))
        .unzip()
}

/// Fraction of samples whose sign prediction matches the label.
pub fn accuracy(w: &[f64], samples: &[crate::online::Sample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples.iter().filter(|s| predict_label(w, &s.x) == s.y).count();
    hits as f64 / samples.len() as f64
}

/// Mean squared residual of a linear model.
pub fn mean_squared_error(w: &[f64], samples: &[crate::online::Sample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples
        .iter()
        .map(|s| (s.y - crate::graph::dot(w, &s.x)).powi(2))
        .sum::<f64>()
        / samples.len() as f64
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("trial list"));
        }
        if values.iter().all(|&v| v == values[0]) {
            // summing identical values need not reproduce them exactly
            return Ok(Self { mean: values[0], std: 0.0 });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(Self { mean, std: var.sqrt() })
    }

    /// `mean±std` with three decimals.
    pub fn display(&self) -> String {
        format!("{:.3}±{:.3}", self.mean, self.std)
    }
}

/// Per-field summaries over several trials.
pub fn aggregate_trials<R>(reports: &[R], fields: &[(&str, fn(&R) -> f64)]) -> Result<Vec<(String, Summary)>> {
    if reports.is_empty() {
        return Err(Error::Empty("trial list"));
    }
    fields
        .iter()
        .map(|(name, get)| {
            let values: Vec<f64> = reports.iter().map(get).collect();
            Ok((name.to_string(), Summary::of(&values)?))
        })
        .collect()
}
