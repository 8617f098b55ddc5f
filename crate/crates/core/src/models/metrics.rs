use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::ann::{threshold_rule, AnnModel};
use super::dataset::PairedDataset;
use super::ModelError;

/// Confusion counts with MZ (label 1) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    /// `FP / (FP + TN)`; `None` when the test set has no negatives.
    pub fpr: Option<f64>,
    /// `FN / (FN + TP)`; `None` when the test set has no positives.
    pub fnr: Option<f64>,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let n = tp + fp + tn + fn_;
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        Self {
            tp,
            fp,
            tn,
            fn_,
            accuracy: if n == 0 { 0.0 } else { 1.0 - (fp + fn_) as f64 / n as f64 },
            fpr: ratio(fp, fp + tn),
            fnr: ratio(fn_, fn_ + tp),
        }
    }

    pub fn from_predictions(predictions: &[u8], labels: &[u8]) -> Self {
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (&y, &t) in predictions.iter().zip(labels) {
            match (y, t) {
                (1, 1) => tp += 1,
                (1, _) => fp += 1,
                (_, 1) => fn_ += 1,
                _ => tn += 1,
            }
        }
        Self::from_counts(tp, fp, tn, fn_)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// True when FPR or FNR is undefined.
    pub fn has_undefined_rate(&self) -> bool {
        self.fpr.is_none() || self.fnr.is_none()
    }

    /// Ranking used for model selection: higher accuracy, then lower FPR, then
    /// lower FNR. An undefined rate ranks as 0. `Greater` means `self` is better.
    pub fn compare(&self, other: &Self) -> Ordering {
        let rate = |r: Option<f64>| r.unwrap_or(0.0);
        self.accuracy
            .total_cmp(&other.accuracy)
            .then_with(|| rate(other.fpr).total_cmp(&rate(self.fpr)))
            .then_with(|| rate(other.fnr).total_cmp(&rate(self.fnr)))
    }
}

/// Confusion metrics of the thresholded model on `test`.
pub fn evaluate(model: &AnnModel, test: &PairedDataset) -> Result<Metrics, ModelError> {
    if test.is_empty() {
        return Err(ModelError::InvalidData("empty test set".into()));
    }
    let predictions = model.outputs(test)?.into_iter().map(|o| threshold_rule(o, model.threshold)).collect::<Vec<_>>();
    Ok(Metrics::from_predictions(&predictions, test.labels()))
}

/// Threshold picked on validation data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub theta: f64,
    pub accuracy: f64,
    /// Validation set holds a single class; `theta` fell back to 0.5.
    pub single_class: bool,
}

/// Candidate thresholds `0.05, 0.10, …, 0.95`.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (1..=19).map(|i| i as f64 / 20.0)
}

/// Threshold maximizing accuracy on precomputed outputs; ties go to the value
/// closest to 0.5 (the lower one if equidistant).
pub fn tune_threshold_outputs(outputs: &[f64], labels: &[u8]) -> ThresholdChoice {
    let positives = labels.iter().filter(|&&t| t == 1).count();
    if positives == 0 || positives == labels.len() {
        let acc = accuracy_at(outputs, labels, 0.5);
        return ThresholdChoice { theta: 0.5, accuracy: acc, single_class: true };
    }
    let mut best = ThresholdChoice { theta: 0.5, accuracy: accuracy_at(outputs, labels, 0.5), single_class: false };
    for theta in threshold_grid() {
        let acc = accuracy_at(outputs, labels, theta);
        let closer = (theta - 0.5).abs() < (best.theta - 0.5).abs() - 1e-12;
        if acc > best.accuracy || (acc == best.accuracy && closer) {
            best = ThresholdChoice { theta, accuracy: acc, single_class: false };
        }
    }
    best
}

fn accuracy_at(outputs: &[f64], labels: &[u8], theta: f64) -> f64 {
    if outputs.is_empty() {
        return 0.0;
    }
    let correct = outputs.iter().zip(labels).filter(|(&o, &t)| threshold_rule(o, theta) == t).count();
    correct as f64 / outputs.len() as f64
}

pub fn tune_threshold(model: &AnnModel, validation: &PairedDataset) -> Result<ThresholdChoice, ModelError> {
    if validation.is_empty() {
        return Err(ModelError::InvalidData("empty validation set".into()));
    }
    Ok(tune_threshold_outputs(&model.outputs(validation)?, validation.labels()))
}
