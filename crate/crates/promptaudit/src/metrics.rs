//! Outcome classification and abstention-aware metrics.
//!
//! Predictions fall into six categories: TP/TN/FP/FN plus two
//! abstention-derived ones — UnFN (a vulnerable sample that received no
//! definitive verdict) and Incorrect (a safe sample that received no
//! definitive verdict). Incorrect is excluded from the accuracy
//! denominator; its weight is carried by abstention, coverage, and
//! effective F1 instead.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::parser::Verdict;

/// One of the six outcome categories for a (truth, verdict) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeCategory {
    #[serde(rename = "TP")]
    TruePositive,
    #[serde(rename = "TN")]
    TrueNegative,
    #[serde(rename = "FP")]
    FalsePositive,
    #[serde(rename = "FN")]
    FalseNegative,
    #[serde(rename = "UnFN")]
    UnknownFalseNegative,
    #[serde(rename = "Incorrect")]
    Incorrect,
}

/// Map a ground-truth label and a final verdict to an outcome category.
///
/// UNKNOWN verdicts split by truth: vulnerable truth becomes UnFN
/// (operationally a missed detection), safe truth becomes Incorrect.
pub fn classify_outcome(truth: Label, verdict: Verdict) -> OutcomeCategory {
    match (truth, verdict) {
        (Label::Vulnerable, Verdict::Vulnerable) => OutcomeCategory::TruePositive,
        (Label::Safe, Verdict::Safe) => OutcomeCategory::TrueNegative,
        (Label::Safe, Verdict::Vulnerable) => OutcomeCategory::FalsePositive,
        (Label::Vulnerable, Verdict::Safe) => OutcomeCategory::FalseNegative,
        (Label::Vulnerable, Verdict::Unknown) => OutcomeCategory::UnknownFalseNegative,
        (Label::Safe, Verdict::Unknown) => OutcomeCategory::Incorrect,
    }
}

/// Six counters for one configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionTally {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub unfn: u64,
    pub incorrect: u64,
}

impl ConfusionTally {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64, unfn: u64, incorrect: u64) -> Self {
        ConfusionTally {
            tp,
            tn,
            fp,
            fn_,
            unfn,
            incorrect,
        }
    }

    pub fn add(&mut self, category: OutcomeCategory) {
        match category {
            OutcomeCategory::TruePositive => self.tp += 1,
            OutcomeCategory::TrueNegative => self.tn += 1,
            OutcomeCategory::FalsePositive => self.fp += 1,
            OutcomeCategory::FalseNegative => self.fn_ += 1,
            OutcomeCategory::UnknownFalseNegative => self.unfn += 1,
            OutcomeCategory::Incorrect => self.incorrect += 1,
        }
    }

    /// Evaluated sample count: the sum of all six counters.
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_ + self.unfn + self.incorrect
    }

    /// Samples with VULNERABLE ground truth.
    pub fn vulnerable_truth(&self) -> u64 {
        self.tp + self.fn_ + self.unfn
    }

    /// Samples with SAFE ground truth.
    pub fn safe_truth(&self) -> u64 {
        self.tn + self.fp + self.incorrect
    }
}

/// Tally a stream of outcome categories.
pub fn tally(categories: impl IntoIterator<Item = OutcomeCategory>) -> ConfusionTally {
    let mut t = ConfusionTally::default();
    for c in categories {
        t.add(c);
    }
    t
}

/// Derived metrics for one configuration.
///
/// `None` marks an undefined metric (zero denominator); it serializes as
/// the literal `NA` in CSV. `abstention_rate` and `coverage` are fractions
/// in [0, 1] and always defined for a non-empty tally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub abstention_rate: f64,
    pub coverage: f64,
    pub effective_f1: Option<f64>,
}

/// Compute all metrics from a tally.
///
/// accuracy = (TP+TN)/(TP+TN+FP+FN+UnFN); precision = TP/(TP+FP);
/// recall = TP/(TP+FN+UnFN); f1 = harmonic mean of precision and recall;
/// abstention = (Incorrect+UnFN)/total; coverage = 1 − abstention;
/// effective_f1 = f1 × coverage. Any zero denominator yields `None` and
/// propagates (undefined f1 ⇒ undefined effective_f1).
///
/// Errors if the tally is empty (total = 0).
pub fn compute_metrics(t: &ConfusionTally) -> Result<MetricsRow> {
    let total = t.total();
    if total == 0 {
        return Err(Error::Metrics("empty tally (total = 0)".into()));
    }

    let ratio = |num: u64, den: u64| -> Option<f64> {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };

    let accuracy = ratio(t.tp + t.tn, t.tp + t.tn + t.fp + t.fn_ + t.unfn);
    let precision = ratio(t.tp, t.tp + t.fp);
    let recall = ratio(t.tp, t.tp + t.fn_ + t.unfn);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    let abstention_rate = (t.incorrect + t.unfn) as f64 / total as f64;
    let coverage = 1.0 - abstention_rate;
    let effective_f1 = f1.map(|v| v * coverage);

    Ok(MetricsRow {
        accuracy,
        precision,
        recall,
        f1,
        abstention_rate,
        coverage,
        effective_f1,
    })
}

/// Mean and max−min range of one metric over a group, with the number of
/// undefined values that were skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricAggregate {
    pub mean: Option<f64>,
    pub range: Option<f64>,
    pub skipped: usize,
}

fn aggregate_one(values: impl Iterator<Item = Option<f64>>) -> MetricAggregate {
    let mut defined = Vec::new();
    let mut skipped = 0usize;
    for v in values {
        match v {
            Some(x) => defined.push(x),
            None => skipped += 1,
        }
    }
    if defined.is_empty() {
        return MetricAggregate {
            mean: None,
            range: None,
            skipped,
        };
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    let max = defined.iter().copied().fold(f64::MIN, f64::max);
    let min = defined.iter().copied().fold(f64::MAX, f64::min);
    MetricAggregate {
        mean: Some(mean),
        range: Some(max - min),
        skipped,
    }
}

/// Per-metric aggregates over one group of rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub n: usize,
    pub accuracy: MetricAggregate,
    pub precision: MetricAggregate,
    pub recall: MetricAggregate,
    pub f1: MetricAggregate,
    pub abstention_rate: MetricAggregate,
    pub coverage: MetricAggregate,
    pub effective_f1: MetricAggregate,
}

/// Arithmetic mean and max−min range of every metric over a non-empty
/// group, skipping undefined values and recording how many were skipped.
pub fn summarize(rows: &[MetricsRow]) -> Result<MetricsSummary> {
    if rows.is_empty() {
        return Err(Error::Metrics("empty group".into()));
    }
    Ok(MetricsSummary {
        n: rows.len(),
        accuracy: aggregate_one(rows.iter().map(|r| r.accuracy)),
        precision: aggregate_one(rows.iter().map(|r| r.precision)),
        recall: aggregate_one(rows.iter().map(|r| r.recall)),
        f1: aggregate_one(rows.iter().map(|r| r.f1)),
        abstention_rate: aggregate_one(rows.iter().map(|r| Some(r.abstention_rate))),
        coverage: aggregate_one(rows.iter().map(|r| Some(r.coverage))),
        effective_f1: aggregate_one(rows.iter().map(|r| r.effective_f1)),
    })
}
