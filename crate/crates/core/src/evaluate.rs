//! Binary-classification evaluation: confusion matrices, threshold metrics,
//! ranking AUC, cross-validation aggregation, and analytic majority-class
//! baselines.
//!
//! Class 1 (design) is the positive class everywhere. Ratios with a zero
//! denominator are reported as 0.0 and the affected metric names are listed
//! in an `undefined` set rather than silently producing NaN. Fold aggregates
//! use the population standard deviation (divide by the fold count).

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Dataset;
use crate::protocol::{ProtocolError, ProtocolSpec, ValidationSpec};

/// Errors raised by metric computation.
#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("label and prediction vectors disagree in length: {labels} vs {predictions}")]
    LengthMismatch { labels: usize, predictions: usize },
    #[error("cannot evaluate an empty prediction set")]
    Empty,
    #[error("AUC is undefined when only one class is present (positives: {positives}, negatives: {negatives})")]
    SingleClassAuc { positives: usize, negatives: usize },
    #[error("unknown metric `{name}`, valid options: accuracy, precision, recall, f1, balanced_accuracy, roc_auc")]
    UnknownMetric { name: String },
}

/// Counts of the four prediction outcomes, with class 1 as positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Tallies predictions against labels.
pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix, EvaluateError> {
    if y_true.len() != y_pred.len() {
        return Err(EvaluateError::LengthMismatch {
            labels: y_true.len(),
            predictions: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(EvaluateError::Empty);
    }
    let mut cm = ConfusionMatrix { tp: 0, fp: 0, tn: 0, fn_: 0 };
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            _ => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// The metric selector used by grid search, transfer matrices, and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Precision,
    Recall,
    F1,
    BalancedAccuracy,
    RocAuc,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Accuracy,
        Metric::Precision,
        Metric::Recall,
        Metric::F1,
        Metric::BalancedAccuracy,
        Metric::RocAuc,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
            Metric::BalancedAccuracy => "balanced_accuracy",
            Metric::RocAuc => "roc_auc",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = EvaluateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accuracy" => Ok(Metric::Accuracy),
            "precision" => Ok(Metric::Precision),
            "recall" => Ok(Metric::Recall),
            "f1" => Ok(Metric::F1),
            "balanced_accuracy" => Ok(Metric::BalancedAccuracy),
            "roc_auc" => Ok(Metric::RocAuc),
            other => Err(EvaluateError::UnknownMetric { name: other.to_string() }),
        }
    }
}

/// One full set of metric values. `roc_auc` is optional because it needs
/// scores (not just labels) and both classes present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub balanced_accuracy: f64,
    pub roc_auc: Option<f64>,
}

impl MetricSet {
    /// Selects one metric by name; `None` only when `roc_auc` is absent.
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Accuracy => Some(self.accuracy),
            Metric::Precision => Some(self.precision),
            Metric::Recall => Some(self.recall),
            Metric::F1 => Some(self.f1),
            Metric::BalancedAccuracy => Some(self.balanced_accuracy),
            Metric::RocAuc => self.roc_auc,
        }
    }
}

/// Threshold metrics from a confusion matrix. Returns the values plus the
/// names of metrics whose defining ratio had a zero denominator (those values
/// are reported as 0.0).
pub fn metrics(cm: &ConfusionMatrix) -> (MetricSet, Vec<String>) {
    let mut undefined = Vec::new();
    let mut ratio = |num: usize, den: usize, name: &str| -> f64 {
        if den == 0 {
            undefined.push(name.to_string());
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let total = cm.total();
    let accuracy = (cm.tp + cm.tn) as f64 / total as f64;
    let precision = ratio(cm.tp, cm.tp + cm.fp, "precision");
    let recall = ratio(cm.tp, cm.tp + cm.fn_, "recall");
    let f1 = if precision + recall == 0.0 {
        undefined.push("f1".to_string());
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let balanced_accuracy = {
        let pos = cm.tp + cm.fn_;
        let neg = cm.tn + cm.fp;
        if pos == 0 || neg == 0 {
            undefined.push("balanced_accuracy".to_string());
            let tpr = if pos == 0 { 0.0 } else { cm.tp as f64 / pos as f64 };
            let tnr = if neg == 0 { 0.0 } else { cm.tn as f64 / neg as f64 };
            (tpr + tnr) / 2.0
        } else {
            (cm.tp as f64 / pos as f64 + cm.tn as f64 / neg as f64) / 2.0
        }
    };
    (MetricSet { accuracy, precision, recall, f1, balanced_accuracy, roc_auc: None }, undefined)
}

/// Area under the ROC curve via the rank-sum statistic with midranks for
/// tied scores:
///
/// `AUC = (R_pos − n_pos(n_pos+1)/2) / (n_pos · n_neg)`
///
/// where `R_pos` is the sum of the (average) ranks of the positive scores.
/// Errors when only one class is present.
pub fn roc_auc(y_true: &[u8], scores: &[f64]) -> Result<f64, EvaluateError> {
    if y_true.len() != scores.len() {
        return Err(EvaluateError::LengthMismatch {
            labels: y_true.len(),
            predictions: scores.len(),
        });
    }
    if y_true.is_empty() {
        return Err(EvaluateError::Empty);
    }
    let n_pos = y_true.iter().filter(|&&l| l == 1).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvaluateError::SingleClassAuc { positives: n_pos, negatives: n_neg });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    // Assign midranks: tied scores all receive the mean of the rank range
    // they occupy (1-based).
    let mut rank = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            rank[idx] = mid;
        }
        i = j + 1;
    }
    let r_pos: f64 = y_true.iter().zip(&rank).filter(|(&l, _)| l == 1).map(|(_, &r)| r).sum();
    Ok((r_pos - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64))
}

/// A cross-validation (or holdout) evaluation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Fold-wise arithmetic mean of every metric. For `roc_auc`, folds where
    /// AUC was undefined are excluded from the mean (and flagged below).
    pub mean: MetricSet,
    /// Population standard deviation across folds; absent for holdout runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stdev: Option<MetricSet>,
    /// Per-fold values, in fold order; absent for holdout runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_fold: Option<Vec<MetricSet>>,
    /// Names of metrics that were undefined in at least one fold (sorted,
    /// deduplicated).
    pub undefined: Vec<String>,
    /// For holdout runs: metrics on the tuning split, kept separate from the
    /// test-split numbers in `mean`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout_validation: Option<MetricSet>,
    /// Free-form convention note (e.g. which class the majority baseline
    /// measured against); absent for ordinary runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl EvalReport {
    /// A report holding a single metric set with no fold structure.
    pub fn single(mean: MetricSet, undefined: Vec<String>) -> Self {
        EvalReport {
            mean,
            stdev: None,
            per_fold: None,
            undefined,
            holdout_validation: None,
            note: None,
        }
    }
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_stdev(values: &[f64], mean: f64) -> f64 {
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Combines per-fold metric sets into an [`EvalReport`]: per-metric mean and
/// population stdev, with undefined-AUC folds excluded from the AUC aggregate
/// and recorded in the `undefined` list.
pub fn aggregate_folds(per_fold: Vec<MetricSet>, mut undefined: Vec<String>) -> EvalReport {
    assert!(!per_fold.is_empty(), "aggregate_folds requires at least one fold");
    let collect = |f: fn(&MetricSet) -> f64| -> Vec<f64> { per_fold.iter().map(f).collect() };
    let auc_values: Vec<f64> = per_fold.iter().filter_map(|m| m.roc_auc).collect();
    if auc_values.len() < per_fold.len() {
        undefined.push("roc_auc".to_string());
    }
    let make = |agg: &dyn Fn(&[f64]) -> f64| MetricSet {
        accuracy: agg(&collect(|m| m.accuracy)),
        precision: agg(&collect(|m| m.precision)),
        recall: agg(&collect(|m| m.recall)),
        f1: agg(&collect(|m| m.f1)),
        balanced_accuracy: agg(&collect(|m| m.balanced_accuracy)),
        roc_auc: if auc_values.is_empty() { None } else { Some(agg(&auc_values)) },
    };
    let mean = make(&mean_of);
    let stdev = make(&|vals: &[f64]| population_stdev(vals, mean_of(vals)));
    undefined.sort();
    undefined.dedup();
    EvalReport {
        mean,
        stdev: Some(stdev),
        per_fold: Some(per_fold),
        undefined,
        holdout_validation: None,
        note: None,
    }
}

/// Runs the protocol's pipeline as k-fold cross-validation with the given
/// fold count and seed (overriding whatever `spec` carries) and returns the
/// aggregated report. Bit-reproducible given identical arguments, fold
/// membership included.
pub fn cross_validate(
    spec: &ProtocolSpec,
    dataset: &Dataset,
    k: usize,
    seed: u64,
) -> Result<EvalReport, ProtocolError> {
    let mut spec = spec.clone();
    spec.validation = ValidationSpec::Kfold { k };
    spec.seed = seed;
    Ok(crate::protocol::execute(&spec, dataset)?.report)
}

/// Analytic metrics of the majority-class predictor on data with the given
/// design prevalence `p`.
///
/// The convention follows replication practice for imbalanced baselines:
/// precision/recall/F1 are measured on the predicted (majority) class, so
/// with `m = max(p, 1−p)` the values are accuracy `m`, precision `m`, recall
/// 1, F1 `2m/(1+m)`, balanced accuracy 0.5. For `p ≥ 0.5` the majority class
/// is design itself; the report carries a note saying so.
pub fn zeror_baseline(prevalence: f64) -> EvalReport {
    let m = prevalence.max(1.0 - prevalence);
    let mut report = EvalReport::single(
        MetricSet {
            accuracy: m,
            precision: m,
            recall: 1.0,
            f1: 2.0 * m / (1.0 + m),
            balanced_accuracy: 0.5,
            roc_auc: None,
        },
        Vec::new(),
    );
    if prevalence >= 0.5 {
        report.note = Some(
            "design is the majority class; baseline metrics are measured against it".to_string(),
        );
    }
    report
}

/// Exact-rational metric values for the majority-class baseline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactBaseline {
    pub accuracy: Ratio<u64>,
    pub precision: Ratio<u64>,
    pub recall: Ratio<u64>,
    pub f1: Ratio<u64>,
    pub balanced_accuracy: Ratio<u64>,
}

/// [`zeror_baseline`] in exact rational arithmetic, for verifying that the
/// floating-point version carries no rounding surprises.
pub fn zeror_baseline_exact(prevalence: Ratio<u64>) -> ExactBaseline {
    let one = Ratio::from_integer(1u64);
    let m = if prevalence >= Ratio::new(1, 2) { prevalence } else { one - prevalence };
    ExactBaseline {
        accuracy: m,
        precision: m,
        recall: one,
        f1: Ratio::from_integer(2u64) * m / (one + m),
        balanced_accuracy: Ratio::new(1, 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn confusion_counts_each_quadrant() {
        let cm = confusion(&[1, 0, 1, 1, 0], &[1, 0, 0, 1, 1]).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 2, fp: 1, tn: 1, fn_: 1 });
        assert_eq!(cm.total(), 5);

        // One positive found, one missed, negatives untouched.
        let cm = confusion(&[1, 1, 0, 0], &[1, 0, 0, 0]).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 1, fp: 0, tn: 2, fn_: 1 });
        // Perfect predictions leave both error quadrants empty.
        let cm = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((cm.fp, cm.fn_), (0, 0));
        // All-zero predictions on all-one labels miss everything.
        let cm = confusion(&[1, 1, 1], &[0, 0, 0]).unwrap();
        assert_eq!((cm.tp, cm.fn_), (0, 3));
    }

    #[test]
    fn metrics_on_single_missed_positive() {
        // tp=1 fn=1 tn=2 fp=0: precision 1, recall 0.5, f1 2/3,
        // accuracy 0.75, balanced (0.5 + 1)/2 = 0.75.
        let cm = ConfusionMatrix { tp: 1, fp: 0, tn: 2, fn_: 1 };
        let (m, undefined) = metrics(&cm);
        assert!(undefined.is_empty());
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.balanced_accuracy, 0.75);
    }

    #[test]
    fn confusion_validates_input() {
        assert!(matches!(confusion(&[1], &[1, 0]), Err(EvaluateError::LengthMismatch { .. })));
        assert!(matches!(confusion(&[], &[]), Err(EvaluateError::Empty)));
    }

    #[test]
    fn metrics_match_hand_computation() {
        // tp=2 fp=1 tn=1 fn=1: acc 3/5, prec 2/3, rec 2/3, f1 2/3,
        // balanced (2/3 + 1/2)/2 = 7/12.
        let cm = ConfusionMatrix { tp: 2, fp: 1, tn: 1, fn_: 1 };
        let (m, undefined) = metrics(&cm);
        assert!(undefined.is_empty());
        assert!((m.accuracy - 0.6).abs() < 1e-12);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.balanced_accuracy - 7.0 / 12.0).abs() < 1e-12);
        assert_eq!(m.roc_auc, None);
    }

    #[test]
    fn undefined_ratios_become_zero_and_are_flagged() {
        // All-negative predictions on data that has positives: no predicted
        // positives ⇒ precision undefined; recall = 0 ⇒ f1 undefined too.
        let cm = confusion(&[1, 1, 0], &[0, 0, 0]).unwrap();
        let (m, undefined) = metrics(&cm);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.f1, 0.0);
        assert_eq!(undefined, vec!["precision", "f1"]);

        // Single-class ground truth: recall and balanced accuracy undefined.
        let cm = confusion(&[0, 0], &[0, 1]).unwrap();
        let (m, undefined) = metrics(&cm);
        assert_eq!(m.recall, 0.0);
        assert!((m.balanced_accuracy - 0.25).abs() < 1e-12); // (0 + 1/2)/2
        assert!(undefined.contains(&"recall".to_string()));
        assert!(undefined.contains(&"balanced_accuracy".to_string()));
    }

    #[test]
    fn auc_matches_rank_sum_example() {
        // Sorted scores .1(0) .35(1) .4(0) .8(1): positive ranks 2 and 4,
        // AUC = (6 − 3)/4 = 0.75.
        let auc = roc_auc(&[0, 0, 1, 1], &[0.1, 0.4, 0.35, 0.8]).unwrap();
        assert!((auc - 0.75).abs() < 1e-12);
    }

    #[test]
    fn auc_uses_midranks_for_ties() {
        // All-equal scores carry no ranking information: AUC = 0.5 exactly.
        let auc = roc_auc(&[0, 1, 0, 1], &[0.5, 0.5, 0.5, 0.5]).unwrap();
        assert!((auc - 0.5).abs() < 1e-12);
        // Perfect separation.
        let auc = roc_auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap();
        assert!((auc - 1.0).abs() < 1e-12);
        // Perfectly inverted ranking.
        let auc = roc_auc(&[1, 1, 0, 0], &[0.1, 0.2, 0.8, 0.9]).unwrap();
        assert!(auc.abs() < 1e-12);
    }

    #[test]
    fn auc_requires_both_classes() {
        assert!(matches!(
            roc_auc(&[1, 1], &[0.1, 0.9]),
            Err(EvaluateError::SingleClassAuc { positives: 2, negatives: 0 })
        ));
    }

    #[test]
    fn aggregation_uses_population_stdev() {
        let fold = |acc: f64, auc: Option<f64>| MetricSet {
            accuracy: acc,
            precision: acc,
            recall: acc,
            f1: acc,
            balanced_accuracy: acc,
            roc_auc: auc,
        };
        let report = aggregate_folds(vec![fold(0.8, Some(0.9)), fold(0.6, Some(0.7))], vec![]);
        assert!((report.mean.accuracy - 0.7).abs() < 1e-12);
        // Population stdev of {0.8, 0.6} is 0.1 (not the sample 0.1414…).
        let stdev = report.stdev.unwrap();
        assert!((stdev.accuracy - 0.1).abs() < 1e-12);
        assert!((report.mean.roc_auc.unwrap() - 0.8).abs() < 1e-12);
        assert!(report.undefined.is_empty());
        assert_eq!(report.per_fold.as_ref().unwrap().len(), 2);
    }

    #[test]
    fn aggregation_excludes_undefined_auc_folds() {
        let fold = |auc: Option<f64>| MetricSet {
            accuracy: 0.5,
            precision: 0.5,
            recall: 0.5,
            f1: 0.5,
            balanced_accuracy: 0.5,
            roc_auc: auc,
        };
        let report = aggregate_folds(vec![fold(Some(0.8)), fold(None), fold(Some(0.6))], vec![]);
        assert!((report.mean.roc_auc.unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(report.undefined, vec!["roc_auc"]);

        // No fold has a defined AUC at all.
        let report = aggregate_folds(vec![fold(None), fold(None)], vec![]);
        assert_eq!(report.mean.roc_auc, None);
        assert_eq!(report.undefined, vec!["roc_auc"]);
    }

    #[test]
    fn zeror_baseline_matches_closed_form() {
        let r = zeror_baseline(0.14);
        assert!((r.mean.accuracy - 0.86).abs() < 1e-12);
        assert!((r.mean.precision - 0.86).abs() < 1e-12);
        assert_eq!(r.mean.recall, 1.0);
        assert!((r.mean.f1 - 2.0 * 0.86 / 1.86).abs() < 1e-12); // ≈ 0.9247
        assert_eq!(r.mean.balanced_accuracy, 0.5);
        assert!(r.note.is_none());

        let r = zeror_baseline(0.224);
        assert!((r.mean.accuracy - 0.776).abs() < 1e-12);

        // Balanced data: accuracy 0.5 either way.
        assert_eq!(zeror_baseline(0.5).mean.accuracy, 0.5);

        // Design-majority data: the majority predictor predicts class 1 and
        // the report says so.
        let r = zeror_baseline(0.7);
        assert!((r.mean.accuracy - 0.7).abs() < 1e-12);
        assert!(r.note.is_some());
    }

    #[test]
    fn exact_baseline_gives_exact_rationals() {
        let b = zeror_baseline_exact(Ratio::new(14, 100));
        assert_eq!(b.accuracy, Ratio::new(43, 50));
        assert_eq!(b.precision, Ratio::new(43, 50));
        assert_eq!(b.recall, Ratio::from_integer(1));
        assert_eq!(b.f1, Ratio::new(86, 93));
        assert_eq!(b.balanced_accuracy, Ratio::new(1, 2));
    }

    #[test]
    fn exact_and_float_baselines_agree() {
        for (num, den) in [(14u64, 100u64), (224, 1000), (1, 2), (7, 10)] {
            let exact = zeror_baseline_exact(Ratio::new(num, den));
            let float = zeror_baseline(num as f64 / den as f64);
            let as_f = |r: Ratio<u64>| *r.numer() as f64 / *r.denom() as f64;
            assert!((as_f(exact.accuracy) - float.mean.accuracy).abs() < 1e-12);
            assert!((as_f(exact.f1) - float.mean.f1).abs() < 1e-12);
        }
    }

    #[test]
    fn metric_names_round_trip() {
        for metric in Metric::ALL {
            assert_eq!(metric.name().parse::<Metric>().unwrap(), metric);
        }
        assert!(matches!("auc".parse::<Metric>(), Err(EvaluateError::UnknownMetric { .. })));
    }

    proptest! {
        #[test]
        fn auc_is_invariant_under_monotone_transforms(
            labels in proptest::collection::vec(0u8..2, 4..40),
            raw in proptest::collection::vec(0.0f64..1.0, 40),
        ) {
            let n = labels.len();
            let scores = &raw[..n];
            let n_pos = labels.iter().filter(|&&l| l == 1).count();
            prop_assume!(n_pos > 0 && n_pos < n);
            let a = roc_auc(&labels, scores).unwrap();
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
            let b = roc_auc(&labels, &transformed).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn auc_of_negated_scores_complements_to_one(
            labels in proptest::collection::vec(0u8..2, 4..40),
            raw in proptest::collection::vec(0.0f64..1.0, 40),
        ) {
            let n = labels.len();
            // Quantize so score ties actually occur and exercise midranks.
            let scores: Vec<f64> = raw[..n].iter().map(|s| (s * 5.0).round() / 5.0).collect();
            let n_pos = labels.iter().filter(|&&l| l == 1).count();
            prop_assume!(n_pos > 0 && n_pos < n);
            let a = roc_auc(&labels, &scores).unwrap();
            let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
            let b = roc_auc(&labels, &negated).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-9);
        }

        #[test]
        fn confusion_quadrants_partition_the_data(
            pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..60),
        ) {
            let y_true: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            let y_pred: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            let cm = confusion(&y_true, &y_pred).unwrap();
            prop_assert_eq!(cm.total(), pairs.len());
            let (m, _) = metrics(&cm);
            prop_assert!((0.0..=1.0).contains(&m.accuracy));
            prop_assert!((0.0..=1.0).contains(&m.f1));
        }
    }
}
