//! The workbench's acceptance gate: nine end-to-end criteria, each reported
//! as one `ACCEPTANCE n: PASS|FAIL|SKIPPED (reason)` line.
//!
//! Criteria 1–3 replicate historical results and need the original labeled
//! dataset (and, for 3, a pretrained software-domain embedding table) under
//! `DESMINE_DATA_DIR`; they are reported SKIPPED when those inputs are
//! absent. Criteria 4–9 are self-contained — mathematical oracles, sampling
//! properties, the conclusion-stability effect on synthetic data, a
//! desk-scale document-vector bar, and byte-level determinism of the
//! command-line binary — and must always pass.
//!
//! Every tolerance is pinned here as a named constant.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use desmine::balance::{smote, stratified_folds, SmoteParams};
use desmine::classify::{
    self, fit, logistic_gradient, logistic_objective, predict_labels, predict_scores,
    AlgorithmSpec, ClassifierSpec,
};
use desmine::corpus::{self, CleanOptions, Dataset};
use desmine::docvec::DocVecParams;
use desmine::evaluate::{self, zeror_baseline, zeror_baseline_exact};
use desmine::protocol::{
    self, BalanceSpec, FitFeatures, ProtocolSpec, ValidationSpec, VectorizerSpec,
};
use desmine::synth::{synth_dataset, synth_suite, write_synth_embeddings};
use desmine::transfer::transfer_matrix;
use desmine::vectorize::{FeatureMatrix, SparseVec};
use num_rational::Ratio;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

// --- replication targets (also stored in references.json; the two are
// --- cross-checked below so they cannot drift apart) -----------------------
const NB_ACCURACY_REF: f64 = 0.862;
const NB_ACCURACY_TOL: f64 = 0.03;
const DT_ACCURACY_REF: f64 = 0.931;
const DT_ACCURACY_TOL: f64 = 0.03;
const STRAT_DT_REF: f64 = 0.876;
const STRAT_DT_TOL: f64 = 0.03;
const NEWBEST_AUC_REF: f64 = 0.84;
const NEWBEST_AUC_TOL: f64 = 0.06;

// --- oracle tolerances ------------------------------------------------------
const AUC_ORACLE_TOL: f64 = 1e-12;
const METRIC_RECOUNT_TOL: f64 = 1e-12;
const NB_ORACLE_TOL: f64 = 1e-12;
const GRADIENT_REL_TOL: f64 = 1e-6;
const SMOTE_SEGMENT_TOL: f64 = 1e-9;

// --- property and stand-in thresholds ---------------------------------------
const STABILITY_MARGIN: f64 = 0.05;
const DOCVEC_MIN_ACCURACY: f64 = 0.65;
const DOCVEC_SEEDS: [u64; 3] = [1, 2, 3];

// --- runtime budgets ---------------------------------------------------------
const BUDGET_REPLICATION: Duration = Duration::from_secs(120);
const BUDGET_METRIC_ORACLES: Duration = Duration::from_secs(10);
const BUDGET_CLASSIFIER_ORACLES: Duration = Duration::from_secs(30);
const BUDGET_BALANCE_PROPERTIES: Duration = Duration::from_secs(30);
const BUDGET_STABILITY: Duration = Duration::from_secs(1800);
const BUDGET_DOCVEC: Duration = Duration::from_secs(600);

const STRICT_PRESET: &str = include_str!("../presets/brunet-strict.json");
const STRATIFIED_PRESET: &str = include_str!("../presets/brunet-stratified.json");
const NEWBEST_PRESET: &str = include_str!("../presets/newbest.json");
const NEWBEST_ALT_PRESET: &str = include_str!("../presets/newbest-alt.json");
const REFERENCES: &str = include_str!("../references.json");

enum Outcome {
    Pass,
    Skipped(String),
}

#[test]
fn acceptance_criteria() {
    let criteria: [(usize, fn() -> Outcome); 9] = [
        (1, criterion_1_strict_replication),
        (2, criterion_2_stratification_effect),
        (3, criterion_3_newbest),
        (4, criterion_4_metric_oracles),
        (5, criterion_5_classifier_oracles),
        (6, criterion_6_balance_properties),
        (7, criterion_7_conclusion_stability),
        (8, criterion_8_docvec_desk_scale),
        (9, criterion_9_determinism_suite),
    ];
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for (n, run) in criteria {
        let line = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(Outcome::Pass) => format!("ACCEPTANCE {n}: PASS"),
            Ok(Outcome::Skipped(reason)) => format!("ACCEPTANCE {n}: SKIPPED ({reason})"),
            Err(payload) => {
                let message = panic_message(&payload);
                failures.push(n);
                format!("ACCEPTANCE {n}: FAIL ({message})")
            }
        };
        println!("{line}");
        lines.push(line);
    }
    assert!(failures.is_empty(), "acceptance criteria {failures:?} failed:\n{}", lines.join("\n"));
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}

fn preset(text: &str) -> ProtocolSpec {
    let spec: ProtocolSpec = serde_json::from_str(text).expect("bundled preset parses");
    spec.validate().expect("bundled preset is valid");
    spec
}

/// The historical dataset, if the user placed it under `DESMINE_DATA_DIR`.
fn replication_dataset() -> Option<Dataset> {
    let path = protocol::resolve_data_path("brunet.jsonl");
    if !path.exists() {
        return None;
    }
    Some(corpus::load_jsonl(&path).expect("brunet.jsonl should load cleanly"))
}

const REPLICATION_SKIP: &str = "replication dataset brunet.jsonl not found under DESMINE_DATA_DIR";

// ---------------------------------------------------------------------------
// criterion 1: strict replication

fn criterion_1_strict_replication() -> Outcome {
    let Some(dataset) = replication_dataset() else {
        return Outcome::Skipped(REPLICATION_SKIP.to_string());
    };
    let started = Instant::now();

    let strict = preset(STRICT_PRESET);
    let nb = protocol::execute(&strict, &dataset).expect("strict NB run").report.mean.accuracy;
    let dt = protocol::execute(&strict_with_decision_tree(), &dataset)
        .expect("strict DT run")
        .report
        .mean
        .accuracy;

    assert!(
        (nb - NB_ACCURACY_REF).abs() <= NB_ACCURACY_TOL,
        "strict naive Bayes accuracy {nb:.4} outside {NB_ACCURACY_REF} ± {NB_ACCURACY_TOL}"
    );
    assert!(
        (dt - DT_ACCURACY_REF).abs() <= DT_ACCURACY_TOL,
        "strict decision tree accuracy {dt:.4} outside {DT_ACCURACY_REF} ± {DT_ACCURACY_TOL}"
    );
    let elapsed = started.elapsed();
    assert!(elapsed < BUDGET_REPLICATION, "replication took {elapsed:?} (budget 2 min)");
    Outcome::Pass
}

/// brunet-strict with the classifier swapped to the default decision tree —
/// the second row the replication compares.
fn strict_with_decision_tree() -> ProtocolSpec {
    let mut spec = preset(STRICT_PRESET);
    spec.classifier = ClassifierSpec {
        algorithm: AlgorithmSpec::DecisionTree {
            max_depth: None,
            min_samples_split: classify::defaults::MIN_SAMPLES_SPLIT,
        },
        seed: spec.classifier.seed,
    };
    spec
}

// ---------------------------------------------------------------------------
// criterion 2: stratification lowers the decision-tree accuracy

fn criterion_2_stratification_effect() -> Outcome {
    let Some(dataset) = replication_dataset() else {
        return Outcome::Skipped(REPLICATION_SKIP.to_string());
    };
    let stratified = preset(STRATIFIED_PRESET);
    let strat_dt =
        protocol::execute(&stratified, &dataset).expect("stratified DT run").report.mean.accuracy;
    let strict_dt = protocol::execute(&strict_with_decision_tree(), &dataset)
        .expect("strict DT run")
        .report
        .mean
        .accuracy;

    assert!(
        (strat_dt - STRAT_DT_REF).abs() <= STRAT_DT_TOL,
        "stratified decision tree accuracy {strat_dt:.4} outside {STRAT_DT_REF} ± {STRAT_DT_TOL}"
    );
    assert!(
        strat_dt < strict_dt,
        "stratified accuracy {strat_dt:.4} should fall strictly below the strict run's {strict_dt:.4}"
    );
    Outcome::Pass
}

// ---------------------------------------------------------------------------
// criterion 3: the embedding + SMOTE + SVM pipeline reaches its AUC target

fn criterion_3_newbest() -> Outcome {
    let Some(dataset) = replication_dataset() else {
        return Outcome::Skipped(REPLICATION_SKIP.to_string());
    };
    let table = protocol::resolve_data_path("embeddings.vec");
    if !table.exists() {
        return Outcome::Skipped(
            "pretrained software-domain embeddings.vec not found under DESMINE_DATA_DIR"
                .to_string(),
        );
    }

    let newbest = preset(NEWBEST_PRESET);
    let report = protocol::execute(&newbest, &dataset).expect("newbest run").report;
    let auc = report.mean.roc_auc.expect("newbest AUC should be defined on the full dataset");
    assert!(
        (auc - NEWBEST_AUC_REF).abs() <= NEWBEST_AUC_TOL,
        "newbest AUC {auc:.4} outside {NEWBEST_AUC_REF} ± {NEWBEST_AUC_TOL}"
    );

    // The alternate pipeline description must run and report; its target is
    // ambiguous in the historical record, so no numeric bound is asserted.
    let alt = preset(NEWBEST_ALT_PRESET);
    let alt_report = protocol::execute(&alt, &dataset).expect("newbest-alt run").report;
    assert!(alt_report.mean.accuracy.is_finite());
    Outcome::Pass
}

// ---------------------------------------------------------------------------
// criterion 4: metric oracles

fn criterion_4_metric_oracles() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC_0004);

    // roc_auc against the brute-force all-pairs definition: the probability a
    // random positive outranks a random negative, ties counting one half.
    for trial in 0..1000 {
        let n = rng.gen_range(2..=50);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
        labels[0] = 1;
        labels[1] = 0;
        // Half the trials draw from a 5-point grid so midranks see real ties.
        let coarse = rng.gen_bool(0.5);
        let scores: Vec<f64> = (0..n)
            .map(|_| if coarse { rng.gen_range(0..5) as f64 / 4.0 } else { rng.gen::<f64>() })
            .collect();

        let fast = evaluate::roc_auc(&labels, &scores).expect("both classes present");
        let mut wins = 0.0f64;
        let mut pairs = 0.0f64;
        for i in 0..n {
            if labels[i] != 1 {
                continue;
            }
            for j in 0..n {
                if labels[j] != 0 {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        let brute = wins / pairs;
        assert!(
            (fast - brute).abs() <= AUC_ORACLE_TOL,
            "trial {trial}: rank-sum AUC {fast} != all-pairs AUC {brute}"
        );
    }

    // metrics ∘ confusion against a direct recount.
    for trial in 0..1000 {
        let n = rng.gen_range(1..=60);
        let y_true: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
        let y_pred: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
        let cm = evaluate::confusion(&y_true, &y_pred).expect("non-empty");

        let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
        for (&t, &p) in y_true.iter().zip(&y_pred) {
            match (t, p) {
                (1, 1) => tp += 1,
                (0, 1) => fp += 1,
                (0, 0) => tn += 1,
                (1, 0) => fn_ += 1,
                _ => unreachable!(),
            }
        }
        assert_eq!((cm.tp, cm.fp, cm.tn, cm.fn_), (tp, fp, tn, fn_), "trial {trial}: recount");

        let (mset, undefined) = evaluate::metrics(&cm);
        let accuracy = (tp + tn) as f64 / n as f64;
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let tpr = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let tnr = if tn + fp == 0 { 0.0 } else { tn as f64 / (tn + fp) as f64 };
        let balanced = (tpr + tnr) / 2.0;
        for (name, got, want) in [
            ("accuracy", mset.accuracy, accuracy),
            ("precision", mset.precision, precision),
            ("recall", mset.recall, recall),
            ("f1", mset.f1, f1),
            ("balanced_accuracy", mset.balanced_accuracy, balanced),
        ] {
            assert!(
                (got - want).abs() <= METRIC_RECOUNT_TOL,
                "trial {trial}: {name} {got} != recount {want}"
            );
        }
        // Undefined-ratio bookkeeping: a metric is flagged exactly when its
        // denominator vanished.
        let mut expected_undefined = Vec::new();
        if tp + fp == 0 {
            expected_undefined.push("precision");
        }
        if tp + fn_ == 0 {
            expected_undefined.push("recall");
        }
        if precision + recall == 0.0 {
            expected_undefined.push("f1");
        }
        if tp + fn_ == 0 || tn + fp == 0 {
            expected_undefined.push("balanced_accuracy");
        }
        assert_eq!(undefined, expected_undefined, "trial {trial}: undefined list");
    }

    // The majority baseline at 14% prevalence, exactly as rationals:
    // accuracy = precision = 43/50, recall = 1, F1 = 86/93 (the "0.93"),
    // balanced accuracy = 1/2.
    let exact = zeror_baseline_exact(Ratio::new(14, 100));
    assert_eq!(exact.accuracy, Ratio::new(43, 50));
    assert_eq!(exact.precision, Ratio::new(43, 50));
    assert_eq!(exact.recall, Ratio::from_integer(1));
    assert_eq!(exact.f1, Ratio::new(86, 93));
    assert_eq!(exact.balanced_accuracy, Ratio::new(1, 2));
    let f1_float: f64 = 86.0 / 93.0;
    assert!((f1_float - 0.93).abs() < 0.01, "86/93 = {f1_float:.4} rounds to the quoted 0.93");

    // The floating-point baseline agrees with the rationals bit-for-bit
    // (each value is exactly representable or derived the same way).
    let float = zeror_baseline(0.14).mean;
    assert_eq!(float.accuracy, 0.86);
    assert_eq!(float.precision, 0.86);
    assert_eq!(float.recall, 1.0);
    assert!((float.f1 - f1_float).abs() <= METRIC_RECOUNT_TOL);
    assert_eq!(float.balanced_accuracy, 0.5);

    let elapsed = started.elapsed();
    assert!(elapsed < BUDGET_METRIC_ORACLES, "metric oracles took {elapsed:?} (budget 10 s)");
    Outcome::Pass
}

// ---------------------------------------------------------------------------
// criterion 5: classifier oracles

fn criterion_5_classifier_oracles() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC_0005);

    naive_bayes_matches_brute_force_bayes(&mut rng);
    decision_tree_matches_exhaustive_split_search(&mut rng);
    logistic_gradient_matches_finite_differences(&mut rng);

    let elapsed = started.elapsed();
    assert!(
        elapsed < BUDGET_CLASSIFIER_ORACLES,
        "classifier oracles took {elapsed:?} (budget 30 s)"
    );
    Outcome::Pass
}

/// Multinomial Bayes computed longhand from its definition: MLE class
/// priors, Laplace-smoothed per-feature likelihoods, posterior by direct
/// normalization.
fn naive_bayes_matches_brute_force_bayes(rng: &mut ChaCha8Rng) {
    for trial in 0..200 {
        let d = rng.gen_range(1..=8);
        let m = rng.gen_range(2..=16);
        let rows: Vec<Vec<f64>> =
            (0..m).map(|_| (0..d).map(|_| rng.gen_range(0..4) as f64).collect()).collect();
        let mut y: Vec<u8> = (0..m).map(|_| rng.gen_range(0..2u8)).collect();
        y[0] = 1;
        y[1] = 0;
        let alpha = [0.5, 1.0, 2.0][rng.gen_range(0..3)];

        let x = FeatureMatrix::from_dense(rows.clone(), d);
        let spec = ClassifierSpec {
            algorithm: AlgorithmSpec::NaiveBayes { laplace_alpha: alpha },
            seed: 0,
        };
        let model = fit(&spec, &x, &y).expect("fixture trains");
        let scores = predict_scores(&model, &x).expect("fixture scores");

        // Longhand Bayes.
        let mut class_count = [0.0f64; 2];
        let mut feature_sum = [vec![0.0f64; d], vec![0.0f64; d]];
        for (row, &label) in rows.iter().zip(&y) {
            class_count[label as usize] += 1.0;
            for (f, &v) in row.iter().enumerate() {
                feature_sum[label as usize][f] += v;
            }
        }
        for (i, row) in rows.iter().enumerate() {
            let mut log_post = [0.0f64; 2];
            for c in 0..2 {
                let total: f64 = feature_sum[c].iter().sum();
                let mut lp = (class_count[c] / m as f64).ln();
                for (f, &v) in row.iter().enumerate() {
                    lp += v * ((feature_sum[c][f] + alpha) / (total + alpha * d as f64)).ln();
                }
                log_post[c] = lp;
            }
            let peak = log_post[0].max(log_post[1]);
            let p1 = (log_post[1] - peak).exp()
                / ((log_post[0] - peak).exp() + (log_post[1] - peak).exp());
            assert!(
                (scores[i] - p1).abs() <= NB_ORACLE_TOL,
                "trial {trial}, doc {i}: P(design)={} but brute force says {p1}",
                scores[i]
            );
        }
    }
}

/// An independently coded CART: exhaustive (feature, boundary) search with
/// exact rational Gini impurity, the same deterministic conventions (strict
/// improvement required, first optimum wins scanning features then ascending
/// boundaries, `<=` goes left, leaves predict fraction >= 1/2).
fn decision_tree_matches_exhaustive_split_search(rng: &mut ChaCha8Rng) {
    for trial in 0..150 {
        let n = rng.gen_range(2..=12);
        let d = rng.gen_range(1..=3);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..d).map(|_| rng.gen_range(0..4) as f64).collect()).collect();
        let mut y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
        y[0] = 1;
        y[1] = 0;

        let x = FeatureMatrix::from_dense(rows.clone(), d);
        let spec = ClassifierSpec {
            algorithm: AlgorithmSpec::DecisionTree { max_depth: None, min_samples_split: 2 },
            seed: 0,
        };
        let model = fit(&spec, &x, &y).expect("fixture trains");
        let got = predict_labels(&model, &x, None).expect("fixture predicts");

        let mut want = vec![0u8; n];
        let cols: Vec<Vec<f64>> = (0..d).map(|f| (0..n).map(|i| rows[i][f]).collect()).collect();
        let samples: Vec<usize> = (0..n).collect();
        exhaustive_tree_assign(&samples, &cols, &y, &mut want);

        assert_eq!(got, want, "trial {trial}: tree predictions diverge from exhaustive search");
    }
}

fn gini(c0: i128, c1: i128) -> Ratio<i128> {
    let n = c0 + c1;
    Ratio::from_integer(1) - Ratio::new(c0 * c0 + c1 * c1, n * n)
}

/// Recursively labels `samples` the way an exhaustive-search CART would.
fn exhaustive_tree_assign(samples: &[usize], cols: &[Vec<f64>], y: &[u8], out: &mut [u8]) {
    let n = samples.len() as i128;
    let n_pos = samples.iter().filter(|&&i| y[i] == 1).count() as i128;
    let leaf = |out: &mut [u8]| {
        let label = u8::from(2 * n_pos >= n);
        for &i in samples {
            out[i] = label;
        }
    };
    if n_pos == 0 || n_pos == n || samples.len() < 2 {
        return leaf(out);
    }

    // Weighted child impurity, minimized over every feature and every
    // boundary between consecutive distinct values; parent impurity must
    // strictly decrease. First minimum encountered wins ties.
    let parent = gini(n - n_pos, n_pos);
    let mut best: Option<(Ratio<i128>, Vec<usize>, Vec<usize>)> = None;
    for col in cols {
        let mut ordered: Vec<usize> = samples.to_vec();
        ordered.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap());
        for cut in 1..ordered.len() {
            if col[ordered[cut - 1]] == col[ordered[cut]] {
                continue;
            }
            let (left, right) = ordered.split_at(cut);
            let count = |part: &[usize]| {
                let pos = part.iter().filter(|&&i| y[i] == 1).count() as i128;
                (part.len() as i128 - pos, pos)
            };
            let (l0, l1) = count(left);
            let (r0, r1) = count(right);
            let weighted =
                (gini(l0, l1) * Ratio::new(l0 + l1, n)) + (gini(r0, r1) * Ratio::new(r0 + r1, n));
            if weighted >= parent {
                continue;
            }
            let improves = match &best {
                None => true,
                Some((w, _, _)) => weighted < *w,
            };
            if improves {
                best = Some((weighted, left.to_vec(), right.to_vec()));
            }
        }
    }

    match best {
        None => leaf(out),
        Some((_, left, right)) => {
            exhaustive_tree_assign(&left, cols, y, out);
            exhaustive_tree_assign(&right, cols, y, out);
        }
    }
}

/// The analytic logistic gradient against central finite differences of the
/// very objective the trainer minimizes.
fn logistic_gradient_matches_finite_differences(rng: &mut ChaCha8Rng) {
    const H: f64 = 1e-5;
    for trial in 0..100 {
        let n = rng.gen_range(1..=20);
        let d = rng.gen_range(1..=10);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(-2.0..2.0) })
                    .collect()
            })
            .collect();
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
        let x = FeatureMatrix::from_dense(rows, d);
        let weights: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bias: f64 = rng.gen_range(-1.0..1.0);
        let l2 = [0.0, 1e-4, 1e-2][rng.gen_range(0..3)];

        let (grad_w, grad_b) = logistic_gradient(&x, &y, &weights, bias, l2);

        let check = |analytic: f64, numeric: f64, what: &str| {
            let scale = analytic.abs().max(numeric.abs()).max(1.0);
            assert!(
                (analytic - numeric).abs() <= GRADIENT_REL_TOL * scale,
                "trial {trial}: {what} analytic {analytic} vs central difference {numeric}"
            );
        };
        for i in 0..d {
            let mut plus = weights.clone();
            plus[i] += H;
            let mut minus = weights.clone();
            minus[i] -= H;
            let numeric = (logistic_objective(&x, &y, &plus, bias, l2)
                - logistic_objective(&x, &y, &minus, bias, l2))
                / (2.0 * H);
            check(grad_w[i], numeric, &format!("dL/dw[{i}]"));
        }
        let numeric_b = (logistic_objective(&x, &y, &weights, bias + H, l2)
            - logistic_objective(&x, &y, &weights, bias - H, l2))
            / (2.0 * H);
        check(grad_b, numeric_b, "dL/db");
    }
}

// ---------------------------------------------------------------------------
// criterion 6: balance properties

fn criterion_6_balance_properties() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC_0006);

    // 10,000 stratification trials: per-class fold counts stay within ±1.
    for trial in 0..10_000 {
        let k = rng.gen_range(2..=10);
        let c1 = rng.gen_range(k..=120);
        let c0 = rng.gen_range(k..=240);
        let mut labels = vec![1u8; c1];
        labels.resize(c1 + c0, 0u8);
        labels.shuffle(&mut rng);

        let assignment = stratified_folds(&labels, k, rng.gen()).expect("classes >= k");
        assert_eq!(assignment.fold_of.len(), labels.len());
        for class in [0u8, 1u8] {
            let mut per_fold = vec![0usize; k];
            for (i, &fold) in assignment.fold_of.iter().enumerate() {
                assert!(fold < k, "trial {trial}: fold index {fold} out of range");
                if labels[i] == class {
                    per_fold[fold] += 1;
                }
            }
            let lo = *per_fold.iter().min().unwrap();
            let hi = *per_fold.iter().max().unwrap();
            assert!(
                hi - lo <= 1,
                "trial {trial}: class {class} fold counts {per_fold:?} spread beyond ±1"
            );
        }
    }

    // 1,000 SMOTE trials: synthetics are convex combinations of a minority
    // point and one of its nearest minority neighbors, and counts land
    // exactly on target.
    for trial in 0..1_000 {
        let dim = rng.gen_range(1..=6);
        let minority_n = rng.gen_range(6..=20);
        let majority_n = rng.gen_range(minority_n + 1..=48);
        smote_trial(&mut rng, dim, minority_n, majority_n, trial);
    }

    // The quoted worked example: 224 minority vs 776 majority at parity
    // needs exactly 552 synthetic points.
    smote_trial(&mut rng, 4, 224, 776, usize::MAX);

    let elapsed = started.elapsed();
    assert!(
        elapsed < BUDGET_BALANCE_PROPERTIES,
        "balance properties took {elapsed:?} (budget 30 s)"
    );
    Outcome::Pass
}

fn dense(v: &SparseVec, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for &(i, x) in &v.entries {
        out[i] = x;
    }
    out
}

fn smote_trial(
    rng: &mut ChaCha8Rng,
    dim: usize,
    minority_n: usize,
    majority_n: usize,
    trial: usize,
) {
    let point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(0..6) as f64).collect()
    };
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..minority_n {
        features.push(SparseVec::from_dense(&point(rng)));
        labels.push(1u8);
    }
    for _ in 0..majority_n {
        features.push(SparseVec::from_dense(&point(rng)));
        labels.push(0u8);
    }
    let params = SmoteParams { k_neighbors: 5, target_ratio: 1.0, seed: rng.gen() };
    let (out_x, out_y) = smote(&features, &labels, &params).expect("minority large enough");

    // Exact target count: parity with the majority class.
    let expected_synth = majority_n - minority_n;
    assert_eq!(
        out_x.len(),
        features.len() + expected_synth,
        "trial {trial}: wrong synthetic count"
    );
    assert_eq!(out_y.iter().filter(|&&l| l == 1).count(), majority_n, "trial {trial}: parity");
    assert_eq!(&out_x[..features.len()], &features[..], "trial {trial}: originals changed");

    // Independent neighbor sets: for each minority point, its 5 nearest
    // minority points by Euclidean distance (ties widened to be safe).
    let minority: Vec<Vec<f64>> = (0..minority_n).map(|i| dense(&features[i], dim)).collect();
    let dist2 =
        |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum() };
    let neighbor_sets: Vec<Vec<usize>> = (0..minority_n)
        .map(|a| {
            let mut ds: Vec<(f64, usize)> = (0..minority_n)
                .filter(|&b| b != a)
                .map(|b| (dist2(&minority[a], &minority[b]), b))
                .collect();
            ds.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
            let kth = ds[params.k_neighbors.min(ds.len()) - 1].0;
            ds.into_iter().filter(|&(d, _)| d <= kth + 1e-12).map(|(_, b)| b).collect()
        })
        .collect();

    // Every synthetic point must lie on a segment between some minority
    // point and one of that point's nearest neighbors.
    for (s_idx, synth) in out_x[features.len()..].iter().enumerate() {
        let s = dense(synth, dim);
        let on_some_segment = (0..minority_n).any(|a| {
            neighbor_sets[a].iter().any(|&b| {
                let (pa, pb) = (&minority[a], &minority[b]);
                // Derive t from the first coordinate where a and b differ.
                let t = match pa.iter().zip(pb).position(|(x, y)| x != y) {
                    Some(i) => (s[i] - pa[i]) / (pb[i] - pa[i]),
                    None => 0.0, // a == b: the segment is the single point a
                };
                (0.0..=1.0).contains(&t)
                    && pa
                        .iter()
                        .zip(pb)
                        .zip(&s)
                        .all(|((x, y), z)| (x + t * (y - x) - z).abs() <= SMOTE_SEGMENT_TOL)
            })
        });
        assert!(
            on_some_segment,
            "trial {trial}: synthetic {s_idx} is not a convex combination of minority neighbors"
        );
    }
}

// ---------------------------------------------------------------------------
// criterion 7: within-dataset beats cross-dataset

fn criterion_7_conclusion_stability() -> Outcome {
    let started = Instant::now();
    // The historical five-dataset suite is not redistributable, so the
    // stability effect is demonstrated on the synthetic suite: three
    // datasets with deliberately disjoint signal vocabularies, plus an
    // embedding table that mirrors that structure.
    let suite = synth_suite(240, 11);
    let tmp = TempDir::new().expect("tempdir");
    let table = tmp.path().join("embeddings.vec");
    write_synth_embeddings(&table, 3).expect("embeddings written");

    let mut spec = preset(NEWBEST_PRESET);
    spec.vectorizer =
        VectorizerSpec::EmbeddingAverage { table: table.to_string_lossy().into_owned() };

    let matrix = transfer_matrix(&suite, &spec, 7).expect("transfer matrix");
    let mut diag = Vec::new();
    let mut off = Vec::new();
    for train in 0..suite.len() {
        for test in 0..suite.len() {
            let auc = matrix.cells[train][test]
                .mean
                .roc_auc
                .unwrap_or_else(|| panic!("AUC undefined in cell ({train},{test})"));
            if train == test {
                diag.push(auc);
            } else {
                off.push(auc);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (diag_mean, off_mean) = (mean(&diag), mean(&off));
    assert!(
        diag_mean - off_mean >= STABILITY_MARGIN,
        "within-dataset AUC {diag_mean:.4} does not beat cross-dataset {off_mean:.4} by {STABILITY_MARGIN}"
    );

    let elapsed = started.elapsed();
    assert!(elapsed < BUDGET_STABILITY, "stability check took {elapsed:?} (budget 30 min)");
    Outcome::Pass
}

// ---------------------------------------------------------------------------
// criterion 8: document vectors at desk scale

fn criterion_8_docvec_desk_scale() -> Outcome {
    let started = Instant::now();
    // The full-corpus held-out figure is out of desk-scale reach, so the bar
    // is: on a balanced 4,000-document corpus, document vectors + logistic
    // regression beat the 0.50 ZeroR baseline by >= 0.15 on held-out data,
    // for each of three seeds.
    let dataset = synth_dataset("synth_balanced", 4000, 0.5, 0, 42);
    for seed in DOCVEC_SEEDS {
        let spec = ProtocolSpec {
            desmine_protocol: protocol::PROTOCOL_VERSION,
            name: format!("docvec-holdout-{seed}"),
            preprocess: CleanOptions::default(),
            vectorizer: VectorizerSpec::Docvec {
                params: Some(DocVecParams {
                    dim: 32,
                    epochs: 8,
                    negative: 5,
                    initial_lr: 0.025,
                    final_lr: 1e-4,
                    min_count: 2,
                    seed: 0,
                }),
                model: None,
            },
            expansion: None,
            balance: BalanceSpec { stratify: true, smote: None },
            classifier: ClassifierSpec {
                algorithm: AlgorithmSpec::LogisticRegression {
                    l2_lambda: classify::defaults::L2_LAMBDA,
                    epochs: classify::defaults::EPOCHS,
                    lr: classify::defaults::LR,
                },
                seed: 0,
            },
            validation: ValidationSpec::Holdout { train: 0.6, val: 0.2, test: 0.2 },
            fit_features: FitFeatures::PerFold,
            seed,
        };
        let report = protocol::execute(&spec, &dataset).expect("docvec holdout run").report;
        let accuracy = report.mean.accuracy;
        assert!(
            accuracy >= DOCVEC_MIN_ACCURACY,
            "seed {seed}: held-out accuracy {accuracy:.4} below {DOCVEC_MIN_ACCURACY}"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed < BUDGET_DOCVEC, "docvec desk-scale took {elapsed:?} (budget 10 min)");
    Outcome::Pass
}

// ---------------------------------------------------------------------------
// criterion 9: the binary is byte-deterministic

fn criterion_9_determinism_suite() -> Outcome {
    let fixture = TempDir::new().expect("tempdir");
    for dataset in synth_suite(240, 11) {
        corpus::save_jsonl(&dataset, fixture.path().join(format!("{}.jsonl", dataset.name)))
            .expect("fixture written");
    }
    write_synth_embeddings(fixture.path().join("embeddings.vec"), 3).expect("embeddings");

    // One representative invocation per subcommand, every one carrying an
    // explicit seed where randomness is involved.
    let invocations: [&[&str]; 7] = [
        &["stats", "--data", "synth_pullreq.jsonl", "--json"],
        &["render", "--protocol", "newbest"],
        &[
            "run",
            "--protocol",
            "newbest",
            "--data",
            "synth_issues.jsonl",
            "--out",
            "out",
            "--seed",
            "3",
        ],
        &["replicate", "--data", "synth_pullreq.jsonl", "--stratified", "--seed", "7"],
        &[
            "crossdataset",
            "--protocol",
            "newbest-alt",
            "--data",
            "synth_pullreq.jsonl",
            "synth_qa.jsonl",
            "--out",
            "out",
            "--seed",
            "5",
        ],
        &[
            "train-docvec",
            "--data",
            "synth_qa.jsonl",
            "--out",
            "out",
            "--dim",
            "16",
            "--epochs",
            "2",
            "--min-count",
            "1",
            "--seed",
            "9",
        ],
        &[
            "gridsearch",
            "--data",
            "synth_pullreq.jsonl",
            "--out",
            "out",
            "--algorithm",
            "linear_svm",
            "--k",
            "5",
            "--seed",
            "7",
        ],
    ];

    for args in invocations {
        let first = run_once(fixture.path(), args);
        let second = run_once(fixture.path(), args);
        assert_eq!(first.0, 0, "{args:?} failed:\n{}", first.2);
        assert_eq!(first, second, "subcommand {:?} is not byte-deterministic across runs", args[0]);
    }
    Outcome::Pass
}

type RunCapture = (i32, String, String, BTreeMap<PathBuf, Vec<u8>>);

/// Runs the binary in a fresh working directory with a relative `--out`,
/// returning exit code, stdout, stderr, and every produced file keyed by its
/// path relative to the working directory.
fn run_once(data_dir: &Path, args: &[&str]) -> RunCapture {
    let cwd = TempDir::new().expect("tempdir");
    let output = Command::new(env!("CARGO_BIN_EXE_desmine"))
        .args(args)
        .current_dir(cwd.path())
        .env("DESMINE_DATA_DIR", data_dir)
        .output()
        .expect("binary spawns");

    let mut files = BTreeMap::new();
    let mut stack = vec![cwd.path().to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).expect("readable") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(cwd.path()).expect("under cwd").to_path_buf();
                files.insert(rel, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    (
        output.status.code().expect("normal exit"),
        String::from_utf8(output.stdout).expect("utf-8 stdout"),
        String::from_utf8(output.stderr).expect("utf-8 stderr"),
        files,
    )
}

// ---------------------------------------------------------------------------
// consistency between the pinned constants and references.json

#[test]
fn reference_file_matches_pinned_tolerances() {
    let refs: serde_json::Value = serde_json::from_str(REFERENCES).unwrap();
    let check = |key: &str, value: f64, tolerance: f64| {
        let entry = &refs["values"][key];
        assert_eq!(entry["value"].as_f64().unwrap(), value, "{key} value drifted");
        assert_eq!(entry["tolerance"].as_f64().unwrap(), tolerance, "{key} tolerance drifted");
    };
    check("brunet_strict_naive_bayes_accuracy", NB_ACCURACY_REF, NB_ACCURACY_TOL);
    check("brunet_strict_decision_tree_accuracy", DT_ACCURACY_REF, DT_ACCURACY_TOL);
    check("brunet_stratified_decision_tree_accuracy", STRAT_DT_REF, STRAT_DT_TOL);
    check("newbest_roc_auc", NEWBEST_AUC_REF, NEWBEST_AUC_TOL);
}
