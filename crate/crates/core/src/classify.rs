//! From-scratch binary classifiers behind a uniform fit/score interface.
//!
//! Five algorithms: ZeroR (majority class), multinomial naive Bayes with
//! Laplace smoothing, a CART-style decision tree on real-valued features,
//! L2-regularized logistic regression trained by deterministic full-batch
//! gradient descent, and a linear SVM trained by per-sample subgradient
//! descent with seeded shuffling. Plus grid search over classifier settings.
//!
//! Determinism is a hard contract: identical `(spec, X, y)` produce
//! bit-identical model state. The decision tree selects splits with exact
//! integer arithmetic (comparing Gini gains as fractions of counts), so tie
//! breaking — lowest feature index, then lowest threshold — never depends on
//! floating-point rounding.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::Dataset;
use crate::evaluate::{EvalReport, Metric};
use crate::protocol::{ProtocolError, ProtocolSpec, ValidationSpec};
use crate::vectorize::{FeatureMatrix, SparseVec};

/// Default hyperparameter values, kept in one place so both the parser and
/// the serializer agree on what "explicit defaults" means.
pub mod defaults {
    pub const LAPLACE_ALPHA: f64 = 1.0;
    pub const MIN_SAMPLES_SPLIT: usize = 2;
    pub const L2_LAMBDA: f64 = 1e-4;
    pub const EPOCHS: usize = 100;
    pub const LR: f64 = 0.1;
}

/// Algorithm choice plus hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmSpec {
    Zeror,
    NaiveBayes {
        laplace_alpha: f64,
    },
    DecisionTree {
        /// `None` = grow until purity or `min_samples_split`.
        max_depth: Option<usize>,
        min_samples_split: usize,
    },
    LogisticRegression {
        l2_lambda: f64,
        epochs: usize,
        lr: f64,
    },
    LinearSvm {
        l2_lambda: f64,
        epochs: usize,
        /// Base step size; epoch `e` uses `lr / (1 + e)`.
        lr: f64,
    },
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::Zeror => "zeror",
            AlgorithmSpec::NaiveBayes { .. } => "naive_bayes",
            AlgorithmSpec::DecisionTree { .. } => "decision_tree",
            AlgorithmSpec::LogisticRegression { .. } => "logistic_regression",
            AlgorithmSpec::LinearSvm { .. } => "linear_svm",
        }
    }
}

pub const ALGORITHM_NAMES: [&str; 5] =
    ["zeror", "naive_bayes", "decision_tree", "logistic_regression", "linear_svm"];

/// A classifier choice: algorithm, hyperparameters, and the seed that
/// drives any randomized part of training.
///
/// Serialized form is flat — `{"algorithm": "linear_svm", "l2_lambda": …,
/// "epochs": …, "lr": …, "seed": …}` — with every default written out
/// explicitly, and parsing rejects hyperparameters that do not belong to the
/// named algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub algorithm: AlgorithmSpec,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(algorithm: AlgorithmSpec) -> Self {
        ClassifierSpec { algorithm, seed: 0 }
    }
}

impl fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.algorithm {
            AlgorithmSpec::Zeror => write!(f, "zeror"),
            AlgorithmSpec::NaiveBayes { laplace_alpha } => {
                write!(f, "naive_bayes(alpha={laplace_alpha})")
            }
            AlgorithmSpec::DecisionTree { max_depth, min_samples_split } => match max_depth {
                Some(d) => write!(f, "decision_tree(max_depth={d},min_split={min_samples_split})"),
                None => write!(f, "decision_tree(min_split={min_samples_split})"),
            },
            AlgorithmSpec::LogisticRegression { l2_lambda, epochs, lr } => {
                write!(f, "logistic_regression(l2={l2_lambda},epochs={epochs},lr={lr})")
            }
            AlgorithmSpec::LinearSvm { l2_lambda, epochs, lr } => {
                write!(f, "linear_svm(l2={l2_lambda},epochs={epochs},lr={lr})")
            }
        }
    }
}

impl Serialize for ClassifierSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(None)?;
        map.serialize_entry("algorithm", self.algorithm.name())?;
        match &self.algorithm {
            AlgorithmSpec::Zeror => {}
            AlgorithmSpec::NaiveBayes { laplace_alpha } => {
                map.serialize_entry("laplace_alpha", laplace_alpha)?;
            }
            AlgorithmSpec::DecisionTree { max_depth, min_samples_split } => {
                map.serialize_entry("max_depth", max_depth)?;
                map.serialize_entry("min_samples_split", min_samples_split)?;
            }
            AlgorithmSpec::LogisticRegression { l2_lambda, epochs, lr }
            | AlgorithmSpec::LinearSvm { l2_lambda, epochs, lr } => {
                map.serialize_entry("l2_lambda", l2_lambda)?;
                map.serialize_entry("epochs", epochs)?;
                map.serialize_entry("lr", lr)?;
            }
        }
        map.serialize_entry("seed", &self.seed)?;
        map.end()
    }
}

/// Flat wire form used for parsing; the union of all hyperparameter fields,
/// rejected per-algorithm in the conversion below.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClassifierSpec {
    algorithm: String,
    laplace_alpha: Option<f64>,
    max_depth: Option<usize>,
    min_samples_split: Option<usize>,
    l2_lambda: Option<f64>,
    epochs: Option<usize>,
    lr: Option<f64>,
    seed: Option<u64>,
}

impl<'de> Deserialize<'de> for ClassifierSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawClassifierSpec::deserialize(deserializer)?;
        let reject = |field: &str, present: bool| {
            if present {
                Err(D::Error::custom(format!(
                    "hyperparameter `{field}` is not valid for algorithm `{}`",
                    raw.algorithm
                )))
            } else {
                Ok(())
            }
        };
        let algorithm = match raw.algorithm.as_str() {
            "zeror" => {
                reject("laplace_alpha", raw.laplace_alpha.is_some())?;
                reject("max_depth", raw.max_depth.is_some())?;
                reject("min_samples_split", raw.min_samples_split.is_some())?;
                reject("l2_lambda", raw.l2_lambda.is_some())?;
                reject("epochs", raw.epochs.is_some())?;
                reject("lr", raw.lr.is_some())?;
                AlgorithmSpec::Zeror
            }
            "naive_bayes" => {
                reject("max_depth", raw.max_depth.is_some())?;
                reject("min_samples_split", raw.min_samples_split.is_some())?;
                reject("l2_lambda", raw.l2_lambda.is_some())?;
                reject("epochs", raw.epochs.is_some())?;
                reject("lr", raw.lr.is_some())?;
                AlgorithmSpec::NaiveBayes {
                    laplace_alpha: raw.laplace_alpha.unwrap_or(defaults::LAPLACE_ALPHA),
                }
            }
            "decision_tree" => {
                reject("laplace_alpha", raw.laplace_alpha.is_some())?;
                reject("l2_lambda", raw.l2_lambda.is_some())?;
                reject("epochs", raw.epochs.is_some())?;
                reject("lr", raw.lr.is_some())?;
                AlgorithmSpec::DecisionTree {
                    max_depth: raw.max_depth,
                    min_samples_split: raw.min_samples_split.unwrap_or(defaults::MIN_SAMPLES_SPLIT),
                }
            }
            "logistic_regression" | "linear_svm" => {
                reject("laplace_alpha", raw.laplace_alpha.is_some())?;
                reject("max_depth", raw.max_depth.is_some())?;
                reject("min_samples_split", raw.min_samples_split.is_some())?;
                let l2_lambda = raw.l2_lambda.unwrap_or(defaults::L2_LAMBDA);
                let epochs = raw.epochs.unwrap_or(defaults::EPOCHS);
                let lr = raw.lr.unwrap_or(defaults::LR);
                if raw.algorithm == "logistic_regression" {
                    AlgorithmSpec::LogisticRegression { l2_lambda, epochs, lr }
                } else {
                    AlgorithmSpec::LinearSvm { l2_lambda, epochs, lr }
                }
            }
            other => {
                return Err(D::Error::custom(format!(
                    "unknown classifier `{other}`, valid options: {}",
                    ALGORITHM_NAMES.join(", ")
                )))
            }
        };
        Ok(ClassifierSpec { algorithm, seed: raw.seed.unwrap_or(0) })
    }
}

/// Errors raised by training or scoring.
#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("features and labels disagree in length: {features} vs {labels}")]
    LengthMismatch { features: usize, labels: usize },
    #[error("need at least 2 training instances, got {n}")]
    TooFewInstances { n: usize },
    #[error("label {value} is outside {{0,1}}")]
    BadLabel { value: u8 },
    #[error("training data contains a single class; `{algorithm}` needs both")]
    SingleClass { algorithm: String },
    #[error("naive_bayes requires nonnegative features; feature {feature} of instance {instance} is {value}")]
    NegativeFeature { instance: usize, feature: usize, value: f64 },
    #[error("model expects {expected} features, input has dimension {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("failed to access model file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a recognized model file (missing DESMINE-M1 header)")]
    BadMagic { path: PathBuf },
    #[error("{path}: cannot parse model: {message}")]
    BadModel { path: PathBuf, message: String },
    #[error("grid candidate `{spec}` failed: {source}")]
    GridSpecFailed {
        spec: String,
        #[source]
        source: Box<ProtocolError>,
    },
    #[error("grid is empty")]
    EmptyGrid,
}

/// One node of a fitted decision tree, stored in a flat arena with the root
/// at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { positive_fraction: f64, n: usize },
}

/// Fitted classifier state, one variant per algorithm family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelState {
    Zeror {
        majority: u8,
        prevalence: f64,
    },
    NaiveBayes {
        /// `log_prior[c]`, c ∈ {0,1}.
        log_prior: Vec<f64>,
        /// `log_likelihood[c][f]`: smoothed multinomial log θ.
        log_likelihood: Vec<Vec<f64>>,
    },
    DecisionTree {
        nodes: Vec<TreeNode>,
    },
    Linear {
        weights: Vec<f64>,
        bias: f64,
        /// True for logistic regression (probability scores); false for the
        /// SVM (raw margin scores).
        sigmoid: bool,
    },
}

/// A fitted classifier, reusable across invocations via
/// [`save_model`]/[`load_model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub feature_dim: usize,
    pub state: ModelState,
}

impl TrainedModel {
    /// The label-decision threshold matching this model's score semantics:
    /// 0.5 for probabilistic scores, 0.0 for raw margins.
    pub fn default_threshold(&self) -> f64 {
        match &self.state {
            ModelState::Linear { sigmoid: false, .. } => 0.0,
            _ => 0.5,
        }
    }
}

fn validate_training_input(
    x: &FeatureMatrix,
    y: &[u8],
    algorithm: &AlgorithmSpec,
) -> Result<(), ClassifyError> {
    if x.len() != y.len() {
        return Err(ClassifyError::LengthMismatch { features: x.len(), labels: y.len() });
    }
    if x.len() < 2 {
        return Err(ClassifyError::TooFewInstances { n: x.len() });
    }
    for &l in y {
        if l > 1 {
            return Err(ClassifyError::BadLabel { value: l });
        }
    }
    let n_pos = y.iter().filter(|&&l| l == 1).count();
    if !matches!(algorithm, AlgorithmSpec::Zeror) && (n_pos == 0 || n_pos == y.len()) {
        return Err(ClassifyError::SingleClass { algorithm: algorithm.name().to_string() });
    }
    Ok(())
}

/// Trains a classifier. Identical inputs (spec, features, labels) always
/// yield bit-identical model state.
pub fn fit(
    spec: &ClassifierSpec,
    x: &FeatureMatrix,
    y: &[u8],
) -> Result<TrainedModel, ClassifyError> {
    validate_training_input(x, y, &spec.algorithm)?;
    let state = match &spec.algorithm {
        AlgorithmSpec::Zeror => fit_zeror(y),
        AlgorithmSpec::NaiveBayes { laplace_alpha } => fit_naive_bayes(x, y, *laplace_alpha)?,
        AlgorithmSpec::DecisionTree { max_depth, min_samples_split } => {
            fit_decision_tree(x, y, *max_depth, *min_samples_split)
        }
        AlgorithmSpec::LogisticRegression { l2_lambda, epochs, lr } => {
            fit_logistic_regression(x, y, *l2_lambda, *epochs, *lr)
        }
        AlgorithmSpec::LinearSvm { l2_lambda, epochs, lr } => {
            fit_linear_svm(x, y, *l2_lambda, *epochs, *lr, spec.seed)
        }
    };
    Ok(TrainedModel { spec: spec.clone(), feature_dim: x.dim, state })
}

fn fit_zeror(y: &[u8]) -> ModelState {
    let n_pos = y.iter().filter(|&&l| l == 1).count();
    let prevalence = n_pos as f64 / y.len() as f64;
    ModelState::Zeror { majority: u8::from(n_pos * 2 > y.len()), prevalence }
}

fn fit_naive_bayes(x: &FeatureMatrix, y: &[u8], alpha: f64) -> Result<ModelState, ClassifyError> {
    let mut counts = vec![vec![0.0f64; x.dim]; 2];
    let mut n_class = [0usize; 2];
    for (i, (row, &label)) in x.rows.iter().zip(y).enumerate() {
        n_class[label as usize] += 1;
        for &(f, v) in &row.entries {
            if v < 0.0 {
                return Err(ClassifyError::NegativeFeature { instance: i, feature: f, value: v });
            }
            counts[label as usize][f] += v;
        }
    }
    let n = y.len() as f64;
    let log_prior = vec![(n_class[0] as f64 / n).ln(), (n_class[1] as f64 / n).ln()];
    let mut log_likelihood = Vec::with_capacity(2);
    for class_counts in &counts {
        let total: f64 = class_counts.iter().sum();
        let denom = total + alpha * x.dim as f64;
        log_likelihood.push(class_counts.iter().map(|&cf| ((cf + alpha) / denom).ln()).collect());
    }
    Ok(ModelState::NaiveBayes { log_prior, log_likelihood })
}

// --- decision tree ------------------------------------------------------

/// Sum of squared class counts, the quantity Gini comparisons reduce to.
fn sum_sq(c0: i128, c1: i128) -> i128 {
    c0 * c0 + c1 * c1
}

struct TreeBuilder<'a> {
    cols: Vec<Vec<f64>>, // column-major dense view, cols[f][sample]
    y: &'a [u8],
    max_depth: Option<usize>,
    min_samples_split: usize,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, samples: &[usize], depth: usize) -> usize {
        let n = samples.len() as i128;
        let n_pos = samples.iter().filter(|&&i| self.y[i] == 1).count() as i128;
        let make_leaf = |nodes: &mut Vec<TreeNode>| {
            nodes.push(TreeNode::Leaf {
                positive_fraction: n_pos as f64 / n as f64,
                n: samples.len(),
            });
            nodes.len() - 1
        };
        let pure = n_pos == 0 || n_pos == n;
        let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || samples.len() < self.min_samples_split {
            return make_leaf(&mut self.nodes);
        }

        // Best split = maximal Σ_child (c0² + c1²)/n_child, compared exactly
        // as integer fractions (numerator/denominator cross-multiplication),
        // accepted only when strictly better than no split at all. Scanning
        // features then thresholds in ascending order makes "first strict
        // maximum" equal to the lowest-feature/lowest-threshold tie rule.
        let mut best: Option<(i128, i128, usize, f64)> = None; // (num, den, feature, threshold)
        let parent_sq = sum_sq(n - n_pos, n_pos);
        for f in 0..self.cols.len() {
            let mut vals: Vec<(f64, u8)> =
                samples.iter().map(|&i| (self.cols[f][i], self.y[i])).collect();
            vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let (mut l0, mut l1) = (0i128, 0i128);
            for i in 0..vals.len() - 1 {
                if vals[i].1 == 1 {
                    l1 += 1;
                } else {
                    l0 += 1;
                }
                if vals[i].0 == vals[i + 1].0 {
                    continue; // not a boundary between distinct values
                }
                let l = (i + 1) as i128;
                let r = n - l;
                let num = sum_sq(l0, l1) * r + sum_sq(n - n_pos - l0, n_pos - l1) * l;
                let den = l * r;
                // Positive gain requirement: num/den > parent_sq/n.
                if num * n <= parent_sq * den {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bn, bd, _, _)) => num * bd > bn * den,
                };
                if better {
                    let (a, b) = (vals[i].0, vals[i + 1].0);
                    let mut thr = (a + b) / 2.0;
                    if thr >= b {
                        // Adjacent floats can round the midpoint up; fall
                        // back to the left value so the partition holds.
                        thr = a;
                    }
                    best = Some((num, den, f, thr));
                }
            }
        }

        match best {
            None => make_leaf(&mut self.nodes),
            Some((_, _, feature, threshold)) => {
                let (left_samples, right_samples): (Vec<usize>, Vec<usize>) =
                    samples.iter().partition(|&&i| self.cols[feature][i] <= threshold);
                let slot = self.nodes.len();
                self.nodes.push(TreeNode::Leaf { positive_fraction: 0.0, n: 0 }); // placeholder
                let left = self.build(&left_samples, depth + 1);
                let right = self.build(&right_samples, depth + 1);
                self.nodes[slot] = TreeNode::Split { feature, threshold, left, right };
                slot
            }
        }
    }
}

fn fit_decision_tree(
    x: &FeatureMatrix,
    y: &[u8],
    max_depth: Option<usize>,
    min_samples_split: usize,
) -> ModelState {
    // Dense column-major materialization; workbench-scale datasets make this
    // affordable and it keeps the split sweep simple and cache-friendly.
    let mut cols = vec![vec![0.0f64; x.len()]; x.dim];
    for (i, row) in x.rows.iter().enumerate() {
        for &(f, v) in &row.entries {
            cols[f][i] = v;
        }
    }
    let mut builder = TreeBuilder {
        cols,
        y,
        max_depth,
        min_samples_split: min_samples_split.max(2),
        nodes: Vec::new(),
    };
    let samples: Vec<usize> = (0..x.len()).collect();
    let root = builder.build(&samples, 0);
    debug_assert_eq!(root, 0);
    ModelState::DecisionTree { nodes: builder.nodes }
}

fn tree_score(nodes: &[TreeNode], row: &SparseVec) -> f64 {
    let mut at = 0usize;
    loop {
        match &nodes[at] {
            TreeNode::Leaf { positive_fraction, .. } => return *positive_fraction,
            TreeNode::Split { feature, threshold, left, right } => {
                at = if row.get(*feature) <= *threshold { *left } else { *right };
            }
        }
    }
}

// --- linear models ------------------------------------------------------

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean log-loss plus `l2_lambda/2 · ||w||²` (bias unregularized) — the
/// objective logistic regression minimizes, exposed so gradient checks can
/// finite-difference the very function being optimized.
pub fn logistic_objective(
    x: &FeatureMatrix,
    y: &[u8],
    weights: &[f64],
    bias: f64,
    l2_lambda: f64,
) -> f64 {
    let n = x.len() as f64;
    let mut loss = 0.0;
    for (row, &label) in x.rows.iter().zip(y) {
        let z = row.dot_dense(weights) + bias;
        // Numerically stable: log(1 + e^-|z|) + max(z·(1-y), -z·y) form.
        let y_f = label as f64;
        loss += (1.0 + (-z.abs()).exp()).ln() + if z > 0.0 { z * (1.0 - y_f) } else { -z * y_f };
    }
    loss / n + 0.5 * l2_lambda * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of [`logistic_objective`] with respect to (weights, bias).
pub fn logistic_gradient(
    x: &FeatureMatrix,
    y: &[u8],
    weights: &[f64],
    bias: f64,
    l2_lambda: f64,
) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut grad_w = vec![0.0f64; x.dim];
    let mut grad_b = 0.0f64;
    for (row, &label) in x.rows.iter().zip(y) {
        let err = sigmoid(row.dot_dense(weights) + bias) - label as f64;
        for &(f, v) in &row.entries {
            grad_w[f] += err * v;
        }
        grad_b += err;
    }
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2_lambda * w;
    }
    (grad_w, grad_b / n)
}

fn fit_logistic_regression(
    x: &FeatureMatrix,
    y: &[u8],
    l2_lambda: f64,
    epochs: usize,
    lr: f64,
) -> ModelState {
    let mut weights = vec![0.0f64; x.dim];
    let mut bias = 0.0f64;
    for _ in 0..epochs {
        let (grad_w, grad_b) = logistic_gradient(x, y, &weights, bias, l2_lambda);
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= lr * g;
        }
        bias -= lr * grad_b;
    }
    ModelState::Linear { weights, bias, sigmoid: true }
}

/// Mean hinge loss plus `l2_lambda/2 · ||w||²` — the SVM objective, exposed
/// for the non-increase property check.
pub fn svm_objective(
    x: &FeatureMatrix,
    y: &[u8],
    weights: &[f64],
    bias: f64,
    l2_lambda: f64,
) -> f64 {
    let n = x.len() as f64;
    let mut loss = 0.0;
    for (row, &label) in x.rows.iter().zip(y) {
        let y_pm = if label == 1 { 1.0 } else { -1.0 };
        loss += (1.0 - y_pm * (row.dot_dense(weights) + bias)).max(0.0);
    }
    loss / n + 0.5 * l2_lambda * weights.iter().map(|w| w * w).sum::<f64>()
}

fn fit_linear_svm(
    x: &FeatureMatrix,
    y: &[u8],
    l2_lambda: f64,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> ModelState {
    let mut weights = vec![0.0f64; x.dim];
    let mut bias = 0.0f64;
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let eta = lr / (1.0 + epoch as f64);
        for &i in &order {
            let y_pm = if y[i] == 1 { 1.0 } else { -1.0 };
            let margin = y_pm * (x.rows[i].dot_dense(&weights) + bias);
            let shrink = 1.0 - eta * l2_lambda;
            for w in weights.iter_mut() {
                *w *= shrink;
            }
            if margin < 1.0 {
                for &(f, v) in &x.rows[i].entries {
                    weights[f] += eta * y_pm * v;
                }
                bias += eta * y_pm;
            }
        }
    }
    ModelState::Linear { weights, bias, sigmoid: false }
}

// --- prediction ---------------------------------------------------------

/// Rank-meaningful scores (higher = more design): ZeroR emits its constant
/// prevalence, naive Bayes the posterior of class 1, the tree its leaf
/// positive fraction, logistic regression `sigmoid(w·x+b)`, and the SVM the
/// raw margin `w·x+b`.
pub fn predict_scores(model: &TrainedModel, x: &FeatureMatrix) -> Result<Vec<f64>, ClassifyError> {
    if x.dim != model.feature_dim {
        return Err(ClassifyError::DimensionMismatch { expected: model.feature_dim, found: x.dim });
    }
    Ok(match &model.state {
        ModelState::Zeror { prevalence, .. } => vec![*prevalence; x.len()],
        ModelState::NaiveBayes { log_prior, log_likelihood } => x
            .rows
            .iter()
            .map(|row| {
                let mut log_post = [log_prior[0], log_prior[1]];
                for &(f, v) in &row.entries {
                    log_post[0] += v * log_likelihood[0][f];
                    log_post[1] += v * log_likelihood[1][f];
                }
                let m = log_post[0].max(log_post[1]);
                let e0 = (log_post[0] - m).exp();
                let e1 = (log_post[1] - m).exp();
                e1 / (e0 + e1)
            })
            .collect(),
        ModelState::DecisionTree { nodes } => {
            x.rows.iter().map(|row| tree_score(nodes, row)).collect()
        }
        ModelState::Linear { weights, bias, sigmoid: use_sigmoid } => x
            .rows
            .iter()
            .map(|row| {
                let z = row.dot_dense(weights) + bias;
                if *use_sigmoid {
                    sigmoid(z)
                } else {
                    z
                }
            })
            .collect(),
    })
}

/// Thresholds scores into labels: 1 iff `score >= threshold`. `None` uses the
/// model's own [`TrainedModel::default_threshold`].
pub fn predict_labels(
    model: &TrainedModel,
    x: &FeatureMatrix,
    threshold: Option<f64>,
) -> Result<Vec<u8>, ClassifyError> {
    let thr = threshold.unwrap_or_else(|| model.default_threshold());
    Ok(predict_scores(model, x)?.into_iter().map(|s| u8::from(s >= thr)).collect())
}

// --- persistence --------------------------------------------------------

const MODEL_MAGIC: &str = "DESMINE-M1";

/// Writes a model as the `DESMINE-M1` header line followed by its JSON body.
/// Reloading reproduces predictions exactly (floats round-trip losslessly).
pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<(), ClassifyError> {
    let path = path.as_ref();
    let body = serde_json::to_string(model).expect("model serialization cannot fail");
    std::fs::write(path, format!("{MODEL_MAGIC}\n{body}\n"))
        .map_err(|source| ClassifyError::Io { path: path.to_path_buf(), source })
}

/// Loads a model written by [`save_model`].
pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel, ClassifyError> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path)
        .map_err(|source| ClassifyError::Io { path: path.to_path_buf(), source })?;
    let Some(rest) = content.strip_prefix(&format!("{MODEL_MAGIC}\n")) else {
        return Err(ClassifyError::BadMagic { path: path.to_path_buf() });
    };
    serde_json::from_str(rest.trim_end())
        .map_err(|e| ClassifyError::BadModel { path: path.to_path_buf(), message: e.to_string() })
}

// --- grid search --------------------------------------------------------

/// Outcome of a grid search: the winning spec plus every candidate's report.
#[derive(Debug, Clone, Serialize)]
pub struct GridSearchOutcome {
    pub best: ClassifierSpec,
    pub reports: Vec<(ClassifierSpec, EvalReport)>,
}

/// Evaluates every candidate classifier under the given protocol context
/// (validation forced to stratified k-fold) and returns the argmax of the
/// chosen metric's cross-validation mean. Ties go to the earlier grid entry.
pub fn grid_search(
    grid: &[ClassifierSpec],
    dataset: &Dataset,
    context: &ProtocolSpec,
    k: usize,
    metric: Metric,
) -> Result<GridSearchOutcome, ClassifyError> {
    if grid.is_empty() {
        return Err(ClassifyError::EmptyGrid);
    }
    let mut reports = Vec::with_capacity(grid.len());
    for spec in grid {
        let mut ctx = context.clone();
        ctx.classifier = spec.clone();
        ctx.validation = ValidationSpec::Kfold { k };
        ctx.balance.stratify = true;
        let result = crate::protocol::execute(&ctx, dataset).map_err(|e| {
            ClassifyError::GridSpecFailed { spec: spec.to_string(), source: Box::new(e) }
        })?;
        reports.push((spec.clone(), result.report));
    }
    let mut best_idx = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, (_, report)) in reports.iter().enumerate() {
        let score = report.mean.get(metric).unwrap_or(f64::NEG_INFINITY);
        if score > best_score {
            best_score = score;
            best_idx = i;
        }
    }
    Ok(GridSearchOutcome { best: grid[best_idx].clone(), reports })
}
