//! Declarative experiment protocols: a JSON file names every pipeline choice
//! (preprocessing, vectorizer, balance steps, classifier, validation scheme),
//! and the executor runs it end to end, deterministically, from one seed.
//!
//! The same resolved spec also renders to a DOT diagram, so "what exactly did
//! this experiment do" has a single answer shared by the runner and the
//! documentation.
//!
//! Seeding: the protocol seed is the only random input. Stage seeds (fold
//! assignment, per-fold SMOTE, per-fold classifier training, document-vector
//! training, per-document inference, holdout splitting) are derived from it
//! with [`crate::derive_seed`] under fixed stream tags, so stages can be
//! reordered or parallelized without changing results.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::balance::{plain_folds, smote, stratified_folds, SmoteParams};
use crate::classify::{fit, predict_labels, predict_scores, ClassifierSpec};
use crate::corpus::{prepare_tokens, CleanOptions, Dataset, StopwordSet};
use crate::derive_seed;
use crate::docvec::{infer_docvec, load_docvec, train_docvec, DocVecModel, DocVecParams, TokenDoc};
use crate::evaluate::{
    aggregate_folds, confusion, metrics, roc_auc, EvalReport, EvaluateError, MetricSet,
};
use crate::vectorize::{
    build_vocabulary, count_vectorize, embed_average, expand_vocabulary, fit_tfidf,
    load_embeddings, tfidf_vectorize, top_bigrams, BigramSet, EmbeddingTable, FeatureMatrix,
    IdfModel, SparseVec, Vocabulary,
};

/// Protocol file format version accepted by this build.
pub const PROTOCOL_VERSION: u32 = 1;

// Stream tags for seed derivation; each pipeline stage draws its randomness
// from `derive_seed(spec.seed, TAG [+ fold or doc index])`.
const STREAM_FOLDS: u64 = 0x0F01;
const STREAM_HOLDOUT: u64 = 0x401D;
const STREAM_SMOTE: u64 = 0x5301_0000;
const STREAM_CLASSIFIER: u64 = 0xC100_0000;
const STREAM_DOCVEC: u64 = 0xD0C0_0000;
const STREAM_INFER: u64 = 0x1FE0_0000_0000;

pub const VECTORIZER_NAMES: [&str; 5] =
    ["count", "bigram_top_k", "tfidf", "embedding_average", "docvec"];

/// Feature-extraction choice.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorizerSpec {
    /// Raw in-vocabulary token counts.
    Count,
    /// Token counts plus presence bits for the `k` most frequent bigrams.
    BigramTopK { k: usize },
    /// L2-normalized TF-IDF.
    Tfidf,
    /// Mean of pretrained word embeddings from `table`.
    EmbeddingAverage { table: String },
    /// Paragraph vectors: either trained in-pipeline (`params`) or loaded
    /// from a previously trained `model` file — exactly one must be given.
    Docvec { params: Option<DocVecParams>, model: Option<String> },
}

impl VectorizerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            VectorizerSpec::Count => "count",
            VectorizerSpec::BigramTopK { .. } => "bigram_top_k",
            VectorizerSpec::Tfidf => "tfidf",
            VectorizerSpec::EmbeddingAverage { .. } => "embedding_average",
            VectorizerSpec::Docvec { .. } => "docvec",
        }
    }
}

impl Serialize for VectorizerSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(None)?;
        map.serialize_entry("kind", self.name())?;
        match self {
            VectorizerSpec::Count | VectorizerSpec::Tfidf => {}
            VectorizerSpec::BigramTopK { k } => map.serialize_entry("k", k)?,
            VectorizerSpec::EmbeddingAverage { table } => map.serialize_entry("table", table)?,
            VectorizerSpec::Docvec { params, model } => {
                if let Some(p) = params {
                    map.serialize_entry("params", p)?;
                }
                if let Some(m) = model {
                    map.serialize_entry("model", m)?;
                }
            }
        }
        map.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVectorizer {
    kind: String,
    k: Option<usize>,
    table: Option<String>,
    params: Option<DocVecParams>,
    model: Option<String>,
}

impl<'de> Deserialize<'de> for VectorizerSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawVectorizer::deserialize(deserializer)?;
        let reject = |field: &str, present: bool| {
            if present {
                Err(D::Error::custom(format!(
                    "field `{field}` is not valid for vectorizer `{}`",
                    raw.kind
                )))
            } else {
                Ok(())
            }
        };
        match raw.kind.as_str() {
            "count" | "tfidf" => {
                reject("k", raw.k.is_some())?;
                reject("table", raw.table.is_some())?;
                reject("params", raw.params.is_some())?;
                reject("model", raw.model.is_some())?;
                Ok(if raw.kind == "count" { VectorizerSpec::Count } else { VectorizerSpec::Tfidf })
            }
            "bigram_top_k" => {
                reject("table", raw.table.is_some())?;
                reject("params", raw.params.is_some())?;
                reject("model", raw.model.is_some())?;
                let k = raw
                    .k
                    .ok_or_else(|| D::Error::custom("vectorizer `bigram_top_k` requires `k`"))?;
                Ok(VectorizerSpec::BigramTopK { k })
            }
            "embedding_average" => {
                reject("k", raw.k.is_some())?;
                reject("params", raw.params.is_some())?;
                reject("model", raw.model.is_some())?;
                let table = raw.table.ok_or_else(|| {
                    D::Error::custom("vectorizer `embedding_average` requires `table`")
                })?;
                Ok(VectorizerSpec::EmbeddingAverage { table })
            }
            "docvec" => {
                reject("k", raw.k.is_some())?;
                reject("table", raw.table.is_some())?;
                if raw.params.is_some() == raw.model.is_some() {
                    return Err(D::Error::custom(
                        "vectorizer `docvec` requires exactly one of `params` or `model`",
                    ));
                }
                Ok(VectorizerSpec::Docvec { params: raw.params, model: raw.model })
            }
            other => Err(D::Error::custom(format!(
                "unknown vectorizer `{other}`, valid options: {}",
                VECTORIZER_NAMES.join(", ")
            ))),
        }
    }
}

/// Optional per-document vocabulary expansion: append up to `n` embedding
/// neighbors (cosine ≥ `tau`) for each token before vectorizing. `table`
/// defaults to the `embedding_average` vectorizer's table when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionSpec {
    pub n: usize,
    pub tau: f64,
    #[serde(default)]
    pub table: Option<String>,
}

/// The balance stage: either, both, or neither of stratified folding and
/// SMOTE oversampling (applied to training partitions only).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceSpec {
    pub stratify: bool,
    pub smote: Option<SmoteParams>,
}

impl BalanceSpec {
    /// True when the stage does nothing (and is omitted from diagrams).
    pub fn is_empty(&self) -> bool {
        !self.stratify && self.smote.is_none()
    }
}

/// Validation scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValidationSpec {
    Kfold {
        k: usize,
    },
    /// Train/validation/test fractions; must sum to 1.
    Holdout {
        train: f64,
        val: f64,
        test: f64,
    },
}

impl Serialize for ValidationSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(None)?;
        match self {
            ValidationSpec::Kfold { k } => {
                map.serialize_entry("kind", "kfold")?;
                map.serialize_entry("k", k)?;
            }
            ValidationSpec::Holdout { train, val, test } => {
                map.serialize_entry("kind", "holdout")?;
                map.serialize_entry("train", train)?;
                map.serialize_entry("val", val)?;
                map.serialize_entry("test", test)?;
            }
        }
        map.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValidation {
    kind: String,
    k: Option<usize>,
    train: Option<f64>,
    val: Option<f64>,
    test: Option<f64>,
}

impl<'de> Deserialize<'de> for ValidationSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawValidation::deserialize(deserializer)?;
        match raw.kind.as_str() {
            "kfold" => {
                if raw.train.is_some() || raw.val.is_some() || raw.test.is_some() {
                    return Err(D::Error::custom(
                        "holdout fractions are not valid for validation `kfold`",
                    ));
                }
                let k = raw.k.ok_or_else(|| D::Error::custom("validation `kfold` requires `k`"))?;
                Ok(ValidationSpec::Kfold { k })
            }
            "holdout" => {
                if raw.k.is_some() {
                    return Err(D::Error::custom("`k` is not valid for validation `holdout`"));
                }
                match (raw.train, raw.val, raw.test) {
                    (Some(train), Some(val), Some(test)) => {
                        Ok(ValidationSpec::Holdout { train, val, test })
                    }
                    _ => Err(D::Error::custom(
                        "validation `holdout` requires `train`, `val`, and `test` fractions",
                    )),
                }
            }
            other => Err(D::Error::custom(format!(
                "unknown validation `{other}`, valid options: kfold, holdout"
            ))),
        }
    }
}

/// Whether feature models (vocabulary, IDF, bigram list, document vectors)
/// are fitted per training fold (leakage-free) or once on the whole dataset
/// (the historical replication setting).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFeatures {
    #[default]
    PerFold,
    Global,
}

fn default_name() -> String {
    "unnamed".to_string()
}

/// A fully specified experiment: every pipeline choice, plus the seed that
/// makes the run reproducible. Parsed from JSON with unknown keys rejected
/// and the seed mandatory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub desmine_protocol: u32,
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub preprocess: CleanOptions,
    pub vectorizer: VectorizerSpec,
    #[serde(default)]
    pub expansion: Option<ExpansionSpec>,
    #[serde(default)]
    pub balance: BalanceSpec,
    pub classifier: ClassifierSpec,
    pub validation: ValidationSpec,
    #[serde(default)]
    pub fit_features: FitFeatures,
    pub seed: u64,
}

/// Errors from parsing, validating, or executing protocols.
#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid protocol `{name}`: {message}")]
    Invalid { name: String, message: String },
    #[error("stage {context}: {message}")]
    Stage { context: String, message: String },
}

fn stage_err(stage: &str, fold: Option<usize>, message: impl ToString) -> ProtocolError {
    let context = match fold {
        Some(f) => format!("{stage} (fold {f})"),
        None => stage.to_string(),
    };
    ProtocolError::Stage { context, message: message.to_string() }
}

impl ProtocolSpec {
    /// Semantic validation beyond what the JSON schema enforces.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let invalid = |message: String| ProtocolError::Invalid { name: self.name.clone(), message };
        if self.desmine_protocol != PROTOCOL_VERSION {
            return Err(invalid(format!(
                "desmine_protocol version {} is not supported (this build reads version {})",
                self.desmine_protocol, PROTOCOL_VERSION
            )));
        }
        match self.validation {
            ValidationSpec::Kfold { k } if k < 2 => {
                return Err(invalid(format!("kfold requires k >= 2, got {k}")));
            }
            ValidationSpec::Holdout { train, val, test } => {
                if train <= 0.0 || val <= 0.0 || test <= 0.0 {
                    return Err(invalid("holdout fractions must all be positive".to_string()));
                }
                if ((train + val + test) - 1.0).abs() > 1e-9 {
                    return Err(invalid(format!(
                        "holdout fractions must sum to 1, got {}",
                        train + val + test
                    )));
                }
            }
            _ => {}
        }
        if let VectorizerSpec::Docvec { params: Some(p), .. } = &self.vectorizer {
            if p.epochs == 0 || p.dim == 0 {
                return Err(invalid("docvec params require dim >= 1 and epochs >= 1".to_string()));
            }
        }
        if let Some(exp) = &self.expansion {
            if exp.table.is_none()
                && !matches!(self.vectorizer, VectorizerSpec::EmbeddingAverage { .. })
            {
                return Err(invalid(
                    "expansion requires an embedding table: set `expansion.table` or use the \
                     embedding_average vectorizer"
                        .to_string(),
                ));
            }
            if !(0.0..=1.0).contains(&exp.tau) {
                return Err(invalid(format!(
                    "expansion tau must be within [0, 1], got {}",
                    exp.tau
                )));
            }
        }
        Ok(())
    }

    /// Path of the embedding table the expansion stage should use, if any.
    fn expansion_table(&self) -> Option<&str> {
        let exp = self.expansion.as_ref()?;
        exp.table.as_deref().or(match &self.vectorizer {
            VectorizerSpec::EmbeddingAverage { table } => Some(table.as_str()),
            _ => None,
        })
    }
}

/// Resolves a data file path: absolute paths pass through; relative paths are
/// joined onto `DESMINE_DATA_DIR` when set, the working directory otherwise.
pub fn resolve_data_path(path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        return p.to_path_buf();
    }
    match std::env::var_os("DESMINE_DATA_DIR") {
        Some(root) => Path::new(&root).join(p),
        None => p.to_path_buf(),
    }
}

/// Reads and fully validates a protocol file; the result has every default
/// expanded.
pub fn parse(path: impl AsRef<Path>) -> Result<ProtocolSpec, ProtocolError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ProtocolError::Io { path: path.to_path_buf(), source })?;
    let spec: ProtocolSpec = serde_json::from_str(&text)
        .map_err(|e| ProtocolError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    spec.validate()?;
    Ok(spec)
}

/// Run provenance recorded alongside results. Deliberately contains nothing
/// volatile (no timestamps, no hostnames): identical runs must serialize to
/// identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: String,
    pub seed: u64,
    pub artifact_version: String,
}

/// The outcome of executing a protocol on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub spec: ProtocolSpec,
    pub report: EvalReport,
    pub provenance: Provenance,
}

/// Tokenized dataset plus any external resources the vectorizer needs,
/// shared across folds (and across transfer-matrix cells).
pub(crate) struct PipelineContext {
    pub tokens: Vec<Vec<String>>,
    pub ids: Vec<String>,
    pub labels: Vec<u8>,
    table: Option<Arc<EmbeddingTable>>,
    loaded_docvec: Option<Arc<DocVecModel>>,
}

/// Fitted feature models for one training partition.
enum FittedFeatures {
    Count {
        vocab: Vocabulary,
    },
    Bigram {
        vocab: Vocabulary,
        bigrams: BigramSet,
    },
    Tfidf {
        vocab: Vocabulary,
        idf: IdfModel,
    },
    Embedding {
        table: Arc<EmbeddingTable>,
    },
    Docvec {
        model: Arc<DocVecModel>,
        /// Dataset index → trained document-vector row, for documents that
        /// were part of this model's training corpus.
        train_rows: HashMap<usize, usize>,
    },
}

impl FittedFeatures {
    fn dim(&self) -> usize {
        match self {
            FittedFeatures::Count { vocab } | FittedFeatures::Tfidf { vocab, .. } => vocab.len(),
            FittedFeatures::Bigram { vocab, bigrams } => vocab.len() + bigrams.len(),
            FittedFeatures::Embedding { table } => table.dim(),
            FittedFeatures::Docvec { model, .. } => model.params.dim,
        }
    }

    /// Vectorizes one document. `doc` is the dataset index (used to look up
    /// trained document vectors and to derive the inference seed). When
    /// `use_train_rows` is false the trained document-vector cache is
    /// bypassed — required when `doc` indexes a different dataset than the
    /// one the features were fitted on.
    fn transform(
        &self,
        ctx: &PipelineContext,
        doc: usize,
        seed: u64,
        use_train_rows: bool,
    ) -> Result<SparseVec, ProtocolError> {
        let tokens = &ctx.tokens[doc];
        Ok(match self {
            FittedFeatures::Count { vocab } => count_vectorize(tokens, vocab, None),
            FittedFeatures::Bigram { vocab, bigrams } => {
                count_vectorize(tokens, vocab, Some(bigrams))
            }
            FittedFeatures::Tfidf { vocab, idf } => tfidf_vectorize(tokens, vocab, idf),
            FittedFeatures::Embedding { table } => {
                SparseVec::from_dense(&embed_average(tokens, table))
            }
            FittedFeatures::Docvec { model, train_rows } => {
                let trained_row = if use_train_rows { train_rows.get(&doc) } else { None };
                match trained_row {
                    Some(&row) => SparseVec::from_dense(&model.doc_vectors[row]),
                    None => {
                        let inferred = infer_docvec(
                            model,
                            tokens,
                            model.params.epochs,
                            derive_seed(seed, STREAM_INFER + doc as u64),
                        )
                        .map_err(|e| stage_err("vectorize", None, e))?;
                        SparseVec::from_dense(&inferred.vector)
                    }
                }
            }
        })
    }
}

/// Tokenizes the dataset, applies expansion, and loads external resources.
pub(crate) fn prepare(
    spec: &ProtocolSpec,
    dataset: &Dataset,
) -> Result<PipelineContext, ProtocolError> {
    if dataset.is_empty() {
        return Err(ProtocolError::Invalid {
            name: spec.name.clone(),
            message: format!("dataset `{}` is empty", dataset.name),
        });
    }
    let mut tokens: Vec<Vec<String>> =
        dataset.discussions.iter().map(|d| prepare_tokens(&d.text, &spec.preprocess)).collect();

    // Embedding table: needed by the embedding_average vectorizer and/or the
    // expansion stage; loaded once.
    let table_path = match &spec.vectorizer {
        VectorizerSpec::EmbeddingAverage { table } => Some(table.as_str()),
        _ => None,
    }
    .or_else(|| spec.expansion_table());
    let table = match table_path {
        Some(p) => {
            let resolved = resolve_data_path(p);
            let t = load_embeddings(&resolved, None)
                .map_err(|e| stage_err("load embeddings", None, e))?;
            Some(Arc::new(t))
        }
        None => None,
    };

    if let Some(exp) = &spec.expansion {
        let t = table.as_ref().expect("validate() guarantees an expansion table");
        for doc in tokens.iter_mut() {
            *doc = expand_vocabulary(doc, t, exp.n, exp.tau);
        }
    }

    let loaded_docvec = match &spec.vectorizer {
        VectorizerSpec::Docvec { model: Some(path), .. } => {
            let resolved = resolve_data_path(path);
            let m = load_docvec(&resolved).map_err(|e| stage_err("load docvec model", None, e))?;
            Some(Arc::new(m))
        }
        _ => None,
    };

    Ok(PipelineContext {
        tokens,
        ids: dataset.discussions.iter().map(|d| d.id.clone()).collect(),
        labels: dataset.labels(),
        table,
        loaded_docvec,
    })
}

/// Fits the feature models on the documents at `fit_idx`.
fn fit_features(
    spec: &ProtocolSpec,
    ctx: &PipelineContext,
    fit_idx: &[usize],
    fold: Option<usize>,
) -> Result<FittedFeatures, ProtocolError> {
    let corpus: Vec<Vec<String>> = fit_idx.iter().map(|&i| ctx.tokens[i].clone()).collect();
    Ok(match &spec.vectorizer {
        VectorizerSpec::Count => FittedFeatures::Count {
            vocab: build_vocabulary(&corpus, 1, None)
                .map_err(|e| stage_err("vectorize", fold, e))?,
        },
        VectorizerSpec::BigramTopK { k } => FittedFeatures::Bigram {
            vocab: build_vocabulary(&corpus, 1, None)
                .map_err(|e| stage_err("vectorize", fold, e))?,
            bigrams: top_bigrams(&corpus, *k),
        },
        VectorizerSpec::Tfidf => {
            let vocab =
                build_vocabulary(&corpus, 1, None).map_err(|e| stage_err("vectorize", fold, e))?;
            let idf = fit_tfidf(&corpus, &vocab);
            FittedFeatures::Tfidf { vocab, idf }
        }
        VectorizerSpec::EmbeddingAverage { .. } => FittedFeatures::Embedding {
            table: Arc::clone(ctx.table.as_ref().expect("prepare() loaded the table")),
        },
        VectorizerSpec::Docvec { params, model } => {
            if model.is_some() {
                // Pretrained model: every document is inferred.
                FittedFeatures::Docvec {
                    model: Arc::clone(
                        ctx.loaded_docvec.as_ref().expect("prepare() loaded the model"),
                    ),
                    train_rows: HashMap::new(),
                }
            } else {
                let mut p = params.clone().expect("schema enforces params xor model");
                p.seed = derive_seed(spec.seed, STREAM_DOCVEC + fold.unwrap_or(0) as u64);
                let docs: Vec<TokenDoc> = fit_idx
                    .iter()
                    .map(|&i| TokenDoc { id: ctx.ids[i].clone(), tokens: ctx.tokens[i].clone() })
                    .collect();
                let model = train_docvec(&docs, &p).map_err(|e| stage_err("vectorize", fold, e))?;
                let train_rows = fit_idx.iter().enumerate().map(|(row, &i)| (i, row)).collect();
                FittedFeatures::Docvec { model: Arc::new(model), train_rows }
            }
        }
    })
}

/// A feature model and classifier trained on an entire dataset, reusable
/// against any number of test datasets (the transfer-matrix workhorse).
pub(crate) struct FullyTrained {
    features: FittedFeatures,
    model: crate::classify::TrainedModel,
}

/// Fits features on the whole dataset, applies SMOTE if configured, and
/// trains the classifier on everything. Stage seeds are derived exactly as
/// for a single non-fold run.
pub(crate) fn train_on_all(
    spec: &ProtocolSpec,
    ctx: &PipelineContext,
) -> Result<FullyTrained, ProtocolError> {
    let all_idx: Vec<usize> = (0..ctx.labels.len()).collect();
    let features = fit_features(spec, ctx, &all_idx, None)?;
    let mut rows = Vec::with_capacity(all_idx.len());
    for &i in &all_idx {
        rows.push(features.transform(ctx, i, spec.seed, true)?);
    }
    let mut labels = ctx.labels.clone();
    if let Some(sp) = &spec.balance.smote {
        let mut params = sp.clone();
        params.seed = derive_seed(spec.seed, STREAM_SMOTE);
        let (r, l) = smote(&rows, &labels, &params).map_err(|e| stage_err("balance", None, e))?;
        rows = r;
        labels = l;
    }
    let x = FeatureMatrix::new(rows, features.dim());
    let mut classifier = spec.classifier.clone();
    classifier.seed = derive_seed(spec.seed, STREAM_CLASSIFIER);
    let model = fit(&classifier, &x, &labels).map_err(|e| stage_err("classify", None, e))?;
    Ok(FullyTrained { features, model })
}

/// Scores every document of `ctx` with an already trained model. `foreign`
/// must be true when `ctx` is a different dataset than the model was trained
/// on (so cached document vectors are not misapplied by index).
pub(crate) fn evaluate_on(
    spec: &ProtocolSpec,
    trained: &FullyTrained,
    ctx: &PipelineContext,
    foreign: bool,
) -> Result<EvalReport, ProtocolError> {
    let mut rows = Vec::with_capacity(ctx.labels.len());
    for i in 0..ctx.labels.len() {
        rows.push(trained.features.transform(ctx, i, spec.seed, !foreign)?);
    }
    let x = FeatureMatrix::new(rows, trained.features.dim());
    let scores = predict_scores(&trained.model, &x).map_err(|e| stage_err("evaluate", None, e))?;
    let predicted =
        predict_labels(&trained.model, &x, None).map_err(|e| stage_err("evaluate", None, e))?;
    let cm = confusion(&ctx.labels, &predicted).map_err(|e| stage_err("evaluate", None, e))?;
    let (mut set, mut undefined) = metrics(&cm);
    set.roc_auc = match roc_auc(&ctx.labels, &scores) {
        Ok(auc) => Some(auc),
        Err(EvaluateError::SingleClassAuc { .. }) => None,
        Err(e) => return Err(stage_err("evaluate", None, e)),
    };
    if set.roc_auc.is_none() {
        undefined.push("roc_auc".to_string());
    }
    undefined.sort();
    undefined.dedup();
    Ok(EvalReport::single(set, undefined))
}

/// Trains on `train_idx`, evaluates on `test_idx`, and returns the metric set
/// plus undefined-metric flags. `features` must already be fitted (per fold
/// or globally, per `spec.fit_features`).
fn run_split(
    spec: &ProtocolSpec,
    ctx: &PipelineContext,
    features: &FittedFeatures,
    train_idx: &[usize],
    test_idx: &[usize],
    fold: Option<usize>,
) -> Result<(MetricSet, Vec<String>), ProtocolError> {
    let dim = features.dim();
    let mut x_train_rows = Vec::with_capacity(train_idx.len());
    for &i in train_idx {
        x_train_rows.push(features.transform(ctx, i, spec.seed, true)?);
    }
    let mut y_train: Vec<u8> = train_idx.iter().map(|&i| ctx.labels[i]).collect();

    if let Some(sp) = &spec.balance.smote {
        let mut params = sp.clone();
        params.seed = derive_seed(spec.seed, STREAM_SMOTE + fold.unwrap_or(0) as u64);
        let (rows, labels) =
            smote(&x_train_rows, &y_train, &params).map_err(|e| stage_err("balance", fold, e))?;
        x_train_rows = rows;
        y_train = labels;
    }
    let x_train = FeatureMatrix::new(x_train_rows, dim);

    let mut classifier = spec.classifier.clone();
    classifier.seed = derive_seed(spec.seed, STREAM_CLASSIFIER + fold.unwrap_or(0) as u64);
    let model = fit(&classifier, &x_train, &y_train).map_err(|e| stage_err("classify", fold, e))?;

    let mut x_test_rows = Vec::with_capacity(test_idx.len());
    for &i in test_idx {
        x_test_rows.push(features.transform(ctx, i, spec.seed, true)?);
    }
    let x_test = FeatureMatrix::new(x_test_rows, dim);
    let y_test: Vec<u8> = test_idx.iter().map(|&i| ctx.labels[i]).collect();

    let scores = predict_scores(&model, &x_test).map_err(|e| stage_err("evaluate", fold, e))?;
    let predicted =
        predict_labels(&model, &x_test, None).map_err(|e| stage_err("evaluate", fold, e))?;
    let cm = confusion(&y_test, &predicted).map_err(|e| stage_err("evaluate", fold, e))?;
    let (mut set, mut undefined) = metrics(&cm);
    set.roc_auc = match roc_auc(&y_test, &scores) {
        Ok(auc) => Some(auc),
        Err(EvaluateError::SingleClassAuc { .. }) => None,
        Err(e) => return Err(stage_err("evaluate", fold, e)),
    };
    if set.roc_auc.is_none() {
        undefined.push("roc_auc".to_string());
    }
    undefined.sort();
    undefined.dedup();
    Ok((set, undefined))
}

/// Splits `0..n` into train/val/test index sets by seeded shuffle; when
/// `stratify` is set, each class is split proportionally.
fn holdout_split(
    labels: &[u8],
    train: f64,
    val: f64,
    stratify: bool,
    seed: u64,
) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = if stratify {
        let mut class0: Vec<usize> = Vec::new();
        let mut class1: Vec<usize> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            if l == 1 {
                class1.push(i);
            } else {
                class0.push(i);
            }
        }
        vec![class0, class1]
    } else {
        vec![(0..labels.len()).collect()]
    };
    let (mut tr, mut va, mut te) = (Vec::new(), Vec::new(), Vec::new());
    for mut group in groups {
        group.shuffle(&mut rng);
        let n = group.len();
        let cut1 = ((train * n as f64).round() as usize).min(n);
        let cut2 = (((train + val) * n as f64).round() as usize).clamp(cut1, n);
        tr.extend_from_slice(&group[..cut1]);
        va.extend_from_slice(&group[cut1..cut2]);
        te.extend_from_slice(&group[cut2..]);
    }
    tr.sort_unstable();
    va.sort_unstable();
    te.sort_unstable();
    (tr, va, te)
}

/// Executes a protocol on a dataset: clean → tokenize → stopwords →
/// (expansion) → vectorize → balance → fit → validate. Identical
/// (spec, dataset) inputs produce identical results, byte for byte once
/// serialized.
pub fn execute(spec: &ProtocolSpec, dataset: &Dataset) -> Result<ProtocolResult, ProtocolError> {
    spec.validate()?;
    let ctx = prepare(spec, dataset)?;
    let all_idx: Vec<usize> = (0..ctx.labels.len()).collect();

    let report = match spec.validation {
        ValidationSpec::Kfold { k } => {
            let fold_seed = derive_seed(spec.seed, STREAM_FOLDS);
            let assignment = if spec.balance.stratify {
                stratified_folds(&ctx.labels, k, fold_seed)
            } else {
                plain_folds(ctx.labels.len(), k, fold_seed)
            }
            .map_err(|e| stage_err("folds", None, e))?;

            // Global feature fitting happens once, outside the fold loop.
            let global_features = match spec.fit_features {
                FitFeatures::Global => Some(fit_features(spec, &ctx, &all_idx, None)?),
                FitFeatures::PerFold => None,
            };

            let outcomes: Vec<Result<(MetricSet, Vec<String>), ProtocolError>> = (0..k)
                .into_par_iter()
                .map(|f| {
                    let train_idx = assignment.train_indices(f);
                    let test_idx = assignment.test_indices(f);
                    let fitted;
                    let features = match &global_features {
                        Some(g) => g,
                        None => {
                            fitted = fit_features(spec, &ctx, &train_idx, Some(f))?;
                            &fitted
                        }
                    };
                    run_split(spec, &ctx, features, &train_idx, &test_idx, Some(f))
                })
                .collect();

            let mut per_fold = Vec::with_capacity(k);
            let mut undefined = Vec::new();
            for outcome in outcomes {
                let (set, mut flags) = outcome?;
                per_fold.push(set);
                undefined.append(&mut flags);
            }
            aggregate_folds(per_fold, undefined)
        }
        ValidationSpec::Holdout { train, val, .. } => {
            let (train_idx, val_idx, test_idx) = holdout_split(
                &ctx.labels,
                train,
                val,
                spec.balance.stratify,
                derive_seed(spec.seed, STREAM_HOLDOUT),
            );
            for (name, part) in
                [("train", &train_idx), ("validation", &val_idx), ("test", &test_idx)]
            {
                if part.is_empty() {
                    return Err(stage_err(
                        "holdout split",
                        None,
                        format!("the {name} partition is empty (dataset too small)"),
                    ));
                }
            }
            let features = match spec.fit_features {
                FitFeatures::Global => fit_features(spec, &ctx, &all_idx, None)?,
                FitFeatures::PerFold => fit_features(spec, &ctx, &train_idx, None)?,
            };
            let (val_set, mut undefined) =
                run_split(spec, &ctx, &features, &train_idx, &val_idx, None)?;
            let (test_set, mut test_undefined) =
                run_split(spec, &ctx, &features, &train_idx, &test_idx, None)?;
            undefined.append(&mut test_undefined);
            undefined.sort();
            undefined.dedup();
            let mut report = EvalReport::single(test_set, undefined);
            report.holdout_validation = Some(val_set);
            report
        }
    };

    Ok(ProtocolResult {
        spec: spec.clone(),
        report,
        provenance: Provenance {
            dataset: dataset.name.clone(),
            seed: spec.seed,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders the protocol as a DOT digraph: a linear chain of stage nodes whose
/// labels carry every resolved field (so distinct specs render to distinct
/// text). The balance node is omitted when the balance stage does nothing.
pub fn render_dot(spec: &ProtocolSpec) -> String {
    let p = &spec.preprocess;
    let stop = match p.stopword_set {
        StopwordSet::None => "none".to_string(),
        StopwordSet::English => "english".to_string(),
        StopwordSet::EnglishPlusDomain => {
            format!("english_plus_domain({})", p.domain_stopwords.join(","))
        }
    };
    let preprocess = format!(
        "preprocess\\nlowercase={}, strip_html_and_code={}, strip_punctuation={}\\nstopwords={}",
        p.lowercase,
        p.strip_html_and_code,
        p.strip_punctuation,
        dot_escape(&stop)
    );

    let mut vectorize = match &spec.vectorizer {
        VectorizerSpec::Count => "count".to_string(),
        VectorizerSpec::BigramTopK { k } => format!("bigram_top_k({k})"),
        VectorizerSpec::Tfidf => "tfidf".to_string(),
        VectorizerSpec::EmbeddingAverage { table } => {
            format!("embedding_average({})", dot_escape(table))
        }
        VectorizerSpec::Docvec { params: Some(p), .. } => format!(
            "docvec(dim={}, epochs={}, negative={}, initial_lr={}, final_lr={}, min_count={}, seed={})",
            p.dim, p.epochs, p.negative, p.initial_lr, p.final_lr, p.min_count, p.seed
        ),
        VectorizerSpec::Docvec { model: Some(m), .. } => {
            format!("docvec(model={})", dot_escape(m))
        }
        VectorizerSpec::Docvec { .. } => "docvec".to_string(),
    };
    if let Some(exp) = &spec.expansion {
        vectorize.push_str(&format!("\\nexpand(n={}, tau={}", exp.n, exp.tau));
        if let Some(t) = &exp.table {
            vectorize.push_str(&format!(", table={}", dot_escape(t)));
        }
        vectorize.push(')');
    }

    let balance = if spec.balance.is_empty() {
        None
    } else {
        let mut parts = Vec::new();
        if spec.balance.stratify {
            parts.push("stratify".to_string());
        }
        if let Some(s) = &spec.balance.smote {
            parts.push(format!(
                "smote(k_neighbors={}, target_ratio={}, seed={})",
                s.k_neighbors, s.target_ratio, s.seed
            ));
        }
        Some(format!("balance\\n{}", parts.join(", ")))
    };

    let classify = format!("classify\\n{} [seed={}]", spec.classifier, spec.classifier.seed);
    let validate = match spec.validation {
        ValidationSpec::Kfold { k } => format!(
            "validate\\nkfold(k={k}), fit_features={:?}, seed={}",
            spec.fit_features, spec.seed
        ),
        ValidationSpec::Holdout { train, val, test } => format!(
            "validate\\nholdout({train}/{val}/{test}), fit_features={:?}, seed={}",
            spec.fit_features, spec.seed
        ),
    };

    let mut nodes = vec![
        ("source", format!("source\\n{}", dot_escape(&spec.name))),
        ("preprocess", preprocess),
        ("vectorize", format!("vectorize\\n{vectorize}")),
    ];
    if let Some(b) = balance {
        nodes.push(("balance", b));
    }
    nodes.push(("classify", classify));
    nodes.push(("validate", validate));

    let mut out = String::from(
        "digraph protocol {\n  rankdir=LR;\n  node [shape=box, fontname=\"sans-serif\"];\n",
    );
    for (id, label) in &nodes {
        out.push_str(&format!("  {id} [label=\"{label}\"];\n"));
    }
    for pair in nodes.windows(2) {
        out.push_str(&format!("  {} -> {};\n", pair[0].0, pair[1].0));
    }
    out.push_str("}\n");
    out
}
