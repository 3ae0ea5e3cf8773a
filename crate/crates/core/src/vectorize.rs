//! Turning token lists into feature vectors.
//!
//! Four vectorization families are provided: raw counts over a fitted
//! [`Vocabulary`], counts plus top-k bigram presence bits, smoothed TF-IDF,
//! and pretrained-embedding averaging. [`expand_vocabulary`] additionally
//! lengthens short discussions by appending embedding-space nearest
//! neighbors.
//!
//! All fitting here is deterministic — there is no randomness in this module
//! — and fitted models are immutable, so vectorization of distinct
//! discussions can run in parallel freely.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A dense real-valued vector.
pub type DenseVec = Vec<f64>;

/// A sparse vector: `(index, value)` pairs with strictly increasing indices
/// and nonzero values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SparseVec {
    pub entries: Vec<(usize, f64)>,
}

impl SparseVec {
    /// Builds from entries, dropping zeros and sorting by index.
    /// Panics on duplicate indices (a caller bug).
    pub fn new(mut entries: Vec<(usize, f64)>) -> Self {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_by_key(|&(i, _)| i);
        for w in entries.windows(2) {
            assert!(w[0].0 < w[1].0, "duplicate sparse index {}", w[1].0);
        }
        SparseVec { entries }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        SparseVec {
            entries: values
                .iter()
                .enumerate()
                .filter(|&(_, &v)| v != 0.0)
                .map(|(i, &v)| (i, v))
                .collect(),
        }
    }

    pub fn to_dense(&self, dim: usize) -> DenseVec {
        let mut out = vec![0.0; dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    /// Value at `index` (0.0 when absent).
    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * w[i]).sum()
    }

    pub fn dot_sparse(&self, other: &SparseVec) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0;
        while a < self.entries.len() && b < other.entries.len() {
            let (ia, va) = self.entries[a];
            let (ib, vb) = other.entries[b];
            match ia.cmp(&ib) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += va * vb;
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }

    /// Sum of all entry values (for counts: total in-vocabulary occurrences).
    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v).sum()
    }

    /// Returns this vector scaled to unit L2 norm; empty vectors stay empty.
    pub fn l2_normalized(&self) -> SparseVec {
        let norm = self.norm_sq().sqrt();
        if norm == 0.0 {
            return self.clone();
        }
        SparseVec { entries: self.entries.iter().map(|&(i, v)| (i, v / norm)).collect() }
    }
}

/// A set of feature vectors with a declared dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<SparseVec>,
    pub dim: usize,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<SparseVec>, dim: usize) -> Self {
        debug_assert!(rows.iter().all(|r| r.entries.last().is_none_or(|&(i, _)| i < dim)));
        FeatureMatrix { rows, dim }
    }

    pub fn from_dense(rows: Vec<DenseVec>, dim: usize) -> Self {
        FeatureMatrix { rows: rows.iter().map(|r| SparseVec::from_dense(r)).collect(), dim }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Errors raised while fitting or loading feature models.
#[derive(Debug, Error)]
pub enum VectorizeError {
    #[error("vocabulary is empty after applying min_df={min_df}")]
    EmptyVocabulary { min_df: usize },
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected {expected} vector components, found {found}")]
    DimensionMismatch { path: PathBuf, line: usize, expected: usize, found: usize },
    #[error("{path}:{line}: cannot parse embedding row: {message}")]
    BadEmbeddingRow { path: PathBuf, line: usize, message: String },
    #[error("{path}: no embedding rows loaded")]
    EmptyEmbedding { path: PathBuf },
}

#[derive(Serialize, Deserialize)]
struct VocabularyData {
    tokens: Vec<String>,
    min_df: usize,
    max_features: Option<usize>,
}

/// A fitted token → dense-index map.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "VocabularyData", into = "VocabularyData")]
pub struct Vocabulary {
    tokens: Vec<String>,
    min_df: usize,
    max_features: Option<usize>,
    index: HashMap<String, usize>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
            && self.min_df == other.min_df
            && self.max_features == other.max_features
    }
}

impl From<VocabularyData> for Vocabulary {
    fn from(d: VocabularyData) -> Self {
        let index = d.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens: d.tokens, min_df: d.min_df, max_features: d.max_features, index }
    }
}

impl From<Vocabulary> for VocabularyData {
    fn from(v: Vocabulary) -> Self {
        VocabularyData { tokens: v.tokens, min_df: v.min_df, max_features: v.max_features }
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    /// Tokens in index order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Fits a vocabulary on a tokenized corpus.
///
/// Tokens must appear in at least `min_df` documents. When `max_features` is
/// given, tokens are ranked by descending total frequency (ties broken
/// lexicographically) and the top entries kept. Indices are assigned in
/// lexicographic token order, so fitting is fully deterministic.
pub fn build_vocabulary(
    corpus: &[Vec<String>],
    min_df: usize,
    max_features: Option<usize>,
) -> Result<Vocabulary, VectorizeError> {
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in corpus {
        let mut seen = HashSet::new();
        for tok in doc {
            *tf.entry(tok.as_str()).or_default() += 1;
            if seen.insert(tok.as_str()) {
                *df.entry(tok.as_str()).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<&str> = df.iter().filter(|&(_, &d)| d >= min_df).map(|(&t, _)| t).collect();
    if let Some(cap) = max_features {
        if kept.len() > cap {
            // Rank by total frequency, ties lexicographic, then truncate.
            kept.sort_by(|a, b| tf[b].cmp(&tf[a]).then(a.cmp(b)));
            kept.truncate(cap);
        }
    }
    if kept.is_empty() {
        return Err(VectorizeError::EmptyVocabulary { min_df });
    }
    kept.sort_unstable();
    let tokens: Vec<String> = kept.into_iter().map(str::to_string).collect();
    let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(Vocabulary { tokens, min_df, max_features, index })
}

/// The top-k adjacent-token bigrams of a corpus, in ranking order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigramSet {
    pub pairs: Vec<(String, String)>,
    pub k: usize,
}

impl BigramSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Ranks adjacent-token pairs by corpus frequency (ties broken by
/// lexicographic pair order) and keeps the top `k`. Fewer than `k` distinct
/// bigrams simply yields them all.
pub fn top_bigrams(corpus: &[Vec<String>], k: usize) -> BigramSet {
    let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for doc in corpus {
        for pair in doc.windows(2) {
            *counts.entry((pair[0].as_str(), pair[1].as_str())).or_default() += 1;
        }
    }
    let mut ranked: Vec<((&str, &str), usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    BigramSet {
        pairs: ranked.into_iter().map(|((a, b), _)| (a.to_string(), b.to_string())).collect(),
        k,
    }
}

/// Vectorizes tokens as in-vocabulary occurrence counts; when a bigram set is
/// supplied, appends one binary presence entry per bigram after the unigram
/// block (offset `vocab.len()`). All-out-of-vocabulary input yields an empty
/// vector.
pub fn count_vectorize(
    tokens: &[String],
    vocab: &Vocabulary,
    bigrams: Option<&BigramSet>,
) -> SparseVec {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for tok in tokens {
        if let Some(i) = vocab.index_of(tok) {
            *counts.entry(i).or_default() += 1.0;
        }
    }
    if let Some(bs) = bigrams {
        let present: HashSet<(&str, &str)> =
            tokens.windows(2).map(|w| (w[0].as_str(), w[1].as_str())).collect();
        for (j, (a, b)) in bs.pairs.iter().enumerate() {
            if present.contains(&(a.as_str(), b.as_str())) {
                counts.insert(vocab.len() + j, 1.0);
            }
        }
    }
    SparseVec { entries: counts.into_iter().collect() }
}

/// Smoothed inverse-document-frequency weights for a vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfModel {
    /// One weight per vocabulary index.
    pub idf: Vec<f64>,
    pub n_docs: usize,
}

/// Fits IDF weights: `idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1`.
///
/// The smoothing keeps every weight strictly positive and defined even for
/// vocabulary tokens absent from the fitting partition.
pub fn fit_tfidf(corpus: &[Vec<String>], vocab: &Vocabulary) -> IdfModel {
    let mut df = vec![0usize; vocab.len()];
    for doc in corpus {
        let mut seen = HashSet::new();
        for tok in doc {
            if let Some(i) = vocab.index_of(tok) {
                if seen.insert(i) {
                    df[i] += 1;
                }
            }
        }
    }
    let n = corpus.len();
    let idf = df.iter().map(|&d| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0).collect();
    IdfModel { idf, n_docs: n }
}

/// Vectorizes tokens as TF × IDF, L2-normalized. Empty (all-OOV) input stays
/// an empty vector.
pub fn tfidf_vectorize(tokens: &[String], vocab: &Vocabulary, idf: &IdfModel) -> SparseVec {
    let counts = count_vectorize(tokens, vocab, None);
    let weighted =
        SparseVec { entries: counts.entries.iter().map(|&(i, c)| (i, c * idf.idf[i])).collect() };
    weighted.l2_normalized()
}

/// A pretrained token → dense-vector table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vectors: HashMap<String, DenseVec>,
    dim: usize,
}

impl EmbeddingTable {
    pub fn new(vectors: HashMap<String, DenseVec>, dim: usize) -> Self {
        debug_assert!(vectors.values().all(|v| v.len() == dim));
        EmbeddingTable { vectors, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&DenseVec> {
        self.vectors.get(token)
    }

    /// Tokens in deterministic (sorted) order.
    pub fn tokens_sorted(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.vectors.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }
}

/// Loads embeddings from the common text format: an optional `<count> <dim>`
/// header line, then one `<token> v1 … v_dim` row per line.
///
/// Dimensionality is taken from the header (or the first row) and enforced on
/// every row, with errors naming the offending line. `restrict_to` keeps only
/// tokens of the given vocabulary, bounding memory for large tables. The
/// first occurrence of a token wins.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    restrict_to: Option<&Vocabulary>,
) -> Result<EmbeddingTable, VectorizeError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|source| VectorizeError::Io { path: path.to_path_buf(), source })?;
    let reader = BufReader::new(file);
    let mut dim: Option<usize> = None;
    let mut vectors: HashMap<String, DenseVec> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line =
            line.map_err(|source| VectorizeError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        // A two-field all-numeric first line is the "<count> <dim>" header.
        if line_no == 1 && fields.len() == 2 && fields[0].parse::<usize>().is_ok() {
            if let Ok(d) = fields[1].parse::<usize>() {
                dim = Some(d);
                continue;
            }
        }
        if fields.len() < 2 {
            return Err(VectorizeError::BadEmbeddingRow {
                path: path.to_path_buf(),
                line: line_no,
                message: "expected a token followed by vector components".to_string(),
            });
        }
        let token = fields[0];
        let values: Result<Vec<f64>, _> = fields[1..].iter().map(|f| f.parse::<f64>()).collect();
        let values = values.map_err(|e| VectorizeError::BadEmbeddingRow {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let expected = *dim.get_or_insert(values.len());
        if values.len() != expected {
            return Err(VectorizeError::DimensionMismatch {
                path: path.to_path_buf(),
                line: line_no,
                expected,
                found: values.len(),
            });
        }
        if let Some(v) = restrict_to {
            if v.index_of(token).is_none() {
                continue;
            }
        }
        vectors.entry(token.to_string()).or_insert(values);
    }
    if vectors.is_empty() {
        return Err(VectorizeError::EmptyEmbedding { path: path.to_path_buf() });
    }
    Ok(EmbeddingTable { dim: dim.unwrap(), vectors })
}

/// Represents a discussion as the component-wise mean of its in-table token
/// vectors. Out-of-table tokens are skipped; if every token is out of table
/// the zero vector is returned, keeping downstream classifiers well-defined.
pub fn embed_average(tokens: &[String], table: &EmbeddingTable) -> DenseVec {
    let mut acc = vec![0.0; table.dim()];
    let mut n = 0usize;
    for tok in tokens {
        if let Some(v) = table.get(tok) {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
            n += 1;
        }
    }
    if n > 0 {
        for a in &mut acc {
            *a /= n as f64;
        }
    }
    acc
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some(dot / (na * nb))
    }
}

/// Expands a short discussion by appending, for each in-table token, up to
/// `n` nearest embedding-space neighbors with cosine similarity ≥ `tau`.
///
/// Neighbors are appended after the original tokens, ranked by descending
/// similarity (ties by token order); tokens already present — in the input or
/// appended earlier — are not appended again.
pub fn expand_vocabulary(
    tokens: &[String],
    table: &EmbeddingTable,
    n: usize,
    tau: f64,
) -> Vec<String> {
    let mut out: Vec<String> = tokens.to_vec();
    let mut present: HashSet<String> = tokens.iter().cloned().collect();
    let all_tokens = table.tokens_sorted();
    let mut appended: Vec<String> = Vec::new();
    for tok in tokens {
        let Some(v) = table.get(tok) else { continue };
        // Score every other table token; brute force keeps this exact.
        let mut scored: Vec<(f64, &str)> = Vec::new();
        for &cand in &all_tokens {
            if cand == tok.as_str() {
                continue;
            }
            if let Some(sim) = cosine(v, table.get(cand).unwrap()) {
                if sim >= tau {
                    scored.push((sim, cand));
                }
            }
        }
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
        for (_, cand) in scored.into_iter().take(n) {
            if present.insert(cand.to_string()) {
                appended.push(cand.to_string());
            }
        }
    }
    out.extend(appended);
    out
}
