//! Paragraph-vector training (distributed bag-of-words) and inference.
//!
//! Each training document gets a dense vector; a shared output weight row per
//! vocabulary token is trained against it with negative sampling (noise
//! distribution ∝ unigram frequency^0.75). Document vectors start from a
//! seeded uniform initialization, output weights start at zero, and the
//! learning rate decays linearly from `initial_lr` to `final_lr` over the
//! total number of training steps. Training is single-threaded on purpose:
//! the SGD update order is part of the determinism contract.
//!
//! Inference for an unseen document freezes the word weights and optimizes a
//! fresh document vector with the same update rule, using the stored token
//! frequencies for its noise distribution.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A tokenized document ready for vector training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenDoc {
    pub id: String,
    pub tokens: Vec<String>,
}

/// Paragraph-vector hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DocVecParams {
    pub dim: usize,
    pub epochs: usize,
    /// Negative samples drawn per positive (document, token) pair.
    pub negative: usize,
    pub initial_lr: f64,
    pub final_lr: f64,
    /// Tokens occurring fewer than this many times in the corpus are dropped.
    pub min_count: usize,
    pub seed: u64,
}

impl Default for DocVecParams {
    fn default() -> Self {
        DocVecParams {
            dim: 100,
            epochs: 20,
            negative: 5,
            initial_lr: 0.025,
            final_lr: 0.0001,
            min_count: 2,
            seed: 0,
        }
    }
}

impl DocVecParams {
    fn validate(&self) -> Result<(), DocVecError> {
        if self.dim == 0 {
            return Err(DocVecError::BadParams { message: "dim must be >= 1".into() });
        }
        if self.epochs == 0 {
            return Err(DocVecError::BadParams { message: "epochs must be >= 1".into() });
        }
        if !(self.initial_lr > self.final_lr && self.final_lr > 0.0) {
            return Err(DocVecError::BadParams {
                message: format!(
                    "learning rates must satisfy initial_lr > final_lr > 0, got {} and {}",
                    self.initial_lr, self.final_lr
                ),
            });
        }
        Ok(())
    }
}

/// Errors raised by training, inference, or persistence.
#[derive(Debug, Error)]
pub enum DocVecError {
    #[error("invalid parameters: {message}")]
    BadParams { message: String },
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("document `{id}` has no tokens left after the min_count={min_count} filter")]
    NoSurvivingTokens { id: String, min_count: usize },
    #[error("inference requires steps >= 1")]
    ZeroSteps,
    #[error("failed to access model file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a recognized document-vector file (missing DESMINE-DV1 header)")]
    BadMagic { path: PathBuf },
    #[error("{path}: cannot parse document-vector model: {message}")]
    BadModel { path: PathBuf, message: String },
}

/// A trained paragraph-vector model.
///
/// `vocab` is lexicographically sorted; `token_freq[i]` is the corpus
/// frequency of `vocab[i]` (persisted because inference re-derives the
/// negative-sampling noise distribution from it), and `word_out[i]` is that
/// token's output weight row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocVecModel {
    pub params: DocVecParams,
    pub vocab: Vec<String>,
    pub token_freq: Vec<u64>,
    pub word_out: Vec<Vec<f64>>,
    pub doc_ids: Vec<String>,
    pub doc_vectors: Vec<Vec<f64>>,
    /// Mean per-step training loss of each epoch, in epoch order.
    pub epoch_losses: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl DocVecModel {
    fn rebuild_index(&mut self) {
        self.index = self.vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn token_index(&self, token: &str) -> Option<usize> {
        if self.index.len() != self.vocab.len() {
            // Deserialized models arrive without the index; fall back to a
            // scan rather than requiring a mutable fixup pass.
            return self.vocab.iter().position(|t| t == token);
        }
        self.index.get(token).copied()
    }

    pub fn doc_vector(&self, id: &str) -> Option<&[f64]> {
        self.doc_ids.iter().position(|d| d == id).map(|i| self.doc_vectors[i].as_slice())
    }
}

/// Result of inferring a vector for unseen tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct InferredVector {
    pub vector: Vec<f64>,
    /// True when every input token was out of vocabulary; the vector is then
    /// just the seeded initialization.
    pub all_oov: bool,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Cumulative table over `freq^0.75`, sampled by binary search.
struct NoiseTable {
    cumulative: Vec<f64>,
    total: f64,
}

impl NoiseTable {
    fn new(freqs: &[u64]) -> Self {
        let mut cumulative = Vec::with_capacity(freqs.len());
        let mut acc = 0.0;
        for &f in freqs {
            acc += (f as f64).powf(0.75);
            cumulative.push(acc);
        }
        NoiseTable { cumulative, total: acc }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u = rng.gen::<f64>() * self.total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

fn uniform_init(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let half = 0.5 / dim as f64;
    (0..dim).map(|_| rng.gen_range(-half..half)).collect()
}

/// One negative-sampling step for (doc vector, target token): pulls the
/// vector toward the target's output row and away from sampled noise rows.
/// Returns the step's loss. `frozen` skips the output-weight updates
/// (inference mode).
#[allow(clippy::too_many_arguments)]
fn sgd_step(
    doc_vec: &mut [f64],
    word_out: &mut [Vec<f64>],
    target: usize,
    noise: &NoiseTable,
    negative: usize,
    lr: f64,
    rng: &mut ChaCha8Rng,
    frozen: bool,
) -> f64 {
    let dim = doc_vec.len();
    let mut grad_doc = vec![0.0f64; dim];
    let mut loss = 0.0;
    // Positive pair, label 1; then `negative` noise draws, label 0. A noise
    // draw equal to the target is skipped rather than resampled.
    let mut pair = |token: usize, label: f64, grad_doc: &mut [f64], word_out: &mut [Vec<f64>]| {
        let row = &mut word_out[token];
        let z: f64 = doc_vec.iter().zip(row.iter()).map(|(a, b)| a * b).sum();
        let p = sigmoid(z);
        loss -= if label == 1.0 { sigmoid(z).ln() } else { sigmoid(-z).ln() };
        let g = p - label;
        for d in 0..dim {
            grad_doc[d] += g * row[d];
            if !frozen {
                row[d] -= lr * g * doc_vec[d];
            }
        }
    };
    pair(target, 1.0, &mut grad_doc, word_out);
    for _ in 0..negative {
        let n = noise.sample(rng);
        if n == target {
            continue;
        }
        pair(n, 0.0, &mut grad_doc, word_out);
    }
    for d in 0..dim {
        doc_vec[d] -= lr * grad_doc[d];
    }
    loss
}

/// Trains a paragraph-vector model. Identical `(corpus, params)` produce a
/// bit-identical model.
pub fn train_docvec(
    corpus: &[TokenDoc],
    params: &DocVecParams,
) -> Result<DocVecModel, DocVecError> {
    params.validate()?;
    if corpus.is_empty() {
        return Err(DocVecError::EmptyCorpus);
    }

    // Vocabulary: tokens at or above the frequency floor, lexicographic order.
    let mut freq: std::collections::BTreeMap<&str, u64> = std::collections::BTreeMap::new();
    for doc in corpus {
        for t in &doc.tokens {
            *freq.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let vocab: Vec<String> = freq
        .iter()
        .filter(|(_, &f)| f >= params.min_count as u64)
        .map(|(t, _)| t.to_string())
        .collect();
    let token_freq: Vec<u64> = vocab.iter().map(|t| freq[t.as_str()]).collect();
    let index: HashMap<String, usize> =
        vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();

    // Per-document surviving token indices; every document must keep at
    // least one token or training silently loses it.
    let mut doc_tokens: Vec<Vec<usize>> = Vec::with_capacity(corpus.len());
    for doc in corpus {
        let kept: Vec<usize> =
            doc.tokens.iter().filter_map(|t| index.get(t.as_str()).copied()).collect();
        if kept.is_empty() {
            return Err(DocVecError::NoSurvivingTokens {
                id: doc.id.clone(),
                min_count: params.min_count,
            });
        }
        doc_tokens.push(kept);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut doc_vectors: Vec<Vec<f64>> =
        (0..corpus.len()).map(|_| uniform_init(&mut rng, params.dim)).collect();
    let mut word_out: Vec<Vec<f64>> = vec![vec![0.0; params.dim]; vocab.len()];
    let noise = NoiseTable::new(&token_freq);

    let steps_per_epoch: usize = doc_tokens.iter().map(Vec::len).sum();
    let total_steps = (steps_per_epoch * params.epochs) as f64;
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut epoch_losses = Vec::with_capacity(params.epochs);

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &d in &order {
            for &target in &doc_tokens[d] {
                let lr = params.initial_lr
                    - (params.initial_lr - params.final_lr) * (step as f64 / total_steps);
                epoch_loss += sgd_step(
                    &mut doc_vectors[d],
                    &mut word_out,
                    target,
                    &noise,
                    params.negative,
                    lr,
                    &mut rng,
                    false,
                );
                step += 1;
            }
        }
        epoch_losses.push(epoch_loss / steps_per_epoch as f64);
    }

    Ok(DocVecModel {
        params: params.clone(),
        vocab,
        token_freq,
        word_out,
        doc_ids: corpus.iter().map(|d| d.id.clone()).collect(),
        doc_vectors,
        epoch_losses,
        index,
    })
}

/// Infers a vector for unseen tokens with the model's word weights frozen.
/// Deterministic given `(model, tokens, steps, seed)`. All-OOV input returns
/// the seeded initialization vector with `all_oov` set.
pub fn infer_docvec(
    model: &DocVecModel,
    tokens: &[String],
    steps: usize,
    seed: u64,
) -> Result<InferredVector, DocVecError> {
    if steps == 0 {
        return Err(DocVecError::ZeroSteps);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vector = uniform_init(&mut rng, model.params.dim);
    let kept: Vec<usize> = tokens.iter().filter_map(|t| model.token_index(t)).collect();
    if kept.is_empty() {
        return Ok(InferredVector { vector, all_oov: true });
    }
    let noise = NoiseTable::new(&model.token_freq);
    // The frozen pass never mutates the weights, but the update routine is
    // shared with training, so clone the rows it touches once.
    let mut word_out = model.word_out.clone();
    let total_steps = (steps * kept.len()) as f64;
    let mut step = 0usize;
    for _ in 0..steps {
        for &target in &kept {
            let lr = model.params.initial_lr
                - (model.params.initial_lr - model.params.final_lr) * (step as f64 / total_steps);
            sgd_step(
                &mut vector,
                &mut word_out,
                target,
                &noise,
                model.params.negative,
                lr,
                &mut rng,
                true,
            );
            step += 1;
        }
    }
    Ok(InferredVector { vector, all_oov: false })
}

const DOCVEC_MAGIC: &str = "DESMINE-DV1";

/// Writes a model as the `DESMINE-DV1` header line followed by its JSON body;
/// [`load_docvec`] restores it bit-exactly.
pub fn save_docvec(model: &DocVecModel, path: impl AsRef<Path>) -> Result<(), DocVecError> {
    let path = path.as_ref();
    let body = serde_json::to_string(model).expect("model serialization cannot fail");
    std::fs::write(path, format!("{DOCVEC_MAGIC}\n{body}\n"))
        .map_err(|source| DocVecError::Io { path: path.to_path_buf(), source })
}

/// Loads a model written by [`save_docvec`].
pub fn load_docvec(path: impl AsRef<Path>) -> Result<DocVecModel, DocVecError> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path)
        .map_err(|source| DocVecError::Io { path: path.to_path_buf(), source })?;
    let Some(rest) = content.strip_prefix(&format!("{DOCVEC_MAGIC}\n")) else {
        return Err(DocVecError::BadMagic { path: path.to_path_buf() });
    };
    let mut model: DocVecModel = serde_json::from_str(rest.trim_end())
        .map_err(|e| DocVecError::BadModel { path: path.to_path_buf(), message: e.to_string() })?;
    model.rebuild_index();
    Ok(model)
}
