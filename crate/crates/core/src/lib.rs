//! Mining design discussions from software artifacts.
//!
//! This crate is a workbench for classifying short natural-language
//! development artifacts (pull-request threads, commit messages, code
//! comments, Q&A posts, chat excerpts) as *design* or *non-design*, and for
//! measuring how well conclusions drawn on one dataset carry over to others.
//!
//! The pieces compose into a pipeline:
//!
//! 1. [`corpus`] — load labeled datasets, clean and tokenize text.
//! 2. [`vectorize`] — counts, top-k bigrams, TF-IDF, embedding averaging,
//!    and embedding-based vocabulary expansion.
//! 3. [`docvec`] — distributed bag-of-words document vectors.
//! 4. [`balance`] — stratified fold assignment and SMOTE oversampling.
//! 5. [`classify`] — from-scratch ZeroR, naive Bayes, decision tree,
//!    logistic regression, and linear SVM, plus grid search.
//! 6. [`evaluate`] — confusion matrices, threshold metrics, ROC-AUC,
//!    cross-validation, and the ZeroR baseline arithmetic.
//! 7. [`protocol`] — declarative pipeline specs: parse, validate, execute,
//!    and render as DOT graphs.
//! 8. [`transfer`] — train-on-X/test-on-Y matrices, heat maps, and external
//!    prediction ingestion.
//!
//! Everything is deterministic under an explicit seed: identical inputs and
//! seeds produce bit-identical models, reports, and rendered files.

pub mod balance;
pub mod classify;
pub mod corpus;
pub mod docvec;
pub mod evaluate;
pub mod protocol;
pub mod synth;
pub mod transfer;
pub mod vectorize;

pub use balance::{FoldAssignment, SmoteParams};
pub use classify::{AlgorithmSpec, ClassifierSpec, TrainedModel};
pub use corpus::{ArtifactKind, CleanOptions, CorpusStats, Dataset, Discussion, StopwordSet};
pub use docvec::{DocVecModel, DocVecParams};
pub use evaluate::{ConfusionMatrix, EvalReport, Metric, MetricSet};
pub use protocol::{ProtocolResult, ProtocolSpec};
pub use transfer::{ExternalPredictions, TransferMatrix};
pub use vectorize::{
    BigramSet, DenseVec, EmbeddingTable, FeatureMatrix, IdfModel, SparseVec, Vocabulary,
};

/// Derives a child seed from a base seed and a stream tag.
///
/// Every randomized stage (fold shuffling, SMOTE interpolation, classifier
/// epochs, document-vector initialization) draws its own generator from the
/// single user-facing seed through this function, so that stages stay
/// independent while the whole run remains reproducible. The mixer is
/// splitmix64 applied to `base XOR (stream * golden ratio)`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
