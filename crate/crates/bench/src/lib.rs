//! Shared fixtures for the pipeline benchmarks: deterministic synthetic
//! corpora and pre-tokenized/pre-vectorized forms of them, so each benchmark
//! times exactly one stage.

use desmine::classify::{fit, AlgorithmSpec, ClassifierSpec, TrainedModel};
use desmine::corpus::{prepare_tokens, CleanOptions, Dataset};
use desmine::synth::synth_dataset;
use desmine::vectorize::{build_vocabulary, count_vectorize, FeatureMatrix};

/// The corpus every benchmark draws from: one synthetic dataset at the
/// prevalence typical of issue trackers.
pub fn corpus(n: usize) -> Dataset {
    synth_dataset("bench", n, 0.25, 0, 11)
}

/// Token lists for `corpus(n)` under default cleaning.
pub fn tokens(n: usize) -> Vec<Vec<String>> {
    let opts = CleanOptions::default();
    corpus(n).discussions.iter().map(|d| prepare_tokens(&d.text, &opts)).collect()
}

/// Count features and labels for `corpus(n)`, fitted on the full corpus.
pub fn features(n: usize) -> (FeatureMatrix, Vec<u8>) {
    let dataset = corpus(n);
    let toks = tokens(n);
    let vocab = build_vocabulary(&toks, 1, None).expect("non-empty corpus");
    let rows = toks.iter().map(|t| count_vectorize(t, &vocab, None)).collect();
    (FeatureMatrix::new(rows, vocab.len()), dataset.labels())
}

/// A model fitted on `features(n)`, for scoring benchmarks.
pub fn fitted(n: usize, algorithm: AlgorithmSpec) -> (TrainedModel, FeatureMatrix) {
    let (x, y) = features(n);
    let model = fit(&ClassifierSpec { algorithm, seed: 7 }, &x, &y).expect("fixture trains");
    (model, x)
}
