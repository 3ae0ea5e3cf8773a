//! Deterministic synthetic corpora for self-contained evaluation.
//!
//! Real labeled discussion datasets are external inputs; everything that has
//! to run without them (smoke runs, transfer-gap checks, document-vector
//! benchmarks) uses these generators instead. Each generated dataset draws
//! its class-signal words from a vocabulary disjoint from every other
//! dataset's (controlled by `tag`), while filler words are shared — so
//! within-dataset classification is learnable but cross-dataset transfer
//! degrades, mirroring the structure the transfer matrix is built to expose.
//!
//! Everything here is a pure function of its arguments: same inputs, same
//! bytes, every time.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ArtifactKind, Dataset, Discussion};
use crate::derive_seed;

const SIGNAL_WORDS_PER_CLASS: usize = 20;
/// Fraction of documents whose text is drawn from the opposite class's pool
/// (content noise): keeps classes overlapping so scores stay off the
/// ceiling, without disturbing label counts.
const CONTENT_NOISE: f64 = 0.08;

/// Shared filler vocabulary, common to every synthetic dataset.
const FILLER: [&str; 12] = [
    "build", "commit", "branch", "review", "update", "version", "file", "line", "test", "run",
    "check", "merge",
];

/// A few genuine stopwords, so the cleaning stage has something to remove.
const STOPWORDS: [&str; 6] = ["the", "and", "of", "to", "is", "a"];

/// Class-signal vocabulary for dataset `tag`: disjoint across tags and across
/// classes by construction.
pub fn signal_words(tag: usize, label: u8) -> Vec<String> {
    let class = if label == 1 { "design" } else { "plain" };
    (0..SIGNAL_WORDS_PER_CLASS).map(|j| format!("{class}{tag}w{j}")).collect()
}

fn compose_text(rng: &mut ChaCha8Rng, pool: &[String]) -> String {
    let mut words: Vec<String> = Vec::new();
    for _ in 0..rng.gen_range(4..=8) {
        words.push(pool[rng.gen_range(0..pool.len())].clone());
    }
    for _ in 0..rng.gen_range(3..=6) {
        let f = FILLER[rng.gen_range(0..FILLER.len())];
        // Markup lands on filler only, so class signal survives cleaning
        // regardless of how aggressively tags are stripped.
        if rng.gen_bool(0.2) {
            words.push(format!("<b>{f}</b>"));
        } else {
            words.push(f.to_string());
        }
    }
    for _ in 0..rng.gen_range(2..=4) {
        words.push(STOPWORDS[rng.gen_range(0..STOPWORDS.len())].to_string());
    }
    // Light punctuation so the punctuation stripper earns its keep.
    for w in words.iter_mut() {
        if rng.gen_bool(0.15) {
            w.push(if rng.gen_bool(0.5) { '.' } else { ',' });
        }
    }
    // Deterministic order shuffle of the word positions.
    for i in (1..words.len()).rev() {
        words.swap(i, rng.gen_range(0..=i));
    }
    words.join(" ")
}

/// Generates a labeled dataset of `n` documents with exactly
/// `round(n * prevalence)` design documents. `tag` selects the (disjoint)
/// signal vocabulary; `seed` fixes everything else.
pub fn synth_dataset(name: &str, n: usize, prevalence: f64, tag: usize, seed: u64) -> Dataset {
    assert!((0.0..=1.0).contains(&prevalence), "prevalence must be within [0, 1]");
    let design_pool = signal_words(tag, 1);
    let plain_pool = signal_words(tag, 0);
    let n_design = (n as f64 * prevalence).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5E_ED + tag as u64));
    // Fixed label sequence, then shuffled, so counts are exact.
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_design)).collect();
    for i in (1..labels.len()).rev() {
        labels.swap(i, rng.gen_range(0..=i));
    }

    let discussions = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let flipped = rng.gen_bool(CONTENT_NOISE);
            let from_design = (label == 1) != flipped;
            let pool = if from_design { &design_pool } else { &plain_pool };
            Discussion {
                id: format!("{name}-{i:05}"),
                text: compose_text(&mut rng, pool),
                label,
                source: name.to_string(),
                artifact_kind: ArtifactKind::Other,
            }
        })
        .collect();
    Dataset::new(name, discussions)
}

/// A standard three-dataset suite with pairwise-disjoint signal vocabularies
/// and varying prevalence — the fixture for cross-dataset transfer checks.
pub fn synth_suite(n: usize, seed: u64) -> Vec<Dataset> {
    vec![
        synth_dataset("synth_pullreq", n, 0.25, 0, seed),
        synth_dataset("synth_issues", n, 0.40, 1, seed),
        synth_dataset("synth_qa", n, 0.15, 2, seed),
    ]
}

/// Text content (word2vec format) of an embedding table covering the signal
/// vocabularies of datasets `0..tags`. Design words of dataset `t` point
/// along axis `2t`, plain words along axis `2t + 1`, with a small
/// deterministic jitter on the remaining axes — so averages separate classes
/// within a dataset but carry nothing across datasets.
pub fn synth_embedding_text(tags: usize) -> String {
    let dim = 2 * tags.max(1) + 2;
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for tag in 0..tags {
        for label in [1u8, 0u8] {
            let axis = 2 * tag + usize::from(label == 0);
            for (j, word) in signal_words(tag, label).into_iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    0xE4B,
                    (tag * 64 + j * 2 + label as usize) as u64,
                ));
                let mut v = vec![0.0f64; dim];
                for (a, x) in v.iter_mut().enumerate() {
                    *x = if a == axis { 1.0 } else { (rng.gen::<f64>() - 0.5) * 0.1 };
                }
                rows.push((word, v));
            }
        }
    }
    // Filler words share the last two axes, weakly: present in the table so
    // expansion has neighbors to find, but useless for class separation.
    for (j, f) in FILLER.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0xF1_11, j as u64));
        let mut v = vec![0.0f64; dim];
        v[dim - 2] = 0.5 + 0.1 * (j % 3) as f64;
        v[dim - 1] = (rng.gen::<f64>() - 0.5) * 0.2;
        rows.push((f.to_string(), v));
    }
    let mut out = format!("{} {dim}\n", rows.len());
    for (word, v) in rows {
        out.push_str(&word);
        for x in v {
            out.push_str(&format!(" {x:.6}"));
        }
        out.push('\n');
    }
    out
}

/// Writes [`synth_embedding_text`] to `path`.
pub fn write_synth_embeddings(
    path: impl AsRef<std::path::Path>,
    tags: usize,
) -> std::io::Result<()> {
    std::fs::write(path, synth_embedding_text(tags))
}
