//! Loading, cleaning, tokenizing, and characterizing labeled discussion
//! datasets.
//!
//! The unit of analysis is a [`Discussion`]: one short text with a binary
//! design/non-design label and provenance metadata. Datasets arrive as JSONL
//! (the native format) or CSV (an adapter for replication packages), and the
//! text pipeline is `clean → tokenize → remove_stopwords`.
//!
//! Cleaning removes HTML tags — and the *entire contents* of `<code>`
//! elements, since code snippets are noise for design classification — then
//! lowercases, replaces punctuation with spaces, and collapses whitespace.
//! The English stopword list is a frozen copy shipped with the crate, so runs
//! never depend on an external download.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The kind of software artifact a discussion was extracted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    PullRequest,
    CommitMessage,
    CodeComment,
    QaPost,
    Chat,
    #[default]
    Other,
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ArtifactKind::PullRequest => "pull_request",
            ArtifactKind::CommitMessage => "commit_message",
            ArtifactKind::CodeComment => "code_comment",
            ArtifactKind::QaPost => "qa_post",
            ArtifactKind::Chat => "chat",
            ArtifactKind::Other => "other",
        };
        f.write_str(s)
    }
}

/// One labeled discussion: the unit of analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discussion {
    pub id: String,
    pub text: String,
    /// 1 = design, 0 = non-design.
    pub label: u8,
    /// Name of the dataset this discussion belongs to.
    pub source: String,
    #[serde(default)]
    pub artifact_kind: ArtifactKind,
}

/// A named, ordered collection of discussions.
///
/// Order is load order and is stable; prevalence is always recomputed from
/// the labels rather than stored, so it can never go stale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub discussions: Vec<Discussion>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, discussions: Vec<Discussion>) -> Self {
        Dataset { name: name.into(), discussions }
    }

    pub fn len(&self) -> usize {
        self.discussions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discussions.is_empty()
    }

    /// Number of design-labeled (label = 1) discussions.
    pub fn design_count(&self) -> usize {
        self.discussions.iter().filter(|d| d.label == 1).count()
    }

    /// Fraction of design labels, or `None` for an empty dataset.
    pub fn prevalence(&self) -> Option<f64> {
        if self.discussions.is_empty() {
            None
        } else {
            Some(self.design_count() as f64 / self.discussions.len() as f64)
        }
    }

    /// The label column, in dataset order.
    pub fn labels(&self) -> Vec<u8> {
        self.discussions.iter().map(|d| d.label).collect()
    }
}

/// Summary statistics for a dataset.
///
/// `mean_length` and `vocab_size` are computed on cleaned, tokenized text
/// *before* stopword removal, matching how raw word counts are usually
/// reported for these corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub design: usize,
    pub mean_length: f64,
    pub vocab_size: usize,
}

/// Which stopword list to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopwordSet {
    None,
    English,
    EnglishPlusDomain,
}

/// Text-preparation switches shared by every pipeline stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanOptions {
    pub lowercase: bool,
    pub strip_html_and_code: bool,
    pub strip_punctuation: bool,
    pub stopword_set: StopwordSet,
    /// Extra software-process words removed under
    /// [`StopwordSet::EnglishPlusDomain`]; review chatter like "lgtm" and
    /// "pinging" carries no design signal.
    pub domain_stopwords: Vec<String>,
}

impl Default for CleanOptions {
    fn default() -> Self {
        CleanOptions {
            lowercase: true,
            strip_html_and_code: true,
            strip_punctuation: true,
            stopword_set: StopwordSet::English,
            domain_stopwords: vec!["lgtm".to_string(), "pinging".to_string()],
        }
    }
}

/// Errors raised while loading or summarizing datasets.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    MalformedLine { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: duplicate discussion id `{id}`")]
    DuplicateId { path: PathBuf, line: usize, id: String },
    #[error("{path}:{line}: label {value} is outside {{0,1}}")]
    BadLabel { path: PathBuf, line: usize, value: i64 },
    #[error("{path}:{line}: discussion text is empty")]
    EmptyText { path: PathBuf, line: usize },
    #[error("{path}: column `{column}` not found")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: row {row}: cannot parse label `{value}`")]
    BadCsvLabel { path: PathBuf, row: usize, value: String },
    #[error("{path}: row {row}: {message}")]
    BadCsvRow { path: PathBuf, row: usize, message: String },
    #[error("dataset `{name}` is empty")]
    EmptyDataset { name: String },
}

/// Raw JSONL record; labels are validated (not just type-checked) after
/// parsing so out-of-range values get a precise error.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    text: String,
    label: i64,
    source: String,
    #[serde(default)]
    artifact_kind: Option<ArtifactKind>,
}

fn dataset_name_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

/// Loads a dataset from JSON-lines: one object per line with keys `id`,
/// `text`, `label` (0/1), `source`, and optional `artifact_kind`.
///
/// The dataset name is the file stem. Duplicate ids, labels outside {0,1},
/// and empty texts are rejected with the offending line number. An empty
/// file yields an empty dataset (statistics on it will error instead).
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Dataset, CorpusError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let reader = BufReader::new(file);
    let mut discussions = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedLine {
                path: path.to_path_buf(),
                line: line_no,
                message: e.to_string(),
            })?;
        if raw.label != 0 && raw.label != 1 {
            return Err(CorpusError::BadLabel {
                path: path.to_path_buf(),
                line: line_no,
                value: raw.label,
            });
        }
        if raw.text.is_empty() {
            return Err(CorpusError::EmptyText { path: path.to_path_buf(), line: line_no });
        }
        if !seen.insert(raw.id.clone()) {
            return Err(CorpusError::DuplicateId {
                path: path.to_path_buf(),
                line: line_no,
                id: raw.id,
            });
        }
        discussions.push(Discussion {
            id: raw.id,
            text: raw.text,
            label: raw.label as u8,
            source: raw.source,
            artifact_kind: raw.artifact_kind.unwrap_or_default(),
        });
    }
    Ok(Dataset::new(dataset_name_from_path(path), discussions))
}

/// Writes a dataset back to JSONL with a stable key order, one record per
/// line. `load_jsonl(save_jsonl(d))` reproduces `d` bit-identically.
pub fn save_jsonl(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for d in &dataset.discussions {
        // Discussion serializes with its declared field order, which keeps
        // the on-disk format byte-stable.
        serde_json::to_writer(&mut out, d).expect("discussion serialization cannot fail");
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path)
        .map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    file.write_all(&out).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

fn parse_csv_label(value: &str) -> Option<u8> {
    match value.trim().to_ascii_lowercase().as_str() {
        "0" => Some(0),
        "1" => Some(1),
        "design" => Some(1),
        "non-design" => Some(0),
        _ => None,
    }
}

/// Loads a dataset from CSV (RFC-4180, header row required).
///
/// `text_col` and `label_col` name the payload columns; labels may be 0/1 or
/// "design"/"non-design" (case-insensitive). When an `id` column is present
/// it is used, otherwise ids are synthesized as 1-based data-row numbers.
/// Optional `source` and `artifact_kind` columns are honored the same way.
pub fn load_csv(
    path: impl AsRef<Path>,
    text_col: &str,
    label_col: &str,
) -> Result<Dataset, CorpusError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let text_idx = col(text_col).ok_or_else(|| CorpusError::MissingColumn {
        path: path.to_path_buf(),
        column: text_col.to_string(),
    })?;
    let label_idx = col(label_col).ok_or_else(|| CorpusError::MissingColumn {
        path: path.to_path_buf(),
        column: label_col.to_string(),
    })?;
    let id_idx = col("id");
    let source_idx = col("source");
    let kind_idx = col("artifact_kind");

    let default_source = dataset_name_from_path(path);
    let mut discussions = Vec::new();
    let mut seen = HashSet::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| CorpusError::BadCsvRow {
            path: path.to_path_buf(),
            row,
            message: e.to_string(),
        })?;
        let get = |i: usize| record.get(i).unwrap_or("");
        let label_raw = get(label_idx);
        let label = parse_csv_label(label_raw).ok_or_else(|| CorpusError::BadCsvLabel {
            path: path.to_path_buf(),
            row,
            value: label_raw.to_string(),
        })?;
        let text = get(text_idx).to_string();
        if text.is_empty() {
            return Err(CorpusError::EmptyText { path: path.to_path_buf(), line: row });
        }
        let id = match id_idx {
            Some(i) => get(i).to_string(),
            None => row.to_string(),
        };
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { path: path.to_path_buf(), line: row, id });
        }
        let artifact_kind = match kind_idx {
            Some(i) if !get(i).is_empty() => serde_json::from_value(serde_json::Value::String(
                get(i).to_string(),
            ))
            .map_err(|_| CorpusError::BadCsvRow {
                path: path.to_path_buf(),
                row,
                message: format!("unknown artifact_kind `{}`", get(i)),
            })?,
            _ => ArtifactKind::Other,
        };
        discussions.push(Discussion {
            id,
            text,
            label,
            source: source_idx
                .map(|i| get(i).to_string())
                .unwrap_or_else(|| default_source.clone()),
            artifact_kind,
        });
    }
    Ok(Dataset::new(default_source.clone(), discussions))
}

fn csv_error(path: &Path, e: csv::Error) -> CorpusError {
    CorpusError::BadCsvRow { path: path.to_path_buf(), row: 0, message: e.to_string() }
}

// Tag stripping runs in three passes. Closed <code>…</code> elements go
// first (contents included), then any unclosed <code…  tail, then remaining
// tags. The unclosed pass guarantees no "<code" substring survives, which is
// what makes clean() idempotent.
static CODE_CLOSED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<code\b[^>]*>.*?</code>").unwrap());
static CODE_OPEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?is)<code\b.*").unwrap());
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]*>").unwrap());

/// Normalizes raw discussion text.
///
/// Steps (each gated by its option): strip HTML tags and whole `<code>`
/// elements, lowercase, replace punctuation with spaces. Whitespace is always
/// collapsed to single spaces and the result trimmed. `clean` is idempotent.
pub fn clean(text: &str, opts: &CleanOptions) -> String {
    let mut s = text.to_string();
    if opts.strip_html_and_code {
        s = CODE_CLOSED.replace_all(&s, " ").into_owned();
        s = CODE_OPEN.replace_all(&s, " ").into_owned();
        s = TAG.replace_all(&s, " ").into_owned();
    }
    if opts.lowercase {
        s = s.to_lowercase();
    }
    if opts.strip_punctuation {
        s = s
            .chars()
            .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
            .collect();
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits cleaned text on whitespace. Never produces empty tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

static ENGLISH_STOPWORDS: LazyLock<BTreeSet<&'static str>> = LazyLock::new(|| {
    include_str!("../data/stopwords/english.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
});

/// The frozen English stopword list shipped with the crate (318 words).
pub fn english_stopwords() -> &'static BTreeSet<&'static str> {
    &ENGLISH_STOPWORDS
}

/// Removes stopwords according to `opts.stopword_set`, preserving the order
/// of the surviving tokens. Tokens are matched exactly, so the text should
/// already be lowercased when an English list is in effect.
pub fn remove_stopwords(tokens: &[String], opts: &CleanOptions) -> Vec<String> {
    match opts.stopword_set {
        StopwordSet::None => tokens.to_vec(),
        StopwordSet::English => {
            tokens.iter().filter(|t| !ENGLISH_STOPWORDS.contains(t.as_str())).cloned().collect()
        }
        StopwordSet::EnglishPlusDomain => {
            let domain: HashSet<&str> = opts.domain_stopwords.iter().map(String::as_str).collect();
            tokens
                .iter()
                .filter(|t| !ENGLISH_STOPWORDS.contains(t.as_str()) && !domain.contains(t.as_str()))
                .cloned()
                .collect()
        }
    }
}

/// Runs the full text pipeline for one discussion:
/// clean → tokenize → remove_stopwords.
pub fn prepare_tokens(text: &str, opts: &CleanOptions) -> Vec<String> {
    let cleaned = clean(text, opts);
    let tokens = tokenize(&cleaned);
    remove_stopwords(&tokens, opts)
}

/// Computes dataset summary statistics.
///
/// Token counts are taken after cleaning but *before* stopword removal;
/// `vocab_size` is the number of distinct such tokens across the dataset.
pub fn stats(dataset: &Dataset, opts: &CleanOptions) -> Result<CorpusStats, CorpusError> {
    if dataset.is_empty() {
        return Err(CorpusError::EmptyDataset { name: dataset.name.clone() });
    }
    let mut vocab = HashSet::new();
    let mut total_tokens = 0usize;
    for d in &dataset.discussions {
        let tokens = tokenize(&clean(&d.text, opts));
        total_tokens += tokens.len();
        vocab.extend(tokens);
    }
    Ok(CorpusStats {
        total: dataset.len(),
        design: dataset.design_count(),
        mean_length: total_tokens as f64 / dataset.len() as f64,
        vocab_size: vocab.len(),
    })
}
