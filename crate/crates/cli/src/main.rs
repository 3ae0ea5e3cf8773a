//! `desmine`: a command-line workbench for mining design discussions.
//!
//! Subcommands bind the library stages into runnable experiments: corpus
//! statistics, single-protocol runs, historical replications, cross-dataset
//! transfer matrices, document-vector training, hyperparameter sweeps, and
//! protocol-map rendering.
//!
//! Conventions shared by every subcommand:
//!
//! - `--seed` makes the invocation bit-reproducible: same inputs, same seed,
//!   same bytes out (files and stdout alike).
//! - dataset paths are looked up as given first, then under the
//!   `DESMINE_DATA_DIR` root; nothing is ever downloaded.
//! - files are written only inside the directory named by `--out`.
//! - exit codes: 0 success, 1 usage error, 2 data/validation error,
//!   3 internal invariant breach.

use std::collections::BTreeMap;
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use desmine::classify::{self, defaults, AlgorithmSpec, ClassifierSpec};
use desmine::corpus::{self, CleanOptions, Dataset};
use desmine::docvec::{self, DocVecParams, TokenDoc};
use desmine::evaluate::{EvalReport, Metric, MetricSet};
use desmine::protocol::{self, FitFeatures, ProtocolSpec, ValidationSpec};
use desmine::transfer::{self, DiagonalMode, TransferMatrix};
use serde::Deserialize;

/// Built-in protocol presets, embedded so the binary is self-contained.
const PRESETS: [(&str, &str); 4] = [
    ("brunet-strict", include_str!("../presets/brunet-strict.json")),
    ("brunet-stratified", include_str!("../presets/brunet-stratified.json")),
    ("newbest", include_str!("../presets/newbest.json")),
    ("newbest-alt", include_str!("../presets/newbest-alt.json")),
];

/// Reference values consumed by `replicate`, kept in a versioned data file
/// (with its citation) rather than hard-coded in logic.
const REFERENCES: &str = include_str!("../references.json");

#[derive(Debug, Deserialize)]
struct References {
    version: u32,
    source: String,
    values: BTreeMap<String, RefEntry>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
struct RefEntry {
    value: f64,
    tolerance: f64,
}

#[derive(Debug, Parser)]
#[command(
    name = "desmine",
    version,
    about = "Workbench for classifying design discussions and checking conclusion stability",
    subcommand_required = true
)]
struct Cli {
    /// Seed for every randomized stage; identical seeds and inputs give
    /// byte-identical outputs. Defaults to the protocol's own seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print summary statistics for a labeled dataset
    Stats {
        /// Dataset file (JSONL with id/text/label, or CSV)
        #[arg(long)]
        data: String,
        /// On-disk format; `auto` decides by file extension
        #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
        format: FormatArg,
        /// CSV column holding the discussion text
        #[arg(long, default_value = "text")]
        text_col: String,
        /// CSV column holding the 0/1 or design/non-design label
        #[arg(long, default_value = "label")]
        label_col: String,
        /// Emit machine-readable JSON instead of the table
        #[arg(long)]
        json: bool,
    },
    /// Execute a protocol on a dataset and write the result bundle
    Run {
        /// Protocol file path, or the name of a built-in preset
        /// (brunet-strict, brunet-stratified, newbest, newbest-alt)
        #[arg(long)]
        protocol: String,
        /// Dataset file (JSONL or CSV)
        #[arg(long)]
        data: String,
        /// Directory receiving result.json and protocol.dot
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the historical replication protocols and compare against the
    /// stored reference values
    Replicate {
        /// Replication dataset; defaults to brunet.jsonl under
        /// DESMINE_DATA_DIR
        #[arg(long)]
        data: Option<String>,
        /// Also run the stratified decision-tree variant as a third row
        #[arg(long)]
        stratified: bool,
    },
    /// Train on each dataset and test on every other; write the transfer
    /// matrix as CSV, JSON, and an SVG heat map
    Crossdataset {
        /// Protocol file path or built-in preset name
        #[arg(long)]
        protocol: String,
        /// Two or more dataset files
        #[arg(long, num_args = 2.., required = true)]
        data: Vec<String>,
        /// Directory receiving matrix.csv, matrix.json, and heatmap.svg
        #[arg(long)]
        out: PathBuf,
        /// Predictions CSV (model,dataset,id,score) from an externally
        /// trained model, appended as an extra train-side entry
        #[arg(long)]
        external: Option<String>,
        /// Metric rendered into the CSV and heat map
        #[arg(long, default_value = "roc_auc", value_parser = parse_metric)]
        metric: Metric,
        /// What the diagonal cells measure
        #[arg(long, value_enum, default_value_t = DiagonalArg::CvWithin)]
        diagonal: DiagonalArg,
    },
    /// Train distributed bag-of-words document vectors and save the model
    TrainDocvec {
        /// Corpus file (JSONL or CSV); labels are ignored
        #[arg(long)]
        data: String,
        /// Directory receiving docvec.desmine
        #[arg(long)]
        out: PathBuf,
        /// Vector dimensionality
        #[arg(long, default_value_t = 100)]
        dim: usize,
        /// Training epochs
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        /// Negative samples per positive pair
        #[arg(long, default_value_t = 5)]
        negative: usize,
        /// Drop tokens occurring fewer than this many times
        #[arg(long, default_value_t = 2)]
        min_count: usize,
        /// Learning rate at the first step
        #[arg(long, default_value_t = 0.025)]
        initial_lr: f64,
        /// Learning rate decayed to by the last step
        #[arg(long, default_value_t = 1e-4)]
        final_lr: f64,
    },
    /// Cross-validated hyperparameter sweep over one algorithm family
    Gridsearch {
        /// Dataset file (JSONL or CSV)
        #[arg(long)]
        data: String,
        /// Directory receiving gridsearch.json
        #[arg(long)]
        out: PathBuf,
        /// Algorithm family to sweep
        #[arg(long, value_parser = parse_algorithm)]
        algorithm: String,
        /// Fold count for the stratified cross-validation
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Metric whose cross-validation mean picks the winner
        #[arg(long, default_value = "roc_auc", value_parser = parse_metric)]
        metric: Metric,
        /// Optional protocol file or preset supplying the pipeline context
        /// (preprocessing, vectorizer, balance); defaults to counts
        #[arg(long)]
        protocol: Option<String>,
    },
    /// Print a protocol's stage diagram as DOT on stdout
    Render {
        /// Protocol file path or built-in preset name
        #[arg(long)]
        protocol: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum FormatArg {
    Auto,
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum DiagonalArg {
    /// 10-fold cross-validation within each dataset (honest baseline)
    CvWithin,
    /// Train and test on the same full dataset (optimistic bound)
    TrainTestSame,
}

impl From<DiagonalArg> for DiagonalMode {
    fn from(arg: DiagonalArg) -> Self {
        match arg {
            DiagonalArg::CvWithin => DiagonalMode::CvWithin,
            DiagonalArg::TrainTestSame => DiagonalMode::TrainTestSame,
        }
    }
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse::<Metric>().map_err(|e| e.to_string())
}

fn parse_algorithm(s: &str) -> Result<String, String> {
    if classify::ALGORITHM_NAMES.contains(&s) {
        Ok(s.to_string())
    } else {
        Err(format!(
            "unknown algorithm `{s}`, valid options: {}",
            classify::ALGORITHM_NAMES.join(", ")
        ))
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap routes help/version to stdout and diagnostics to stderr.
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let outcome = std::panic::catch_unwind(AssertUnwindSafe(|| dispatch(cli)));
    let code = match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            2
        }
        Err(_) => {
            eprintln!("error: internal invariant breached (panic above); this is a bug");
            3
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Stats { data, format, text_col, label_col, json } => {
            cmd_stats(&data, format, &text_col, &label_col, json)
        }
        Command::Run { protocol, data, out } => cmd_run(&protocol, &data, &out, seed),
        Command::Replicate { data, stratified } => cmd_replicate(data.as_deref(), stratified, seed),
        Command::Crossdataset { protocol, data, out, external, metric, diagonal } => {
            cmd_crossdataset(&protocol, &data, &out, external.as_deref(), metric, diagonal, seed)
        }
        Command::TrainDocvec {
            data,
            out,
            dim,
            epochs,
            negative,
            min_count,
            initial_lr,
            final_lr,
        } => {
            let params = DocVecParams {
                dim,
                epochs,
                negative,
                initial_lr,
                final_lr,
                min_count,
                seed: seed.unwrap_or(0),
            };
            cmd_train_docvec(&data, &out, params)
        }
        Command::Gridsearch { data, out, algorithm, k, metric, protocol } => {
            cmd_gridsearch(&data, &out, &algorithm, k, metric, protocol.as_deref(), seed)
        }
        Command::Render { protocol } => cmd_render(&protocol, seed),
    }
}

// ---------------------------------------------------------------------------
// shared plumbing

/// Resolves a protocol argument: an existing file path wins, then a built-in
/// preset name.
fn load_protocol(arg: &str) -> Result<ProtocolSpec> {
    if Path::new(arg).exists() {
        return Ok(protocol::parse(arg)?);
    }
    if let Some((name, text)) = PRESETS.iter().find(|(name, _)| *name == arg) {
        let spec: ProtocolSpec =
            serde_json::from_str(text).with_context(|| format!("built-in preset `{name}`"))?;
        spec.validate()?;
        return Ok(spec);
    }
    let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
    bail!(
        "`{arg}` is neither an existing protocol file nor a built-in preset \
         (presets: {})",
        names.join(", ")
    );
}

/// Finds a dataset file: the path as given first, then under
/// `DESMINE_DATA_DIR`.
fn find_data_file(arg: &str) -> Result<PathBuf> {
    let direct = PathBuf::from(arg);
    if direct.exists() {
        return Ok(direct);
    }
    let resolved = protocol::resolve_data_path(arg);
    if resolved.exists() {
        return Ok(resolved);
    }
    if resolved == direct {
        bail!("dataset file `{arg}` not found (DESMINE_DATA_DIR is unset)");
    }
    bail!("dataset file `{arg}` not found, also tried `{}`", resolved.display());
}

fn load_dataset_as(
    path: &Path,
    format: FormatArg,
    text_col: &str,
    label_col: &str,
) -> Result<Dataset> {
    let is_csv = match format {
        FormatArg::Csv => true,
        FormatArg::Jsonl => false,
        FormatArg::Auto => {
            matches!(path.extension().and_then(|e| e.to_str()), Some(ext) if ext.eq_ignore_ascii_case("csv"))
        }
    };
    let dataset = if is_csv {
        corpus::load_csv(path, text_col, label_col)?
    } else {
        corpus::load_jsonl(path)?
    };
    Ok(dataset)
}

fn load_dataset(arg: &str) -> Result<Dataset> {
    let path = find_data_file(arg)?;
    load_dataset_as(&path, FormatArg::Auto, "text", "label")
}

/// Writes `bytes` to `out_dir/name`, creating the directory first. All file
/// output funnels through here so nothing lands outside `--out`.
fn write_out(out_dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory `{}`", out_dir.display()))?;
    let path = out_dir.join(name);
    std::fs::write(&path, bytes).with_context(|| format!("writing `{}`", path.display()))?;
    Ok(())
}

fn pretty_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// stats

fn cmd_stats(
    data: &str,
    format: FormatArg,
    text_col: &str,
    label_col: &str,
    json: bool,
) -> Result<()> {
    let path = find_data_file(data)?;
    let dataset = load_dataset_as(&path, format, text_col, label_col)?;
    let stats = corpus::stats(&dataset, &CleanOptions::default())?;
    let prevalence = stats.design as f64 / stats.total as f64;
    if json {
        let value = serde_json::json!({
            "dataset": dataset.name,
            "total": stats.total,
            "design": stats.design,
            "prevalence": prevalence,
            "mean_length": stats.mean_length,
            "vocab_size": stats.vocab_size,
        });
        println!("{value}");
    } else {
        println!("dataset      {}", dataset.name);
        println!("total        {}", stats.total);
        println!("design       {} ({:.1}%)", stats.design, 100.0 * prevalence);
        println!("mean_length  {:.2}", stats.mean_length);
        println!("vocab_size   {}", stats.vocab_size);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// run

fn cmd_run(protocol_arg: &str, data: &str, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec = load_protocol(protocol_arg)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let dataset = load_dataset(data)?;
    let result = protocol::execute(&spec, &dataset)?;

    write_out(out, "result.json", pretty_json(&result).as_bytes())?;
    write_out(out, "protocol.dot", protocol::render_dot(&result.spec).as_bytes())?;

    println!(
        "protocol `{}` on dataset `{}` (seed {})",
        result.spec.name, result.provenance.dataset, result.spec.seed
    );
    print_report(&result.spec.validation, &result.report);
    println!("wrote result.json and protocol.dot to {}", out.display());
    Ok(())
}

fn print_report(validation: &ValidationSpec, report: &EvalReport) {
    match validation {
        ValidationSpec::Kfold { k } => {
            println!("metrics (mean of {k}-fold cross-validation):");
        }
        ValidationSpec::Holdout { .. } => {
            if let Some(val) = &report.holdout_validation {
                println!("metrics (validation split):");
                print_metric_set(val, None);
            }
            println!("metrics (test split):");
        }
    }
    print_metric_set(&report.mean, report.stdev.as_ref());
    if !report.undefined.is_empty() {
        println!("undefined in at least one fold: {}", report.undefined.join(", "));
    }
    if let Some(note) = &report.note {
        println!("note: {note}");
    }
}

fn print_metric_set(mean: &MetricSet, stdev: Option<&MetricSet>) {
    let rows: [(&str, Option<f64>, Option<f64>); 6] = [
        ("accuracy", Some(mean.accuracy), stdev.map(|s| s.accuracy)),
        ("precision", Some(mean.precision), stdev.map(|s| s.precision)),
        ("recall", Some(mean.recall), stdev.map(|s| s.recall)),
        ("f1", Some(mean.f1), stdev.map(|s| s.f1)),
        ("balanced_accuracy", Some(mean.balanced_accuracy), stdev.map(|s| s.balanced_accuracy)),
        ("roc_auc", mean.roc_auc, stdev.and_then(|s| s.roc_auc)),
    ];
    for (name, value, sd) in rows {
        match (value, sd) {
            (Some(v), Some(sd)) => println!("  {name:<18} {v:.4} ± {sd:.4}"),
            (Some(v), None) => println!("  {name:<18} {v:.4}"),
            (None, _) => println!("  {name:<18} undefined"),
        }
    }
}

// ---------------------------------------------------------------------------
// replicate

fn cmd_replicate(data: Option<&str>, stratified: bool, seed: Option<u64>) -> Result<()> {
    let references: References =
        serde_json::from_str(REFERENCES).context("parsing bundled references.json")?;
    let path = match data {
        Some(arg) => find_data_file(arg)?,
        None => {
            let fallback = protocol::resolve_data_path("brunet.jsonl");
            if !fallback.exists() {
                bail!(
                    "replication dataset not found at `{}`.\n\
                     Expected the labeled pull-request discussion export from Brunet et al. \
                     2014 (JSONL with id/text/label fields). Point --data or DESMINE_DATA_DIR \
                     at your copy; this tool never downloads datasets, so provenance stays \
                     explicit.",
                    fallback.display()
                );
            }
            fallback
        }
    };
    let dataset = load_dataset_as(&path, FormatArg::Auto, "text", "label")?;

    let strict = load_protocol("brunet-strict")?;
    let mut strict_dt = strict.clone();
    strict_dt.classifier = ClassifierSpec {
        algorithm: AlgorithmSpec::DecisionTree {
            max_depth: None,
            min_samples_split: defaults::MIN_SAMPLES_SPLIT,
        },
        seed: strict.classifier.seed,
    };

    let mut rows: Vec<(ProtocolSpec, &'static str, &'static str)> = vec![
        (strict, "naive_bayes", "brunet_strict_naive_bayes_accuracy"),
        (strict_dt, "decision_tree", "brunet_strict_decision_tree_accuracy"),
    ];
    if stratified {
        rows.push((
            load_protocol("brunet-stratified")?,
            "decision_tree",
            "brunet_stratified_decision_tree_accuracy",
        ));
    }

    println!(
        "{:<20} {:<20} {:>8} {:>10} {:>8}  verdict",
        "protocol", "classifier", "accuracy", "reference", "delta"
    );
    for (mut spec, classifier, key) in rows {
        if let Some(s) = seed {
            spec.seed = s;
        }
        let entry = references
            .values
            .get(key)
            .copied()
            .with_context(|| format!("references.json lacks entry `{key}`"))?;
        let result = protocol::execute(&spec, &dataset)?;
        let accuracy = result.report.mean.accuracy;
        let delta = accuracy - entry.value;
        let verdict = if delta.abs() <= entry.tolerance { "PASS" } else { "FAIL" };
        println!(
            "{:<20} {:<20} {:>8.4} {:>10.3} {:>+8.4}  {verdict}",
            spec.name, classifier, accuracy, entry.value, delta
        );
    }
    println!("reference set v{}: {}", references.version, references.source);
    Ok(())
}

// ---------------------------------------------------------------------------
// crossdataset

#[allow(clippy::too_many_arguments)]
fn cmd_crossdataset(
    protocol_arg: &str,
    data: &[String],
    out: &Path,
    external: Option<&str>,
    metric: Metric,
    diagonal: DiagonalArg,
    seed: Option<u64>,
) -> Result<()> {
    let spec = load_protocol(protocol_arg)?;
    let seed = seed.unwrap_or(spec.seed);
    let datasets: Vec<Dataset> = data.iter().map(|arg| load_dataset(arg)).collect::<Result<_>>()?;

    let mut matrix = transfer::transfer_matrix_with_mode(&datasets, &spec, seed, diagonal.into())?;
    if let Some(arg) = external {
        let path = find_data_file(arg)?;
        let predictions = transfer::ingest_predictions(&path, &datasets)?;
        transfer::attach_external(&mut matrix, &predictions, &datasets)?;
    }

    write_out(out, "matrix.json", pretty_json(&matrix).as_bytes())?;
    transfer::export_csv(&matrix, metric, out.join("matrix.csv"))?;
    transfer::render_heatmap(&matrix, metric, out.join("heatmap.svg"))?;

    print_matrix_summary(&matrix, metric);
    println!("wrote matrix.csv, matrix.json, and heatmap.svg to {}", out.display());
    Ok(())
}

fn print_matrix_summary(matrix: &TransferMatrix, metric: Metric) {
    let n = matrix.datasets.len();
    let mut diag = Vec::new();
    let mut off = Vec::new();
    for train in 0..n {
        for test in 0..n {
            if let Some(v) = matrix.cells[train][test].mean.get(metric) {
                if train == test {
                    diag.push(v);
                } else {
                    off.push(v);
                }
            }
        }
    }
    let mean = |vs: &[f64]| vs.iter().sum::<f64>() / vs.len() as f64;
    let diagonal_label = match matrix.diagonal_mode {
        DiagonalMode::CvWithin => "cv_within",
        DiagonalMode::TrainTestSame => "train_test_same",
    };
    println!("transfer matrix over {n} datasets ({metric}, diagonal {diagonal_label}):");
    if diag.is_empty() {
        println!("  mean diagonal      undefined");
    } else {
        println!("  mean diagonal      {:.4}", mean(&diag));
    }
    if off.is_empty() {
        println!("  mean off-diagonal  undefined");
    } else {
        println!("  mean off-diagonal  {:.4}", mean(&off));
    }
    for row in &matrix.external {
        println!("  external model `{}` attached", row.model);
    }
}

// ---------------------------------------------------------------------------
// train-docvec

fn cmd_train_docvec(data: &str, out: &Path, params: DocVecParams) -> Result<()> {
    let dataset = load_dataset(data)?;
    let opts = CleanOptions::default();
    let mut docs = Vec::with_capacity(dataset.len());
    let mut skipped = 0usize;
    for d in &dataset.discussions {
        let tokens = corpus::prepare_tokens(&d.text, &opts);
        if tokens.is_empty() {
            skipped += 1;
        } else {
            docs.push(TokenDoc { id: d.id.clone(), tokens });
        }
    }
    if skipped > 0 {
        println!("skipped {skipped} documents with no tokens after cleaning");
    }

    let model = docvec::train_docvec(&docs, &params)?;
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory `{}`", out.display()))?;
    docvec::save_docvec(&model, out.join("docvec.desmine"))?;

    println!(
        "trained document vectors: {} docs, vocab {}, dim {}, {} epochs (seed {})",
        model.doc_ids.len(),
        model.vocab.len(),
        params.dim,
        params.epochs,
        params.seed
    );
    if let (Some(first), Some(last)) = (model.epoch_losses.first(), model.epoch_losses.last()) {
        println!("mean step loss: {first:.4} (first epoch) -> {last:.4} (last epoch)");
    }
    println!("wrote docvec.desmine to {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// gridsearch

fn default_grid(algorithm: &str, seed: u64) -> Vec<ClassifierSpec> {
    let spec = |algorithm| ClassifierSpec { algorithm, seed };
    match algorithm {
        "zeror" => vec![spec(AlgorithmSpec::Zeror)],
        "naive_bayes" => [0.1, 0.5, defaults::LAPLACE_ALPHA, 2.0]
            .into_iter()
            .map(|laplace_alpha| spec(AlgorithmSpec::NaiveBayes { laplace_alpha }))
            .collect(),
        "decision_tree" => [(None, 2), (Some(3), 2), (Some(5), 2), (Some(8), 5)]
            .into_iter()
            .map(|(max_depth, min_samples_split)| {
                spec(AlgorithmSpec::DecisionTree { max_depth, min_samples_split })
            })
            .collect(),
        "logistic_regression" => [(0.1, 1e-4), (0.1, 1e-2), (0.5, 1e-4), (0.5, 1e-2)]
            .into_iter()
            .map(|(lr, l2_lambda)| {
                spec(AlgorithmSpec::LogisticRegression { l2_lambda, epochs: defaults::EPOCHS, lr })
            })
            .collect(),
        "linear_svm" => [(0.1, 1e-4), (0.1, 1e-2), (0.5, 1e-4), (0.5, 1e-2)]
            .into_iter()
            .map(|(lr, l2_lambda)| {
                spec(AlgorithmSpec::LinearSvm { l2_lambda, epochs: defaults::EPOCHS, lr })
            })
            .collect(),
        other => unreachable!("algorithm `{other}` passed clap validation but has no grid"),
    }
}

fn cmd_gridsearch(
    data: &str,
    out: &Path,
    algorithm: &str,
    k: usize,
    metric: Metric,
    protocol_arg: Option<&str>,
    seed: Option<u64>,
) -> Result<()> {
    let dataset = load_dataset(data)?;
    let mut context = match protocol_arg {
        Some(arg) => load_protocol(arg)?,
        None => default_context(algorithm),
    };
    if let Some(s) = seed {
        context.seed = s;
    }
    let grid = default_grid(algorithm, context.classifier.seed);

    let outcome = classify::grid_search(&grid, &dataset, &context, k, metric)?;

    write_out(out, "gridsearch.json", pretty_json(&outcome).as_bytes())?;

    println!(
        "grid search over {} {algorithm} candidates ({k}-fold stratified, by {metric}):",
        outcome.reports.len()
    );
    for (candidate, report) in &outcome.reports {
        let marker = if *candidate == outcome.best { "*" } else { " " };
        match (report.mean.get(metric), report.stdev.as_ref().and_then(|s| s.get(metric))) {
            (Some(v), Some(sd)) => println!("{marker} {candidate:<48} {v:.4} ± {sd:.4}"),
            (Some(v), None) => println!("{marker} {candidate:<48} {v:.4}"),
            (None, _) => println!("{marker} {candidate:<48} undefined"),
        }
    }
    println!("best: {}", outcome.best);
    println!("wrote gridsearch.json to {}", out.display());
    Ok(())
}

/// The pipeline context used when `gridsearch` gets no `--protocol`: default
/// cleaning, count features, stratified 10-fold (grid search enforces the
/// stratification regardless).
fn default_context(algorithm: &str) -> ProtocolSpec {
    ProtocolSpec {
        desmine_protocol: protocol::PROTOCOL_VERSION,
        name: format!("gridsearch-{algorithm}"),
        preprocess: CleanOptions::default(),
        vectorizer: protocol::VectorizerSpec::Count,
        expansion: None,
        balance: protocol::BalanceSpec { stratify: true, smote: None },
        classifier: ClassifierSpec::new(AlgorithmSpec::Zeror),
        validation: ValidationSpec::Kfold { k: 10 },
        fit_features: FitFeatures::PerFold,
        seed: 7,
    }
}

// ---------------------------------------------------------------------------
// render

fn cmd_render(protocol_arg: &str, seed: Option<u64>) -> Result<()> {
    let mut spec = load_protocol(protocol_arg)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    print!("{}", protocol::render_dot(&spec));
    Ok(())
}
