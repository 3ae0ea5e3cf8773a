//! Cross-dataset conclusion stability: train a protocol on each dataset and
//! test the trained model on every other dataset, assembling a square matrix
//! of evaluation reports. Renders to a heat map (SVG) and CSV, and accepts
//! externally computed prediction scores so models trained outside this
//! workbench can sit alongside internal ones.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Dataset;
use crate::evaluate::{
    confusion, cross_validate, metrics, roc_auc, EvalReport, EvaluateError, Metric,
};
use crate::protocol::{evaluate_on, prepare, train_on_all, ProtocolError, ProtocolSpec};

/// How diagonal cells (train dataset == test dataset) are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalMode {
    /// 10-fold cross-validation within the dataset (the default): the
    /// honest within-dataset baseline.
    CvWithin,
    /// Train on everything, test on the same everything: an optimistic
    /// upper bound, shown for contrast.
    TrainTestSame,
}

/// One externally trained model's results, aligned with the matrix's dataset
/// order; `None` where the predictions file had no rows for that dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalRow {
    pub model: String,
    pub cells: Vec<Option<EvalReport>>,
}

/// The square train × test evaluation grid. `cells[i][j]` holds the report
/// for the model trained on `datasets[i]` and tested on `datasets[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub datasets: Vec<String>,
    pub cells: Vec<Vec<EvalReport>>,
    pub diagonal_mode: DiagonalMode,
    /// Externally supplied models, appended as extra train-side entries.
    /// Never affects `cells`.
    #[serde(default)]
    pub external: Vec<ExternalRow>,
}

impl TransferMatrix {
    /// Report for the model trained on `train`, tested on `test` (by index).
    pub fn get(&self, train: usize, test: usize) -> &EvalReport {
        &self.cells[train][test]
    }
}

/// Scores produced by a model trained outside this workbench, keyed by the
/// dataset the scored documents belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalPredictions {
    pub model: String,
    /// dataset name → (discussion id, score) rows, in file order.
    pub per_dataset: BTreeMap<String, Vec<(String, f64)>>,
}

/// Errors from matrix computation, prediction ingestion, or rendering.
#[derive(Debug, Error)]
pub enum TransferError {
    #[error("transfer matrix requires at least 2 datasets, got {count}")]
    TooFewDatasets { count: usize },
    #[error("duplicate dataset name `{name}` in the transfer set")]
    DuplicateDataset { name: String },
    #[error("cell (train={train}, test={test}): {source}")]
    Cell {
        train: String,
        test: String,
        #[source]
        source: ProtocolError,
    },
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    BadFile { path: PathBuf, message: String },
    #[error("{path} row {row}: {message}")]
    BadRow { path: PathBuf, row: usize, message: String },
    #[error("metric `{metric}` is unavailable in cell (train={train}, test={test})")]
    MissingMetric { metric: Metric, train: String, test: String },
    #[error("failed to write {path}: {source}")]
    WriteIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn cell_err<'a>(train: &'a str, test: &'a str) -> impl FnOnce(ProtocolError) -> TransferError + 'a {
    move |source| TransferError::Cell { train: train.to_string(), test: test.to_string(), source }
}

/// Computes the full train × test matrix with the default `cv_within`
/// diagonal (10-fold cross-validation). `seed` overrides the protocol's
/// seed so one matrix run is controlled by one number.
pub fn transfer_matrix(
    datasets: &[Dataset],
    protocol: &ProtocolSpec,
    seed: u64,
) -> Result<TransferMatrix, TransferError> {
    transfer_matrix_with_mode(datasets, protocol, seed, DiagonalMode::CvWithin)
}

/// As [`transfer_matrix`], with an explicit diagonal mode.
pub fn transfer_matrix_with_mode(
    datasets: &[Dataset],
    protocol: &ProtocolSpec,
    seed: u64,
    diagonal_mode: DiagonalMode,
) -> Result<TransferMatrix, TransferError> {
    if datasets.len() < 2 {
        return Err(TransferError::TooFewDatasets { count: datasets.len() });
    }
    let mut seen = HashSet::new();
    for d in datasets {
        if !seen.insert(d.name.as_str()) {
            return Err(TransferError::DuplicateDataset { name: d.name.clone() });
        }
    }
    let mut spec = protocol.clone();
    spec.seed = seed;

    // Tokenize/expand each dataset once; a failure here poisons that
    // dataset's whole row and column, reported as its diagonal cell.
    let contexts = datasets
        .iter()
        .map(|d| prepare(&spec, d).map_err(cell_err(&d.name, &d.name)))
        .collect::<Result<Vec<_>, _>>()?;

    let rows = (0..datasets.len())
        .into_par_iter()
        .map(|ti| {
            let train_name = &datasets[ti].name;
            let trained =
                train_on_all(&spec, &contexts[ti]).map_err(cell_err(train_name, train_name))?;
            (0..datasets.len())
                .map(|si| {
                    let test_name = &datasets[si].name;
                    if ti == si && diagonal_mode == DiagonalMode::CvWithin {
                        cross_validate(&spec, &datasets[ti], 10, seed)
                            .map_err(cell_err(train_name, test_name))
                    } else {
                        evaluate_on(&spec, &trained, &contexts[si], ti != si)
                            .map_err(cell_err(train_name, test_name))
                    }
                })
                .collect::<Result<Vec<EvalReport>, TransferError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(TransferMatrix {
        datasets: datasets.iter().map(|d| d.name.clone()).collect(),
        cells: rows,
        diagonal_mode,
        external: Vec::new(),
    })
}

/// Parses an external-predictions CSV (`model,dataset,id,score` header).
/// One file carries one model. Every row must name a known dataset and a
/// resolvable discussion id, scores must be finite, and no (dataset, id)
/// pair may repeat; violations are reported with their row number.
pub fn ingest_predictions(
    path: impl AsRef<Path>,
    datasets: &[Dataset],
) -> Result<ExternalPredictions, TransferError> {
    let path = path.as_ref();
    let known_ids: HashMap<&str, HashSet<&str>> = datasets
        .iter()
        .map(|d| (d.name.as_str(), d.discussions.iter().map(|x| x.id.as_str()).collect()))
        .collect();

    let mut reader = csv::ReaderBuilder::new().from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => TransferError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        },
        _ => TransferError::BadFile { path: path.to_path_buf(), message: e.to_string() },
    })?;
    let headers = reader
        .headers()
        .map_err(|e| TransferError::BadFile { path: path.to_path_buf(), message: e.to_string() })?
        .clone();
    let expected = ["model", "dataset", "id", "score"];
    let actual: Vec<&str> = headers.iter().collect();
    if actual != expected {
        return Err(TransferError::BadFile {
            path: path.to_path_buf(),
            message: format!(
                "expected header `model,dataset,id,score`, found `{}`",
                actual.join(",")
            ),
        });
    }

    let bad_row = |row: usize, message: String| TransferError::BadRow {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut model: Option<String> = None;
    let mut per_dataset: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2; // 1-based, after the header line
        let record = record.map_err(|e| bad_row(row, e.to_string()))?;
        if record.len() != 4 {
            return Err(bad_row(row, format!("expected 4 fields, found {}", record.len())));
        }
        let (m, dataset, id, score_str) = (&record[0], &record[1], &record[2], &record[3]);
        match &model {
            None => model = Some(m.to_string()),
            Some(existing) if existing != m => {
                return Err(bad_row(
                    row,
                    format!(
                        "file mixes models `{existing}` and `{m}`; one predictions file \
                         carries one model"
                    ),
                ));
            }
            _ => {}
        }
        let Some(ids) = known_ids.get(dataset) else {
            return Err(bad_row(row, format!("unknown dataset `{dataset}`")));
        };
        if !ids.contains(id) {
            return Err(bad_row(row, format!("id `{id}` not found in dataset `{dataset}`")));
        }
        let score: f64 = score_str
            .parse()
            .map_err(|_| bad_row(row, format!("score `{score_str}` is not a number")))?;
        if !score.is_finite() {
            return Err(bad_row(row, format!("score `{score_str}` is not finite")));
        }
        if !seen.insert((dataset.to_string(), id.to_string())) {
            return Err(bad_row(row, format!("duplicate prediction for ({dataset}, {id})")));
        }
        per_dataset.entry(dataset.to_string()).or_default().push((id.to_string(), score));
    }
    let model = model.ok_or_else(|| TransferError::BadFile {
        path: path.to_path_buf(),
        message: "no prediction rows".to_string(),
    })?;
    Ok(ExternalPredictions { model, per_dataset })
}

/// Evaluates external scores against a dataset's labels (threshold 0.5 for
/// the confusion matrix, raw scores for AUC).
fn evaluate_external(
    dataset: &Dataset,
    rows: &[(String, f64)],
) -> Result<EvalReport, EvaluateError> {
    let label_of: HashMap<&str, u8> =
        dataset.discussions.iter().map(|d| (d.id.as_str(), d.label)).collect();
    let labels: Vec<u8> = rows.iter().map(|(id, _)| label_of[id.as_str()]).collect();
    let scores: Vec<f64> = rows.iter().map(|(_, s)| *s).collect();
    let predicted: Vec<u8> = scores.iter().map(|&s| u8::from(s >= 0.5)).collect();
    let cm = confusion(&labels, &predicted)?;
    let (mut set, mut undefined) = metrics(&cm);
    set.roc_auc = match roc_auc(&labels, &scores) {
        Ok(auc) => Some(auc),
        Err(EvaluateError::SingleClassAuc { .. }) => None,
        Err(e) => return Err(e),
    };
    if set.roc_auc.is_none() {
        undefined.push("roc_auc".to_string());
    }
    undefined.sort();
    undefined.dedup();
    Ok(EvalReport::single(set, undefined))
}

/// Appends an externally trained model to the matrix as an extra train-side
/// entry. Internally computed cells are never touched. `datasets` must be
/// the same list (same order) the matrix was built from.
pub fn attach_external(
    matrix: &mut TransferMatrix,
    predictions: &ExternalPredictions,
    datasets: &[Dataset],
) -> Result<(), TransferError> {
    let mut cells = Vec::with_capacity(matrix.datasets.len());
    for name in &matrix.datasets {
        let Some(dataset) = datasets.iter().find(|d| &d.name == name) else {
            return Err(TransferError::BadFile {
                path: PathBuf::new(),
                message: format!("dataset `{name}` missing from the provided dataset list"),
            });
        };
        match predictions.per_dataset.get(name) {
            Some(rows) => {
                let report = evaluate_external(dataset, rows).map_err(|e| TransferError::Cell {
                    train: predictions.model.clone(),
                    test: name.clone(),
                    source: ProtocolError::Stage {
                        context: "external evaluation".to_string(),
                        message: e.to_string(),
                    },
                })?;
                cells.push(Some(report));
            }
            None => cells.push(None),
        }
    }
    matrix.external.push(ExternalRow { model: predictions.model.clone(), cells });
    Ok(())
}

/// Train-side column headers: internal datasets then external models.
fn train_entries(matrix: &TransferMatrix) -> Vec<String> {
    matrix.datasets.iter().cloned().chain(matrix.external.iter().map(|e| e.model.clone())).collect()
}

/// The chosen metric for (train entry `col`, test dataset `row`), where
/// columns past the internal datasets are external models. `Ok(None)` means
/// an external model has no predictions for that dataset.
fn cell_metric(
    matrix: &TransferMatrix,
    metric: Metric,
    col: usize,
    row: usize,
) -> Result<Option<f64>, TransferError> {
    let n = matrix.datasets.len();
    if col < n {
        matrix.cells[col][row].mean.get(metric).map(Some).ok_or_else(|| {
            TransferError::MissingMetric {
                metric,
                train: matrix.datasets[col].clone(),
                test: matrix.datasets[row].clone(),
            }
        })
    } else {
        let ext = &matrix.external[col - n];
        match &ext.cells[row] {
            Some(report) => {
                report.mean.get(metric).map(Some).ok_or_else(|| TransferError::MissingMetric {
                    metric,
                    train: ext.model.clone(),
                    test: matrix.datasets[row].clone(),
                })
            }
            None => Ok(None),
        }
    }
}

const HEAT_LOW: f64 = 0.4;
const HEAT_HIGH: f64 = 1.0;

/// White → dark blue, linear in the metric over [0.4, 1.0], clamped.
fn heat_color(value: f64) -> (String, bool) {
    let t = ((value - HEAT_LOW) / (HEAT_HIGH - HEAT_LOW)).clamp(0.0, 1.0);
    let lerp = |from: f64, to: f64| (from + (to - from) * t).round() as u8;
    let (r, g, b) = (lerp(255.0, 8.0), lerp(255.0, 48.0), lerp(255.0, 107.0));
    (format!("#{r:02x}{g:02x}{b:02x}"), t > 0.6)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the matrix as a self-contained SVG heat map: train entries on the
/// x axis, test datasets on the y axis, one value-labeled cell per pair.
/// Byte-deterministic for identical input.
pub fn render_heatmap_string(
    matrix: &TransferMatrix,
    metric: Metric,
) -> Result<String, TransferError> {
    const CELL: i64 = 96;
    const LEFT: i64 = 150;
    const TOP: i64 = 70;
    let cols = train_entries(matrix);
    let rows = &matrix.datasets;
    let width = LEFT + CELL * cols.len() as i64 + 20;
    let height = TOP + CELL * rows.len() as i64 + 20;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{LEFT}\" y=\"18\" font-size=\"13\" fill=\"#333333\">trained on ({metric})</text>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"12\" y=\"{}\" font-size=\"13\" fill=\"#333333\" transform=\"rotate(-90 12 {})\" text-anchor=\"end\">tested on</text>\n",
        TOP + 10, TOP + 10
    ));
    for (c, name) in cols.iter().enumerate() {
        let x = LEFT + CELL * c as i64 + CELL / 2;
        svg.push_str(&format!(
            "  <text x=\"{x}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" fill=\"#000000\">{}</text>\n",
            TOP - 10,
            xml_escape(name)
        ));
    }
    for (r, name) in rows.iter().enumerate() {
        let y = TOP + CELL * r as i64 + CELL / 2 + 4;
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{y}\" font-size=\"12\" text-anchor=\"end\" fill=\"#000000\">{}</text>\n",
            LEFT - 8,
            xml_escape(name)
        ));
    }
    for (r, _) in rows.iter().enumerate() {
        for (c, _) in cols.iter().enumerate() {
            let x = LEFT + CELL * c as i64;
            let y = TOP + CELL * r as i64;
            match cell_metric(matrix, metric, c, r)? {
                Some(v) => {
                    let (fill, dark) = heat_color(v);
                    let text_fill = if dark { "#ffffff" } else { "#000000" };
                    svg.push_str(&format!(
                        "  <rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{fill}\" stroke=\"#666666\"/>\n"
                    ));
                    svg.push_str(&format!(
                        "  <text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\" fill=\"{text_fill}\">{v:.3}</text>\n",
                        x + CELL / 2,
                        y + CELL / 2 + 5
                    ));
                }
                None => {
                    svg.push_str(&format!(
                        "  <rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"#cccccc\" stroke=\"#666666\"/>\n"
                    ));
                    svg.push_str(&format!(
                        "  <text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\" fill=\"#000000\">n/a</text>\n",
                        x + CELL / 2,
                        y + CELL / 2 + 5
                    ));
                }
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes [`render_heatmap_string`] output to `out`.
pub fn render_heatmap(
    matrix: &TransferMatrix,
    metric: Metric,
    out: impl AsRef<Path>,
) -> Result<(), TransferError> {
    let svg = render_heatmap_string(matrix, metric)?;
    std::fs::write(out.as_ref(), svg)
        .map_err(|source| TransferError::WriteIo { path: out.as_ref().to_path_buf(), source })
}

/// Serializes the matrix as CSV: one row per test dataset, one column per
/// train entry (internal datasets then external models), values to three
/// decimals. External cells without predictions are left empty.
pub fn export_csv_string(matrix: &TransferMatrix, metric: Metric) -> Result<String, TransferError> {
    let cols = train_entries(matrix);
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["tested_on".to_string()];
    header.extend(cols.iter().cloned());
    writer.serialize(&header).expect("in-memory CSV write cannot fail");
    for (r, test_name) in matrix.datasets.iter().enumerate() {
        let mut record = vec![test_name.clone()];
        for c in 0..cols.len() {
            record.push(match cell_metric(matrix, metric, c, r)? {
                Some(v) => format!("{v:.3}"),
                None => String::new(),
            });
        }
        writer.serialize(&record).expect("in-memory CSV write cannot fail");
    }
    let bytes = writer.into_inner().expect("in-memory CSV flush cannot fail");
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Writes [`export_csv_string`] output to `out`.
pub fn export_csv(
    matrix: &TransferMatrix,
    metric: Metric,
    out: impl AsRef<Path>,
) -> Result<(), TransferError> {
    let csv = export_csv_string(matrix, metric)?;
    std::fs::write(out.as_ref(), csv)
        .map_err(|source| TransferError::WriteIo { path: out.as_ref().to_path_buf(), source })
}
