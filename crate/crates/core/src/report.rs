//! CSV, SVG and JSON artifacts, with readers for every CSV we emit.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{AttentionMode, AttentionOutput};
use crate::trainer::{AblationRow, EpochStats, EvalReport};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed table: {0}")]
    Format(String),
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = w.into_inner().map_err(|e| ReportError::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| ReportError::Format(e.to_string()))
}

// Headers are written explicitly so that empty tables still carry one.
fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new())
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::Reader::from_reader(text.as_bytes())
}

fn expect_header(r: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<(), ReportError> {
    let header = r.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(ReportError::Format(format!("expected header {expected:?}, got {header:?}")));
    }
    Ok(())
}

pub const HISTORY_HEADER: [&str; 3] = ["epoch", "loss", "accuracy"];

pub fn history_csv(history: &[EpochStats]) -> Result<String, ReportError> {
    let mut w = writer();
    w.write_record(HISTORY_HEADER)?;
    for s in history {
        w.serialize(s)?;
    }
    finish(w)
}

pub fn read_history_csv(text: &str) -> Result<Vec<EpochStats>, ReportError> {
    let mut r = reader(text);
    expect_header(&mut r, &HISTORY_HEADER)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Header `true_class,<class names…>`, then one row of counts per true class.
pub fn confusion_csv(report: &EvalReport, class_names: &[String]) -> Result<String, ReportError> {
    if class_names.len() != report.num_classes() {
        return Err(ReportError::Format(format!(
            "{} class names for a {}-class report",
            class_names.len(),
            report.num_classes()
        )));
    }
    let mut w = writer();
    let mut header = vec!["true_class".to_string()];
    header.extend(class_names.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in class_names.iter().zip(&report.confusion) {
        let mut record = vec![name.clone()];
        record.extend(row.iter().map(u64::to_string));
        w.write_record(&record)?;
    }
    finish(w)
}

/// Returns the class names and the count matrix.
pub fn read_confusion_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<u64>>), ReportError> {
    let mut r = reader(text);
    let header = r.headers()?.clone();
    if header.get(0) != Some("true_class") {
        return Err(ReportError::Format("first column must be true_class".into()));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        if record.get(0) != names.get(i).map(String::as_str) {
            return Err(ReportError::Format(format!("row {} is not labeled {:?}", i + 1, names.get(i))));
        }
        let counts = record
            .iter()
            .skip(1)
            .map(|c| c.parse::<u64>().map_err(|e| ReportError::Format(format!("row {}: {e}", i + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        if counts.len() != names.len() {
            return Err(ReportError::Format(format!("row {} has {} counts", i + 1, counts.len())));
        }
        rows.push(counts);
    }
    if rows.len() != names.len() {
        return Err(ReportError::Format(format!("{} rows for {} classes", rows.len(), names.len())));
    }
    Ok((names, rows))
}

/// One line of the ablation table. Failed rows carry only `mode` and `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRecord {
    pub mode: AttentionMode,
    pub accuracy: Option<f64>,
    pub test_samples: Option<u64>,
    pub final_train_loss: Option<f64>,
    pub final_train_accuracy: Option<f64>,
    pub error: Option<String>,
}

pub const ABLATION_HEADER: [&str; 6] = [
    "mode",
    "accuracy",
    "test_samples",
    "final_train_loss",
    "final_train_accuracy",
    "error",
];

impl From<&AblationRow> for AblationRecord {
    fn from(row: &AblationRow) -> Self {
        match &row.result {
            Ok(o) => {
                let last = o.history.last();
                AblationRecord {
                    mode: row.mode,
                    accuracy: Some(o.report.accuracy),
                    test_samples: Some(o.report.sample_count),
                    final_train_loss: last.map(|s| s.loss),
                    final_train_accuracy: last.map(|s| s.accuracy),
                    error: None,
                }
            }
            Err(e) => AblationRecord {
                mode: row.mode,
                accuracy: None,
                test_samples: None,
                final_train_loss: None,
                final_train_accuracy: None,
                error: Some(e.clone()),
            },
        }
    }
}

pub fn ablation_csv(records: &[AblationRecord]) -> Result<String, ReportError> {
    let mut w = writer();
    w.write_record(ABLATION_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    finish(w)
}

pub fn read_ablation_csv(text: &str) -> Result<Vec<AblationRecord>, ReportError> {
    let mut r = reader(text);
    expect_header(&mut r, &ABLATION_HEADER)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionCell {
    pub frame: usize,
    pub joint: usize,
    pub t_weight: f64,
    pub s_weight: f64,
    pub coupled: f64,
}

pub const ATTENTION_HEADER: [&str; 5] = ["frame", "joint", "t_weight", "s_weight", "coupled"];

/// One cell per (frame, joint), frame-major.
pub fn attention_cells(att: &AttentionOutput) -> Vec<AttentionCell> {
    let (t_att, s_att) = (att.t_att.data(), att.s_att.data());
    let joints = s_att.len();
    let mut cells = Vec::with_capacity(t_att.len() * joints);
    for (frame, &t) in t_att.iter().enumerate() {
        for (joint, &s) in s_att.iter().enumerate() {
            cells.push(AttentionCell {
                frame,
                joint,
                t_weight: t,
                s_weight: s,
                coupled: att.map.data()[frame * joints + joint],
            });
        }
    }
    cells
}

pub fn attention_csv(att: &AttentionOutput) -> Result<String, ReportError> {
    let mut w = writer();
    w.write_record(ATTENTION_HEADER)?;
    for cell in attention_cells(att) {
        w.serialize(cell)?;
    }
    finish(w)
}

pub fn read_attention_csv(text: &str) -> Result<Vec<AttentionCell>, ReportError> {
    let mut r = reader(text);
    expect_header(&mut r, &ATTENTION_HEADER)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointWeight {
    pub joint: usize,
    pub s_weight: f64,
}

/// Spatial weights sorted descending; equal weights keep joint order.
pub fn ranked_joints(s_att: &[f64]) -> Vec<JointWeight> {
    let mut out: Vec<JointWeight> = s_att
        .iter()
        .enumerate()
        .map(|(joint, &s_weight)| JointWeight { joint, s_weight })
        .collect();
    out.sort_by(|a, b| b.s_weight.total_cmp(&a.s_weight));
    out
}

pub fn joint_weights_json(s_att: &[f64]) -> Result<String, ReportError> {
    Ok(serde_json::to_string_pretty(&ranked_joints(s_att))? + "\n")
}

const CELL: usize = 16;
const MARGIN: usize = 40;

/// Gray level for `v` on a linear scale: `min` is white (255), `max` black (0).
/// A constant map renders white.
pub fn gray_level(v: f64, min: f64, max: f64) -> u8 {
    if max <= min {
        return 255;
    }
    let x = ((v - min) / (max - min)).clamp(0.0, 1.0);
    (255.0 * (1.0 - x)).round() as u8
}

/// Grayscale heatmap of a `rows × cols` row-major map, frames down and joints
/// across, with a min/max legend.
pub fn heatmap_svg(values: &[f64], rows: usize, cols: usize) -> Result<String, ReportError> {
    if values.len() != rows * cols || values.is_empty() {
        return Err(ReportError::Format(format!("{} values for a {rows}×{cols} map", values.len())));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = 2 * MARGIN + cols * CELL;
    let height = 2 * MARGIN + rows * CELL + 3 * CELL;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="rgb(255,255,255)"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}" font-family="monospace" font-size="12">joint →  frame ↓</text>"#,
        MARGIN - 10
    );
    let _ = writeln!(s, r#"<g id="cells" shape-rendering="crispEdges">"#);
    for r in 0..rows {
        for c in 0..cols {
            let g = gray_level(values[r * cols + c], min, max);
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="rgb({g},{g},{g})" data-frame="{r}" data-joint="{c}"/>"#,
                MARGIN + c * CELL,
                MARGIN + r * CELL
            );
        }
    }
    let _ = writeln!(s, "</g>");
    let y = MARGIN + rows * CELL + CELL;
    let _ = writeln!(s, r#"<g id="legend" font-family="monospace" font-size="12">"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{y}" width="{CELL}" height="{CELL}" fill="rgb(255,255,255)" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" data-min="{min}">min {min:.6}</text>"#,
        MARGIN + CELL + 4,
        y + CELL - 3
    );
    let x2 = MARGIN + 10 * CELL;
    let _ = writeln!(
        s,
        r#"<rect x="{x2}" y="{y}" width="{CELL}" height="{CELL}" fill="rgb(0,0,0)" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" data-max="{max}">max {max:.6}</text>"#,
        x2 + CELL + 4,
        y + CELL - 3
    );
    let _ = writeln!(s, "</g>\n</svg>");
    Ok(s)
}
