//! Confusion-matrix metrics, localization-error statistics, and timing
//! summaries over a batch of detection results.
//!
//! A detection counts as a true positive iff it fired on an image whose
//! ground truth has a macula, regardless of centroid distance; centroid
//! errors are reported separately.

use std::collections::HashMap;
use std::io::ErrorKind;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::DetectionResult;
use crate::stats;

/// Reader-provided label for one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthRecord {
    pub source: String,
    pub has_macula: bool,
    /// Labeled fovea coordinates; present only when `has_macula` is true.
    pub fovea: Option<(u32, u32)>,
}

/// Mean/median/p95 of total detection runtime, error-marked results
/// excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
}

/// Classification counts and rates over an evaluated batch. Rates are
/// rounded to 3 decimal places; a rate whose denominator is empty is
/// absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub false_positive_rate: Option<f64>,
    /// Distances between detected and labeled fovea, sorted ascending;
    /// one entry per true positive whose truth row carries coordinates.
    pub centroid_errors_px: Vec<f64>,
    pub timing: Option<TimingSummary>,
}

/// Scores detection results against ground truth. Every result source must
/// match exactly one truth record.
pub fn score(results: &[DetectionResult], truth: &[GroundTruthRecord]) -> Result<MetricsReport> {
    let mut by_source: HashMap<&str, &GroundTruthRecord> = HashMap::new();
    for record in truth {
        if by_source.insert(record.source.as_str(), record).is_some() {
            return Err(Error::DuplicateTruth(record.source.clone()));
        }
    }

    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut tn = 0u64;
    let mut fn_ = 0u64;
    let mut errors: Vec<f64> = Vec::new();
    let mut totals: Vec<f64> = Vec::new();
    for result in results {
        let record = by_source
            .get(result.source.as_str())
            .ok_or_else(|| Error::MissingTruth(result.source.clone()))?;
        match (result.detected, record.has_macula) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
        if let (Some((px, py)), Some((tx, ty))) = (result.fovea, record.fovea) {
            let dx = f64::from(px) - f64::from(tx);
            let dy = f64::from(py) - f64::from(ty);
            errors.push(stats::round3((dx * dx + dy * dy).sqrt()));
        }
        if result.error.is_none() {
            totals.push(result.timings.total_ms);
        }
    }
    errors.sort_by(|a, b| a.total_cmp(b));

    let rate = |num: u64, den: u64| (den > 0).then(|| stats::round3(num as f64 / den as f64));
    Ok(MetricsReport {
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
        sensitivity: rate(tp, tp + fn_),
        specificity: rate(tn, tn + fp),
        false_positive_rate: rate(fp, fp + tn),
        centroid_errors_px: errors,
        timing: (!totals.is_empty()).then(|| TimingSummary {
            mean_ms: stats::round3(stats::mean(&totals)),
            median_ms: stats::round3(stats::median(&totals)),
            p95_ms: stats::round3(stats::percentile(&totals, 95.0)),
        }),
    })
}

/// Parses a ground-truth CSV with header `source,has_macula,fovea_x,fovea_y`.
/// `has_macula` is 0 or 1; coordinates are integers or blank, and must both
/// be blank when `has_macula` is 0.
pub fn load_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthRecord>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(io) if io.kind() == ErrorKind::NotFound => Error::FileNotFound {
                path: path.into(),
            },
            _ => Error::TruthParse {
                path: path.into(),
                line: 0,
                message: e.to_string(),
            },
        })?;

    let headers = reader.headers().map_err(|e| Error::TruthParse {
        path: path.into(),
        line: 1,
        message: e.to_string(),
    })?;
    let expected = ["source", "has_macula", "fovea_x", "fovea_y"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::TruthParse {
            path: path.into(),
            line: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }

    let parse_error = |line: u64, message: String| Error::TruthParse {
        path: path.into(),
        line,
        message,
    };

    let mut records = Vec::new();
    for entry in reader.records() {
        let record = entry.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line())
                .unwrap_or(0);
            parse_error(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 4 {
            return Err(parse_error(line, format!("expected 4 fields, got {}", record.len())));
        }
        let source = record[0].to_string();
        if source.is_empty() {
            return Err(parse_error(line, "empty source".into()));
        }
        let has_macula = match &record[1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(parse_error(
                    line,
                    format!("has_macula must be 0 or 1, got {other:?}"),
                ))
            }
        };
        let coord = |field: &str, name: &str| -> Result<Option<u32>> {
            if field.is_empty() {
                Ok(None)
            } else {
                field
                    .parse::<u32>()
                    .map(Some)
                    .map_err(|e| parse_error(line, format!("bad {name}: {e}")))
            }
        };
        let fovea = match (coord(&record[2], "fovea_x")?, coord(&record[3], "fovea_y")?) {
            (Some(x), Some(y)) => Some((x, y)),
            (None, None) => None,
            _ => {
                return Err(parse_error(
                    line,
                    "fovea_x and fovea_y must both be given or both blank".into(),
                ))
            }
        };
        if fovea.is_some() && !has_macula {
            return Err(Error::TruthSemantic {
                path: path.into(),
                line,
            });
        }
        records.push(GroundTruthRecord {
            source,
            has_macula,
            fovea,
        });
    }
    Ok(records)
}
