//! RUL error metrics: RMSE, MAE and the asymmetric exponential score.
//!
//! All inputs are in hours. The score penalises a late (over-estimated) RUL
//! prediction more heavily than an early one of the same magnitude whenever
//! `a2 < a1`:
//!
//! ```text
//! d_i = pred_i - truth_i
//! S   = Σ_{d_i < 0} (exp(-d_i / a1) - 1) + Σ_{d_i ≥ 0} (exp(d_i / a2) - 1)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("truth has {truth} values but predictions have {pred}")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("metrics need at least one sample")]
    Empty,
    #[error("score parameters must be positive, got a1 = {a1}, a2 = {a2}")]
    InvalidScoreParams { a1: f64, a2: f64 },
    #[error("histogram needs at least one bin")]
    NoBins,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    /// Time constant for early predictions (`pred < truth`), hours.
    pub a1: f64,
    /// Time constant for late predictions (`pred ≥ truth`), hours.
    pub a2: f64,
}

impl Default for ScoreParams {
    fn default() -> Self {
        Self { a1: 250.0, a2: 220.0 }
    }
}

impl ScoreParams {
    pub fn new(a1: f64, a2: f64) -> Result<Self, MetricsError> {
        if a1 > 0.0 && a2 > 0.0 && a1.is_finite() && a2.is_finite() {
            Ok(Self { a1, a2 })
        } else {
            Err(MetricsError::InvalidScoreParams { a1, a2 })
        }
    }

    /// Penalty of a single signed error `d = pred - truth`.
    pub fn penalty(&self, d: f64) -> f64 {
        if d < 0.0 {
            (-d / self.a1).exp() - 1.0
        } else {
            (d / self.a2).exp() - 1.0
        }
    }
}

fn check(truth: &[f64], pred: &[f64]) -> Result<(), MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

pub fn score_s(truth: &[f64], pred: &[f64], params: &ScoreParams) -> Result<f64, MetricsError> {
    check(truth, pred)?;
    Ok(truth
        .iter()
        .zip(pred)
        .map(|(t, p)| params.penalty(p - t))
        .sum())
}

pub fn rmse(truth: &[f64], pred: &[f64]) -> Result<f64, MetricsError> {
    check(truth, pred)?;
    let sq: f64 = truth.iter().zip(pred).map(|(t, p)| (p - t) * (p - t)).sum();
    Ok((sq / truth.len() as f64).sqrt())
}

pub fn mae(truth: &[f64], pred: &[f64]) -> Result<f64, MetricsError> {
    check(truth, pred)?;
    let abs: f64 = truth.iter().zip(pred).map(|(t, p)| (p - t).abs()).sum();
    Ok(abs / truth.len() as f64)
}

/// Equal-width bins over `[-m, m]`, where `m` is the largest absolute error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    /// `bins + 1` increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl ErrorHistogram {
    pub fn build(errors: &[f64], bins: usize) -> Result<Self, MetricsError> {
        if bins == 0 {
            return Err(MetricsError::NoBins);
        }
        let mut half = errors.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        if half == 0.0 {
            half = 1.0;
        }
        let width = 2.0 * half / bins as f64;
        let edges = (0..=bins).map(|k| -half + k as f64 * width).collect();
        let mut counts = vec![0; bins];
        for e in errors {
            let idx = (((e + half) / width).floor() as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Ok(Self { edges, counts })
    }

    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.edges
            .windows(2)
            .zip(&self.counts)
            .map(|(e, &c)| (e[0], e[1], c))
    }
}

/// Metrics plus the per-sample pairs they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub rmse_h: f64,
    pub mae_h: f64,
    pub score_s: f64,
    pub score_params: ScoreParams,
    /// `(rul_true_h, rul_pred_h)` in input order.
    pub pairs: Vec<(f64, f64)>,
    pub error_histogram: ErrorHistogram,
}

impl EvalReport {
    pub fn errors(&self) -> Vec<f64> {
        self.pairs.iter().map(|(t, p)| p - t).collect()
    }

    /// Writes `report.json`, `pairs.csv` and `errors_hist.csv` into `dir`.
    pub fn write_files(
        &self,
        dir: &Path,
        method: &str,
        metadata: BTreeMap<String, serde_json::Value>,
    ) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let summary = ReportFile {
            method: method.to_string(),
            n: self.n,
            rmse_h: self.rmse_h,
            mae_h: self.mae_h,
            score_s: self.score_s,
            score_params: self.score_params,
            error_histogram: self.error_histogram.clone(),
            metadata,
        };
        let mut json = serde_json::to_string_pretty(&summary).map_err(io::Error::other)?;
        json.push('\n');
        fs::write(dir.join(REPORT_FILE), json)?;

        let mut pairs = String::from("rul_true_h,rul_pred_h\n");
        for (t, p) in &self.pairs {
            pairs.push_str(&format!("{t},{p}\n"));
        }
        fs::write(dir.join(PAIRS_FILE), pairs)?;

        let mut hist = fs::File::create(dir.join(HISTOGRAM_FILE))?;
        writeln!(hist, "bin_lo,bin_hi,count")?;
        for (lo, hi, c) in self.error_histogram.bins() {
            writeln!(hist, "{lo},{hi},{c}")?;
        }
        Ok(())
    }
}

pub const REPORT_FILE: &str = "report.json";
pub const PAIRS_FILE: &str = "pairs.csv";
pub const HISTOGRAM_FILE: &str = "errors_hist.csv";

/// On-disk form of a report (`report.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub method: String,
    pub n: usize,
    pub rmse_h: f64,
    pub mae_h: f64,
    pub score_s: f64,
    pub score_params: ScoreParams,
    pub error_histogram: ErrorHistogram,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl ReportFile {
    pub fn load(path: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
    }
}

pub fn make_report(
    truth: &[f64],
    pred: &[f64],
    histogram_bins: usize,
    params: &ScoreParams,
) -> Result<EvalReport, MetricsError> {
    check(truth, pred)?;
    let errors: Vec<f64> = truth.iter().zip(pred).map(|(t, p)| p - t).collect();
    Ok(EvalReport {
        n: truth.len(),
        rmse_h: rmse(truth, pred)?,
        mae_h: mae(truth, pred)?,
        score_s: score_s(truth, pred, params)?,
        score_params: *params,
        pairs: truth.iter().copied().zip(pred.iter().copied()).collect(),
        error_histogram: ErrorHistogram::build(&errors, histogram_bins)?,
    })
}
