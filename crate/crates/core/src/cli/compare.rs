use std::fmt::Write as _;

use serde::Serialize;

use crate::metrics::ReportFile;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: String,
    pub source: String,
    pub n: usize,
    pub rmse_h: f64,
    pub mae_h: f64,
    pub score_s: f64,
    pub reference: bool,
    /// Percent change relative to the reference row; `None` when the
    /// reference value is 0 and this one is not.
    pub rmse_delta_pct: Option<f64>,
    pub mae_delta_pct: Option<f64>,
    pub score_delta_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub reference: String,
    pub rows: Vec<ComparisonRow>,
    pub warnings: Vec<String>,
}

fn delta_pct(value: f64, reference: f64) -> Option<f64> {
    if reference == 0.0 {
        (value == 0.0).then_some(0.0)
    } else {
        Some((value - reference) / reference * 100.0)
    }
}

/// Builds the side-by-side table. `reference` indexes into `reports`.
pub fn compare(reports: &[(String, ReportFile)], reference: usize) -> Comparison {
    let (_, base) = &reports[reference];
    let mut warnings = Vec::new();
    if reports.iter().any(|(_, r)| r.n != base.n) {
        let counts: Vec<String> = reports.iter().map(|(src, r)| format!("{src}: n = {}", r.n)).collect();
        warnings.push(format!("reports cover different sample counts ({})", counts.join(", ")));
    }
    let rows = reports
        .iter()
        .enumerate()
        .map(|(i, (source, r))| ComparisonRow {
            method: r.method.clone(),
            source: source.clone(),
            n: r.n,
            rmse_h: r.rmse_h,
            mae_h: r.mae_h,
            score_s: r.score_s,
            reference: i == reference,
            rmse_delta_pct: delta_pct(r.rmse_h, base.rmse_h),
            mae_delta_pct: delta_pct(r.mae_h, base.mae_h),
            score_delta_pct: delta_pct(r.score_s, base.score_s),
        })
        .collect();
    Comparison {
        reference: base.method.clone(),
        rows,
        warnings,
    }
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let pct = |d: Option<f64>| d.map_or_else(|| "n/a".to_string(), |v| format!("{v:+.1}%"));
        let mut out = String::new();
        writeln!(
            out,
            "  {:<12} {:>6} {:>10} {:>9} {:>10} {:>9} {:>12} {:>10}",
            "method", "n", "rmse_h", "Δrmse", "mae_h", "Δmae", "score_s", "Δscore"
        )
        .unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{} {:<12} {:>6} {:>10.2} {:>9} {:>10.2} {:>9} {:>12.4e} {:>10}",
                if r.reference { "*" } else { " " },
                r.method,
                r.n,
                r.rmse_h,
                pct(r.rmse_delta_pct),
                r.mae_h,
                pct(r.mae_delta_pct),
                r.score_s,
                pct(r.score_delta_pct),
            )
            .unwrap();
        }
        writeln!(out, "* reference: {}", self.reference).unwrap();
        for w in &self.warnings {
            writeln!(out, "warning: {w}").unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{make_report, ScoreParams};
    use std::collections::BTreeMap;

    fn report(method: &str, truth: &[f64], pred: &[f64]) -> ReportFile {
        let r = make_report(truth, pred, 4, &ScoreParams::default()).unwrap();
        ReportFile {
            method: method.into(),
            n: r.n,
            rmse_h: r.rmse_h,
            mae_h: r.mae_h,
            score_s: r.score_s,
            score_params: r.score_params,
            error_histogram: r.error_histogram,
            metadata: BTreeMap::new(),
        }
    }

    #[test]
    fn self_comparison_has_zero_deltas() {
        let r = report("hybrid", &[100.0, 200.0], &[120.0, 150.0]);
        let c = compare(&[("a".into(), r.clone()), ("b".into(), r)], 0);
        for row in &c.rows {
            assert_eq!(row.rmse_delta_pct, Some(0.0));
            assert_eq!(row.mae_delta_pct, Some(0.0));
            assert_eq!(row.score_delta_pct, Some(0.0));
        }
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn three_reports_mark_the_reference() {
        let a = report("hybrid", &[100.0, 200.0], &[110.0, 190.0]);
        let b = report("llsf", &[100.0, 200.0], &[300.0, 0.0]);
        let c = report("mlp", &[100.0], &[90.0]);
        let cmp = compare(&[("a".into(), a), ("b".into(), b), ("c".into(), c)], 1);
        assert_eq!(cmp.rows.len(), 3);
        assert_eq!(cmp.rows.iter().filter(|r| r.reference).count(), 1);
        assert!(cmp.rows[1].reference);
        assert!(cmp.rows[0].rmse_delta_pct.unwrap() < 0.0);
        assert_eq!(cmp.warnings.len(), 1, "sample counts differ");
        let text = cmp.to_text();
        assert!(text.contains("* llsf") && text.contains("warning"));
    }

    #[test]
    fn zero_reference_delta() {
        assert_eq!(delta_pct(0.0, 0.0), Some(0.0));
        assert_eq!(delta_pct(1.0, 0.0), None);
        assert_eq!(delta_pct(150.0, 100.0), Some(50.0));
    }
}
