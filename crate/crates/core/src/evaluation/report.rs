use std::fmt::Write as _;
use std::path::Path;

use super::grid::{ExperimentReport, MeanStd};
use crate::util::{write_bytes, write_json};
use crate::Result;

fn cell(v: Option<MeanStd>) -> String {
    match v {
        Some(m) => format!("{:6.2} ± {:5.2}", m.mean * 100.0, m.std * 100.0),
        None => "-".to_string(),
    }
}

/// Human-readable table: one line per row, grouped by section, scores in
/// percent as mean ± std over folds.
pub fn render_table(report: &ExperimentReport) -> String {
    let width = report.rows.iter().map(|r| r.label.chars().count()).max().unwrap_or(0).max(16);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} sessions ({} negative), {}-fold CV, seed {}",
        report.n_instances, report.n_negative, report.n_folds, report.seed
    );
    let _ = writeln!(out, "{:<width$}  {:>15}  {:>15}", "Input ⇒ Model", "F1", "Recall");
    let mut section = None;
    for r in &report.rows {
        if section != Some(r.section) {
            let _ = writeln!(out, "[{}]", r.section);
            section = Some(r.section);
        }
        match &r.skipped {
            Some(reason) => {
                let _ = writeln!(out, "{:<width$}  skipped: {reason}", r.label);
            }
            None => {
                let _ = writeln!(out, "{:<width$}  {:>15}  {:>15}", r.label, cell(r.macro_f1), cell(r.minority_recall));
            }
        }
    }
    if let Some(t) = &report.buckets {
        let _ = writeln!(out, "\nMacro F1 by conversation length (tokens)");
        let _ = write!(out, "{:<width$}", "Model");
        for b in &t.buckets {
            let _ = write!(out, "  {:>9}", b.label());
        }
        let _ = writeln!(out);
        for r in report.rows.iter().filter(|r| r.skipped.is_none()) {
            let _ = write!(out, "{:<width$}", r.label);
            for s in t.scores.iter().filter(|s| s.model_id == r.id) {
                let v = match s.macro_f1 {
                    Some(f) => format!("{:.2}{}", f * 100.0, if s.low_confidence { "*" } else { "" }),
                    None => "-".into(),
                };
                let _ = write!(out, "  {v:>9}");
            }
            let _ = writeln!(out);
        }
        if t.scores.iter().any(|s| s.low_confidence && s.macro_f1.is_some()) {
            let _ = writeln!(out, "* fewer than {} sessions in the bucket", super::buckets::LOW_CONFIDENCE_N);
        }
    }
    out
}

fn predictions_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("model_id,session_id,fold,gold,p_negative,logit\n");
    for r in &report.rows {
        for p in &r.predictions {
            let _ = writeln!(out, "{},{},{},{},{:.6},{:.6}", r.id, p.id, p.fold, p.gold.as_str(), p.p_negative, p.logit);
        }
    }
    out
}

/// Write `report.json`, `report.txt`, `predictions.csv` and, when the
/// report has a length table, `buckets.csv`.
pub fn emit_report(report: &ExperimentReport, out_dir: &Path) -> Result<()> {
    write_json(&out_dir.join("report.json"), report)?;
    write_bytes(&out_dir.join("report.txt"), render_table(report).as_bytes())?;
    write_bytes(&out_dir.join("predictions.csv"), predictions_csv(report).as_bytes())?;
    if let Some(t) = &report.buckets {
        write_bytes(&out_dir.join("buckets.csv"), t.to_csv().as_bytes())?;
    }
    Ok(())
}
