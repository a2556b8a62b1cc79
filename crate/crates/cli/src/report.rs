//! Evaluation outputs: `report.json`, `report.csv` (one metric row per
//! grouping), `report_{listener,system}.csv` (per-group means and standard
//! errors) and `predictions.csv` (calibrated eval trials).

use std::fmt::Write as _;
use std::path::Path;

use hrsim_core::calib::evaluate;
use hrsim_core::{EvalReport, Grouping, Level, PredictionRecord};
use serde::{Deserialize, Serialize};

use crate::cache::write_atomic;
use crate::error::{CliError, CliResult};
use crate::pipeline::FitOutput;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    /// Unix seconds; the only field that differs between identical runs.
    pub generated_at: u64,
    pub level: Option<Level>,
    pub params: FitOutput,
    pub n_eval_scored: usize,
    pub n_eval_skipped: usize,
    pub reports: Vec<EvalReport>,
}

pub fn build_report(
    records: &[PredictionRecord],
    skipped: usize,
    params: FitOutput,
    level: Option<Level>,
    groupings: &[Grouping],
    generated_at: u64,
) -> CliResult<ReportFile> {
    let reports = groupings
        .iter()
        .map(|&g| evaluate(records, g).map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(ReportFile {
        generated_at,
        level,
        params,
        n_eval_scored: records.len(),
        n_eval_skipped: skipped,
        reports,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_bytes<F>(header: &[&str], rows: F) -> CliResult<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let run = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(header)?;
        rows(w)
    };
    run(&mut w).map_err(|e| CliError::Internal(e.to_string()))?;
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

pub fn write_reports(out_dir: &Path, report: &ReportFile, predictions: &[PredictionRecord]) -> CliResult<()> {
    let mut json = serde_json::to_string_pretty(report).map_err(|e| CliError::Internal(e.to_string()))?;
    json.push('\n');
    write_atomic(&out_dir.join("report.json"), json.as_bytes())?;

    let summary = csv_bytes(
        &["grouping", "n_trials", "n_points", "rmse", "ncc", "kt", "raw_ncc", "raw_kt"],
        |w| {
            for r in &report.reports {
                w.write_record([
                    r.grouping.to_string(),
                    r.n_trials.to_string(),
                    r.n_points.to_string(),
                    r.rmse.to_string(),
                    opt(r.ncc),
                    opt(r.kt),
                    opt(r.raw_ncc),
                    opt(r.raw_kt),
                ])?;
            }
            Ok(())
        },
    )?;
    write_atomic(&out_dir.join("report.csv"), &summary)?;

    for r in report.reports.iter().filter(|r| r.grouping != Grouping::Trial) {
        let bytes = csv_bytes(
            &["id", "n", "mean_correctness", "se_correctness", "mean_prediction", "se_prediction", "mean_raw"],
            |w| {
                for g in &r.groups {
                    w.write_record([
                        g.id.clone(),
                        g.n.to_string(),
                        g.mean_correctness.to_string(),
                        g.se_correctness.to_string(),
                        g.mean_prediction.to_string(),
                        g.se_prediction.to_string(),
                        g.mean_raw.to_string(),
                    ])?;
                }
                Ok(())
            },
        )?;
        write_atomic(&out_dir.join(format!("report_{}.csv", r.grouping)), &bytes)?;
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    for p in predictions {
        w.serialize(p).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    write_atomic(&out_dir.join("predictions.csv"), &bytes)
}

pub fn read_report(path: &Path) -> CliResult<ReportFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path.display(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(path.display(), e))
}

/// Plain-text summary table.
pub fn render_table(report: &ReportFile) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
    let mut out = String::new();
    let level = report.level.map_or_else(|| "?".to_string(), |l| l.to_string());
    let _ = writeln!(
        out,
        "level {level}   a = {:.4}   b = {:.4}   fit rmse = {:.4} (n = {})",
        report.params.a, report.params.b, report.params.fit_rmse, report.params.n_dev
    );
    let _ = writeln!(out, "eval trials scored {}, skipped {}", report.n_eval_scored, report.n_eval_skipped);
    let _ = writeln!(
        out,
        "{:<10} {:>7} {:>7} {:>7} {:>7} {:>8} {:>8}",
        "grouping", "points", "RMSE", "NCC", "KT", "raw NCC", "raw KT"
    );
    for r in &report.reports {
        let _ = writeln!(
            out,
            "{:<10} {:>7} {:>7.3} {:>7} {:>7} {:>8} {:>8}",
            r.grouping.as_str(),
            r.n_points,
            r.rmse,
            fmt(r.ncc),
            fmt(r.kt),
            fmt(r.raw_ncc),
            fmt(r.raw_kt)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(sig: &str, listener: &str, system: &str, truth: f64) -> PredictionRecord {
        PredictionRecord {
            signal_id: sig.into(),
            listener_id: listener.into(),
            system_id: system.into(),
            correctness: truth,
            raw_score: truth * 2.0 - 1.0,
            mapped_score: truth,
        }
    }

    #[test]
    fn perfect_predictions() {
        let recs = vec![
            rec("s1", "L1", "A", 0.1),
            rec("s2", "L1", "B", 0.5),
            rec("s3", "L2", "A", 0.7),
            rec("s4", "L2", "B", 0.9),
        ];
        let params = FitOutput { a: -1.0, b: 0.0, fit_rmse: 0.0, n_dev: 4 };
        let groupings = [Grouping::Trial, Grouping::Listener, Grouping::System];
        let rep = build_report(&recs, 0, params, Some(Level::Enc), &groupings, 0).unwrap();
        let trial = &rep.reports[0];
        assert_eq!(trial.rmse, 0.0);
        assert!((trial.ncc.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(trial.kt, Some(1.0));
        assert_eq!(rep.reports[1].groups.len(), 2);

        let dir = tempfile::tempdir().unwrap();
        write_reports(dir.path(), &rep, &recs).unwrap();
        for f in ["report.json", "report.csv", "report_listener.csv", "report_system.csv", "predictions.csv"] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let listener = std::fs::read_to_string(dir.path().join("report_listener.csv")).unwrap();
        assert!(listener.starts_with("id,n,mean_correctness,se_correctness,mean_prediction,se_prediction"));
        assert_eq!(read_report(&dir.path().join("report.json")).unwrap(), rep);
        let table = render_table(&rep);
        assert!(table.contains("listener") && table.contains("1.000"));
    }
}
