use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::Utc;
use serde::{Deserialize, Serialize};

use super::{BackendFailure, EvalError, EvalOutcome, MetricReport};

const HEADER: &str = "| Model | BLEU | METEOR | Number of Parameters |";
const RULE: &str = "|-------|------|--------|----------------------|";

/// Human table plus its machine-readable twin.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedReport {
    pub text: String,
    pub json: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub bleu: f64,
    pub meteor: f64,
    pub parameters: Option<u64>,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub rows: Vec<ReportRow>,
    pub reports: Vec<MetricReport>,
    #[serde(default)]
    pub failures: Vec<BackendFailure>,
}

impl ReportFile {
    /// Parses `report.json` and re-checks every report's averages.
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let file: Self =
            serde_json::from_str(text).map_err(|e| EvalError::InconsistentReport(e.to_string()))?;
        for r in &file.reports {
            r.validate()?;
        }
        Ok(file)
    }
}

/// `220000000` → `220 million`, `1500000` → `1.5 million`, below a million
/// the plain integer, unknown → `-`.
pub fn format_params(count: Option<u64>) -> String {
    match count {
        None => "-".into(),
        Some(n) if n >= 1_000_000 => {
            let millions = format!("{:.3}", n as f64 / 1e6);
            let millions = millions.trim_end_matches('0').trim_end_matches('.');
            format!("{millions} million")
        }
        Some(n) => n.to_string(),
    }
}

/// Renders one row per backend: model id, BLEU and METEOR to four decimals,
/// parameter count.
///
/// ```
/// use std::collections::BTreeMap;
/// use kic::eval::{render_report, MetricReport};
///
/// let report = MetricReport { backend_id: "t5-base".into(), avg_bleu: 0.0226, avg_meteor: 0.1069, n_keywords: 1, per_keyword: vec![] };
/// let params = BTreeMap::from([("t5-base".to_string(), 220_000_000)]);
/// let out = render_report(&[report], &params);
/// assert!(out.text.contains("| t5-base | 0.0226 | 0.1069 | 220 million |"));
/// ```
pub fn render_report(reports: &[MetricReport], param_counts: &BTreeMap<String, u64>) -> RenderedReport {
    render_outcome(&EvalOutcome { reports: reports.to_vec(), failures: Vec::new() }, param_counts)
}

pub(crate) fn render_outcome(outcome: &EvalOutcome, param_counts: &BTreeMap<String, u64>) -> RenderedReport {
    let rows: Vec<ReportRow> = outcome
        .reports
        .iter()
        .map(|r| ReportRow {
            model: r.backend_id.clone(),
            bleu: r.avg_bleu,
            meteor: r.avg_meteor,
            parameters: param_counts.get(&r.backend_id).copied(),
        })
        .collect();

    let mut text = format!("{HEADER}\n{RULE}\n");
    for row in &rows {
        text.push_str(&format!(
            "| {} | {:.4} | {:.4} | {} |\n",
            row.model,
            row.bleu,
            row.meteor,
            format_params(row.parameters)
        ));
    }
    for f in &outcome.failures {
        text.push_str(&format!("\nfailed: {}: {}\n", f.backend_id, f.error));
    }

    let file = ReportFile { rows, reports: outcome.reports.clone(), failures: outcome.failures.clone() };
    let mut json = serde_json::to_string_pretty(&file).expect("report serializes");
    json.push('\n');
    RenderedReport { text, json }
}

/// Writes `report.txt` and `report.json` into a fresh timestamped directory
/// under `report_dir` and returns that directory.
pub fn write_run(
    report_dir: &Path,
    outcome: &EvalOutcome,
    param_counts: &BTreeMap<String, u64>,
) -> Result<PathBuf, EvalError> {
    fs::create_dir_all(report_dir)?;
    let stamp = Utc::now().format("run-%Y%m%dT%H%M%SZ").to_string();
    let mut run_dir = report_dir.join(&stamp);
    let mut n = 1;
    while let Err(e) = fs::create_dir(&run_dir) {
        if e.kind() != std::io::ErrorKind::AlreadyExists {
            return Err(e.into());
        }
        n += 1;
        run_dir = report_dir.join(format!("{stamp}-{n}"));
    }
    let rendered = render_outcome(outcome, param_counts);
    fs::write(run_dir.join("report.txt"), &rendered.text)?;
    fs::write(run_dir.join("report.json"), &rendered.json)?;
    Ok(run_dir)
}
