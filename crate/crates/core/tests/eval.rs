mod common;

use std::collections::BTreeMap;
use std::fs;
use std::sync::Arc;

use kic::dataset::KeywordContextPair;
use kic::eval::{evaluate, write_run, BackendSpec, EvalPlan, Reduction, ReportFile};
use kic::generation::{ProtocolServer, StubBackend};
use kic::jsonl;

const KEYWORDS: [&str; 3] = ["cat", "river", "promise"];

/// A split whose references are exactly what the stub says for each template.
fn stub_split(dir: &std::path::Path) -> std::path::PathBuf {
    let pairs: Vec<KeywordContextPair> = KEYWORDS
        .iter()
        .flat_map(|k| {
            (0..5).map(move |i| KeywordContextPair {
                keyword: k.to_string(),
                context: StubBackend::sentence(k, i),
                source_url: "synthetic".into(),
            })
        })
        .collect();
    let path = dir.join("test.jsonl");
    jsonl::write_file(&path, &pairs).unwrap();
    path
}

fn stub_meteor() -> f64 {
    // "the word cat appears in this example sentence number 1 ." is 11 tokens, one chunk.
    1.0 - 0.5 * (1.0f64 / 11.0).powi(3)
}

#[test]
fn stub_reproduces_its_references() {
    let dir = tempfile::tempdir().unwrap();
    let plan = EvalPlan::new(stub_split(dir.path()), vec![BackendSpec::stub()]);
    let outcome = evaluate(&plan).unwrap();
    let report = &outcome.reports[0];
    assert_eq!(report.avg_bleu, 1.0);
    assert!((report.avg_meteor - stub_meteor()).abs() < 1e-12);
    assert_eq!(report.n_keywords, 3);
    assert!(report.per_keyword.iter().all(|k| k.chosen_prompt_index == Some(0)));
    report.validate().unwrap();
}

#[test]
fn mean_of_prompts_is_available() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = EvalPlan::new(stub_split(dir.path()), vec![BackendSpec::stub()]);
    plan.reduction = Reduction::MeanOfPrompts;
    let report = &evaluate(&plan).unwrap().reports[0];
    assert_eq!(report.avg_bleu, 1.0);
    assert!(report.per_keyword.iter().all(|k| k.chosen_prompt_index.is_none()));
}

#[test]
fn failing_backend_is_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let server = ProtocolServer::start(Arc::new(StubBackend), "127.0.0.1:0", 4).unwrap();
    let plan = EvalPlan::new(
        stub_split(dir.path()),
        vec![
            BackendSpec::http("remote", server.base_url()),
            BackendSpec::http("down", "http://127.0.0.1:9"),
            BackendSpec::stub(),
        ],
    );
    let outcome = evaluate(&plan).unwrap();
    let ids: Vec<&str> = outcome.reports.iter().map(|r| r.backend_id.as_str()).collect();
    assert_eq!(ids, ["remote", "stub"]);
    assert_eq!(outcome.reports[0].avg_bleu, 1.0);
    assert_eq!(outcome.failures.len(), 1);
    assert_eq!(outcome.failures[0].backend_id, "down");

    let params = BTreeMap::from([("remote".to_string(), 60_000_000u64)]);
    let out_dir = tempfile::tempdir().unwrap();
    let run = write_run(out_dir.path(), &outcome, &params).unwrap();
    let text = fs::read_to_string(run.join("report.txt")).unwrap();
    assert!(text.contains("| remote | 1.0000 |"), "{text}");
    assert!(text.contains("60 million"));
    assert!(text.contains("failed: down"));
    let file = ReportFile::from_json(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(file.reports, outcome.reports);
}

#[test]
fn unrelated_references_score_low() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = vec![KeywordContextPair {
        keyword: "cat".into(),
        context: "A cat sat quietly on a mat.".into(),
        source_url: "x".into(),
    }];
    let path = dir.path().join("test.jsonl");
    jsonl::write_file(&path, &pairs).unwrap();
    let report = &evaluate(&EvalPlan::new(path, vec![BackendSpec::stub()])).unwrap().reports[0];
    assert_eq!(report.avg_bleu, 0.0);
    assert!(report.avg_meteor > 0.0 && report.avg_meteor < 0.5);
}

#[test]
fn tampered_report_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = evaluate(&EvalPlan::new(stub_split(dir.path()), vec![BackendSpec::stub()])).unwrap();
    let run = write_run(dir.path(), &outcome, &BTreeMap::new()).unwrap();
    let json = fs::read_to_string(run.join("report.json")).unwrap();
    let tampered = json.replacen("\"avg_bleu\": 1.0", "\"avg_bleu\": 0.9", 1);
    assert_ne!(json, tampered);
    assert!(ReportFile::from_json(&tampered).is_err());
}

#[test]
fn empty_split_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("test.jsonl");
    fs::write(&path, "").unwrap();
    assert!(evaluate(&EvalPlan::new(path, vec![BackendSpec::stub()])).is_err());
}
