mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const Q2_TEXT: &str = "Adults 18-100 years old who have a diagnosis of hereditary hemorrhagic telangiectasia (HHT), which is also called Osler-Weber-Rendu syndrome.";

fn create(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_create"))
        .args(args)
        .current_dir(dir)
        .env_remove("CREATE_INDEX")
        .env_remove("CREATE_ADDR")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = create(dir, args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn q(id: &str) -> String {
    common::queries_dir().join(format!("{id}.json")).display().to_string()
}

/// A workspace holding the seed-7 corpus and its index.
fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-corpus", "--seed", "7", "--out", "corpus"]);
    ok(dir.path(), &["index", "--corpus", "corpus", "--snapshot", "index.crix"]);
    dir
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (PathBuf::from(p.file_name().unwrap()), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(create(dir.path(), &[]).status.code(), Some(1));
    assert_eq!(
        create(dir.path(), &["gen-corpus", "--seed", "seven", "--out", "x"]).status.code(),
        Some(1)
    );
    assert_eq!(create(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(create(dir.path(), &["--help"]).status.code(), Some(0));

    let missing = create(dir.path(), &["search", "--query", &q("q2")]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("index.crix"));
    assert_eq!(create(dir.path(), &["parse", "--text", " ... "]).status.code(), Some(2));
    assert_eq!(create(dir.path(), &["index", "--corpus", "nowhere"]).status.code(), Some(2));
}

#[test]
fn parse_prints_a_reviewable_document() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["parse", "--text", Q2_TEXT, "--query-id", "q2"]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["demographics"]["age_at_query"], serde_json::json!([18, 100]));
    assert_eq!(doc["query_id"], "q2");
    assert_eq!(
        doc["structured_filters"][0]["concept_ids"][0],
        "cond.hereditary_hemorrhagic_telangiectasia"
    );

    // The draft is itself a valid input to search.
    let ws = workspace();
    fs::write(ws.path().join("draft.json"), &out).unwrap();
    assert_eq!(
        ok(ws.path(), &["search", "--query", "draft.json", "--limit", "3"]).lines().count(),
        3
    );
}

#[test]
fn search_lists_ranked_patients() {
    let ws = workspace();
    let out = ok(ws.path(), &["search", "--query", &q("q2"), "--limit", "5"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 5);
    for (i, l) in lines.iter().enumerate() {
        let cols: Vec<&str> = l.split('\t').collect();
        assert_eq!(cols.len(), 3, "{l}");
        assert_eq!(cols[0], (i + 1).to_string());
        cols[2].parse::<f64>().unwrap();
    }
    let structured = ok(
        ws.path(),
        &[
            "search",
            "--query",
            &q("q2"),
            "--limit",
            "5",
            "--system",
            "structured",
            "--seed",
            "3",
        ],
    );
    assert!(structured.lines().all(|l| l.split('\t').count() == 2));

    let json = ok(ws.path(), &["search", "--query", &q("q2"), "--limit", "2", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["results"].as_array().unwrap().len(), 2);
}

#[test]
fn invalid_documents_are_reported_by_path() {
    let ws = workspace();
    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(q("q2")).unwrap()).unwrap();
    doc["demographics"]["age_at_query"] = serde_json::json!([70, 18]);
    fs::write(ws.path().join("bad.json"), doc.to_string()).unwrap();
    let out = create(ws.path(), &["search", "--query", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("BOUNDS_INVERTED") && err.contains("demographics.age_at_query"),
        "{err}"
    );

    doc["demographics"]["age_at_query"] = serde_json::json!("adults");
    fs::write(ws.path().join("bad.json"), doc.to_string()).unwrap();
    let out = create(ws.path(), &["search", "--query", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("demographics.age_at_query"));
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let a = workspace();
    let b = workspace();
    assert_eq!(files(&a.path().join("corpus")), files(&b.path().join("corpus")));
    assert_eq!(
        fs::read(a.path().join("index.crix")).unwrap(),
        fs::read(b.path().join("index.crix")).unwrap()
    );
    for args in [
        vec!["search", "--query", &q("q1"), "--limit", "20"],
        vec!["search", "--query", &q("q3"), "--system", "structured", "--seed", "7"],
        vec!["search", "--query", &q("q5"), "--json"],
    ] {
        assert_eq!(ok(a.path(), &args), ok(b.path(), &args));
    }
    let queries = common::queries_dir().display().to_string();
    let eval = [
        "eval",
        "--queries",
        &queries,
        "--truth",
        "corpus/ground_truth.jsonl",
        "--seed",
        "7",
        "--report",
        "report.json",
    ];
    assert_eq!(ok(a.path(), &eval), ok(b.path(), &eval));
    assert_eq!(
        fs::read(a.path().join("report.json")).unwrap(),
        fs::read(b.path().join("report.json")).unwrap()
    );
}

#[test]
fn eval_prints_the_table() {
    let ws = workspace();
    let queries = common::queries_dir().display().to_string();
    let out = ok(
        ws.path(),
        &["eval", "--queries", &queries, "--truth", "corpus/ground_truth.jsonl", "--seed", "7"],
    );
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "P@5 (corpus seed 7)");
    assert!(lines[7].starts_with("average"));
    let cols: Vec<f64> = lines[7].split_whitespace().skip(1).map(|c| c.parse().unwrap()).collect();
    assert!(cols[2] >= 0.9 && cols[0] <= 0.7, "{cols:?}");
}

#[test]
fn serve_rejects_a_bad_address() {
    let ws = workspace();
    let out = create(ws.path(), &["serve", "--addr", "not-an-address"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spec_file_reproduces_the_default() {
    let ws = workspace();
    let spec = common::data_dir().join("benchmark_spec.json").display().to_string();
    ok(ws.path(), &["gen-corpus", "--spec", &spec, "--seed", "7", "--out", "from_spec"]);
    assert_eq!(files(&ws.path().join("corpus")), files(&ws.path().join("from_spec")));

    fs::write(ws.path().join("bad_spec.json"), r#"{"queries": [{"template": "q9", "dr": 1}]}"#).unwrap();
    let out = create(ws.path(), &["gen-corpus", "--spec", "bad_spec.json", "--seed", "7", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("q9"));
}
