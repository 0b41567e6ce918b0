use std::path::Path;
use std::process::{Command, Output};

use formbench_core::dataset::DatasetManifest;
use formbench_core::scenario::{reference_scenario, FieldSelection};
use formbench_core::script::compile;
use serde_json::Value;

fn formbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_formbench"))
        .args(args)
        .env_remove("WEBDRIVER_URL")
        .env_remove("LLM_API_BASE")
        .env_remove("LLM_API_KEY")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = formbench(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(formbench(&["evaluate", "--bogus"]).status.code(), Some(1));
    assert_eq!(formbench(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(formbench(&["gen-forms", "--out", "x", "--style", "baroque"]).status.code(), Some(1));
    assert_eq!(formbench(&["gen-forms", "--out", "x", "--fields-min", "5", "--fields-max", "2"]).status.code(), Some(1));
    assert_eq!(formbench(&["evaluate", "--corpus", "/nonexistent", "--oracle"]).status.code(), Some(1));
    assert_eq!(formbench(&["--help"]).status.code(), Some(0));
    assert_eq!(formbench(&["--version"]).status.code(), Some(0));
}

#[test]
fn unreachable_endpoint_exits_2_without_report() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    let out = tmp.path().join("eval");
    ok(&["gen-forms", "--count", "3", "--out", s(&corpus)]);
    let r = formbench(&["evaluate", "--corpus", s(&corpus), "--oracle", "--webdriver-url", "http://127.0.0.1:9", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(r.stdout.is_empty());
    assert!(!out.exists());
    let ds = tmp.path().join("ds");
    let r = formbench(&["gen-dataset", "--corpus", s(&corpus), "--webdriver-url", "http://127.0.0.1:9", "--out", s(&ds)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!ds.exists());
}

#[test]
fn gen_pool_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["gen-pool", "--out", s(&a)]);
    ok(&["gen-pool", "--input", s(&a.join("pool.json")), "--input", s(&a.join("pool.json")), "--out", s(&b)]);
    let ma = read_json(&a.join("pool-manifest.json"));
    let mb = read_json(&b.join("pool-manifest.json"));
    assert_eq!(ma["digest"], mb["digest"], "merging a pool with itself dedupes to the same pool");
    assert_eq!(mb["run_config"]["subcommand"], "gen-pool");
}

#[test]
fn evaluate_then_analyze_embed_run_config() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    let out = tmp.path().join("eval");
    ok(&["gen-forms", "--seed", "3", "--count", "6", "--style", "wrapper-heavy", "--out", s(&corpus)]);
    assert_eq!(read_json(&corpus.join("manifest.json"))["run_config"]["seed"], 3);
    ok(&["evaluate", "--corpus", s(&corpus), "--oracle", "--mutation", "drop_fields(1)", "--out", s(&out)]);
    let records = read_json(&out.join("records.json"));
    assert_eq!(records["run_config"]["mutation"], "drop_fields(1)");
    assert_eq!(records["run_config"]["webdriver_url"], "builtin:refbrowser");
    assert!(records["browser"]["browser_name"].is_string());
    assert_eq!(records["records"].as_array().unwrap().len(), 6);
    let report: Value = serde_json::from_str(&ok(&[
        "analyze",
        "--records",
        s(&out.join("records.json")),
        "--corpus",
        s(&corpus),
        "--report",
        "json",
    ]))
    .unwrap();
    assert_eq!(report["run_config"]["subcommand"], "analyze");
    assert_eq!(report["source_run_config"]["subcommand"], "evaluate");
    assert!(report["summary"]["input_coverage_pct"].as_f64().unwrap() < 100.0);
    assert!(!report["per_field_type_errors"].as_object().unwrap().is_empty());
}

#[test]
fn evaluate_script_files() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus_dir = tmp.path().join("c");
    let scripts = tmp.path().join("scripts");
    ok(&["gen-forms", "--seed", "4", "--count", "4", "--out", s(&corpus_dir)]);
    let corpus = formbench::corpus_io::read_corpus(&corpus_dir).unwrap();
    std::fs::create_dir(&scripts).unwrap();
    let mut jsonl = String::new();
    for d in &corpus.documents {
        let sc = reference_scenario(&d.spec, 1, FieldSelection::AllFillable).unwrap();
        let json = compile(&sc, &d.spec).unwrap().to_json();
        std::fs::write(scripts.join(format!("{}.json", d.spec.form_id)), &json).unwrap();
        jsonl.push_str(&serde_json::json!({ "form_id": d.spec.form_id, "source": json }).to_string());
        jsonl.push('\n');
    }
    jsonl.push_str(&serde_json::json!({ "form_id": corpus.documents[0].spec.form_id, "source": "{not json" }).to_string());
    jsonl.push('\n');
    std::fs::write(tmp.path().join("scripts.jsonl"), jsonl).unwrap();

    let dir_report: Value =
        serde_json::from_str(&ok(&["evaluate", "--corpus", s(&corpus_dir), "--scripts", s(&scripts), "--report", "json"])).unwrap();
    assert_eq!(dir_report["summary"]["input_coverage_pct"], 100.0);
    let line_report: Value = serde_json::from_str(&ok(&[
        "evaluate",
        "--corpus",
        s(&corpus_dir),
        "--scripts",
        s(&tmp.path().join("scripts.jsonl")),
        "--report",
        "json",
    ]))
    .unwrap();
    assert_eq!(line_report["summary"]["n_records"], 5);
    assert_eq!(line_report["summary"]["syntax_correctness_pct"], 80.0);
}

#[test]
fn gen_dataset_filter_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |mode: &str, out: &Path| {
        ok(&[
            "gen-dataset",
            "--seed",
            "12",
            "--count",
            "12",
            "--dialect",
            "action-json",
            "--fault-rate",
            "0.5",
            mode,
            "--out",
            s(out),
        ]);
        let manifest: DatasetManifest = serde_json::from_value(read_json(&out.join("manifest.json"))).unwrap();
        let lines: Vec<Value> = std::fs::read_to_string(out.join("dataset.jsonl"))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        (manifest, lines)
    };
    let (fm, filtered) = run("--filter", &tmp.path().join("f"));
    let (nm, all) = run("--no-filter", &tmp.path().join("n"));
    for line in filtered.iter().chain(&all) {
        let keys: Vec<&String> = line.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["code", "html", "metadata", "scenario"]);
    }
    assert_eq!(nm.kept, 12);
    assert_eq!(fm.kept + fm.discarded, 12);
    assert!(fm.discarded > 0 && fm.kept > 0);
    assert!(filtered.iter().all(|t| t["metadata"]["executed_ok"] == true));
    let codes: Vec<&Value> = all.iter().map(|t| &t["code"]).collect();
    assert!(filtered.iter().all(|t| codes.contains(&&t["code"])));
    assert_eq!(fm.run_config.unwrap()["filter"], "filter");
}
