//! Acceptance suite: one PASS/FAIL/SKIP line per criterion. Runs without
//! the libtest harness so the lines are always printed; exits non-zero when
//! any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use formbench::harness::{Harness, HarnessConfig, Job};
use formbench::pipeline::{generate_dataset, DatasetOptions};
use formbench::provider::OracleProvider;
use formbench::report::EvaluationSummary;
use formbench::runner;
use formbench_core::corpus::{build_corpus, CorpusParams};
use formbench_core::coverage::{CoverageReport, CoverageScope};
use formbench_core::dataset::{Decoding, FilterMode};
use formbench_core::field::FieldKind;
use formbench_core::html::render::{FormSpec, HtmlDocument, CLASSIC, WRAPPER_HEAVY};
use formbench_core::metrics::{
    aggregate, per_field_type_errors, AggregateOptions, ErrorCategory, EvaluationRecord, ExecStatus, ExecutionReport,
    SyntaxReport,
};
use formbench_core::mutation::{mutate, mutate_at, MutationKind};
use formbench_core::prompt::DEFAULT_TEMPLATE;
use formbench_core::scenario::{reference_scenario, FieldSelection};
use formbench_core::script::{compile, emit_source, ActionScript, TestScript, ACTION_JSON, PYTHON_SELENIUM};
use formbench_core::stats::corpus_stats;
use formbench_core::FieldPool;

/// Wall-clock budget for two `gen-forms` runs of 100 forms.
const DETERMINISM_BUDGET: Duration = Duration::from_secs(10);
/// Wall-clock budget for the 100-form oracle evaluation.
const ORACLE_BUDGET: Duration = Duration::from_secs(300);
/// Tolerance on percentages and exact-fraction coverage.
const PCT_TOL: f64 = 1e-9;
const COVERAGE_TOL: f64 = 1e-12;
const DISTRIBUTION_TOL: f64 = 1e-9;
/// Forms generated per style for the mutation criteria; a form is a fixture
/// when the mutation applies to it.
const MUTATION_FIXTURES: usize = 20;
/// Fewest applicable fixtures a mutation check accepts.
const MIN_FIXTURES: usize = 10;
const EQUIVALENCE_FORMS: usize = 25;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_formbench")
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin())
        .args(args)
        .env_remove("WEBDRIVER_URL")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn corpus(seed: u64, count: usize, style: &str) -> Vec<HtmlDocument> {
    let mut params = CorpusParams::new(seed, count);
    params.style = style.to_string();
    build_corpus(&FieldPool::builtin(), &params).unwrap().documents
}

fn oracle(doc: &HtmlDocument, seed: u64) -> ActionScript {
    let sc = reference_scenario(&doc.spec, seed, FieldSelection::AllFillable).unwrap();
    compile(&sc, &doc.spec).unwrap()
}

fn harness() -> Harness {
    Harness::start(HarnessConfig::default()).expect("reference browser starts")
}

fn evaluate(h: &Harness, doc: &HtmlDocument, script: &TestScript, page: Option<&str>) -> EvaluationRecord {
    h.evaluate(&Job {
        form: doc,
        script,
        script_id: "acceptance".into(),
        page,
    })
    .expect("no infrastructure error")
}

fn digest_of(stdout: &str) -> Option<String> {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix("corpus_digest ").map(str::to_string))
}

/// Corpus contents minus the embedded run configuration, which records
/// the output path.
fn corpus_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let mut bytes = std::fs::read(&p).unwrap();
            if name.ends_with(".json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("run_config");
                bytes = serde_json::to_vec(&v).unwrap();
            }
            (name, bytes)
        })
        .collect()
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let start = Instant::now();
    let (ca, oa, ea) = run_cli(&["gen-forms", "--seed", "42", "--count", "100", "--out", a.to_str().unwrap()]);
    let (cb, ob, eb) = run_cli(&["gen-forms", "--seed", "42", "--count", "100", "--out", b.to_str().unwrap()]);
    let elapsed = start.elapsed();
    ensure(ca == 0 && cb == 0, || format!("exit codes {ca}/{cb}: {ea}{eb}"))?;
    let (da, db) = (digest_of(&oa), digest_of(&ob));
    ensure(da.is_some() && da == db, || format!("digests differ: {da:?} vs {db:?}"))?;
    ensure(corpus_contents(&a) == corpus_contents(&b), || "corpus files differ".into())?;
    ensure(elapsed < DETERMINISM_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("digest {} in {elapsed:.2?}", da.unwrap()))
}

fn oracle_corpus() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let c = tmp.path().join("corpus");
    let out = tmp.path().join("eval");
    let (code, _, err) = run_cli(&["gen-forms", "--seed", "42", "--count", "100", "--out", c.to_str().unwrap()]);
    ensure(code == 0, || format!("gen-forms exit {code}: {err}"))?;
    let start = Instant::now();
    let (code, stdout, err) = run_cli(&[
        "evaluate",
        "--corpus",
        c.to_str().unwrap(),
        "--oracle",
        "--parallel",
        "8",
        "--report",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    let elapsed = start.elapsed();
    ensure(code == 0, || format!("evaluate exit {code}: {err}"))?;
    let report: EvaluationSummary = serde_json::from_str(&stdout).map_err(|e| e.to_string())?;
    let s = &report.summary;
    ensure(s.n_records == 100, || format!("{} records", s.n_records))?;
    for (name, v) in [
        ("syntax", s.syntax_correctness_pct),
        ("executability", s.executability_pct),
        ("coverage", s.input_coverage_pct),
    ] {
        ensure((v - 100.0).abs() <= PCT_TOL, || format!("{name} = {v}"))?;
    }
    ensure(elapsed < ORACLE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("100/100/100 over 100 forms in {elapsed:.2?} ({})", report.browser.browser_name))
}

fn mutation_sensitivity() -> Check {
    let h = harness();
    let mut notes = Vec::new();

    // drop_fields(k): coverage is exactly (N - k) / N.
    let classic = corpus(5, MUTATION_FIXTURES, CLASSIC);
    for k in [1usize, 2] {
        let mut n_fixtures = 0;
        for (i, doc) in classic.iter().enumerate() {
            let script = oracle(doc, 5);
            let Ok(m) = mutate(&script, MutationKind::DropFields(k), doc, i as u64) else { continue };
            let r = evaluate(&h, doc, &m.script, m.page.as_deref());
            let cov = r.coverage.as_ref().ok_or_else(|| format!("drop_fields({k}) {}: no coverage", doc.spec.form_id))?;
            let n = cov.denominator_fields.len() as f64;
            let want = (n - k as f64) / n;
            ensure((cov.coverage - want).abs() <= COVERAGE_TOL, || {
                format!("drop_fields({k}) {}: coverage {} != {want}", doc.spec.form_id, cov.coverage)
            })?;
            n_fixtures += 1;
        }
        ensure(n_fixtures >= MIN_FIXTURES, || format!("drop_fields({k}): only {n_fixtures} fixtures"))?;
        notes.push(format!("drop_fields({k}) {n_fixtures}"));
    }

    // syntax_break: invalid syntax and not executable, in both dialects.
    let python = runner::python_selenium_available(&runner::Registry::default());
    for doc in &classic {
        let script = oracle(doc, 5);
        let m = mutate(&script, MutationKind::SyntaxBreak, doc, 1).map_err(|e| e.to_string())?;
        let mut variants = vec![(ACTION_JSON, m.script.clone())];
        if python {
            let raw = emit_source(&script, PYTHON_SELENIUM).unwrap();
            let idx = m.action_indices.first().copied().unwrap_or(0);
            variants.push((PYTHON_SELENIUM, TestScript::Raw(formbench_core::mutation::break_source(&raw, idx))));
        }
        for (dialect, s) in variants {
            let r = evaluate(&h, doc, &s, None);
            ensure(!r.syntax.valid && !r.executed_ok(), || {
                format!("syntax_break {dialect} {}: syntax {} executed {}", doc.spec.form_id, r.syntax.valid, r.executed_ok())
            })?;
        }
    }
    notes.push(format!("syntax_break {}{}", classic.len(), if python { " x2 dialects" } else { "" }));

    // wrapper_misbind on wrapper-heavy forms.
    let heavy = corpus(6, MUTATION_FIXTURES, WRAPPER_HEAVY);
    let mut n = 0;
    for (i, doc) in heavy.iter().enumerate() {
        let script = oracle(doc, 6);
        let Ok(m) = mutate(&script, MutationKind::WrapperMisbind, doc, i as u64) else { continue };
        n += 1;
        let r = evaluate(&h, doc, &m.script, m.page.as_deref());
        let status = r.execution.as_ref().map(|e| e.status);
        ensure(
            status == Some(ExecStatus::AutomationError) && r.classification == Some(ErrorCategory::WrapperMisbind),
            || format!("wrapper_misbind {}: {status:?} {:?}", doc.spec.form_id, r.classification),
        )?;
    }
    ensure(n >= MIN_FIXTURES, || format!("wrapper_misbind: only {n} fixtures"))?;
    notes.push(format!("wrapper_misbind {n}/{}", heavy.len()));

    // context_leak on both styles.
    let mut n = 0;
    for (i, doc) in classic.iter().chain(&heavy).enumerate() {
        let script = oracle(doc, 7);
        let Ok(m) = mutate(&script, MutationKind::ContextLeak, doc, i as u64) else { continue };
        let r = evaluate(&h, doc, &m.script, m.page.as_deref());
        ensure(r.classification == Some(ErrorCategory::ContextLeakage), || {
            format!("context_leak {}: {:?}", doc.spec.form_id, r.classification)
        })?;
        n += 1;
    }
    ensure(n >= MIN_FIXTURES, || format!("context_leak: only {n} fixtures"))?;
    notes.push(format!("context_leak {n}/{}", classic.len() + heavy.len()));
    Ok(notes.join(", "))
}

fn filter() -> Check {
    let h = harness();
    let docs = corpus(8, 30, CLASSIC);
    let provider = OracleProvider::new(&docs, 8, ACTION_JSON, 0.4);
    let expect_e = docs.iter().filter(|d| !provider.is_faulty(&d.spec.form_id, 1)).count();
    let opts = |filter| DatasetOptions {
        dialect: ACTION_JSON.into(),
        template_id: DEFAULT_TEMPLATE.into(),
        decoding: Decoding::default(),
        attempts: 1,
        filter,
        parallel: 4,
    };
    let filtered = generate_dataset(&docs, &provider, &h, &opts(FilterMode::Filter)).map_err(|e| e.to_string())?;
    let all = generate_dataset(&docs, &provider, &h, &opts(FilterMode::NoFilter)).map_err(|e| e.to_string())?;
    let e = all.kept.iter().filter(|t| t.executed_ok()).count();
    let u = all.kept.len() - e;
    ensure(e == expect_e && u > 0 && e > 0, || format!("e={e} u={u}, expected e={expect_e}"))?;
    ensure(filtered.kept.len() == e, || format!("filtered {} != e {e}", filtered.kept.len()))?;
    ensure(all.kept.len() == e + u && all.discarded.is_empty(), || "no-filter lost records".into())?;
    let key = |t: &formbench_core::dataset::InstructionTriple| (t.metadata.form_id.clone(), t.metadata.attempt, t.code.source.clone());
    let pool: Vec<_> = all.kept.iter().map(key).collect();
    ensure(filtered.kept.iter().all(|t| pool.contains(&key(t))), || "filtered is not a subset".into())?;
    ensure(filtered.discarded.len() == u, || format!("{} discarded, u={u}", filtered.discarded.len()))?;
    Ok(format!("e={e} u={u}: filtered {} ⊆ no-filter {}", filtered.kept.len(), all.kept.len()))
}

fn metric_arithmetic() -> Check {
    let mut records = Vec::new();
    for i in 0..10 {
        let mut r = EvaluationRecord::new(&format!("f{i}"), "s", if i < 9 { SyntaxReport::ok() } else { SyntaxReport::invalid(vec![]) });
        if i < 6 {
            r.execution = Some(ExecutionReport::success(1));
            r.coverage = Some(CoverageReport {
                denominator_fields: (0..10).map(|k| format!("x{k}")).collect(),
                covered_fields: (0..9).map(|k| format!("x{k}")).collect(),
                coverage: 0.9,
            });
        } else if i < 9 {
            r.execution = Some(ExecutionReport {
                status: ExecStatus::AutomationError,
                failed_action_index: Some(0),
                error_class: Some("no such element".into()),
                message: None,
                wall_time_ms: 1,
            });
        }
        r.check_invariants().map_err(str::to_string)?;
        records.push(r);
    }
    let sum: f64 = records.iter().map(EvaluationRecord::coverage_value).sum();
    ensure((sum - 5.4).abs() < 1e-12, || format!("fixture coverage sum {sum}"))?;
    let s = aggregate(&records, AggregateOptions::default()).map_err(|e| e.to_string())?;
    let got = [s.syntax_correctness_pct, s.executability_pct, s.input_coverage_pct];
    for (g, w) in got.iter().zip([90.0, 60.0, 54.0]) {
        ensure((g - w).abs() <= PCT_TOL, || format!("got {got:?}"))?;
    }
    Ok(format!("{:.2} / {:.2} / {:.2}", got[0], got[1], got[2]))
}

fn stats() -> Check {
    let params = CorpusParams::new(42, 100);
    let docs = build_corpus(&FieldPool::builtin(), &params).unwrap().documents;
    let report = corpus_stats(&docs).map_err(|e| e.to_string())?;
    let total: f64 = report.field_type_distribution.values().sum();
    ensure((total - 1.0).abs() <= DISTRIBUTION_TOL, || format!("distribution sums to {total}"))?;
    for d in &docs {
        let n = d.spec.fields.len();
        ensure((params.fields_min..=params.fields_max).contains(&n), || {
            format!("{} has {n} fields", d.spec.form_id)
        })?;
    }
    ensure(report.fields_per_form.total() == docs.len(), || "histogram total".into())?;

    // Every radio action misbound to its wrapper.
    let h = harness();
    let heavy = corpus(9, MUTATION_FIXTURES, WRAPPER_HEAVY);
    let mut records = Vec::new();
    let mut specs: BTreeMap<String, FormSpec> = BTreeMap::new();
    for doc in &heavy {
        if !doc.spec.logical_fields().iter().any(|lf| lf.kind == FieldKind::Radio) {
            continue;
        }
        let script = oracle(doc, 9);
        let mut current = script.clone();
        let mut page = None;
        for i in 0..script.actions.len() {
            if let Ok(m) = mutate_at(&current, MutationKind::WrapperMisbind, doc, i) {
                if m.expected.status == Some(ExecStatus::Success) {
                    let TestScript::Actions(next) = m.script else { unreachable!() };
                    current = next;
                    page = m.page.or(page);
                }
            }
        }
        ensure(current != script, || format!("{}: no radio action misbound", doc.spec.form_id))?;
        records.push(evaluate(&h, doc, &TestScript::Actions(current), page.as_deref()));
        specs.insert(doc.spec.form_id.clone(), doc.spec.clone());
    }
    ensure(!records.is_empty(), || "no wrapper-heavy form with radios".into())?;
    let errors = per_field_type_errors(&records, &specs, CoverageScope::AllFillable);
    let radio = errors.get(&FieldKind::Radio).copied();
    ensure(radio.is_some_and(|r| (r - 100.0).abs() <= PCT_TOL), || format!("radio error {radio:?}"))?;
    Ok(format!(
        "distribution sum {total:.12}, counts within {}..={}, radio error 100.00 over {} forms",
        params.fields_min,
        params.fields_max,
        records.len()
    ))
}

fn emitter_equivalence() -> Outcome {
    if !runner::python_selenium_available(&runner::Registry::default()) {
        return Outcome::Skip("python3 with selenium not available".into());
    }
    let h = harness();
    let docs: Vec<HtmlDocument> = corpus(10, EQUIVALENCE_FORMS - EQUIVALENCE_FORMS / 2, CLASSIC)
        .into_iter()
        .chain(corpus(10, EQUIVALENCE_FORMS / 2, WRAPPER_HEAVY))
        .collect();
    for doc in &docs {
        let script = oracle(doc, 10);
        let py = TestScript::Raw(emit_source(&script, PYTHON_SELENIUM).unwrap());
        let native = evaluate(&h, doc, &TestScript::Actions(script), None);
        let emitted = evaluate(&h, doc, &py, None);
        if native.coverage.is_none() || native.coverage != emitted.coverage {
            return Outcome::Fail(format!(
                "{}: native {:?} vs python {:?} ({:?})",
                doc.spec.form_id, native.coverage, emitted.coverage, emitted.execution
            ));
        }
    }
    Outcome::Pass(format!("{} forms, identical coverage reports", docs.len()))
}

fn outcome(c: Check) -> Outcome {
    match c {
        Ok(s) => Outcome::Pass(s),
        Err(s) => Outcome::Fail(s),
    }
}

fn main() {
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("determinism", Box::new(|| outcome(determinism()))),
        ("oracle", Box::new(|| outcome(oracle_corpus()))),
        ("mutation-sensitivity", Box::new(|| outcome(mutation_sensitivity()))),
        ("filter", Box::new(|| outcome(filter()))),
        ("metric-arithmetic", Box::new(|| outcome(metric_arithmetic()))),
        ("stats", Box::new(|| outcome(stats()))),
        ("emitter-equivalence", Box::new(emitter_equivalence)),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Outcome::Pass(s) => println!("PASS {} {name}: {s}", i + 1),
            Outcome::Fail(s) => {
                println!("FAIL {} {name}: {s}", i + 1);
                failed.push(*name);
            }
            Outcome::Skip(s) => println!("SKIP {} {name}: {s}", i + 1),
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
