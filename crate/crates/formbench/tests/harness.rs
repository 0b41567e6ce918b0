use formbench::harness::{Harness, HarnessConfig, Job};
use formbench::runner;
use formbench_core::corpus::{build_corpus, CorpusParams};
use formbench_core::html::render::WRAPPER_HEAVY;
use formbench_core::metrics::ExecStatus;
use formbench_core::mutation::{mutate, mutate_at, MutationKind};
use formbench_core::scenario::{reference_scenario, FieldSelection};
use formbench_core::script::{compile, emit_source, TestScript, PYTHON_SELENIUM};
use formbench_core::FieldPool;

fn oracle_scripts(seed: u64, count: usize, style: &str) -> (Vec<formbench_core::html::render::HtmlDocument>, Vec<TestScript>) {
    let mut params = CorpusParams::new(seed, count);
    params.style = style.to_string();
    let corpus = build_corpus(&FieldPool::builtin(), &params).unwrap();
    let scripts = corpus
        .documents
        .iter()
        .map(|d| {
            let sc = reference_scenario(&d.spec, seed, FieldSelection::AllFillable).unwrap();
            TestScript::Actions(compile(&sc, &d.spec).unwrap())
        })
        .collect();
    (corpus.documents, scripts)
}

#[test]
fn oracle_scripts_cover_everything_natively() {
    let harness = Harness::start(HarnessConfig {
        instrument: true,
        ..HarnessConfig::default()
    })
    .unwrap();
    for style in ["classic", WRAPPER_HEAVY] {
        let (docs, scripts) = oracle_scripts(7, 20, style);
        let jobs: Vec<Job> = docs
            .iter()
            .zip(&scripts)
            .enumerate()
            .map(|(i, (d, s))| Job { form: d, script: s, script_id: format!("s{i}"), page: None })
            .collect();
        let records = harness.evaluate_all(&jobs, 4).unwrap();
        for r in &records {
            assert!(r.executed_ok(), "{style} {}: {:?}", r.form_id, r.execution);
            assert_eq!(r.coverage_value(), 1.0, "{style} {}: {:?}", r.form_id, r.coverage);
            let log = r.event_log.as_ref().expect("instrumented run has a log");
            assert!(!log.events.is_empty());
        }
    }
}

#[test]
fn oracle_python_scripts_match_native() {
    if !runner::python_selenium_available(&runner::Registry::default()) {
        eprintln!("SKIP: python selenium runner not available");
        return;
    }
    let harness = Harness::start(HarnessConfig::default()).unwrap();
    let (docs, scripts) = oracle_scripts(11, 5, "classic");
    for (d, s) in docs.iter().zip(&scripts) {
        let TestScript::Actions(a) = s else { unreachable!() };
        let py = TestScript::Raw(emit_source(a, PYTHON_SELENIUM).unwrap());
        let native = harness.evaluate(&Job { form: d, script: s, script_id: "n".into(), page: None }).unwrap();
        let emitted = harness.evaluate(&Job { form: d, script: &py, script_id: "p".into(), page: None }).unwrap();
        assert_eq!(emitted.execution.as_ref().unwrap().status, ExecStatus::Success, "{:?}", emitted.execution);
        assert_eq!(native.coverage, emitted.coverage);
    }
}

/// Runs the oracle suite against an external endpoint named by
/// `FORMBENCH_TEST_WEBDRIVER_URL` (e.g. a local chromedriver).
#[test]
#[ignore]
fn oracle_against_external_webdriver() {
    let Ok(url) = std::env::var("FORMBENCH_TEST_WEBDRIVER_URL") else { return };
    let caps: serde_json::Value = std::env::var("FORMBENCH_TEST_CAPABILITIES")
        .ok()
        .map(|c| serde_json::from_str(&c).unwrap())
        .unwrap_or(serde_json::json!({}));
    let harness = Harness::start(HarnessConfig {
        webdriver_url: Some(url),
        capabilities: caps,
        instrument: true,
        ..HarnessConfig::default()
    })
    .unwrap();
    for style in ["classic", WRAPPER_HEAVY] {
        let (docs, scripts) = oracle_scripts(7, 10, style);
        for (d, s) in docs.iter().zip(&scripts) {
            let r = harness.evaluate(&Job { form: d, script: s, script_id: "x".into(), page: None }).unwrap();
            assert!(r.executed_ok(), "{style} {}: {:?}", r.form_id, r.execution);
            assert_eq!(r.coverage_value(), 1.0, "{style} {}: {:?}", r.form_id, r.coverage);
        }
    }
}

/// Mutants behave the same on the reference browser and on an external
/// endpoint.
#[test]
#[ignore]
fn mutants_agree_with_external_webdriver() {
    use formbench_core::mutation::{mutate, MutationKind};
    let Ok(url) = std::env::var("FORMBENCH_TEST_WEBDRIVER_URL") else { return };
    let caps: serde_json::Value = std::env::var("FORMBENCH_TEST_CAPABILITIES")
        .ok()
        .map(|c| serde_json::from_str(&c).unwrap())
        .unwrap_or(serde_json::json!({}));
    let ext = Harness::start(HarnessConfig {
        webdriver_url: Some(url),
        capabilities: caps,
        timeout_ms: 60_000,
        ..HarnessConfig::default()
    })
    .unwrap();
    let reference = Harness::start(HarnessConfig::default()).unwrap();
    let mut kinds = MutationKind::FIXED.to_vec();
    kinds.push(MutationKind::DropFields(2));
    let mut mismatches = Vec::new();
    for style in ["classic", WRAPPER_HEAVY] {
        let (docs, scripts) = oracle_scripts(3, 6, style);
        for (d, s) in docs.iter().zip(&scripts) {
            let TestScript::Actions(a) = s else { unreachable!() };
            for kind in &kinds {
                let Ok(m) = mutate(a, *kind, d, 5) else { continue };
                let job = Job { form: d, script: &m.script, script_id: kind.to_string(), page: m.page.as_deref() };
                let x = ext.evaluate(&job).unwrap();
                let y = reference.evaluate(&job).unwrap();
                let key = |r: &formbench_core::metrics::EvaluationRecord| {
                    (
                        r.execution.as_ref().map(|e| (e.status, e.failed_action_index, e.error_class.clone())),
                        r.coverage.clone(),
                        r.classification,
                    )
                };
                if key(&x) != key(&y) {
                    mismatches.push(format!("{style} {} {kind}:\n  ext {:?}\n  ref {:?}", d.spec.form_id, key(&x), key(&y)));
                }
            }
        }
    }
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}

fn strip_timing(mut r: formbench_core::metrics::EvaluationRecord) -> formbench_core::metrics::EvaluationRecord {
    if let Some(e) = r.execution.as_mut() {
        e.wall_time_ms = 0;
    }
    if let Some(log) = r.event_log.as_mut() {
        for e in &mut log.events {
            e.timestamp_ms = 0;
        }
    }
    r
}

#[test]
fn mutants_meet_their_expectations() {
    let harness = Harness::start(HarnessConfig::default()).unwrap();
    for style in ["classic", WRAPPER_HEAVY] {
        let (docs, scripts) = oracle_scripts(21, 8, style);
        for (i, (d, s)) in docs.iter().zip(&scripts).enumerate() {
            let TestScript::Actions(a) = s else { unreachable!() };
            for kind in MutationKind::FIXED.into_iter().chain([MutationKind::DropFields(1)]) {
                let Ok(m) = mutate(a, kind, d, i as u64) else { continue };
                let r = harness
                    .evaluate(&Job { form: d, script: &m.script, script_id: kind.to_string(), page: m.page.as_deref() })
                    .unwrap();
                let ctx = format!("{style} {} {kind}: {:?} {:?}", d.spec.form_id, r.execution, r.classification);
                assert_eq!(r.syntax.valid, m.expected.syntax_valid, "{ctx}");
                assert_eq!(r.execution.as_ref().map(|e| e.status), m.expected.status, "{ctx}");
                if m.expected.failed_action_index.is_some() {
                    assert_eq!(r.execution.as_ref().unwrap().failed_action_index, m.expected.failed_action_index, "{ctx}");
                }
                assert_eq!(r.classification, m.expected.category, "{ctx}");
                r.check_invariants().unwrap();
            }
        }
    }
}

#[test]
fn failed_scripts_keep_partial_coverage() {
    let harness = Harness::start(HarnessConfig::default()).unwrap();
    let (docs, scripts) = oracle_scripts(23, 10, "classic");
    let mut checked = 0;
    for (d, s) in docs.iter().zip(&scripts) {
        let TestScript::Actions(a) = s else { unreachable!() };
        let fills = a.actions.iter().filter(|x| x.is_fill()).count();
        let last_fill = a.actions.iter().rposition(|x| x.is_fill()).unwrap();
        if fills < 2 {
            continue;
        }
        let Ok(m) = mutate_at(a, MutationKind::HiddenTarget, d, last_fill) else { continue };
        let r = harness
            .evaluate(&Job { form: d, script: &m.script, script_id: "h".into(), page: m.page.as_deref() })
            .unwrap();
        assert_eq!(r.execution.as_ref().unwrap().status, ExecStatus::AutomationError);
        let cov = r.coverage.as_ref().expect("failed runs still report coverage");
        assert!(cov.coverage > 0.0 && cov.coverage < 1.0, "{}: {cov:?}", d.spec.form_id);
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn batch_order_does_not_change_records() {
    let harness = Harness::start(HarnessConfig::default()).unwrap();
    let (docs, scripts) = oracle_scripts(29, 10, WRAPPER_HEAVY);
    let mutants: Vec<(usize, TestScript, Option<String>)> = docs
        .iter()
        .zip(&scripts)
        .enumerate()
        .map(|(i, (d, s))| {
            let TestScript::Actions(a) = s else { unreachable!() };
            let kind = MutationKind::FIXED[i % MutationKind::FIXED.len()];
            match mutate(a, kind, d, i as u64) {
                Ok(m) => (i, m.script, m.page),
                Err(_) => (i, s.clone(), None),
            }
        })
        .collect();
    let jobs = |order: &[usize]| -> Vec<Job<'_>> {
        order
            .iter()
            .map(|&k| {
                let (i, s, p) = &mutants[k];
                Job { form: &docs[*i], script: s, script_id: format!("m{k}"), page: p.as_deref() }
            })
            .collect()
    };
    let forward: Vec<usize> = (0..mutants.len()).collect();
    let permuted: Vec<usize> = [7, 2, 9, 0, 5, 3, 8, 1, 6, 4].into_iter().filter(|k| *k < mutants.len()).collect();
    let a = harness.evaluate_all(&jobs(&forward), 1).unwrap();
    let b = harness.evaluate_all(&jobs(&permuted), 3).unwrap();
    for (pos, &k) in permuted.iter().enumerate() {
        assert_eq!(strip_timing(a[k].clone()), strip_timing(b[pos].clone()), "script m{k}");
    }
}

#[test]
fn recorder_does_not_change_outcomes() {
    let plain = Harness::start(HarnessConfig::default()).unwrap();
    let instrumented = Harness::start(HarnessConfig { instrument: true, ..HarnessConfig::default() }).unwrap();
    let (docs, scripts) = oracle_scripts(31, 8, "classic");
    for (i, (d, s)) in docs.iter().zip(&scripts).enumerate() {
        let TestScript::Actions(a) = s else { unreachable!() };
        let variants = [s.clone(), mutate(a, MutationKind::DropFields(1), d, i as u64).unwrap().script];
        for v in &variants {
            let job = Job { form: d, script: v, script_id: "r".into(), page: None };
            let x = plain.evaluate(&job).unwrap();
            let y = instrumented.evaluate(&job).unwrap();
            assert!(x.event_log.is_none());
            assert!(y.event_log.as_ref().is_some_and(|l| !l.header.malformed));
            assert_eq!(x.execution.map(|e| e.status), y.execution.map(|e| e.status));
            assert_eq!(x.coverage, y.coverage);
            assert_eq!(x.classification, y.classification);
        }
    }
}
