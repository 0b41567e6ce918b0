use std::collections::BTreeMap;

use formbench_core::corpus::{build_form, CorpusParams};
use formbench_core::coverage::{CoverageReport, CoverageScope};
use formbench_core::html::render::{render_form, WRAPPER_HEAVY};
use formbench_core::metrics::{
    aggregate, per_field_type_errors, AggregateOptions, EvaluationRecord, ExecStatus, ExecutionReport, SyntaxReport,
};
use formbench_core::mutation::{mutate, MutationKind};
use formbench_core::scenario::{reference_scenario, validate_against_form, FieldSelection, TestScenario};
use formbench_core::script::compile;
use formbench_core::stats::corpus_stats;
use formbench_core::FieldPool;
use proptest::prelude::*;

fn record(i: usize, valid: bool, ok: bool, cov: f64) -> EvaluationRecord {
    let syntax = if valid { SyntaxReport::ok() } else { SyntaxReport::invalid(vec![]) };
    let mut r = EvaluationRecord::new(&format!("form-{i:04}"), "s", syntax);
    if valid {
        let mut e = ExecutionReport::success(0);
        if !ok {
            e.status = ExecStatus::AutomationError;
        }
        r.execution = Some(e);
        r.coverage = Some(CoverageReport {
            denominator_fields: vec![],
            covered_fields: vec![],
            coverage: cov,
        });
    }
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn forms_are_pure_functions_of_seed_and_index(seed in any::<u64>(), index in 0usize..500) {
        let pool = FieldPool::builtin();
        let params = CorpusParams::new(seed, index + 1);
        let a = build_form(&pool, &params, index).unwrap();
        let b = build_form(&pool, &params, index).unwrap();
        prop_assert_eq!(&a.text, &b.text);
        let n = a.spec.fields.len();
        prop_assert!((params.fields_min..=params.fields_max).contains(&n));
    }

    #[test]
    fn reference_scenarios_validate_and_round_trip(seed in any::<u64>(), index in 0usize..200) {
        let pool = FieldPool::builtin();
        let doc = build_form(&pool, &CorpusParams::new(seed, 1), index).unwrap();
        for sel in [FieldSelection::RequiredOnly, FieldSelection::AllFillable] {
            let s = reference_scenario(&doc.spec, seed, sel).unwrap();
            prop_assert!(validate_against_form(&s, &doc.spec).is_clean());
            prop_assert_eq!(TestScenario::parse(&s.to_json()).unwrap(), s.clone());
            prop_assert!(compile(&s, &doc.spec).is_ok());
        }
    }

    #[test]
    fn mutation_is_deterministic(seed in any::<u64>(), mseed in any::<u64>(), k in 0usize..8) {
        let pool = FieldPool::builtin();
        let mut params = CorpusParams::new(seed, 1);
        params.style = WRAPPER_HEAVY.to_string();
        let doc = build_form(&pool, &params, 0).unwrap();
        let s = reference_scenario(&doc.spec, seed, FieldSelection::AllFillable).unwrap();
        let script = compile(&s, &doc.spec).unwrap();
        let kind = if k == 7 { MutationKind::DropFields(1) } else { MutationKind::FIXED[k] };
        prop_assert_eq!(mutate(&script, kind, &doc, mseed), mutate(&script, kind, &doc, mseed));
    }

    #[test]
    fn aggregate_is_order_independent(
        rows in prop::collection::vec((any::<bool>(), any::<bool>(), 0u32..=100), 1..40),
        rot in 0usize..40,
    ) {
        let records: Vec<EvaluationRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, (v, ok, c))| record(i, *v, *ok, *c as f64 / 100.0))
            .collect();
        let mut rotated = records.clone();
        rotated.rotate_left(rot % records.len());
        rotated.reverse();
        let a = aggregate(&records, AggregateOptions::default()).unwrap();
        let b = aggregate(&rotated, AggregateOptions::default()).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.executability_pct <= a.syntax_correctness_pct);
        for p in [a.syntax_correctness_pct, a.executability_pct, a.input_coverage_pct] {
            prop_assert!((0.0..=100.0).contains(&p));
        }
        let specs = BTreeMap::new();
        prop_assert_eq!(
            per_field_type_errors(&records, &specs, CoverageScope::AllFillable),
            per_field_type_errors(&rotated, &specs, CoverageScope::AllFillable)
        );
    }

    #[test]
    fn distribution_sums_to_one(seed in any::<u64>()) {
        let pool = FieldPool::builtin();
        let params = CorpusParams::new(seed, 8);
        let docs: Vec<_> = (0..8).map(|i| build_form(&pool, &params, i).unwrap()).collect();
        let stats = corpus_stats(&docs).unwrap();
        let sum: f64 = stats.field_type_distribution.values().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        prop_assert_eq!(stats.fields_per_form.total(), 8);
        prop_assert_eq!(stats.chars_per_form.total(), 8);
    }
}

#[test]
fn render_rejects_unknown_style() {
    let pool = FieldPool::builtin();
    let doc = build_form(&pool, &CorpusParams::new(0, 1), 0).unwrap();
    assert!(render_form(&doc.spec, "brutalist").is_err());
}
