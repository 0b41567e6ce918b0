//! Corpus metrics, the mis-binding taxonomy and per-field-type error rates.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::coverage::{self, CoverageReport, CoverageScope, Observations};
use crate::field::FieldKind;
use crate::html::dom::{Document, NodeId};
use crate::html::render::{FormSpec, LogicalField};
use crate::html::style::StyleSheet;
use crate::locate::css::{attr_disabled, MarkupState};
use crate::locate::resolve_webdriver;
use crate::num::round_half_up;
use crate::recorder::EventLog;
use crate::scenario::RenderedForm;
use crate::script::{Diagnostic, Verb};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxReport {
    pub valid: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl SyntaxReport {
    pub fn ok() -> Self {
        Self {
            valid: true,
            diagnostics: Vec::new(),
        }
    }

    pub fn invalid(diagnostics: Vec<Diagnostic>) -> Self {
        Self {
            valid: false,
            diagnostics,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Success,
    AutomationError,
    RunnerError,
    Timeout,
}

impl ExecStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecStatus::Success => "success",
            ExecStatus::AutomationError => "automation_error",
            ExecStatus::RunnerError => "runner_error",
            ExecStatus::Timeout => "timeout",
        }
    }
}

impl fmt::Display for ExecStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub status: ExecStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_action_index: Option<usize>,
    /// Raw protocol error string, e.g. `element not interactable`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub wall_time_ms: u64,
}

impl ExecutionReport {
    pub fn success(wall_time_ms: u64) -> Self {
        Self {
            status: ExecStatus::Success,
            failed_action_index: None,
            error_class: None,
            message: None,
            wall_time_ms,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    WrapperMisbind,
    HiddenOrDisabled,
    WrongGroupMember,
    CustomVsNativeDropdown,
    SubmitMisuse,
    Offscreen,
    ContextLeakage,
    LocatorUnresolved,
    ConstraintViolation,
    RunnerFailure,
    Timeout,
    Other,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 12] = [
        ErrorCategory::WrapperMisbind,
        ErrorCategory::HiddenOrDisabled,
        ErrorCategory::WrongGroupMember,
        ErrorCategory::CustomVsNativeDropdown,
        ErrorCategory::SubmitMisuse,
        ErrorCategory::Offscreen,
        ErrorCategory::ContextLeakage,
        ErrorCategory::LocatorUnresolved,
        ErrorCategory::ConstraintViolation,
        ErrorCategory::RunnerFailure,
        ErrorCategory::Timeout,
        ErrorCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::WrapperMisbind => "wrapper_misbind",
            ErrorCategory::HiddenOrDisabled => "hidden_or_disabled",
            ErrorCategory::WrongGroupMember => "wrong_group_member",
            ErrorCategory::CustomVsNativeDropdown => "custom_vs_native_dropdown",
            ErrorCategory::SubmitMisuse => "submit_misuse",
            ErrorCategory::Offscreen => "offscreen",
            ErrorCategory::ContextLeakage => "context_leakage",
            ErrorCategory::LocatorUnresolved => "locator_unresolved",
            ErrorCategory::ConstraintViolation => "constraint_violation",
            ErrorCategory::RunnerFailure => "runner_failure",
            ErrorCategory::Timeout => "timeout",
            ErrorCategory::Other => "other",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub form_id: String,
    pub script_id: String,
    pub syntax: SyntaxReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution: Option<ExecutionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ErrorCategory>,
    /// Logical fields the classified failure involves.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub implicated_fields: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_log: Option<EventLog>,
}

impl EvaluationRecord {
    pub fn new(form_id: &str, script_id: &str, syntax: SyntaxReport) -> Self {
        Self {
            form_id: form_id.to_string(),
            script_id: script_id.to_string(),
            syntax,
            execution: None,
            coverage: None,
            classification: None,
            implicated_fields: Vec::new(),
            classification_note: None,
            event_log: None,
        }
    }

    pub fn executed_ok(&self) -> bool {
        self.execution.as_ref().is_some_and(|e| e.status == ExecStatus::Success)
    }

    pub fn coverage_value(&self) -> f64 {
        self.coverage.as_ref().map(|c| c.coverage).unwrap_or(0.0)
    }

    /// Whether the record needs a failure category.
    pub fn is_failure(&self) -> bool {
        !self.syntax.valid || !self.executed_ok() || self.coverage_value() < 1.0
    }

    pub fn check_invariants(&self) -> Result<(), &'static str> {
        if self.execution.is_some() && !self.syntax.valid {
            return Err("invalid scripts are never executed");
        }
        if self.syntax.valid && !self.syntax.diagnostics.is_empty() {
            return Err("valid syntax carries no diagnostics");
        }
        if let Some(e) = &self.execution {
            if e.status == ExecStatus::Success && e.failed_action_index.is_some() {
                return Err("successful executions have no failed action");
            }
        }
        if self.classification.is_some() && !self.is_failure() {
            return Err("only failures are classified");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateOptions {
    /// Average coverage over successfully executed records only.
    pub coverage_over_executed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub syntax_correctness_pct: f64,
    pub executability_pct: f64,
    pub input_coverage_pct: f64,
    pub n_records: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("no records to aggregate")]
    Empty,
}

/// `fraction` as a percentage rounded to two decimals.
pub fn pct(fraction: f64) -> f64 {
    round_half_up(fraction * 10_000.0) / 100.0
}

pub fn aggregate(records: &[EvaluationRecord], opts: AggregateOptions) -> Result<MetricsSummary, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = records.len() as f64;
    let valid = records.iter().filter(|r| r.syntax.valid).count() as f64;
    let executed = records.iter().filter(|r| r.executed_ok()).count() as f64;
    let coverage = if opts.coverage_over_executed {
        let ran: Vec<&EvaluationRecord> = records.iter().filter(|r| r.executed_ok()).collect();
        if ran.is_empty() {
            0.0
        } else {
            ran.iter().map(|r| r.coverage_value()).sum::<f64>() / ran.len() as f64
        }
    } else {
        records.iter().map(|r| r.coverage_value()).sum::<f64>() / n
    };
    Ok(MetricsSummary {
        syntax_correctness_pct: pct(valid / n),
        executability_pct: pct(executed / n),
        input_coverage_pct: pct(coverage),
        n_records: records.len(),
    })
}

impl MetricsSummary {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str("| Records | Syntax Correctness (%) | Executability (%) | Input Coverage (%) |\n");
        out.push_str("|--------:|-----------------------:|------------------:|-------------------:|\n");
        out.push_str(&format!(
            "| {:>7} | {:>22.2} | {:>17.2} | {:>18.2} |\n",
            self.n_records, self.syntax_correctness_pct, self.executability_pct, self.input_coverage_pct
        ));
        out
    }
}

/// One element lookup made by a script, in execution order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// W3C locator strategy (`css selector`, `xpath`, ...).
    pub using: String,
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verb: Option<Verb>,
    /// Protocol error the interaction produced, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// What the classifier gets to look at.
#[derive(Clone, Debug, Default)]
pub struct FailureEvidence {
    /// The page as served (including injected mutant elements).
    pub snapshot: Option<Document>,
    pub trace: Vec<TraceEntry>,
    pub observations: Option<Observations>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub category: ErrorCategory,
    pub implicated_fields: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Classification {
    fn new(category: ErrorCategory, implicated: Vec<String>) -> Self {
        Self {
            category,
            implicated_fields: implicated,
            note: None,
        }
    }
}

struct Snapshot<'a> {
    rendered: &'a RenderedForm,
    fields: Vec<LogicalField>,
    sheet: StyleSheet,
}

impl Snapshot<'_> {
    fn doc(&self) -> &Document {
        &self.rendered.doc
    }

    fn intended_controls(&self) -> Vec<(NodeId, &LogicalField)> {
        let mut out = Vec::new();
        for lf in &self.fields {
            for n in self.rendered.field_nodes(lf) {
                if self.doc().is_control(n) {
                    out.push((n, lf));
                }
            }
        }
        out
    }

    fn field_named(&self, name: &str) -> Vec<String> {
        self.fields
            .iter()
            .filter(|lf| lf.name == name)
            .map(|lf| lf.name.clone())
            .collect()
    }

    fn is_custom_dropdown(&self, n: NodeId) -> bool {
        let doc = self.doc();
        core::iter::once(n)
            .chain(doc.ancestors(n))
            .any(|a| matches!(doc.attr(a, "role"), Some("listbox" | "combobox" | "option")))
    }

    /// The category one trace entry exhibits, if any.
    fn judge(&self, entry: &TraceEntry) -> Option<Classification> {
        let doc = self.doc();
        let matches = match resolve_webdriver(doc, &entry.using, &entry.value, None, &MarkupState) {
            Ok(m) => m,
            Err(_) => return Some(Classification::new(ErrorCategory::LocatorUnresolved, Vec::new())),
        };
        let Some(&n) = matches.first() else {
            return Some(Classification::new(ErrorCategory::LocatorUnresolved, Vec::new()));
        };
        let form = self.rendered.form;
        let in_form = doc.is_ancestor(form, n);
        let intended = self.intended_controls();
        let is_control = doc.is_control(n) || doc.tag(n) == Some("option");

        if self.is_custom_dropdown(n) && !doc.is_control(n) {
            let implicated = intended
                .iter()
                .filter(|(c, _)| doc.is_ancestor(n, *c) || doc.parent(*c) == doc.parent(n))
                .map(|(_, lf)| lf.name.clone())
                .collect();
            return Some(Classification::new(ErrorCategory::CustomVsNativeDropdown, implicated));
        }
        if !is_control && n != form {
            let mut implicated: Vec<String> = intended
                .iter()
                .filter(|(c, _)| doc.is_ancestor(n, *c) || (doc.parent(*c) == doc.parent(n) && doc.parent(n).is_some()))
                .map(|(_, lf)| lf.name.clone())
                .collect();
            implicated.dedup();
            if !implicated.is_empty() {
                return Some(Classification::new(ErrorCategory::WrapperMisbind, implicated));
            }
            if entry.verb.is_some_and(|v| v != Verb::SubmitForm) && in_form {
                // A non-control inside the form that wraps nothing.
                return Some(Classification::new(ErrorCategory::WrapperMisbind, Vec::new()));
            }
        }
        if is_control {
            let control = if doc.tag(n) == Some("option") {
                doc.ancestors(n).find(|a| doc.tag(*a) == Some("select")).unwrap_or(n)
            } else {
                n
            };
            let name = doc.attr(control, "name").unwrap_or("").to_string();
            let vis = self.sheet.visibility(doc, n);
            if vis.is_hidden() || attr_disabled(doc, n) {
                return Some(Classification::new(ErrorCategory::HiddenOrDisabled, self.field_named(&name)));
            }
            if vis.offscreen {
                return Some(Classification::new(ErrorCategory::Offscreen, self.field_named(&name)));
            }
            if doc.form_owner(control) != Some(form) {
                return Some(Classification::new(ErrorCategory::ContextLeakage, self.field_named(&name)));
            }
            let is_radio = |x: NodeId| doc.tag(x) == Some("input") && doc.element(x).is_some_and(|e| e.input_type() == "radio");
            if is_radio(n) {
                let group: Vec<&NodeId> = matches
                    .iter()
                    .filter(|m| is_radio(**m) && doc.attr(**m, "name") == Some(name.as_str()))
                    .collect();
                if group.len() > 1 {
                    return Some(Classification::new(ErrorCategory::WrongGroupMember, self.field_named(&name)));
                }
            }
            let button_type = match doc.tag(n) {
                Some("button") => doc.attr(n, "type").map(str::to_ascii_lowercase).unwrap_or_else(|| "submit".to_string()),
                Some("input") => doc.element(n).map(|e| e.input_type()).unwrap_or_default(),
                _ => String::new(),
            };
            if entry.verb == Some(Verb::Click) && matches!(button_type.as_str(), "reset" | "button") {
                return Some(Classification::new(
                    ErrorCategory::SubmitMisuse,
                    self.fields.iter().filter(|l| l.is_fillable()).map(|l| l.name.clone()).collect(),
                ));
            }
            if entry.verb == Some(Verb::SelectOption) && doc.tag(n) != Some("select") && doc.tag(n) != Some("option") {
                return Some(Classification::new(ErrorCategory::CustomVsNativeDropdown, self.field_named(&name)));
            }
        }
        None
    }
}

/// Assigns exactly one category to a failing record, by ordered rules over
/// the served page: wrapper, hidden/disabled, offscreen, context leakage,
/// group member, submit misuse, unresolved, constraint violation, other.
/// The entry that raised the protocol error is judged first.
pub fn classify_failure(record: &EvaluationRecord, spec: &FormSpec, evidence: &FailureEvidence) -> Classification {
    if !record.syntax.valid {
        let mut c = Classification::new(ErrorCategory::Other, Vec::new());
        c.note = Some("syntax invalid; not executed".to_string());
        return c;
    }
    match record.execution.as_ref().map(|e| e.status) {
        Some(ExecStatus::Timeout) => return Classification::new(ErrorCategory::Timeout, Vec::new()),
        Some(ExecStatus::RunnerError) => return Classification::new(ErrorCategory::RunnerFailure, Vec::new()),
        _ => {}
    }
    let Some(doc) = &evidence.snapshot else {
        let mut c = Classification::new(ErrorCategory::Other, Vec::new());
        c.note = Some("snapshot unavailable".to_string());
        return c;
    };
    let rendered = RenderedForm::from_html(&doc.serialize(), &spec.form_id);
    let snap = Snapshot {
        sheet: StyleSheet::from_document(&rendered.doc),
        rendered: &rendered,
        fields: spec.logical_fields(),
    };
    let failing = evidence.trace.iter().filter(|e| e.error.is_some());
    let rest = evidence.trace.iter().filter(|e| e.error.is_none());
    for entry in failing.chain(rest) {
        if let Some(c) = snap.judge(entry) {
            return c;
        }
    }
    if let Some(obs) = &evidence.observations {
        let invalid: Vec<String> = spec
            .fillable_fields()
            .into_iter()
            .filter(|lf| match obs.get(&lf.name) {
                Some(coverage::Observation::Text(v)) => !v.is_empty() && !coverage::is_covered(spec, lf, obs.get(&lf.name)),
                _ => false,
            })
            .map(|lf| lf.name)
            .collect();
        if !invalid.is_empty() {
            return Classification::new(ErrorCategory::ConstraintViolation, invalid);
        }
    }
    Classification::new(ErrorCategory::Other, Vec::new())
}

/// Fills in `classification` and `implicated_fields` when the record is a
/// failure, clears them otherwise.
pub fn apply_classification(record: &mut EvaluationRecord, spec: &FormSpec, evidence: &FailureEvidence) {
    if record.is_failure() {
        let c = classify_failure(record, spec, evidence);
        record.classification = Some(c.category);
        record.implicated_fields = c.implicated_fields;
        record.classification_note = c.note;
    } else {
        record.classification = None;
        record.implicated_fields.clear();
        record.classification_note = None;
    }
}

/// Error rate per field kind over logical field instances: uncovered or
/// implicated instances divided by all instances, as a percentage. Kinds
/// with no instances are omitted. Records without a coverage report count
/// every field in `scope` as an error.
pub fn per_field_type_errors(
    records: &[EvaluationRecord],
    specs: &BTreeMap<String, FormSpec>,
    scope: CoverageScope,
) -> BTreeMap<FieldKind, f64> {
    let mut totals: BTreeMap<FieldKind, (u64, u64)> = BTreeMap::new();
    for r in records {
        let Some(spec) = specs.get(&r.form_id) else { continue };
        let denom: Vec<LogicalField> = match &r.coverage {
            Some(c) => spec
                .logical_fields()
                .into_iter()
                .filter(|lf| c.denominator_fields.contains(&lf.name))
                .collect(),
            None => coverage::denominator(spec, scope),
        };
        let implicated: BTreeSet<&String> = if r.classification.is_some() {
            r.implicated_fields.iter().collect()
        } else {
            BTreeSet::new()
        };
        for lf in denom {
            let covered = r.coverage.as_ref().is_some_and(|c| c.covered_fields.contains(&lf.name));
            let entry = totals.entry(lf.kind).or_insert((0, 0));
            entry.1 += 1;
            if !covered || implicated.contains(&lf.name) {
                entry.0 += 1;
            }
        }
    }
    totals
        .into_iter()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(k, (e, n))| (k, pct(e as f64 / n as f64)))
        .collect()
}

/// Count of classified records per category.
pub fn taxonomy_counts(records: &[EvaluationRecord]) -> BTreeMap<ErrorCategory, usize> {
    let mut out = BTreeMap::new();
    for r in records {
        if let Some(c) = r.classification {
            *out.entry(c).or_insert(0) += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(valid: bool, ok: bool, cov: f64) -> EvaluationRecord {
        let mut r = EvaluationRecord::new("f", "s", if valid { SyntaxReport::ok() } else { SyntaxReport::invalid(Vec::new()) });
        if valid {
            let mut e = ExecutionReport::success(1);
            if !ok {
                e.status = ExecStatus::AutomationError;
                e.failed_action_index = Some(0);
            }
            r.execution = Some(e);
            r.coverage = Some(CoverageReport {
                denominator_fields: Vec::new(),
                covered_fields: Vec::new(),
                coverage: cov,
            });
        }
        r
    }

    #[test]
    fn arithmetic() {
        let mut rs = Vec::new();
        for _ in 0..6 {
            rs.push(rec(true, true, 0.9));
        }
        for _ in 0..3 {
            rs.push(rec(true, false, 0.0));
        }
        rs.push(rec(false, false, 0.0));
        let s = aggregate(&rs, AggregateOptions::default()).unwrap();
        assert_eq!(
            (s.syntax_correctness_pct, s.executability_pct, s.input_coverage_pct),
            (90.0, 60.0, 54.0)
        );
        assert!(s.to_table().contains("90.00"));
        let s = aggregate(&rs, AggregateOptions { coverage_over_executed: true }).unwrap();
        assert_eq!(s.input_coverage_pct, 90.0);
        assert_eq!(aggregate(&[], AggregateOptions::default()), Err(MetricsError::Empty));
    }

    #[test]
    fn pct_rounds_to_two_decimals() {
        assert_eq!(pct(0.74678), 74.68);
        assert_eq!(pct(1.0), 100.0);
        assert_eq!(pct(2.0 / 3.0), 66.67);
    }
}
