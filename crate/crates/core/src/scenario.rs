//! The structured test scenario: per-field identifier, dummy data and
//! instruction order, plus the ground-truth scenario derived from a form.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dummy::{self, DummyError};
use crate::field::{FieldKind, FieldSpec};
use crate::html::dom::{Document, NodeId};
use crate::html::render::{self, FormSpec, LogicalField, RenderError};
use crate::locate::css::MarkupState;
use crate::locate::Locator;
use crate::rng::derive_seed;

/// The only submission mechanism a scenario may name.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Submission {
    #[default]
    #[serde(rename = "form.submit")]
    FormSubmit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioField {
    pub name: String,
    pub identifier: Locator,
    pub field_type: FieldKind,
    pub required: bool,
    pub html_snippet: String,
    pub dummy_data: String,
    pub instruction: String,
    pub order: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestScenario {
    pub form_fields: Vec<ScenarioField>,
    pub expected_outcome: String,
    pub submission: Submission,
}

/// Which fields a derived scenario includes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldSelection {
    /// Only required fields (the prompt regime).
    #[default]
    RequiredOnly,
    /// Every fillable field.
    AllFillable,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("malformed scenario at line {line}, column {column}: {message}")]
    Malformed { line: usize, column: usize, message: String },
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invariant violation at `{path}`: {message}")]
    Invariant { path: String, message: String },
    #[error("form has no required fields to include")]
    NoRequiredFields,
    #[error("form has no fillable fields")]
    NoFillableFields,
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Dummy(#[from] DummyError),
}

pub const EXPECTED_OUTCOME: &str = "The form is submitted successfully with all provided values.";

const TOP_KEYS: [&str; 3] = ["form_fields", "expected_outcome", "submission"];

/// Option values declared by an html snippet (select options or radio
/// inputs), if it declares any.
fn snippet_option_values(snippet: &str) -> Vec<String> {
    let doc = Document::parse(snippet);
    doc.elements()
        .filter(|n| {
            doc.tag(*n) == Some("option")
                || (doc.tag(*n) == Some("input") && doc.element(*n).is_some_and(|e| e.input_type() == "radio"))
        })
        .filter_map(|n| doc.attr(n, "value").map(str::to_string))
        .filter(|v| !v.is_empty())
        .collect()
}

impl TestScenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ScenarioError::Malformed {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self, ScenarioError> {
        let schema = |path: &str, message: String| ScenarioError::Schema {
            path: path.to_string(),
            message,
        };
        let Value::Object(map) = &value else {
            return Err(schema("$", "expected an object".to_string()));
        };
        for k in map.keys() {
            if !TOP_KEYS.contains(&k.as_str()) {
                return Err(schema(&format!("$.{k}"), "unknown key".to_string()));
            }
        }
        for k in TOP_KEYS {
            if !map.contains_key(k) {
                return Err(schema(&format!("$.{k}"), "missing key".to_string()));
            }
        }
        let Some(Value::Array(items)) = map.get("form_fields") else {
            return Err(schema("$.form_fields", "expected an array".to_string()));
        };
        let mut fields = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            let f: ScenarioField = serde_json::from_value(item.clone())
                .map_err(|e| schema(&format!("$.form_fields[{i}]"), e.to_string()))?;
            fields.push(f);
        }
        let expected_outcome = match map.get("expected_outcome") {
            Some(Value::String(s)) => s.clone(),
            _ => return Err(schema("$.expected_outcome", "expected a string".to_string())),
        };
        let submission: Submission = serde_json::from_value(map["submission"].clone())
            .map_err(|e| schema("$.submission", e.to_string()))?;
        let scenario = TestScenario {
            form_fields: fields,
            expected_outcome,
            submission,
        };
        scenario.check_invariants()?;
        Ok(scenario)
    }

    pub fn check_invariants(&self) -> Result<(), ScenarioError> {
        let inv = |i: usize, key: &str, message: String| ScenarioError::Invariant {
            path: format!("$.form_fields[{i}].{key}"),
            message,
        };
        let n = self.form_fields.len();
        let orders: BTreeSet<u32> = self.form_fields.iter().map(|f| f.order).collect();
        if orders.len() != n || orders.iter().copied().ne(1..=n as u32) {
            return Err(ScenarioError::Invariant {
                path: "$.form_fields[*].order".to_string(),
                message: format!("order values must be exactly 1..{n}"),
            });
        }
        for (i, f) in self.form_fields.iter().enumerate() {
            match f.field_type {
                FieldKind::Submit => {
                    return Err(inv(i, "field_type", "submit controls are excluded; use form.submit()".to_string()));
                }
                FieldKind::Date if dummy::parse_us_date(&f.dummy_data).is_none() => {
                    return Err(inv(
                        i,
                        "dummy_data",
                        format!("`{}` is not a calendar-valid mm/dd/yyyy date", f.dummy_data),
                    ));
                }
                FieldKind::Select | FieldKind::Radio => {
                    let options = snippet_option_values(&f.html_snippet);
                    if !options.is_empty() && !options.contains(&f.dummy_data) {
                        return Err(inv(
                            i,
                            "dummy_data",
                            format!("`{}` is not one of the field's option values", f.dummy_data),
                        ));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Canonical pretty serialization (fixed key order).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Fields sorted by `order`.
    pub fn ordered_fields(&self) -> Vec<&ScenarioField> {
        let mut v: Vec<&ScenarioField> = self.form_fields.iter().collect();
        v.sort_by_key(|f| f.order);
        v
    }
}

/// The rendered form parsed back, used to resolve identifiers.
pub struct RenderedForm {
    pub doc: Document,
    pub form: NodeId,
}

impl RenderedForm {
    pub fn new(spec: &FormSpec) -> Result<Self, RenderError> {
        let html = render::render_form(spec, render::CLASSIC)?;
        Ok(Self::from_html(&html.text, &spec.form_id))
    }

    pub fn from_html(html: &str, form_id: &str) -> Self {
        let doc = Document::parse(html);
        let form = doc
            .element_by_id(form_id)
            .filter(|n| doc.tag(*n) == Some("form"))
            .or_else(|| doc.elements_by_tag("form").next())
            .unwrap_or(Document::ROOT);
        Self { doc, form }
    }

    /// The nodes that count as "the control" of a logical field: the
    /// in-form elements named after it, plus the enclosing fieldset of a
    /// radio group.
    pub fn field_nodes(&self, lf: &LogicalField) -> Vec<NodeId> {
        let doc = &self.doc;
        let mut out: Vec<NodeId> = doc
            .descendant_elements(self.form)
            .filter(|n| doc.is_control(*n) && doc.attr(*n, "name") == Some(lf.name.as_str()))
            .collect();
        if lf.kind == FieldKind::Radio {
            if let Some(first) = out.first() {
                if let Some(fs) = doc.closest(*first, "fieldset") {
                    out.push(fs);
                }
            }
        }
        out
    }

    /// The logical field `node` belongs to, if any.
    pub fn field_of<'a>(&self, spec_fields: &'a [LogicalField], node: NodeId) -> Option<&'a LogicalField> {
        spec_fields.iter().find(|lf| self.field_nodes(lf).contains(&node))
    }

    pub fn snippet(&self, lf: &LogicalField) -> String {
        let nodes = self.field_nodes(lf);
        let node = match lf.kind {
            FieldKind::Radio => nodes.last().copied(),
            _ => nodes.first().copied(),
        };
        node.map(|n| self.doc.outer_html(n)).unwrap_or_default()
    }
}

fn instruction(lf: &LogicalField, f: &FieldSpec, value: &str) -> String {
    let caption = match (lf.kind, &f.group) {
        (FieldKind::Radio, Some(_)) => crate::field::prettify(&lf.name),
        _ => f.caption(),
    };
    match lf.kind {
        FieldKind::Select => format!("Select \"{value}\" in the \"{caption}\" dropdown."),
        FieldKind::Radio => {
            let label = lf
                .options
                .iter()
                .find(|o| o.value == value)
                .map(|o| o.label.as_str())
                .unwrap_or(value);
            format!("Choose \"{label}\" for \"{caption}\".")
        }
        FieldKind::Checkbox => format!("Check the \"{caption}\" checkbox."),
        _ => format!("Enter \"{value}\" into the \"{caption}\" field."),
    }
}

/// Ground-truth scenario for a known form. Identifiers use the control's id
/// when it has one, else its name; dummy data satisfies every constraint.
pub fn reference_scenario(spec: &FormSpec, seed: u64, selection: FieldSelection) -> Result<TestScenario, ScenarioError> {
    let rendered = RenderedForm::new(spec)?;
    let chosen: Vec<LogicalField> = spec
        .fillable_fields()
        .into_iter()
        .filter(|lf| selection == FieldSelection::AllFillable || lf.required)
        .collect();
    if chosen.is_empty() {
        return Err(match selection {
            FieldSelection::RequiredOnly => ScenarioError::NoRequiredFields,
            FieldSelection::AllFillable => ScenarioError::NoFillableFields,
        });
    }
    let mut form_fields = Vec::with_capacity(chosen.len());
    for (i, lf) in chosen.iter().enumerate() {
        let head = &spec.fields[lf.members[0]];
        let identifier = match &head.id {
            Some(id) => Locator::id(id),
            None => Locator::name(&lf.name),
        };
        let value_seed = derive_seed(seed, lf.members[0] as u64);
        let dummy_data = if lf.kind == FieldKind::Radio {
            // Merged groups draw from the merged option list.
            let mut merged = head.clone();
            merged.options = lf.options.clone();
            dummy::dummy_value(&merged, value_seed)?
        } else {
            dummy::dummy_value(head, value_seed)?
        };
        form_fields.push(ScenarioField {
            name: lf.name.clone(),
            identifier,
            field_type: lf.kind,
            required: lf.required,
            html_snippet: rendered.snippet(lf),
            instruction: instruction(lf, head, &dummy_data),
            dummy_data,
            order: i as u32 + 1,
        });
    }
    let scenario = TestScenario {
        form_fields,
        expected_outcome: EXPECTED_OUTCOME.to_string(),
        submission: Submission::FormSubmit,
    };
    scenario.check_invariants()?;
    Ok(scenario)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "finding", rename_all = "snake_case")]
pub enum Finding {
    /// The identifier resolves to nothing in the form, or to something that
    /// is not the named field's control.
    UnresolvedIdentifier { field: String, identifier: Locator },
    /// The dummy data would not fill the field correctly.
    InvalidDummyData { field: String, value: String },
    /// A required field is missing from the scenario.
    MissingRequired { field: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

fn dummy_fits(lf: &LogicalField, head: &FieldSpec, value: &str) -> bool {
    match lf.kind {
        FieldKind::Select | FieldKind::Radio => lf.options.iter().any(|o| o.value == value),
        FieldKind::Checkbox => matches!(value, "true" | "checked" | "yes" | "on" | "1"),
        FieldKind::Date => dummy::parse_us_date(value).is_some(),
        _ => dummy::text_value_valid(head, value),
    }
}

/// Checks a scenario (typically model-produced) against the form it targets.
pub fn validate_against_form(scenario: &TestScenario, spec: &FormSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let fields = spec.logical_fields();
    let rendered = match RenderedForm::new(spec) {
        Ok(r) => r,
        Err(_) => {
            for f in &scenario.form_fields {
                report.findings.push(Finding::UnresolvedIdentifier {
                    field: f.name.clone(),
                    identifier: f.identifier.clone(),
                });
            }
            return report;
        }
    };
    let mut matched: BTreeSet<String> = BTreeSet::new();
    for sf in &scenario.form_fields {
        let resolved = sf
            .identifier
            .resolve_all(&rendered.doc, None, &MarkupState)
            .ok()
            .and_then(|v| v.into_iter().next())
            .filter(|n| rendered.doc.is_ancestor(rendered.form, *n));
        let target = resolved.and_then(|n| rendered.field_of(&fields, n));
        let Some(lf) = target.filter(|lf| lf.is_fillable()) else {
            report.findings.push(Finding::UnresolvedIdentifier {
                field: sf.name.clone(),
                identifier: sf.identifier.clone(),
            });
            continue;
        };
        matched.insert(lf.name.clone());
        if !dummy_fits(lf, &spec.fields[lf.members[0]], &sf.dummy_data) {
            report.findings.push(Finding::InvalidDummyData {
                field: sf.name.clone(),
                value: sf.dummy_data.clone(),
            });
        }
    }
    for lf in fields.iter().filter(|lf| lf.is_fillable() && lf.required) {
        if !matched.contains(&lf.name) {
            report.findings.push(Finding::MissingRequired { field: lf.name.clone() });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Constraint;

    fn form() -> FormSpec {
        FormSpec::new(
            "form-0001",
            alloc::vec![
                FieldSpec::new(FieldKind::Email, "email").with_id("email").required(true),
                FieldSpec::new(FieldKind::Tel, "phone").with_id("phone"),
                FieldSpec::new(FieldKind::Date, "dob").required(true),
                FieldSpec::new(FieldKind::Select, "plan")
                    .with_options(&[("a", "A"), ("b", "B")])
                    .required(true),
                FieldSpec::new(FieldKind::Text, "zip")
                    .with_constraint(Constraint::Pattern { pattern: r"\d{5}".into() })
                    .required(true),
            ],
        )
    }

    #[test]
    fn reference_is_required_only_and_clean() {
        let s = reference_scenario(&form(), 3, FieldSelection::RequiredOnly).unwrap();
        let names: Vec<&str> = s.form_fields.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["email", "dob", "plan", "zip"]);
        assert_eq!(s.form_fields[0].identifier, Locator::id("email"));
        assert_eq!(s.form_fields[1].identifier, Locator::name("dob"));
        assert!(dummy::parse_us_date(&s.form_fields[1].dummy_data).is_some());
        assert!(["a", "b"].contains(&s.form_fields[2].dummy_data.as_str()));
        assert!(validate_against_form(&s, &form()).is_clean());
    }

    #[test]
    fn round_trip() {
        let s = reference_scenario(&form(), 9, FieldSelection::AllFillable).unwrap();
        let again = TestScenario::parse(&s.to_json()).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.to_json(), again.to_json());
    }

    #[test]
    fn rejections() {
        let s = reference_scenario(&form(), 1, FieldSelection::RequiredOnly).unwrap();
        let mut v: Value = serde_json::from_str(&s.to_json()).unwrap();
        v["form_fields"][0]["field_type"] = "submit".into();
        assert!(matches!(TestScenario::from_value(v), Err(ScenarioError::Invariant { .. })));

        let mut v: Value = serde_json::from_str(&s.to_json()).unwrap();
        v["form_fields"][1]["dummy_data"] = "13/45/2024".into();
        assert!(matches!(TestScenario::from_value(v), Err(ScenarioError::Invariant { .. })));

        let mut v: Value = serde_json::from_str(&s.to_json()).unwrap();
        v["form_fields"][2].as_object_mut().unwrap().remove("identifier");
        match TestScenario::from_value(v) {
            Err(ScenarioError::Schema { path, .. }) => assert_eq!(path, "$.form_fields[2]"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(TestScenario::parse("{\"form_fields\": ["), Err(ScenarioError::Malformed { .. })));
    }

    #[test]
    fn findings() {
        let spec = form();
        let mut s = reference_scenario(&spec, 1, FieldSelection::RequiredOnly).unwrap();
        s.form_fields[0].identifier = Locator::id("mail");
        s.form_fields.remove(3);
        let r = validate_against_form(&s, &spec);
        assert!(r.findings.contains(&Finding::UnresolvedIdentifier {
            field: "email".into(),
            identifier: Locator::id("mail")
        }));
        assert!(r.findings.contains(&Finding::MissingRequired { field: "zip".into() }));
    }

    #[test]
    fn no_required_fields() {
        let spec = FormSpec::new("f", alloc::vec![FieldSpec::new(FieldKind::Text, "q")]);
        assert_eq!(
            reference_scenario(&spec, 0, FieldSelection::RequiredOnly),
            Err(ScenarioError::NoRequiredFields)
        );
        assert!(reference_scenario(&spec, 0, FieldSelection::AllFillable).is_ok());
    }
}
