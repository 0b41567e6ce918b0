//! Test scripts: the structured action sequence, raw dialect source, the
//! scenario compiler and the source emitters.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::field::FieldKind;
use crate::html::render::FormSpec;
use crate::locate::{css, Locator, Strategy};
use crate::scenario::{validate_against_form, Finding, TestScenario};

/// Structured actions serialized as JSON; checked and executed natively.
pub const ACTION_JSON: &str = "action-json";
/// Python source using the Selenium bindings; run by an external runner.
pub const PYTHON_SELENIUM: &str = "python-selenium";
pub const DIALECTS: [&str; 2] = [ACTION_JSON, PYTHON_SELENIUM];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    SetValue,
    SelectOption,
    SetChecked,
    Click,
    SubmitForm,
}

impl Verb {
    pub fn as_str(self) -> &'static str {
        match self {
            Verb::SetValue => "set_value",
            Verb::SelectOption => "select_option",
            Verb::SetChecked => "set_checked",
            Verb::Click => "click",
            Verb::SubmitForm => "submit_form",
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Action {
    pub locator: Locator,
    pub verb: Verb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

impl Action {
    pub fn new(locator: Locator, verb: Verb, payload: Option<&str>) -> Self {
        Self {
            locator,
            verb,
            payload: payload.map(str::to_string),
        }
    }

    /// Whether the action fills a field (anything but click/submit).
    pub fn is_fill(&self) -> bool {
        matches!(self.verb, Verb::SetValue | Verb::SelectOption | Verb::SetChecked)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionScript {
    pub actions: Vec<Action>,
    pub target_form: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScript {
    pub source: String,
    pub dialect: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestScript {
    Actions(ActionScript),
    Raw(RawScript),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScriptError {
    #[error("action {index}: {verb} requires a payload")]
    MissingPayload { index: usize, verb: Verb },
    #[error("action {index}: submit_form takes no payload")]
    SubmitPayload { index: usize },
    #[error("action {index}: submit_form must be the last action and appear at most once")]
    SubmitNotLast { index: usize },
    #[error("unknown dialect `{0}`")]
    UnknownDialect(String),
    #[error("scenario has no fields")]
    EmptyScenario,
    #[error("scenario does not validate against the form: {0:?}")]
    Findings(Vec<Finding>),
}

impl ActionScript {
    pub fn validate(&self) -> Result<(), ScriptError> {
        let n = self.actions.len();
        for (i, a) in self.actions.iter().enumerate() {
            match a.verb {
                Verb::SetValue | Verb::SelectOption if a.payload.is_none() => {
                    return Err(ScriptError::MissingPayload { index: i, verb: a.verb });
                }
                Verb::SubmitForm if a.payload.is_some() => return Err(ScriptError::SubmitPayload { index: i }),
                Verb::SubmitForm if i + 1 != n => return Err(ScriptError::SubmitNotLast { index: i }),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }

    pub fn fill_count(&self) -> usize {
        self.actions.iter().filter(|a| a.is_fill()).count()
    }
}

/// Compiles a validated scenario into actions: one per field in `order`,
/// then `submit_form` on the target form.
pub fn compile(scenario: &TestScenario, spec: &FormSpec) -> Result<ActionScript, ScriptError> {
    if scenario.form_fields.is_empty() {
        return Err(ScriptError::EmptyScenario);
    }
    let report = validate_against_form(scenario, spec);
    if !report.is_clean() {
        return Err(ScriptError::Findings(report.findings));
    }
    let mut actions = Vec::with_capacity(scenario.form_fields.len() + 1);
    for f in scenario.ordered_fields() {
        let action = match f.field_type {
            FieldKind::Select => Action::new(f.identifier.clone(), Verb::SelectOption, Some(&f.dummy_data)),
            FieldKind::Checkbox => Action::new(f.identifier.clone(), Verb::SetChecked, None),
            FieldKind::Radio => Action::new(radio_member_locator(&f.identifier, &f.dummy_data), Verb::SetChecked, None),
            _ => Action::new(f.identifier.clone(), Verb::SetValue, Some(&f.dummy_data)),
        };
        actions.push(action);
    }
    actions.push(Action::new(Locator::id(&spec.form_id), Verb::SubmitForm, None));
    let script = ActionScript {
        actions,
        target_form: spec.form_id.clone(),
    };
    script.validate()?;
    Ok(script)
}

/// The radio input with `value` inside the group `group` identifies.
pub fn radio_member_locator(group: &Locator, value: &str) -> Locator {
    let v = css::quote(value);
    match group.strategy {
        Strategy::Id => Locator::css(&format!("[id={}] input[type=\"radio\"][value={v}]", css::quote(&group.value))),
        Strategy::Name => Locator::css(&format!("input[type=\"radio\"][name={}][value={v}]", css::quote(&group.value))),
        _ => group.clone(),
    }
}

/// Renders `script` as source text in `dialect`.
pub fn emit_source(script: &ActionScript, dialect: &str) -> Result<RawScript, ScriptError> {
    let source = match dialect {
        ACTION_JSON => script.to_json(),
        PYTHON_SELENIUM => emit_python(script),
        other => return Err(ScriptError::UnknownDialect(other.to_string())),
    };
    Ok(RawScript {
        source,
        dialect: dialect.to_string(),
    })
}

fn py_str(s: &str) -> String {
    // JSON string escapes are valid Python string literal escapes.
    serde_json::to_string(s).expect("string serializes")
}

fn py_by(l: &Locator) -> String {
    let by = match l.strategy {
        Strategy::Id => "By.ID",
        Strategy::Name => "By.NAME",
        Strategy::Css => "By.CSS_SELECTOR",
        Strategy::Xpath => "By.XPATH",
    };
    format!("{by}, {}", py_str(&l.value))
}

fn emit_python(script: &ActionScript) -> String {
    let mut out = String::new();
    out.push_str("import os\nimport sys\n\nfrom selenium import webdriver\nfrom selenium.webdriver.common.by import By\nfrom selenium.webdriver.support.ui import Select\n\n");
    out.push_str("driver = webdriver.Remote(command_executor=os.environ[\"WEBDRIVER_URL\"], options=webdriver.ChromeOptions())\n");
    out.push_str("try:\n    driver.implicitly_wait(2)\n    driver.get(sys.argv[1])\n");
    for a in &script.actions {
        let find = format!("driver.find_element({})", py_by(&a.locator));
        let payload = a.payload.as_deref().map(py_str).unwrap_or_default();
        match a.verb {
            Verb::SetValue => out.push_str(&format!("    {find}.send_keys({payload})\n")),
            Verb::SelectOption => out.push_str(&format!("    Select({find}).select_by_value({payload})\n")),
            Verb::SetChecked => {
                out.push_str(&format!("    el = {find}\n    if not el.is_selected():\n        el.click()\n"));
            }
            Verb::Click => out.push_str(&format!("    {find}.click()\n")),
            Verb::SubmitForm => out.push_str(&format!(
                "    driver.execute_script(\"arguments[0].submit();\", {find})\n"
            )),
        }
    }
    out.push_str("finally:\n    driver.quit()\n");
    out
}

/// A diagnostic from the built-in `action-json` checker.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Parses and validates `action-json` source.
pub fn parse_action_json(source: &str) -> Result<ActionScript, Diagnostic> {
    let script: ActionScript = serde_json::from_str(source).map_err(|e| Diagnostic {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    script.validate().map_err(|e| Diagnostic {
        line: 0,
        column: 0,
        message: e.to_string(),
    })?;
    Ok(script)
}

/// Removes a surrounding markdown code fence (with optional language tag)
/// and surrounding blank lines. Text without a fence is returned trimmed.
pub fn strip_code_fence(text: &str) -> String {
    let trimmed = text.trim();
    if let Some(rest) = trimmed.strip_prefix("```") {
        let body = match rest.find('\n') {
            Some(nl) => &rest[nl + 1..],
            None => "",
        };
        let body = body.trim_end();
        let body = body.strip_suffix("```").unwrap_or(body);
        return body.trim_matches('\n').to_string() + "\n";
    }
    trimmed.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;
    use crate::scenario::{reference_scenario, FieldSelection};

    fn spec() -> FormSpec {
        FormSpec::new(
            "form-0001",
            alloc::vec![
                FieldSpec::new(FieldKind::Email, "email").with_id("email").required(true),
                FieldSpec::new(FieldKind::Date, "start").required(true),
                FieldSpec::new(FieldKind::Radio, "color")
                    .with_options(&[("red", "Red"), ("blue", "Blue")])
                    .required(true),
            ],
        )
    }

    #[test]
    fn compile_maps_verbs() {
        let s = reference_scenario(&spec(), 0, FieldSelection::RequiredOnly).unwrap();
        let script = compile(&s, &spec()).unwrap();
        let verbs: Vec<Verb> = script.actions.iter().map(|a| a.verb).collect();
        assert_eq!(verbs, [Verb::SetValue, Verb::SetValue, Verb::SetChecked, Verb::SubmitForm]);
        let radio = &script.actions[2].locator;
        assert_eq!(radio.strategy, Strategy::Css);
        assert!(radio.value.contains(&format!("[value=\"{}\"]", s.form_fields[2].dummy_data)));
    }

    #[test]
    fn empty_scenario_rejected() {
        let mut s = reference_scenario(&spec(), 0, FieldSelection::RequiredOnly).unwrap();
        s.form_fields.clear();
        assert_eq!(compile(&s, &spec()), Err(ScriptError::EmptyScenario));
    }

    #[test]
    fn invariants() {
        let bad = ActionScript {
            actions: alloc::vec![
                Action::new(Locator::id("f"), Verb::SubmitForm, None),
                Action::new(Locator::id("a"), Verb::SetValue, Some("x")),
            ],
            target_form: "f".into(),
        };
        assert_eq!(bad.validate(), Err(ScriptError::SubmitNotLast { index: 0 }));
        let bad = ActionScript {
            actions: alloc::vec![Action::new(Locator::id("a"), Verb::SetValue, None)],
            target_form: "f".into(),
        };
        assert!(matches!(bad.validate(), Err(ScriptError::MissingPayload { .. })));
    }

    #[test]
    fn emitters() {
        let s = reference_scenario(&spec(), 0, FieldSelection::RequiredOnly).unwrap();
        let script = compile(&s, &spec()).unwrap();
        let py = emit_source(&script, PYTHON_SELENIUM).unwrap();
        assert!(py.source.contains("arguments[0].submit();"));
        assert!(!py.source.contains(".click()\nfinally"));
        let json = emit_source(&script, ACTION_JSON).unwrap();
        assert_eq!(parse_action_json(&json.source).unwrap(), script);
        assert!(matches!(emit_source(&script, "cobol"), Err(ScriptError::UnknownDialect(_))));
    }

    #[test]
    fn diagnostics_have_positions() {
        let d = parse_action_json("{\n  \"actions\": [\n    @\n").unwrap_err();
        assert_eq!(d.line, 3);
        assert!(d.column > 0);
    }

    #[test]
    fn fences() {
        assert_eq!(strip_code_fence("```python\nprint(1)\n```\n"), "print(1)\n");
        assert_eq!(strip_code_fence("  x = 1  "), "x = 1");
    }
}
