//! Versioned prompt templates for scenario + script generation.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub const DEFAULT_TEMPLATE: &str = "form-scenario-v1";

const SCENARIO_V1: &str = include_str!("../assets/prompts/form-scenario-v1.txt");
const CODE_REQUEST_V1: &str = include_str!("../assets/prompts/code-request-v1.txt");

/// Concrete scenario schema substituted for `{{json_structure}}`.
pub const JSON_STRUCTURE: &str = r#"{
  "form_fields": [
    {
      "name": "<control name>",
      "identifier": {"strategy": "id | name | css | xpath", "value": "<locator value>"},
      "field_type": "text | email | password | number | tel | date | textarea | select | checkbox | radio",
      "required": true,
      "html_snippet": "<the field's HTML>",
      "dummy_data": "<value to enter; select/radio: an option value; checkbox: \"true\">",
      "instruction": "<what to do>",
      "order": 1
    }
  ],
  "expected_outcome": "<what should happen>",
  "submission": "form.submit"
}"#;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: &'static str,
    scenario: &'static str,
    code_request: &'static str,
}

pub const TEMPLATES: [PromptTemplate; 1] = [PromptTemplate {
    id: DEFAULT_TEMPLATE,
    scenario: SCENARIO_V1,
    code_request: CODE_REQUEST_V1,
}];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),
    #[error("html is empty")]
    EmptyHtml,
}

pub fn template(id: &str) -> Result<&'static PromptTemplate, PromptError> {
    TEMPLATES
        .iter()
        .find(|t| t.id == id)
        .ok_or_else(|| PromptError::UnknownTemplate(id.to_string()))
}

pub fn template_ids() -> Vec<&'static str> {
    TEMPLATES.iter().map(|t| t.id).collect()
}

impl PromptTemplate {
    /// The instruction text alone, with the schema filled in.
    pub fn scenario_prompt(&self) -> String {
        self.scenario.replace("{{json_structure}}", JSON_STRUCTURE)
    }

    pub fn render(&self, html: &str) -> Result<String, PromptError> {
        if html.trim().is_empty() {
            return Err(PromptError::EmptyHtml);
        }
        let mut out = self.scenario_prompt();
        out.push('\n');
        out.push_str(&self.code_request.replace("{{html}}", html.trim_end()));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_html_and_schema() {
        let t = template(DEFAULT_TEMPLATE).unwrap();
        let p = t.render("<form id=\"f\"></form>").unwrap();
        assert!(p.contains("<form id=\"f\"></form>"));
        assert!(p.contains("\"submission\": \"form.submit\""));
        assert!(p.contains("form.submit()"));
        assert!(!p.contains("{{"));
        assert_eq!(t.render("  "), Err(PromptError::EmptyHtml));
        assert!(template("v0").is_err());
    }

    #[test]
    fn schema_example_shape_parses() {
        let v: serde_json::Value = serde_json::from_str(JSON_STRUCTURE).unwrap();
        assert!(v["form_fields"].is_array());
    }
}
