//! Instruction triples, response parsing, the executability filter and the
//! line-delimited dataset format.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::metrics::ExecutionReport;
use crate::scenario::{ScenarioError, TestScenario};
use crate::script::RawScript;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    /// Keep only candidates whose code executed successfully.
    #[default]
    Filter,
    /// Keep every parsed candidate, recording `executed_ok` truthfully.
    NoFilter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_output_tokens: 4096,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub provider: String,
    pub template_id: String,
    /// RFC 3339 UTC.
    pub timestamp: String,
    pub decoding: Decoding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleMetadata {
    pub form_id: String,
    pub attempt: u32,
    pub executed_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution: Option<ExecutionReport>,
    pub provenance: Provenance,
}

/// One dataset line: exactly `html`, `scenario`, `code` and `metadata`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstructionTriple {
    pub html: String,
    pub scenario: TestScenario,
    pub code: RawScript,
    pub metadata: TripleMetadata,
}

impl InstructionTriple {
    pub fn executed_ok(&self) -> bool {
        self.metadata.executed_ok
    }
}

/// Why a provider response could not become a candidate.
#[derive(Clone, Debug, PartialEq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum Rejection {
    #[error("response contains no JSON scenario")]
    NoScenario,
    #[error("scenario rejected: {0}")]
    Scenario(String),
    #[error("response contains no code block")]
    NoCode,
}

impl From<ScenarioError> for Rejection {
    fn from(e: ScenarioError) -> Self {
        Rejection::Scenario(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fence<'a> {
    pub lang: &'a str,
    pub body: &'a str,
}

/// All markdown code fences in `text`, in order. An unterminated final
/// fence runs to the end of the text.
pub fn fences(text: &str) -> Vec<Fence<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let nl = after.find('\n').unwrap_or(after.len());
        let lang = after[..nl].trim();
        let body_start = (nl + 1).min(after.len());
        let body_rest = &after[body_start..];
        match body_rest.find("```") {
            Some(end) => {
                out.push(Fence {
                    lang,
                    body: &body_rest[..end],
                });
                rest = &body_rest[end + 3..];
            }
            None => {
                out.push(Fence { lang, body: body_rest });
                break;
            }
        }
    }
    out
}

/// The first balanced top-level `{...}` in `text`, respecting JSON strings.
pub fn first_json_object(text: &str) -> Option<&str> {
    let bytes = text.as_bytes();
    let start = text.find('{')?;
    let (mut depth, mut in_str, mut esc) = (0usize, false, false);
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_str {
            match (esc, b) {
                (true, _) => esc = false,
                (false, b'\\') => esc = true,
                (false, b'"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Splits a provider response into a validated scenario and raw code in
/// `dialect`. The scenario comes from the first `json` fence (else the
/// first JSON object in the text); the code from the first fence in any
/// other language, with the fence stripped.
pub fn parse_response(text: &str, dialect: &str) -> Result<(TestScenario, RawScript), Rejection> {
    let fs = fences(text);
    let json = fs
        .iter()
        .find(|f| f.lang.eq_ignore_ascii_case("json"))
        .map(|f| f.body)
        .or_else(|| first_json_object(text))
        .ok_or(Rejection::NoScenario)?;
    let scenario = TestScenario::parse(json)?;
    let code = fs
        .iter()
        .find(|f| !f.lang.eq_ignore_ascii_case("json") && !f.body.trim().is_empty())
        .map(|f| f.body)
        .ok_or(Rejection::NoCode)?;
    let mut source = code.trim_matches('\n').to_string();
    source.push('\n');
    Ok((
        scenario,
        RawScript {
            source,
            dialect: dialect.to_string(),
        },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discarded {
    pub form_id: String,
    pub attempt: u32,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution: Option<ExecutionReport>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub kept: Vec<InstructionTriple>,
    pub discarded: Vec<Discarded>,
}

/// Applies `mode` to executed candidates, preserving order.
pub fn filter_executable(candidates: Vec<InstructionTriple>, mode: FilterMode) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for c in candidates {
        if mode == FilterMode::NoFilter || c.executed_ok() {
            out.kept.push(c);
        } else {
            let reason = match &c.metadata.execution {
                Some(e) => match &e.error_class {
                    Some(class) => alloc::format!("{}: {class}", e.status),
                    None => e.status.to_string(),
                },
                None => "not executed".to_string(),
            };
            out.discarded.push(Discarded {
                form_id: c.metadata.form_id.clone(),
                attempt: c.metadata.attempt,
                reason,
                execution: c.metadata.execution.clone(),
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedCandidate {
    pub form_id: String,
    pub attempt: u32,
    pub rejection: Rejection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub filter_mode: FilterMode,
    pub seed: u64,
    pub corpus_digest: String,
    pub kept: usize,
    pub discarded: usize,
    pub rejected: usize,
    pub discarded_detail: Vec<Discarded>,
    pub rejected_detail: Vec<RejectedCandidate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_config: Option<serde_json::Value>,
}

/// Line-delimited JSON, one triple per line, trailing newline.
pub fn to_jsonl(triples: &[InstructionTriple]) -> String {
    let mut out = String::new();
    for t in triples {
        out.push_str(&serde_json::to_string(t).expect("triple serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct JsonlError {
    pub line: usize,
    pub message: String,
}

pub fn from_jsonl(text: &str) -> Result<Vec<InstructionTriple>, JsonlError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| JsonlError {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldKind, FieldSpec};
    use crate::html::render::FormSpec;
    use crate::metrics::ExecStatus;
    use crate::scenario::{reference_scenario, FieldSelection};

    fn scenario() -> TestScenario {
        let spec = FormSpec::new("f", alloc::vec![FieldSpec::new(FieldKind::Email, "email").required(true)]);
        reference_scenario(&spec, 1, FieldSelection::RequiredOnly).unwrap()
    }

    fn triple(ok: bool, i: u32) -> InstructionTriple {
        let mut exec = ExecutionReport::success(3);
        if !ok {
            exec.status = ExecStatus::AutomationError;
            exec.error_class = Some("no such element".into());
        }
        InstructionTriple {
            html: "<form></form>".into(),
            scenario: scenario(),
            code: RawScript {
                source: "print(1)\n".into(),
                dialect: "python-selenium".into(),
            },
            metadata: TripleMetadata {
                form_id: alloc::format!("form-{i:04}"),
                attempt: 1,
                executed_ok: ok,
                execution: Some(exec),
                provenance: Provenance {
                    provider: "stub".into(),
                    template_id: "form-scenario-v1".into(),
                    timestamp: "2025-01-01T00:00:00Z".into(),
                    decoding: Decoding::default(),
                },
            },
        }
    }

    #[test]
    fn parses_fenced_response() {
        let text = alloc::format!(
            "Here you go.\n```json\n{}\n```\nAnd the code:\n```python\nprint('hi')\n```\n",
            scenario().to_json()
        );
        let (s, code) = parse_response(&text, "python-selenium").unwrap();
        assert_eq!(s, scenario());
        assert_eq!(code.source, "print('hi')\n");
        assert_eq!(parse_response("nothing", "x"), Err(Rejection::NoScenario));
        let no_code = alloc::format!("```json\n{}\n```", scenario().to_json());
        assert_eq!(parse_response(&no_code, "x"), Err(Rejection::NoCode));
    }

    #[test]
    fn unfenced_json_object() {
        assert_eq!(first_json_object("x {\"a\": \"}\"} y"), Some("{\"a\": \"}\"}"));
        assert_eq!(first_json_object("{"), None);
    }

    #[test]
    fn filter_modes() {
        let batch: Vec<InstructionTriple> = (0..10).map(|i| triple(i < 7, i)).collect();
        let f = filter_executable(batch.clone(), FilterMode::Filter);
        assert_eq!((f.kept.len(), f.discarded.len()), (7, 3));
        assert!(f.discarded[0].reason.contains("no such element"));
        let nf = filter_executable(batch, FilterMode::NoFilter);
        assert_eq!(nf.kept.len(), 10);
        assert!(f.kept.iter().all(|k| nf.kept.contains(k)));
        assert!(filter_executable(Vec::new(), FilterMode::Filter).kept.is_empty());
    }

    #[test]
    fn jsonl_round_trip() {
        let ts = [triple(true, 1), triple(false, 2), triple(true, 3)];
        let text = to_jsonl(&ts);
        assert_eq!(text.lines().count(), 3);
        assert_eq!(from_jsonl(&text).unwrap(), ts);
        assert_eq!(to_jsonl(&from_jsonl(&text).unwrap()), text);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["code", "html", "metadata", "scenario"]);
    }
}
