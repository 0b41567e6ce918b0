//! Text generation providers for the dataset pipeline.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use formbench_core::corpus::sha256_hex;
use formbench_core::dataset::Decoding;
use formbench_core::html::render::{FormSpec, HtmlDocument};
use formbench_core::rng::{derive_seed, SeededRng};
use formbench_core::scenario::{reference_scenario, FieldSelection};
use formbench_core::locate::Locator;
use formbench_core::script::{compile, emit_source, PYTHON_SELENIUM};
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Clone, Debug)]
pub struct GenerationRequest<'a> {
    pub form_id: &'a str,
    pub html: &'a str,
    pub prompt: &'a str,
    pub template_id: &'a str,
    pub decoding: &'a Decoding,
    /// 1-based attempt number for this form.
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider transport error after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider answered HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected provider response: {0}")]
    Decode(String),
    #[error("no response for form `{form_id}` attempt {attempt}")]
    Missing { form_id: String, attempt: u32 },
    #[error("{0}")]
    Config(String),
}

pub trait Provider: Send + Sync {
    /// Tag recorded in provenance.
    fn name(&self) -> String;
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<String, ProviderError>;
}

/// Fenced response text in the shape the prompt asks for.
pub fn format_response(scenario_json: &str, code: &str, dialect: &str) -> String {
    let lang = if dialect == PYTHON_SELENIUM { "python" } else { dialect };
    format!("```json\n{}\n```\n\n```{lang}\n{}\n```\n", scenario_json.trim_end(), code.trim_end())
}

/// Offline provider answering with the reference scenario and its compiled
/// script. With `fault_rate > 0`, a seeded share of responses get a first
/// action whose locator matches nothing, so their code fails to execute.
pub struct OracleProvider {
    specs: HashMap<String, FormSpec>,
    seed: u64,
    dialect: String,
    fault_rate: f64,
    selection: FieldSelection,
}

impl OracleProvider {
    pub fn new(forms: &[HtmlDocument], seed: u64, dialect: &str, fault_rate: f64) -> Self {
        let specs = forms
            .iter()
            .map(|d| (sha256_hex(d.text.as_bytes()), d.spec.clone()))
            .collect();
        Self {
            specs,
            seed,
            dialect: dialect.to_string(),
            fault_rate,
            selection: FieldSelection::RequiredOnly,
        }
    }

    pub fn with_selection(mut self, selection: FieldSelection) -> Self {
        self.selection = selection;
        self
    }

    /// Whether the response for (`form_id`, `attempt`) carries a fault.
    pub fn is_faulty(&self, form_id: &str, attempt: u32) -> bool {
        if self.fault_rate <= 0.0 {
            return false;
        }
        let key = sha256_hex(form_id.as_bytes());
        let form_seed = u64::from_str_radix(&key[..16], 16).expect("hex digest");
        let mut rng = SeededRng::new(derive_seed(self.seed ^ form_seed, u64::from(attempt)));
        (rng.next_u64() as f64 / u64::MAX as f64) < self.fault_rate
    }
}

impl Provider for OracleProvider {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<String, ProviderError> {
        let spec = self
            .specs
            .get(&sha256_hex(request.html.as_bytes()))
            .ok_or_else(|| ProviderError::Missing {
                form_id: request.form_id.to_string(),
                attempt: request.attempt,
            })?;
        let seed = derive_seed(self.seed, u64::from(request.attempt));
        let scenario = reference_scenario(spec, seed, self.selection).map_err(|e| ProviderError::Decode(e.to_string()))?;
        let mut script = compile(&scenario, spec).map_err(|e| ProviderError::Decode(e.to_string()))?;
        if self.is_faulty(request.form_id, request.attempt) {
            script.actions[0].locator = Locator::id(&format!("{}-missing", spec.form_id));
        }
        let code = emit_source(&script, &self.dialect).map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(format_response(&scenario.to_json(), &code.source, &self.dialect))
    }
}

#[derive(Deserialize)]
struct CannedLine {
    form_id: String,
    #[serde(default = "one")]
    attempt: u32,
    response: String,
}

fn one() -> u32 {
    1
}

/// Replays recorded responses from a JSONL file of
/// `{"form_id", "attempt", "response"}` lines.
pub struct CannedProvider {
    responses: HashMap<(String, u32), String>,
}

impl CannedProvider {
    pub fn from_jsonl(text: &str) -> Result<Self, ProviderError> {
        let mut responses = HashMap::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let l: CannedLine =
                serde_json::from_str(line).map_err(|e| ProviderError::Config(format!("line {}: {e}", i + 1)))?;
            responses.insert((l.form_id, l.attempt), l.response);
        }
        Ok(Self { responses })
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }
}

impl Provider for CannedProvider {
    fn name(&self) -> String {
        "canned".into()
    }

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<String, ProviderError> {
        self.responses
            .get(&(request.form_id.to_string(), request.attempt))
            .cloned()
            .ok_or_else(|| ProviderError::Missing {
                form_id: request.form_id.to_string(),
                attempt: request.attempt,
            })
    }
}

/// OpenAI-compatible `chat/completions` endpoint.
pub struct ChatProvider {
    agent: ureq::Agent,
    base: String,
    key: Option<String>,
    model: String,
    retries: u32,
    backoff: Duration,
}

impl ChatProvider {
    pub fn new(base: &str, key: Option<String>, model: &str) -> Self {
        Self {
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(300)).build(),
            base: base.trim_end_matches('/').to_string(),
            key,
            model: model.to_string(),
            retries: 4,
            backoff: Duration::from_millis(500),
        }
    }

    pub fn with_retry(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }
}

impl Provider for ChatProvider {
    fn name(&self) -> String {
        format!("openai-compatible:{}", self.model)
    }

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": request.prompt }],
            "temperature": request.decoding.temperature,
            "max_tokens": request.decoding.max_output_tokens,
        });
        let url = format!("{}/chat/completions", self.base);
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            let mut req = self.agent.post(&url).set("Content-Type", "application/json");
            if let Some(key) = &self.key {
                req = req.set("Authorization", &format!("Bearer {key}"));
            }
            match req.send_json(body.clone()) {
                Ok(resp) => {
                    let v: Value = resp.into_json().map_err(|e| ProviderError::Decode(e.to_string()))?;
                    return v
                        .pointer("/choices/0/message/content")
                        .and_then(Value::as_str)
                        .map(str::to_string)
                        .ok_or_else(|| ProviderError::Decode("missing choices[0].message.content".into()));
                }
                Err(ureq::Error::Status(status, resp)) if status == 429 || status >= 500 => {
                    last = format!("HTTP {status}: {}", resp.into_string().unwrap_or_default());
                }
                Err(ureq::Error::Status(status, resp)) => {
                    return Err(ProviderError::Status {
                        status,
                        body: resp.into_string().unwrap_or_default(),
                    });
                }
                Err(ureq::Error::Transport(t)) => last = t.to_string(),
            }
        }
        Err(ProviderError::Transport {
            attempts: self.retries + 1,
            message: last,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use formbench_core::corpus::{build_corpus, CorpusParams};
    use formbench_core::dataset::parse_response;
    use formbench_core::script::ACTION_JSON;
    use formbench_core::FieldPool;

    fn request<'a>(doc: &'a HtmlDocument, decoding: &'a Decoding, attempt: u32) -> GenerationRequest<'a> {
        GenerationRequest {
            form_id: &doc.spec.form_id,
            html: &doc.text,
            prompt: "",
            template_id: "t",
            decoding,
            attempt,
        }
    }

    #[test]
    fn oracle_responses_parse() {
        let corpus = build_corpus(&FieldPool::builtin(), &CorpusParams::new(1, 3)).unwrap();
        let d = Decoding::default();
        for dialect in [ACTION_JSON, PYTHON_SELENIUM] {
            let p = OracleProvider::new(&corpus.documents, 9, dialect, 0.0);
            for doc in &corpus.documents {
                let text = p.generate(&request(doc, &d, 1)).unwrap();
                let (_, code) = parse_response(&text, dialect).unwrap();
                assert_eq!(code.dialect, dialect);
            }
        }
    }

    #[test]
    fn fault_rate_extremes() {
        let corpus = build_corpus(&FieldPool::builtin(), &CorpusParams::new(1, 4)).unwrap();
        let all = OracleProvider::new(&corpus.documents, 9, ACTION_JSON, 1.0);
        let none = OracleProvider::new(&corpus.documents, 9, ACTION_JSON, 0.0);
        for doc in &corpus.documents {
            assert!(all.is_faulty(&doc.spec.form_id, 1));
            assert!(!none.is_faulty(&doc.spec.form_id, 1));
        }
    }

    #[test]
    fn canned_lookup() {
        let p = CannedProvider::from_jsonl("{\"form_id\":\"a\",\"response\":\"x\"}\n{\"form_id\":\"a\",\"attempt\":2,\"response\":\"y\"}\n")
            .unwrap();
        let d = Decoding::default();
        let mk = |attempt| GenerationRequest {
            form_id: "a",
            html: "",
            prompt: "",
            template_id: "t",
            decoding: &d,
            attempt,
        };
        assert_eq!(p.generate(&mk(2)).unwrap(), "y");
        assert!(matches!(p.generate(&mk(3)), Err(ProviderError::Missing { .. })));
    }

    #[test]
    fn chat_provider_gives_up_after_retries() {
        let p = ChatProvider::new("http://127.0.0.1:9", None, "m").with_retry(2, Duration::from_millis(1));
        let d = Decoding::default();
        let doc_text = "<form></form>";
        let r = p.generate(&GenerationRequest {
            form_id: "f",
            html: doc_text,
            prompt: "p",
            template_id: "t",
            decoding: &d,
            attempt: 1,
        });
        assert!(matches!(r, Err(ProviderError::Transport { attempts: 3, .. })), "{r:?}");
    }
}
