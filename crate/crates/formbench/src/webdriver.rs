//! Minimal W3C WebDriver client.

use std::time::Duration;

use serde_json::{json, Value};

/// Key of the element reference object.
pub const ELEMENT_KEY: &str = "element-6066-11e4-a52e-4f735466cecf";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WdError {
    /// The remote end answered with a protocol error, e.g. `no such element`.
    #[error("{error}: {message}")]
    Protocol { error: String, message: String },
    /// The remote end could not be reached or timed out.
    #[error("transport: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    Decode(String),
}

impl WdError {
    /// Failures of the endpoint itself rather than of the script.
    pub fn is_infrastructure(&self) -> bool {
        match self {
            WdError::Transport(_) | WdError::Decode(_) => true,
            WdError::Protocol { error, .. } => {
                matches!(error.as_str(), "invalid session id" | "session not created")
            }
        }
    }

    pub fn protocol_error(&self) -> Option<&str> {
        match self {
            WdError::Protocol { error, .. } => Some(error),
            _ => None,
        }
    }

    pub fn is_timeout(&self) -> bool {
        matches!(self, WdError::Transport(m) if m.contains("timed out"))
            || self.protocol_error() == Some("timeout")
            || self.protocol_error() == Some("script timeout")
    }
}

pub type WdResult<T> = Result<T, WdError>;

#[derive(Clone)]
pub struct WebDriver {
    agent: ureq::Agent,
    base: String,
}

impl std::fmt::Debug for WebDriver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WebDriver").field("base", &self.base).finish()
    }
}

/// Element reference as returned by the remote end.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ElementRef(pub String);

impl ElementRef {
    pub fn to_json(&self) -> Value {
        json!({ ELEMENT_KEY: self.0 })
    }

    pub fn from_json(v: &Value) -> Option<Self> {
        v.get(ELEMENT_KEY).and_then(Value::as_str).map(|s| ElementRef(s.to_string()))
    }
}

fn decode(body: &str) -> WdResult<Value> {
    let v: Value = serde_json::from_str(body).map_err(|e| WdError::Decode(format!("{e}: {}", truncate(body))))?;
    let value = v.get("value").cloned().unwrap_or(Value::Null);
    if let Some(err) = value.get("error").and_then(Value::as_str) {
        return Err(WdError::Protocol {
            error: err.to_string(),
            message: value.get("message").and_then(Value::as_str).unwrap_or("").to_string(),
        });
    }
    Ok(value)
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

impl WebDriver {
    pub fn new(base: &str, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self {
            agent,
            base: base.trim_end_matches('/').to_string(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn request(&self, method: &str, path: &str, body: Option<&Value>) -> WdResult<Value> {
        let url = format!("{}{}", self.base, path);
        let req = self.agent.request(method, &url);
        let res = match body {
            Some(b) => req.send_json(b.clone()),
            None => req.call(),
        };
        match res {
            Ok(r) => decode(&r.into_string().map_err(|e| WdError::Transport(e.to_string()))?),
            Err(ureq::Error::Status(code, r)) => {
                let text = r.into_string().unwrap_or_default();
                match decode(&text) {
                    Ok(_) => Err(WdError::Decode(format!("HTTP {code} without error object"))),
                    Err(e) => Err(e),
                }
            }
            Err(ureq::Error::Transport(t)) => Err(WdError::Transport(t.to_string())),
        }
    }

    pub fn status(&self) -> WdResult<Value> {
        self.request("GET", "/status", None)
    }

    pub fn new_session(&self, always_match: &Value) -> WdResult<Session> {
        let body = json!({ "capabilities": { "alwaysMatch": always_match, "firstMatch": [{}] } });
        let v = self.request("POST", "/session", Some(&body))?;
        let id = v
            .get("sessionId")
            .and_then(Value::as_str)
            .ok_or_else(|| WdError::Decode("session response without sessionId".into()))?;
        Ok(Session {
            wd: self.clone(),
            id: id.to_string(),
            capabilities: v.get("capabilities").cloned().unwrap_or(Value::Null),
        })
    }

    /// Handle on an existing session (e.g. one a script created).
    pub fn attach(&self, id: &str) -> Session {
        Session {
            wd: self.clone(),
            id: id.to_string(),
            capabilities: Value::Null,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Session {
    wd: WebDriver,
    pub id: String,
    /// Capabilities the remote end returned; `Null` for attached sessions.
    pub capabilities: Value,
}

impl Session {
    fn call(&self, method: &str, path: &str, body: Option<Value>) -> WdResult<Value> {
        self.wd
            .request(method, &format!("/session/{}{}", self.id, path), body.as_ref())
    }

    pub fn delete(&self) -> WdResult<()> {
        self.call("DELETE", "", None).map(|_| ())
    }

    pub fn set_implicit_wait(&self, ms: u64) -> WdResult<()> {
        self.call("POST", "/timeouts", Some(json!({ "implicit": ms }))).map(|_| ())
    }

    pub fn set_timeouts(&self, implicit_ms: u64, page_load_ms: u64, script_ms: u64) -> WdResult<()> {
        self.call(
            "POST",
            "/timeouts",
            Some(json!({ "implicit": implicit_ms, "pageLoad": page_load_ms, "script": script_ms })),
        )
        .map(|_| ())
    }

    pub fn navigate(&self, url: &str) -> WdResult<()> {
        self.call("POST", "/url", Some(json!({ "url": url }))).map(|_| ())
    }

    pub fn current_url(&self) -> WdResult<String> {
        let v = self.call("GET", "/url", None)?;
        Ok(v.as_str().unwrap_or_default().to_string())
    }

    pub fn source(&self) -> WdResult<String> {
        let v = self.call("GET", "/source", None)?;
        Ok(v.as_str().unwrap_or_default().to_string())
    }

    fn element_from(v: Value) -> WdResult<ElementRef> {
        ElementRef::from_json(&v).ok_or_else(|| WdError::Decode(format!("not an element reference: {v}")))
    }

    fn elements_from(v: Value) -> WdResult<Vec<ElementRef>> {
        v.as_array()
            .ok_or_else(|| WdError::Decode("expected an array".into()))?
            .iter()
            .map(|e| ElementRef::from_json(e).ok_or_else(|| WdError::Decode("not an element reference".into())))
            .collect()
    }

    pub fn find(&self, using: &str, value: &str) -> WdResult<ElementRef> {
        Self::element_from(self.call("POST", "/element", Some(json!({ "using": using, "value": value })))?)
    }

    pub fn find_all(&self, using: &str, value: &str) -> WdResult<Vec<ElementRef>> {
        Self::elements_from(self.call("POST", "/elements", Some(json!({ "using": using, "value": value })))?)
    }

    pub fn find_all_from(&self, el: &ElementRef, using: &str, value: &str) -> WdResult<Vec<ElementRef>> {
        Self::elements_from(self.call(
            "POST",
            &format!("/element/{}/elements", el.0),
            Some(json!({ "using": using, "value": value })),
        )?)
    }

    pub fn click(&self, el: &ElementRef) -> WdResult<()> {
        self.call("POST", &format!("/element/{}/click", el.0), Some(json!({}))).map(|_| ())
    }

    pub fn clear(&self, el: &ElementRef) -> WdResult<()> {
        self.call("POST", &format!("/element/{}/clear", el.0), Some(json!({}))).map(|_| ())
    }

    pub fn send_keys(&self, el: &ElementRef, text: &str) -> WdResult<()> {
        self.call("POST", &format!("/element/{}/value", el.0), Some(json!({ "text": text })))
            .map(|_| ())
    }

    pub fn property(&self, el: &ElementRef, name: &str) -> WdResult<Value> {
        self.call("GET", &format!("/element/{}/property/{name}", el.0), None)
    }

    pub fn attribute(&self, el: &ElementRef, name: &str) -> WdResult<Option<String>> {
        let v = self.call("GET", &format!("/element/{}/attribute/{name}", el.0), None)?;
        Ok(v.as_str().map(str::to_string))
    }

    pub fn is_selected(&self, el: &ElementRef) -> WdResult<bool> {
        Ok(self.call("GET", &format!("/element/{}/selected", el.0), None)?.as_bool().unwrap_or(false))
    }

    pub fn tag_name(&self, el: &ElementRef) -> WdResult<String> {
        Ok(self
            .call("GET", &format!("/element/{}/name", el.0), None)?
            .as_str()
            .unwrap_or_default()
            .to_ascii_lowercase())
    }

    pub fn execute(&self, script: &str, args: Vec<Value>) -> WdResult<Value> {
        self.call("POST", "/execute/sync", Some(json!({ "script": script, "args": args })))
    }
}
