//! Embedded HTTP server: serves forms, records submissions, and proxies
//! WebDriver traffic of raw scripts so their element lookups can be traced.

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use formbench_core::coverage::parse_urlencoded;
use formbench_core::metrics::TraceEntry;
use formbench_core::recorder;
use formbench_core::script::Verb;
use serde_json::{json, Value};

use crate::webdriver::ELEMENT_KEY;

pub struct Request {
    pub method: String,
    pub path: String,
    pub query: Option<String>,
    pub body: Vec<u8>,
}

impl Request {
    pub fn json(&self) -> Option<Value> {
        if self.body.is_empty() {
            return Some(json!({}));
        }
        serde_json::from_slice(&self.body).ok()
    }
}

pub struct Response {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl Response {
    pub fn new(status: u16, content_type: &'static str, body: impl Into<Vec<u8>>) -> Self {
        Self {
            status,
            content_type,
            body: body.into(),
        }
    }

    pub fn html(status: u16, body: impl Into<Vec<u8>>) -> Self {
        Self::new(status, "text/html; charset=utf-8", body)
    }

    pub fn json(status: u16, value: &Value) -> Self {
        Self::new(status, "application/json; charset=utf-8", value.to_string())
    }

    pub fn not_found() -> Self {
        Self::new(404, "text/plain", "not found")
    }
}

type Handler = dyn Fn(Request) -> Response + Send + Sync;

/// A tiny_http server answering each request on its own thread.
pub struct HttpServer {
    addr: SocketAddr,
    server: Arc<tiny_http::Server>,
    thread: Option<JoinHandle<()>>,
}

impl HttpServer {
    /// Listens on an ephemeral loopback port.
    pub fn start<F>(handler: F) -> io::Result<Self>
    where
        F: Fn(Request) -> Response + Send + Sync + 'static,
    {
        Self::bind("127.0.0.1:0", handler)
    }

    pub fn bind<F>(addr: &str, handler: F) -> io::Result<Self>
    where
        F: Fn(Request) -> Response + Send + Sync + 'static,
    {
        let server = tiny_http::Server::http(addr).map_err(io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| io::Error::other("server has no IP address"))?;
        let server = Arc::new(server);
        let handler: Arc<Handler> = Arc::new(handler);
        let accept = Arc::clone(&server);
        let thread = std::thread::spawn(move || {
            for rq in accept.incoming_requests() {
                let handler = Arc::clone(&handler);
                std::thread::spawn(move || respond(rq, &*handler));
            }
        });
        Ok(Self {
            addr,
            server,
            thread: Some(thread),
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for HttpServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn respond(mut rq: tiny_http::Request, handler: &Handler) {
    let mut body = Vec::new();
    if rq.as_reader().read_to_end(&mut body).is_err() {
        let _ = rq.respond(tiny_http::Response::empty(400));
        return;
    }
    let (path, query) = match rq.url().split_once('?') {
        Some((p, q)) => (p.to_string(), Some(q.to_string())),
        None => (rq.url().to_string(), None),
    };
    let req = Request {
        method: rq.method().as_str().to_ascii_uppercase(),
        path,
        query,
        body,
    };
    let res = handler(req);
    let header = tiny_http::Header::from_bytes("Content-Type", res.content_type).expect("static header");
    let out = tiny_http::Response::from_data(res.body)
        .with_status_code(res.status)
        .with_header(header);
    let _ = rq.respond(out);
}

/// A form registered with the server.
#[derive(Clone, Debug)]
pub struct ServedForm {
    pub url: String,
    pub token: String,
    pub instrumented: bool,
}

struct Served {
    html: String,
    instrumented: bool,
    submissions: Vec<Vec<(String, String)>>,
}

/// One traced element lookup plus what the proxy saw happen to it.
#[derive(Clone, Debug)]
struct ProxyEntry {
    entry: TraceEntry,
    queried_selected: bool,
}

/// What the proxy recorded for one raw-script run.
#[derive(Clone, Debug, Default)]
pub struct RunRecord {
    pub session_id: Option<String>,
    pub quit_requested: bool,
    pub trace: Vec<TraceEntry>,
    pub infra_error: Option<String>,
}

struct Run {
    upstream: String,
    capabilities: Value,
    session_id: Option<String>,
    quit_requested: bool,
    entries: Vec<ProxyEntry>,
    elements: HashMap<String, usize>,
    infra_error: Option<String>,
}

#[derive(Default)]
struct State {
    forms: Mutex<HashMap<String, Served>>,
    runs: Mutex<HashMap<String, Run>>,
    counter: AtomicU64,
}

pub struct FormServer {
    http: HttpServer,
    state: Arc<State>,
    agent: ureq::Agent,
}

impl FormServer {
    pub fn start(proxy_timeout: Duration) -> io::Result<Self> {
        let state = Arc::new(State::default());
        let agent = ureq::AgentBuilder::new().timeout(proxy_timeout).build();
        let (s, a) = (Arc::clone(&state), agent.clone());
        let http = HttpServer::start(move |rq| handle(&s, &a, rq))?;
        Ok(Self { http, state, agent })
    }

    pub fn base_url(&self) -> String {
        self.http.base_url()
    }

    fn next_token(&self, prefix: char) -> String {
        let n = self.state.counter.fetch_add(1, Ordering::Relaxed);
        format!("{prefix}{n:06}")
    }

    /// Registers `html` under a fresh URL. With `instrument` the recorder is
    /// injected; otherwise the served bytes are exactly `html`.
    pub fn serve(&self, html: &str, instrument: bool) -> ServedForm {
        let token = self.next_token('f');
        let body = if instrument { recorder::install(html) } else { html.to_string() };
        self.state.forms.lock().expect("forms lock").insert(
            token.clone(),
            Served {
                html: body,
                instrumented: instrument,
                submissions: Vec::new(),
            },
        );
        ServedForm {
            url: format!("{}/forms/{token}/", self.base_url()),
            token,
            instrumented: instrument,
        }
    }

    /// Bytes served for `form`.
    pub fn served_html(&self, form: &ServedForm) -> Option<String> {
        self.state.forms.lock().expect("forms lock").get(&form.token).map(|s| s.html.clone())
    }

    /// Decoded bodies of every submission received for `form`, in order.
    pub fn submissions(&self, form: &ServedForm) -> Vec<Vec<(String, String)>> {
        self.state
            .forms
            .lock()
            .expect("forms lock")
            .get(&form.token)
            .map(|s| s.submissions.clone())
            .unwrap_or_default()
    }

    pub fn release(&self, form: &ServedForm) {
        self.state.forms.lock().expect("forms lock").remove(&form.token);
    }

    /// Opens a proxy in front of `upstream`. New sessions get
    /// `capabilities` merged into whatever the script asks for.
    pub fn open_run(&self, upstream: &str, capabilities: &Value) -> (String, String) {
        let token = self.next_token('r');
        self.state.runs.lock().expect("runs lock").insert(
            token.clone(),
            Run {
                upstream: upstream.trim_end_matches('/').to_string(),
                capabilities: capabilities.clone(),
                session_id: None,
                quit_requested: false,
                entries: Vec::new(),
                elements: HashMap::new(),
                infra_error: None,
            },
        );
        let url = format!("{}/run/{token}", self.base_url());
        (token, url)
    }

    pub fn close_run(&self, token: &str) -> RunRecord {
        let run = self.state.runs.lock().expect("runs lock").remove(token);
        match run {
            Some(r) => RunRecord {
                session_id: r.session_id,
                quit_requested: r.quit_requested,
                trace: r.entries.into_iter().map(|e| e.entry).collect(),
                infra_error: r.infra_error,
            },
            None => RunRecord::default(),
        }
    }

    pub fn agent(&self) -> &ureq::Agent {
        &self.agent
    }
}

fn echo_page(instrumented: bool) -> String {
    let restore = if instrumented { recorder::echo_restore_markup() } else { String::new() };
    format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Submitted</title>\n</head>\n<body>\n<p id=\"formbench-submitted\">Submission received.</p>\n{restore}</body>\n</html>\n"
    )
}

fn handle(state: &State, agent: &ureq::Agent, rq: Request) -> Response {
    let segs: Vec<&str> = rq.path.trim_start_matches('/').splitn(3, '/').collect();
    match segs.as_slice() {
        ["forms", token, rest] => handle_form(state, token, rest, &rq),
        ["run", token, rest] => proxy(state, agent, token, &format!("/{rest}"), &rq),
        ["run", token] => proxy(state, agent, token, "/", &rq),
        _ => Response::not_found(),
    }
}

fn handle_form(state: &State, token: &str, rest: &str, rq: &Request) -> Response {
    let mut forms = state.forms.lock().expect("forms lock");
    let Some(served) = forms.get_mut(token) else {
        return Response::not_found();
    };
    match (rq.method.as_str(), rest) {
        ("GET", "") | ("GET", "index.html") => Response::html(200, served.html.clone()),
        ("POST", "submit") => {
            served.submissions.push(parse_urlencoded(&rq.body));
            Response::html(200, echo_page(served.instrumented))
        }
        ("GET", "submit") => {
            let q = rq.query.clone().unwrap_or_default();
            served.submissions.push(parse_urlencoded(q.as_bytes()));
            Response::html(200, echo_page(served.instrumented))
        }
        _ => Response::not_found(),
    }
}

fn element_id(v: &Value) -> Option<String> {
    v.get(ELEMENT_KEY).and_then(Value::as_str).map(str::to_string)
}

fn merge(into: &mut Value, from: &Value) {
    match (into, from) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in b {
                match a.get_mut(k) {
                    Some(Value::Array(existing)) if v.is_array() => {
                        for item in v.as_array().expect("array") {
                            if !existing.contains(item) {
                                existing.push(item.clone());
                            }
                        }
                    }
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        a.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

fn protocol_error(body: &Value) -> Option<String> {
    body.get("value")
        .and_then(|v| v.get("error"))
        .and_then(Value::as_str)
        .map(str::to_string)
}

fn proxy(state: &State, agent: &ureq::Agent, token: &str, path: &str, rq: &Request) -> Response {
    let (upstream, caps) = {
        let runs = state.runs.lock().expect("runs lock");
        match runs.get(token) {
            Some(r) => (r.upstream.clone(), r.capabilities.clone()),
            None => return Response::not_found(),
        }
    };
    let segs: Vec<&str> = path.trim_matches('/').split('/').collect();
    let mut body = rq.json();

    if rq.method == "POST" && segs == ["session"] {
        let mut b = body.clone().unwrap_or_else(|| json!({}));
        let always = b
            .pointer_mut("/capabilities/alwaysMatch")
            .map(|v| v.take())
            .unwrap_or_else(|| json!({}));
        let mut merged = always;
        merge(&mut merged, &caps);
        b["capabilities"] = json!({ "alwaysMatch": merged, "firstMatch": [{}] });
        body = Some(b);
    }

    if rq.method == "DELETE" && segs.len() == 2 && segs[0] == "session" {
        // The harness still needs the session to read final state.
        let mut runs = state.runs.lock().expect("runs lock");
        if let Some(r) = runs.get_mut(token) {
            r.quit_requested = true;
        }
        return Response::json(200, &json!({ "value": null }));
    }

    let url = format!("{upstream}{path}");
    let req = agent.request(&rq.method, &url);
    let result = if rq.method == "GET" || rq.method == "DELETE" {
        req.call()
    } else {
        req.set("Content-Type", "application/json; charset=utf-8")
            .send_string(&body.as_ref().map(Value::to_string).unwrap_or_default())
    };
    let (status, text) = match result {
        Ok(r) => (r.status(), r.into_string().unwrap_or_default()),
        Err(ureq::Error::Status(code, r)) => (code, r.into_string().unwrap_or_default()),
        Err(ureq::Error::Transport(t)) => {
            let msg = t.to_string();
            if let Some(r) = state.runs.lock().expect("runs lock").get_mut(token) {
                r.infra_error.get_or_insert(msg.clone());
            }
            let v = json!({ "value": { "error": "unknown error", "message": format!("upstream unreachable: {msg}") } });
            return Response::json(500, &v);
        }
    };
    let reply: Value = serde_json::from_str(&text).unwrap_or(Value::Null);
    record(state, token, &rq.method, &segs, body.as_ref(), &reply);
    Response::new(status, "application/json; charset=utf-8", text)
}

fn record(state: &State, token: &str, method: &str, segs: &[&str], body: Option<&Value>, reply: &Value) {
    let mut runs = state.runs.lock().expect("runs lock");
    let Some(run) = runs.get_mut(token) else { return };
    let err = protocol_error(reply);
    if method == "POST" && segs == ["session"] {
        if let Some(id) = reply.pointer("/value/sessionId").and_then(Value::as_str) {
            run.session_id = Some(id.to_string());
        }
        return;
    }
    if segs.len() < 3 || segs[0] != "session" {
        return;
    }
    let rest = &segs[2..];
    let arg = |k: &str| body.and_then(|b| b.get(k)).and_then(Value::as_str).unwrap_or("").to_string();
    match (method, rest) {
        ("POST", ["element"]) | ("POST", ["elements"]) => {
            let idx = run.entries.len();
            run.entries.push(ProxyEntry {
                entry: TraceEntry {
                    using: arg("using"),
                    value: arg("value"),
                    verb: None,
                    error: err.clone(),
                },
                queried_selected: false,
            });
            if rest[0] == "elements" && err.is_none() && reply["value"].as_array().is_some_and(|a| a.is_empty()) {
                run.entries[idx].entry.error = Some("no such element".to_string());
            }
            let found: Vec<String> = match &reply["value"] {
                Value::Array(items) => items.iter().filter_map(element_id).collect(),
                v => element_id(v).into_iter().collect(),
            };
            for id in found {
                run.elements.insert(id, idx);
            }
        }
        ("POST", ["element", parent, "element" | "elements"]) => {
            // Option lookups under a select mark the select's entry.
            if let Some(&i) = run.elements.get(*parent) {
                let e = &mut run.entries[i].entry;
                if e.verb.is_none() {
                    e.verb = Some(Verb::SelectOption);
                }
                if let Value::Array(items) = &reply["value"] {
                    if items.is_empty() && e.error.is_none() {
                        e.error = Some("no such element".to_string());
                    }
                    for id in items.iter().filter_map(element_id) {
                        run.elements.insert(id, i);
                    }
                }
                if err.is_some() && e.error.is_none() {
                    e.error = err;
                }
            }
        }
        (_, ["element", id, action, ..]) => {
            let Some(&i) = run.elements.get(*id) else { return };
            let pe = &mut run.entries[i];
            match (method, *action) {
                ("GET", "selected") => pe.queried_selected = true,
                ("POST", "value") => {
                    pe.entry.verb.get_or_insert(Verb::SetValue);
                }
                ("POST", "click") => {
                    let verb = if pe.queried_selected { Verb::SetChecked } else { Verb::Click };
                    pe.entry.verb.get_or_insert(verb);
                }
                _ => {}
            }
            if err.is_some() && pe.entry.error.is_none() {
                pe.entry.error = err;
            }
        }
        ("POST", ["execute", ..]) => {
            let script = arg("script");
            let args = body.and_then(|b| b.get("args")).and_then(Value::as_array);
            for id in args.into_iter().flatten().filter_map(element_id) {
                if let Some(&i) = run.elements.get(&id) {
                    let e = &mut run.entries[i].entry;
                    if script.contains("submit") {
                        e.verb = Some(Verb::SubmitForm);
                    }
                    if err.is_some() && e.error.is_none() {
                        e.error = err.clone();
                    }
                }
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serves_exact_bytes_and_records_submissions() {
        let srv = FormServer::start(Duration::from_secs(5)).unwrap();
        let a = srv.serve("<form id=\"f\"></form>", false);
        let b = srv.serve("<form id=\"f\"></form>", false);
        assert_ne!(a.url, b.url);
        let body = ureq::get(&a.url).call().unwrap().into_string().unwrap();
        assert_eq!(body, "<form id=\"f\"></form>");
        ureq::post(&format!("{}submit", a.url))
            .set("Content-Type", "application/x-www-form-urlencoded")
            .send_string("q=a+b&q=c%21")
            .unwrap();
        assert_eq!(
            srv.submissions(&a),
            vec![vec![("q".to_string(), "a b".to_string()), ("q".to_string(), "c!".to_string())]]
        );
        assert!(srv.submissions(&b).is_empty());
    }

    #[test]
    fn caps_merge_keeps_both_sides() {
        let mut a = json!({ "browserName": "chrome", "goog:chromeOptions": { "args": ["--x"] } });
        merge(&mut a, &json!({ "goog:chromeOptions": { "args": ["--headless=new"], "binary": "/b" } }));
        assert_eq!(a["goog:chromeOptions"]["args"], json!(["--x", "--headless=new"]));
        assert_eq!(a["goog:chromeOptions"]["binary"], "/b");
    }
}
