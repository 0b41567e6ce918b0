//! Reference browser: an in-process W3C WebDriver endpoint over the core
//! DOM. It fetches pages over HTTP, keeps live control state, performs
//! clicks, typing, form submission and constraint validation, and emulates
//! the in-page recorder. Interactability follows chromedriver: typing into
//! non-editable, hidden, offscreen or disabled elements and clicking hidden
//! or offscreen elements raise `element not interactable`; clicking a
//! disabled control or a plain element succeeds without effect.
//!
//! Scripts are not interpreted. `execute/sync` recognises the handful of
//! snippets client libraries and generated scripts send (form submission,
//! element clicks, display/attribute atoms, the recorder log read) and
//! answers `javascript error` for anything else. Only loopback `http` URLs
//! can be loaded.

use std::collections::{HashMap, HashSet};
use std::io;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use formbench_core::dummy;
use formbench_core::html::dom::{Document, NodeId};
use formbench_core::html::style::StyleSheet;
use formbench_core::locate::css::{attr_disabled, ElementState};
use formbench_core::locate::resolve_webdriver;
use formbench_core::recorder::{self, EventKind, EventLog, TargetDescriptor, LOG_NODE_ID, RECORDER_NODE_ID};
use regex::Regex;
use serde_json::{json, Value};
use url::Url;

use crate::server::{HttpServer, Request, Response};
use crate::webdriver::ELEMENT_KEY;

const BROWSER_NAME: &str = "formbench-refbrowser";

pub struct RefBrowser {
    http: HttpServer,
}

impl RefBrowser {
    pub fn start() -> io::Result<Self> {
        let browser = Arc::new(Browser::default());
        let http = HttpServer::start(move |rq| browser.handle(rq))?;
        Ok(Self { http })
    }

    pub fn url(&self) -> String {
        self.http.base_url()
    }
}

struct WdErr {
    status: u16,
    error: &'static str,
    message: String,
}

fn err(status: u16, error: &'static str, message: impl Into<String>) -> WdErr {
    WdErr {
        status,
        error,
        message: message.into(),
    }
}

fn not_interactable() -> WdErr {
    err(400, "element not interactable", "element not interactable")
}

fn invalid_argument(m: &str) -> WdErr {
    err(400, "invalid argument", m)
}

fn js_error(m: &str) -> WdErr {
    err(500, "javascript error", format!("javascript error: {m}"))
}

fn unsupported(what: &str) -> WdErr {
    err(500, "unsupported operation", format!("{what} is not supported by {BROWSER_NAME}"))
}

type WdRes<T> = Result<T, WdErr>;

#[derive(Default)]
struct Browser {
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    counter: AtomicU64,
}

impl Browser {
    fn handle(&self, rq: Request) -> Response {
        let segs: Vec<String> = rq
            .path
            .trim_matches('/')
            .split('/')
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        let body = match rq.json() {
            Some(b) => b,
            None => return reply(Err(invalid_argument("body is not JSON"))),
        };
        let segs: Vec<&str> = segs.iter().map(String::as_str).collect();
        let out = match (rq.method.as_str(), segs.as_slice()) {
            ("GET", ["status"]) => Ok(json!({ "ready": true, "message": format!("{BROWSER_NAME} ready") })),
            ("POST", ["session"]) => Ok(self.new_session()),
            ("DELETE", ["session", id]) => {
                self.sessions.lock().expect("sessions lock").remove(*id);
                Ok(Value::Null)
            }
            (m, ["session", id, rest @ ..]) => {
                let s = self.sessions.lock().expect("sessions lock").get(*id).cloned();
                match s {
                    Some(s) => s.lock().expect("session lock").dispatch(m, rest, &body),
                    None => Err(err(404, "invalid session id", "invalid session id")),
                }
            }
            _ => Err(err(404, "unknown command", format!("unknown command: {} {}", rq.method, rq.path))),
        };
        reply(out)
    }

    fn new_session(&self) -> Value {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let id = format!("{:016x}{:016x}", std::process::id(), n);
        let s = Session::default();
        let caps = json!({
            "browserName": BROWSER_NAME,
            "browserVersion": env!("CARGO_PKG_VERSION"),
            "platformName": std::env::consts::OS,
            "acceptInsecureCerts": false,
            "pageLoadStrategy": "normal",
            "setWindowRect": false,
            "strictFileInteractability": false,
            "unhandledPromptBehavior": "dismiss and notify",
            "timeouts": s.timeouts.to_json(),
        });
        self.sessions
            .lock()
            .expect("sessions lock")
            .insert(id.clone(), Arc::new(Mutex::new(s)));
        json!({ "sessionId": id, "capabilities": caps })
    }
}

fn reply(out: WdRes<Value>) -> Response {
    match out {
        Ok(v) => Response::json(200, &json!({ "value": v })),
        Err(e) => Response::json(
            e.status,
            &json!({ "value": { "error": e.error, "message": e.message, "stacktrace": "" } }),
        ),
    }
}

#[derive(Clone, Copy)]
struct Timeouts {
    implicit: u64,
    page_load: u64,
    script: u64,
}

impl Default for Timeouts {
    fn default() -> Self {
        Self {
            implicit: 0,
            page_load: 300_000,
            script: 30_000,
        }
    }
}

impl Timeouts {
    fn to_json(self) -> Value {
        json!({ "implicit": self.implicit, "pageLoad": self.page_load, "script": self.script })
    }
}

/// Live state of the controls on a page.
#[derive(Clone, Default)]
struct Controls {
    /// Raw (typed) text of inputs and textareas.
    raw: HashMap<NodeId, String>,
    checked: HashSet<NodeId>,
    selected: HashSet<NodeId>,
}

struct Page {
    url: Url,
    doc: Document,
    sheet: StyleSheet,
    controls: Controls,
    focused: Option<NodeId>,
    pending_change: bool,
    /// Active recorder log.
    recorder: Option<EventLog>,
    /// Log node text of a page without an active recorder.
    log_text: Option<String>,
}

struct Live<'a>(&'a Controls);

impl ElementState for Live<'_> {
    fn checked(&self, doc: &Document, node: NodeId) -> bool {
        match doc.tag(node) {
            Some("option") => self.0.selected.contains(&node),
            Some("input") => self.0.checked.contains(&node),
            _ => false,
        }
    }
}

enum Effect {
    None,
    /// Submit `form`; `validate` runs constraint validation first.
    Submit {
        form: NodeId,
        submitter: Option<NodeId>,
        validate: bool,
    },
}

#[derive(Default)]
struct Session {
    timeouts: Timeouts,
    page: Option<Page>,
    generation: u64,
    history: Vec<Url>,
    /// sessionStorage per origin.
    storage: HashMap<String, HashMap<String, String>>,
    clock: u64,
}

fn input_type(doc: &Document, n: NodeId) -> String {
    doc.element(n).map(|e| e.input_type()).unwrap_or_default()
}

fn is_text_entry(doc: &Document, n: NodeId) -> bool {
    match doc.tag(n) {
        Some("textarea") => true,
        Some("input") => !matches!(
            input_type(doc, n).as_str(),
            "checkbox" | "radio" | "submit" | "reset" | "button" | "image" | "hidden" | "file" | "range" | "color"
        ),
        _ => false,
    }
}

fn is_submit_button(doc: &Document, n: NodeId) -> bool {
    match doc.tag(n) {
        Some("button") => !matches!(
            doc.attr(n, "type").map(|t| t.trim().to_ascii_lowercase()).as_deref(),
            Some("reset" | "button")
        ),
        Some("input") => matches!(input_type(doc, n).as_str(), "submit" | "image"),
        _ => false,
    }
}

fn is_reset_button(doc: &Document, n: NodeId) -> bool {
    match doc.tag(n) {
        Some("button") => doc.attr(n, "type").is_some_and(|t| t.trim().eq_ignore_ascii_case("reset")),
        Some("input") => input_type(doc, n) == "reset",
        _ => false,
    }
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn option_value(doc: &Document, n: NodeId) -> String {
    doc.attr(n, "value")
        .map(str::to_string)
        .unwrap_or_else(|| collapse_ws(&doc.text_content(n)))
}

fn options_of(doc: &Document, select: NodeId) -> Vec<NodeId> {
    doc.descendant_elements(select).filter(|n| doc.tag(*n) == Some("option")).collect()
}

/// Value of a date input from typed keys, read as month/day/year segments
/// the way an en-US date field consumes them.
fn typed_date(raw: &str) -> Option<String> {
    if dummy::parse_iso_date(raw).is_some() {
        return Some(raw.to_string());
    }
    let mut segs = [String::new(), String::new(), String::new()];
    let mut i = 0usize;
    for c in raw.chars() {
        if i > 2 {
            break;
        }
        if c.is_ascii_digit() {
            segs[i].push(c);
            let len = segs[i].len();
            let full = match i {
                0 => len == 2 || (len == 1 && c > '1'),
                1 => len == 2 || (len == 1 && c > '3'),
                _ => len == 4,
            };
            if full {
                i += 1;
            }
        } else if !segs[i].is_empty() {
            i += 1;
        }
    }
    if segs[2].len() != 4 {
        return None;
    }
    let m: u32 = segs[0].parse().ok()?;
    let d: u32 = segs[1].parse().ok()?;
    dummy::us_to_iso(&format!("{m:02}/{d:02}/{}", segs[2]))
}

/// The value property of a text entry control given its raw text.
fn sanitize(doc: &Document, n: NodeId, raw: &str) -> String {
    if doc.tag(n) == Some("textarea") {
        return raw.replace("\r\n", "\n");
    }
    let stripped: String = raw.chars().filter(|c| *c != '\n' && *c != '\r').collect();
    match input_type(doc, n).as_str() {
        "number" => {
            if dummy::parse_html_number(&stripped).is_some() {
                stripped
            } else {
                String::new()
            }
        }
        "date" => typed_date(&stripped).unwrap_or_default(),
        "email" | "url" => stripped.trim_matches(|c: char| c.is_ascii_whitespace()).to_string(),
        _ => stripped,
    }
}

impl Page {
    fn new(url: Url, html: &str, storage: &mut HashMap<String, HashMap<String, String>>, clock: u64) -> Self {
        let doc = Document::parse(html);
        let sheet = StyleSheet::from_document(&doc);
        let mut page = Page {
            url,
            doc,
            sheet,
            controls: Controls::default(),
            focused: None,
            pending_change: false,
            recorder: None,
            log_text: None,
        };
        let controls: Vec<NodeId> = page
            .doc
            .elements()
            .filter(|n| matches!(page.doc.tag(*n), Some("input" | "textarea" | "select")))
            .collect();
        for c in controls {
            page.reset_control(c);
        }
        page.init_recorder(storage, clock);
        page
    }

    fn scripts_in(&self, root: NodeId) -> Vec<String> {
        self.doc
            .descendant_elements(root)
            .filter(|n| self.doc.tag(*n) == Some("script"))
            .map(|n| self.doc.text_content(n))
            .collect()
    }

    fn init_recorder(&mut self, storage: &mut HashMap<String, HashMap<String, String>>, _clock: u64) {
        let Some(node) = self.doc.element_by_id(LOG_NODE_ID) else { return };
        let container = self.doc.element_by_id(RECORDER_NODE_ID).unwrap_or(Document::ROOT);
        let scripts = self.scripts_in(container);
        let text = self.doc.text_content(node);
        if scripts.iter().any(|s| s.contains("addEventListener")) {
            let log = serde_json::from_str::<EventLog>(&text).unwrap_or_else(|_| EventLog::empty(true));
            storage
                .entry(self.origin())
                .or_default()
                .insert(LOG_NODE_ID.to_string(), log.to_json());
            self.recorder = Some(log);
        } else if scripts.iter().any(|s| s.contains("sessionStorage.getItem")) {
            self.log_text = storage
                .get(&self.origin())
                .and_then(|m| m.get(LOG_NODE_ID))
                .cloned()
                .or(Some(text));
        } else {
            self.log_text = Some(text);
        }
    }

    fn origin(&self) -> String {
        self.url.origin().ascii_serialization()
    }

    fn log_json(&self) -> Option<String> {
        match &self.recorder {
            Some(log) => Some(log.to_json()),
            None => self.log_text.clone(),
        }
    }

    fn reset_control(&mut self, n: NodeId) {
        let doc = &self.doc;
        match doc.tag(n) {
            Some("textarea") => {
                let t = doc.text_content(n);
                let t = t.strip_prefix('\n').unwrap_or(&t).to_string();
                self.controls.raw.insert(n, t);
            }
            Some("input") => match input_type(doc, n).as_str() {
                "checkbox" | "radio" => {
                    if doc.attr(n, "checked").is_some() {
                        self.controls.checked.insert(n);
                    } else {
                        self.controls.checked.remove(&n);
                    }
                }
                _ => {
                    let v = doc.attr(n, "value").unwrap_or("").to_string();
                    self.controls.raw.insert(n, v);
                }
            },
            Some("select") => {
                let opts = options_of(doc, n);
                let multiple = doc.attr(n, "multiple").is_some();
                for o in &opts {
                    self.controls.selected.remove(o);
                }
                let marked: Vec<NodeId> = opts.iter().copied().filter(|o| doc.attr(*o, "selected").is_some()).collect();
                if multiple {
                    self.controls.selected.extend(marked);
                } else if let Some(last) = marked.last() {
                    self.controls.selected.insert(*last);
                } else if let Some(first) = opts.iter().find(|o| !attr_disabled(doc, **o)) {
                    self.controls.selected.insert(*first);
                }
            }
            _ => {}
        }
    }

    fn value(&self, n: NodeId) -> String {
        let doc = &self.doc;
        match doc.tag(n) {
            Some("input") => match input_type(doc, n).as_str() {
                "checkbox" | "radio" => doc.attr(n, "value").unwrap_or("on").to_string(),
                _ => sanitize(doc, n, self.controls.raw.get(&n).map(String::as_str).unwrap_or("")),
            },
            Some("textarea") => sanitize(doc, n, self.controls.raw.get(&n).map(String::as_str).unwrap_or("")),
            Some("select") => options_of(doc, n)
                .into_iter()
                .find(|o| self.controls.selected.contains(o))
                .map(|o| option_value(doc, o))
                .unwrap_or_default(),
            Some("option") => option_value(doc, n),
            Some("button") => doc.attr(n, "value").unwrap_or("").to_string(),
            _ => String::new(),
        }
    }

    fn is_checked(&self, n: NodeId) -> bool {
        match self.doc.tag(n) {
            Some("option") => self.controls.selected.contains(&n),
            Some("input") => self.controls.checked.contains(&n),
            _ => false,
        }
    }

    fn displayed(&self, n: NodeId) -> bool {
        let v = self.sheet.visibility(&self.doc, n);
        !(v.is_hidden() || v.offscreen)
    }

    fn in_recorder(&self, n: NodeId) -> bool {
        self.doc
            .ancestors(n)
            .chain(std::iter::once(n))
            .any(|a| self.doc.attr(a, "id") == Some(RECORDER_NODE_ID))
    }

    fn emit(&mut self, n: NodeId, kind: EventKind, clock: &mut u64, storage: &mut HashMap<String, HashMap<String, String>>) {
        if self.recorder.is_none() || self.in_recorder(n) {
            return;
        }
        if kind != EventKind::Click && !self.doc.is_control(n) {
            return;
        }
        let forms: Vec<NodeId> = self.doc.elements_by_tag("form").collect();
        let in_form = forms.len() == 1 && self.doc.is_ancestor(forms[0], n);
        let descriptor = TargetDescriptor {
            tag: self.doc.tag(n).unwrap_or("").to_string(),
            id: self.doc.attr(n, "id").filter(|s| !s.is_empty()).map(str::to_string),
            name: self.doc.attr(n, "name").map(str::to_string),
            in_form,
        };
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        *clock = (*clock).max(now);
        let origin = self.origin();
        let log = self.recorder.as_mut().expect("recorder present");
        log.events.push(recorder::Event {
            timestamp_ms: *clock,
            target_descriptor: descriptor,
            event_kind: kind,
        });
        storage.entry(origin).or_default().insert(LOG_NODE_ID.to_string(), log.to_json());
    }

    fn is_focusable(&self, n: NodeId) -> bool {
        self.doc.is_control(n) && !attr_disabled(&self.doc, n) && !(self.doc.tag(n) == Some("input") && input_type(&self.doc, n) == "hidden")
    }

    fn blur(&mut self, clock: &mut u64, storage: &mut HashMap<String, HashMap<String, String>>) {
        if let Some(old) = self.focused.take() {
            if self.pending_change {
                self.pending_change = false;
                self.emit(old, EventKind::Change, clock, storage);
            }
        }
    }

    fn focus(&mut self, n: NodeId, clock: &mut u64, storage: &mut HashMap<String, HashMap<String, String>>) {
        if self.focused == Some(n) {
            return;
        }
        self.blur(clock, storage);
        if self.is_focusable(n) {
            self.focused = Some(n);
            self.emit(n, EventKind::Focus, clock, storage);
        }
    }

    fn labeled_control(&self, label: NodeId) -> Option<NodeId> {
        let doc = &self.doc;
        match doc.attr(label, "for") {
            Some(id) => doc.element_by_id(id).filter(|n| doc.is_control(*n)),
            None => doc.descendant_elements(label).find(|n| doc.is_control(*n)),
        }
    }

    fn radio_group(&self, n: NodeId) -> Vec<NodeId> {
        let doc = &self.doc;
        let Some(name) = doc.attr(n, "name").filter(|s| !s.is_empty()) else { return vec![n] };
        let owner = doc.form_owner(n);
        doc.elements()
            .filter(|m| doc.tag(*m) == Some("input") && input_type(doc, *m) == "radio")
            .filter(|m| doc.attr(*m, "name") == Some(name) && doc.form_owner(*m) == owner)
            .collect()
    }

    fn select_option(&mut self, opt: NodeId, clock: &mut u64, storage: &mut HashMap<String, HashMap<String, String>>) {
        let doc = &self.doc;
        let Some(select) = doc.ancestors(opt).find(|a| doc.tag(*a) == Some("select")) else { return };
        if attr_disabled(doc, opt) || attr_disabled(doc, select) {
            return;
        }
        let multiple = doc.attr(select, "multiple").is_some();
        let changed;
        if multiple {
            if !self.controls.selected.remove(&opt) {
                self.controls.selected.insert(opt);
            }
            changed = true;
        } else {
            changed = !self.controls.selected.contains(&opt);
            for o in options_of(doc, select) {
                self.controls.selected.remove(&o);
            }
            self.controls.selected.insert(opt);
        }
        self.focus(select, clock, storage);
        self.emit(opt, EventKind::Click, clock, storage);
        if changed {
            self.emit(select, EventKind::Input, clock, storage);
            self.emit(select, EventKind::Change, clock, storage);
        }
    }

    /// Activation behaviour of a click that reached `n`.
    fn activate(&mut self, n: NodeId, clock: &mut u64, storage: &mut HashMap<String, HashMap<String, String>>) -> Effect {
        let doc = &self.doc;
        if doc.is_control(n) && attr_disabled(doc, n) {
            return Effect::None;
        }
        match doc.tag(n) {
            Some("input") => match input_type(doc, n).as_str() {
                "checkbox" => {
                    if !self.controls.checked.remove(&n) {
                        self.controls.checked.insert(n);
                    }
                    self.emit(n, EventKind::Input, clock, storage);
                    self.emit(n, EventKind::Change, clock, storage);
                    return Effect::None;
                }
                "radio" => {
                    if !self.controls.checked.contains(&n) {
                        for m in self.radio_group(n) {
                            self.controls.checked.remove(&m);
                        }
                        self.controls.checked.insert(n);
                        self.emit(n, EventKind::Input, clock, storage);
                        self.emit(n, EventKind::Change, clock, storage);
                    }
                    return Effect::None;
                }
                _ => {}
            },
            Some("label") => {
                if let Some(c) = self.labeled_control(n) {
                    if attr_disabled(&self.doc, c) {
                        return Effect::None;
                    }
                    self.focus(c, clock, storage);
                    self.emit(c, EventKind::Click, clock, storage);
                    return self.activate(c, clock, storage);
                }
                return Effect::None;
            }
            _ => {}
        }
        let doc = &self.doc;
        if is_submit_button(doc, n) {
            if let Some(form) = doc.form_owner(n) {
                return Effect::Submit {
                    form,
                    submitter: Some(n),
                    validate: true,
                };
            }
        } else if is_reset_button(doc, n) {
            if let Some(form) = doc.form_owner(n) {
                self.reset_form(form);
            }
        } else if !doc.is_control(n) {
            let label = doc.ancestors(n).find(|a| doc.tag(*a) == Some("label"));
            if let Some(label) = label {
                return self.activate(label, clock, storage);
            }
        }
        Effect::None
    }

    fn reset_form(&mut self, form: NodeId) {
        let members: Vec<NodeId> = self
            .doc
            .elements()
            .filter(|n| matches!(self.doc.tag(*n), Some("input" | "textarea" | "select")))
            .filter(|n| self.doc.form_owner(*n) == Some(form))
            .collect();
        for n in members {
            self.reset_control(n);
        }
    }

    fn form_members(&self, form: NodeId) -> Vec<NodeId> {
        self.doc
            .elements()
            .filter(|n| self.doc.is_control(*n) && self.doc.form_owner(*n) == Some(form))
            .collect()
    }

    /// Whether every control of `form` satisfies its constraints.
    fn form_valid(&self, form: NodeId) -> bool {
        let doc = &self.doc;
        self.form_members(form).into_iter().all(|n| self.control_valid(n))
            || doc.attr(form, "novalidate").is_some()
    }

    fn control_valid(&self, n: NodeId) -> bool {
        let doc = &self.doc;
        if attr_disabled(doc, n) || doc.attr(n, "readonly").is_some() {
            return true;
        }
        let required = doc.attr(n, "required").is_some();
        match doc.tag(n) {
            Some("select") => {
                if !required || doc.attr(n, "multiple").is_some() {
                    return true;
                }
                let opts = options_of(doc, n);
                let chosen: Vec<NodeId> = opts.iter().copied().filter(|o| self.controls.selected.contains(o)).collect();
                match chosen.first() {
                    None => false,
                    Some(o) => !(Some(o) == opts.first() && option_value(doc, *o).is_empty()),
                }
            }
            Some("textarea") => !(required && self.value(n).is_empty()),
            Some("input") => {
                let ty = input_type(doc, n);
                match ty.as_str() {
                    "hidden" | "submit" | "reset" | "button" | "image" => true,
                    "checkbox" => !required || self.controls.checked.contains(&n),
                    "radio" => {
                        let group = self.radio_group(n);
                        let group_required = group.iter().any(|m| doc.attr(*m, "required").is_some());
                        !group_required || group.iter().any(|m| self.controls.checked.contains(m))
                    }
                    _ => {
                        let raw = self.controls.raw.get(&n).map(String::as_str).unwrap_or("");
                        let v = self.value(n);
                        if v.is_empty() {
                            // Typed but unparseable input is a bad input, not a missing value.
                            return raw.is_empty() && !required;
                        }
                        if ty == "email" && !dummy::is_valid_email(&v) {
                            return false;
                        }
                        if ty == "number" {
                            let x = dummy::parse_html_number(&v).unwrap_or(f64::NAN);
                            let bound = |a: &str| doc.attr(n, a).and_then(dummy::parse_html_number);
                            if bound("min").is_some_and(|m| x < m) || bound("max").is_some_and(|m| x > m) {
                                return false;
                            }
                        }
                        if let Some(p) = doc.attr(n, "pattern") {
                            if let Ok(p) = dummy::compile_pattern(p) {
                                if !p.is_match(&v) {
                                    return false;
                                }
                            }
                        }
                        true
                    }
                }
            }
            _ => true,
        }
    }

    /// The form data set of `form` as urlencoded pairs.
    fn entry_list(&self, form: NodeId, submitter: Option<NodeId>) -> Vec<(String, String)> {
        let doc = &self.doc;
        let mut out = Vec::new();
        for n in self.form_members(form) {
            if attr_disabled(doc, n) {
                continue;
            }
            if doc.ancestors(n).any(|a| doc.tag(a) == Some("datalist")) {
                continue;
            }
            let Some(name) = doc.attr(n, "name").filter(|s| !s.is_empty()) else { continue };
            let name = name.to_string();
            match doc.tag(n) {
                Some("button") => {
                    if Some(n) == submitter {
                        out.push((name, self.value(n)));
                    }
                }
                Some("select") => {
                    for o in options_of(doc, n) {
                        if self.controls.selected.contains(&o) && !attr_disabled(doc, o) {
                            out.push((name.clone(), option_value(doc, o)));
                        }
                    }
                }
                Some("textarea") => out.push((name, self.value(n).replace('\n', "\r\n"))),
                Some("input") => match input_type(doc, n).as_str() {
                    "submit" | "reset" | "button" => {
                        if Some(n) == submitter {
                            out.push((name, self.value(n)));
                        }
                    }
                    "image" | "file" => {}
                    "checkbox" | "radio" => {
                        if self.controls.checked.contains(&n) {
                            out.push((name, self.value(n)));
                        }
                    }
                    _ => out.push((name, self.value(n))),
                },
                _ => {}
            }
        }
        out
    }

    fn element_id(&self, gen: u64, n: NodeId) -> Value {
        json!({ ELEMENT_KEY: format!("fb-{gen}-{n}") })
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn str_arg<'a>(body: &'a Value, key: &str) -> WdRes<&'a str> {
    body.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| invalid_argument(&format!("missing string `{key}`")))
}

fn is_loopback(url: &Url) -> bool {
    match url.host() {
        Some(url::Host::Domain(d)) => d == "localhost",
        Some(url::Host::Ipv4(ip)) => ip.is_loopback(),
        Some(url::Host::Ipv6(ip)) => ip.is_loopback(),
        None => false,
    }
}

impl Session {
    fn page(&self) -> WdRes<&Page> {
        self.page.as_ref().ok_or_else(|| err(404, "no such window", "no page loaded"))
    }

    fn node(&self, id: &str) -> WdRes<NodeId> {
        let page = self.page()?;
        let rest = id
            .strip_prefix("fb-")
            .ok_or_else(|| err(404, "no such element", format!("unknown element reference {id}")))?;
        let (g, n) = rest
            .split_once('-')
            .and_then(|(g, n)| Some((g.parse::<u64>().ok()?, n.parse::<NodeId>().ok()?)))
            .ok_or_else(|| err(404, "no such element", format!("unknown element reference {id}")))?;
        if g != self.generation || n >= page.doc.len() || page.doc.element(n).is_none() {
            return Err(err(
                404,
                "stale element reference",
                "stale element reference: element is not attached to the page document",
            ));
        }
        Ok(n)
    }

    fn arg_node(&self, v: &Value) -> WdRes<NodeId> {
        let id = v
            .get(ELEMENT_KEY)
            .and_then(Value::as_str)
            .ok_or_else(|| js_error("argument is not an element"))?;
        self.node(id)
    }

    fn load(&mut self, url: Url, form: Option<(&str, String)>) -> WdRes<()> {
        let html = if url.as_str() == "about:blank" {
            String::new()
        } else {
            if url.scheme() != "http" || !is_loopback(&url) {
                return Err(err(500, "unknown error", format!("unknown error: net::ERR_BLOCKED_BY_CLIENT ({url})")));
            }
            let agent = ureq::AgentBuilder::new()
                .timeout(Duration::from_millis(self.timeouts.page_load.max(1)))
                .build();
            let res = match form {
                Some(("post", body)) => agent
                    .post(url.as_str())
                    .set("Content-Type", "application/x-www-form-urlencoded")
                    .send_string(&body),
                _ => agent.get(url.as_str()).call(),
            };
            match res {
                Ok(r) => r.into_string().unwrap_or_default(),
                Err(ureq::Error::Status(_, r)) => r.into_string().unwrap_or_default(),
                Err(ureq::Error::Transport(t)) => {
                    return Err(err(500, "unknown error", format!("unknown error: net::ERR_CONNECTION_FAILED ({t})")));
                }
            }
        };
        self.generation += 1;
        self.clock = self.clock.max(now_ms());
        let page = Page::new(url.clone(), &html, &mut self.storage, self.clock);
        self.page = Some(page);
        self.history.push(url);
        Ok(())
    }

    fn submit(&mut self, form: NodeId, submitter: Option<NodeId>, validate: bool) -> WdRes<()> {
        let page = self.page()?;
        if validate && submitter.map_or(true, |s| page.doc.attr(s, "formnovalidate").is_none()) && !page.form_valid(form) {
            return Ok(());
        }
        let pairs = page.entry_list(form, submitter);
        let action = page.doc.attr(form, "action").unwrap_or("").trim().to_string();
        let method = page
            .doc
            .attr(form, "method")
            .map(|m| m.trim().to_ascii_lowercase())
            .filter(|m| m == "post")
            .unwrap_or_else(|| "get".to_string());
        let mut target = if action.is_empty() {
            page.url.clone()
        } else {
            page.url
                .join(&action)
                .map_err(|e| js_error(&format!("invalid form action: {e}")))?
        };
        let body = url::form_urlencoded::Serializer::new(String::new())
            .extend_pairs(pairs.iter())
            .finish();
        if method == "post" {
            self.load(target, Some(("post", body)))
        } else {
            target.set_query(Some(&body));
            self.load(target, None)
        }
    }

    fn apply(&mut self, effect: Effect) -> WdRes<()> {
        match effect {
            Effect::None => Ok(()),
            Effect::Submit {
                form,
                submitter,
                validate,
            } => self.submit(form, submitter, validate),
        }
    }

    fn find(&self, scope: Option<NodeId>, body: &Value) -> WdRes<Vec<Value>> {
        let using = str_arg(body, "using")?;
        let value = str_arg(body, "value")?;
        if !matches!(using, "css selector" | "xpath" | "tag name" | "link text" | "partial link text") {
            return Err(invalid_argument(&format!("invalid locator strategy `{using}`")));
        }
        let page = self.page()?;
        let nodes = resolve_webdriver(&page.doc, using, value, scope, &Live(&page.controls))
            .map_err(|e| err(400, "invalid selector", format!("invalid selector: {e}")))?;
        Ok(nodes.into_iter().map(|n| page.element_id(self.generation, n)).collect())
    }

    fn find_one(&self, scope: Option<NodeId>, body: &Value) -> WdRes<Value> {
        self.find(scope, body)?.into_iter().next().ok_or_else(|| {
            err(
                404,
                "no such element",
                format!(
                    "no such element: Unable to locate element: {{\"method\":\"{}\",\"selector\":\"{}\"}}",
                    body["using"].as_str().unwrap_or(""),
                    body["value"].as_str().unwrap_or("")
                ),
            )
        })
    }

    fn dispatch(&mut self, method: &str, rest: &[&str], body: &Value) -> WdRes<Value> {
        match (method, rest) {
            ("GET", ["timeouts"]) => Ok(self.timeouts.to_json()),
            ("POST", ["timeouts"]) => {
                let get = |k: &str| -> WdRes<Option<u64>> {
                    match body.get(k) {
                        None | Some(Value::Null) => Ok(None),
                        Some(v) => v.as_u64().map(Some).ok_or_else(|| invalid_argument(&format!("bad `{k}` timeout"))),
                    }
                };
                if let Some(v) = get("implicit")? {
                    self.timeouts.implicit = v;
                }
                if let Some(v) = get("pageLoad")? {
                    self.timeouts.page_load = v;
                }
                if let Some(v) = get("script")? {
                    self.timeouts.script = v;
                }
                Ok(Value::Null)
            }
            ("POST", ["url"]) => {
                let raw = str_arg(body, "url")?;
                let url = Url::parse(raw).map_err(|e| invalid_argument(&format!("invalid url: {e}")))?;
                self.load(url, None)?;
                Ok(Value::Null)
            }
            ("GET", ["url"]) => Ok(json!(self.page.as_ref().map(|p| p.url.to_string()).unwrap_or_else(|| "about:blank".into()))),
            ("POST", ["refresh"]) => {
                let url = self.page()?.url.clone();
                self.history.pop();
                self.load(url, None)?;
                Ok(Value::Null)
            }
            ("POST", ["back"]) => {
                if self.history.len() >= 2 {
                    self.history.pop();
                    let prev = self.history.pop().expect("history entry");
                    self.load(prev, None)?;
                }
                Ok(Value::Null)
            }
            ("POST", ["forward"]) => Ok(Value::Null),
            ("GET", ["title"]) => {
                let page = self.page()?;
                let t = page.doc.elements_by_tag("title").next().map(|n| collapse_ws(&page.doc.text_content(n)));
                Ok(json!(t.unwrap_or_default()))
            }
            ("GET", ["source"]) => Ok(json!(self.page()?.doc.serialize())),
            ("GET", ["window"]) => Ok(json!("main")),
            ("GET", ["window", "handles"]) => Ok(json!(["main"])),
            ("POST", ["window"]) => match body.get("handle").and_then(Value::as_str) {
                Some("main") => Ok(Value::Null),
                _ => Err(err(404, "no such window", "no such window")),
            },
            ("DELETE", ["window"]) => {
                self.page = None;
                Ok(json!([]))
            }
            ("GET", ["window", "rect"]) | ("POST", ["window", "rect"]) | ("POST", ["window", "maximize" | "minimize" | "fullscreen"]) => {
                Ok(json!({ "x": 0, "y": 0, "width": 1280, "height": 800 }))
            }
            ("POST", ["frame"]) => match body.get("id") {
                None | Some(Value::Null) => Ok(Value::Null),
                _ => Err(err(404, "no such frame", "no such frame")),
            },
            ("POST", ["frame", "parent"]) => Ok(Value::Null),
            ("GET", ["cookie", ..]) => Ok(json!([])),
            ("POST", ["cookie"]) | ("DELETE", ["cookie", ..]) => Ok(Value::Null),
            (_, ["alert", ..]) => Err(err(404, "no such alert", "no such alert")),
            ("POST", ["element"]) => self.find_one(None, body),
            ("POST", ["elements"]) => Ok(Value::Array(self.find(None, body)?)),
            ("GET", ["element", "active"]) => {
                let page = self.page()?;
                let n = page
                    .focused
                    .or_else(|| page.doc.elements_by_tag("body").next())
                    .ok_or_else(|| err(404, "no such element", "no active element"))?;
                Ok(page.element_id(self.generation, n))
            }
            ("POST", ["element", id, "element"]) => {
                let n = self.node(id)?;
                self.find_one(Some(n), body)
            }
            ("POST", ["element", id, "elements"]) => {
                let n = self.node(id)?;
                Ok(Value::Array(self.find(Some(n), body)?))
            }
            ("GET", ["element", id, what, rest @ ..]) => {
                let n = self.node(id)?;
                self.element_get(n, what, rest.first().copied())
            }
            ("POST", ["element", id, "click"]) => {
                let n = self.node(id)?;
                let effect = self.click(n)?;
                self.apply(effect)?;
                Ok(Value::Null)
            }
            ("POST", ["element", id, "clear"]) => {
                let n = self.node(id)?;
                self.clear(n)?;
                Ok(Value::Null)
            }
            ("POST", ["element", id, "value"]) => {
                let n = self.node(id)?;
                let text = match body.get("text").and_then(Value::as_str) {
                    Some(t) => t.to_string(),
                    None => body
                        .get("value")
                        .and_then(Value::as_array)
                        .map(|a| a.iter().filter_map(Value::as_str).collect::<String>())
                        .ok_or_else(|| invalid_argument("missing `text`"))?,
                };
                let effect = self.send_keys(n, &text)?;
                self.apply(effect)?;
                Ok(Value::Null)
            }
            ("POST", ["execute", "sync" | "async"]) => {
                let script = str_arg(body, "script")?.to_string();
                let args = body.get("args").and_then(Value::as_array).cloned().unwrap_or_default();
                let async_ = rest[1] == "async";
                let (value, effect) = self.execute(&script, &args)?;
                self.apply(effect)?;
                if async_ {
                    return Err(unsupported("execute/async"));
                }
                Ok(value)
            }
            ("POST", ["actions"]) => Err(unsupported("actions")),
            ("DELETE", ["actions"]) => Ok(Value::Null),
            ("GET", ["screenshot"]) => Err(unsupported("screenshot")),
            ("POST", ["print"]) => Err(unsupported("print")),
            _ => Err(err(404, "unknown command", format!("unknown command: {method} /{}", rest.join("/")))),
        }
    }

    fn element_get(&self, n: NodeId, what: &str, arg: Option<&str>) -> WdRes<Value> {
        let page = self.page()?;
        let doc = &page.doc;
        match what {
            "selected" => Ok(json!(page.is_checked(n))),
            "enabled" => Ok(json!(!attr_disabled(doc, n))),
            "displayed" => Ok(json!(page.displayed(n))),
            "name" => Ok(json!(doc.tag(n).unwrap_or(""))),
            "text" => Ok(json!(if page.displayed(n) { collapse_ws(&doc.text_content(n)) } else { String::new() })),
            "rect" => {
                let v = page.sheet.visibility(doc, n);
                let (w, h) = if v.is_hidden() { (0, 0) } else { (100, 20) };
                let x = if v.offscreen { -9999 } else { 8 };
                Ok(json!({ "x": x, "y": 8, "width": w, "height": h }))
            }
            "attribute" => Ok(doc.attr(n, arg.unwrap_or("")).map_or(Value::Null, |v| json!(v))),
            "property" => Ok(self.property(n, arg.unwrap_or(""))),
            "css" => Ok(json!(page.sheet.specified(doc, n, arg.unwrap_or("")).unwrap_or_default())),
            "computedrole" | "computedlabel" => Ok(json!("")),
            "screenshot" => Err(unsupported("element screenshot")),
            _ => Err(err(404, "unknown command", format!("unknown element command `{what}`"))),
        }
    }

    fn property(&self, n: NodeId, name: &str) -> Value {
        let page = match self.page() {
            Ok(p) => p,
            Err(_) => return Value::Null,
        };
        let doc = &page.doc;
        let attr = |a: &str| json!(doc.attr(n, a).unwrap_or(""));
        let flag = |a: &str| json!(doc.attr(n, a).is_some());
        match name {
            "value" => json!(page.value(n)),
            "checked" => json!(doc.tag(n) == Some("input") && page.is_checked(n)),
            "selected" => json!(doc.tag(n) == Some("option") && page.is_checked(n)),
            "disabled" => json!(attr_disabled(doc, n)),
            "required" | "multiple" | "hidden" | "autofocus" => flag(name),
            "readOnly" => flag("readonly"),
            "noValidate" => flag("novalidate"),
            "tagName" | "nodeName" => json!(doc.tag(n).unwrap_or("").to_ascii_uppercase()),
            "nodeType" => json!(1),
            "type" => match doc.tag(n) {
                Some("input") => json!(input_type(doc, n)),
                Some("select") => json!(if doc.attr(n, "multiple").is_some() { "select-multiple" } else { "select-one" }),
                Some("textarea") => json!("textarea"),
                Some("button") => json!(doc.attr(n, "type").map(str::to_ascii_lowercase).unwrap_or_else(|| "submit".into())),
                _ => attr("type"),
            },
            "id" | "name" | "placeholder" | "pattern" | "min" | "max" | "title" | "lang" | "method" => attr(name),
            "className" => attr("class"),
            "defaultValue" => attr("value"),
            "action" => {
                let a = doc.attr(n, "action").unwrap_or("");
                json!(page.url.join(a).map(|u| u.to_string()).unwrap_or_default())
            }
            "maxLength" => json!(doc.attr(n, "maxlength").and_then(|v| v.trim().parse::<i64>().ok()).unwrap_or(-1)),
            "textContent" => json!(doc.text_content(n)),
            "innerText" => json!(if page.displayed(n) { collapse_ws(&doc.text_content(n)) } else { String::new() }),
            "outerHTML" => json!(doc.outer_html(n)),
            "innerHTML" => json!(doc.children(n).iter().map(|c| doc.outer_html(*c)).collect::<String>()),
            "selectedIndex" => {
                let idx = options_of(doc, n).iter().position(|o| page.controls.selected.contains(o));
                json!(idx.map(|i| i as i64).unwrap_or(-1))
            }
            _ => Value::Null,
        }
    }

    fn ensure_interactable(&self, n: NodeId) -> WdRes<()> {
        if self.page()?.displayed(n) {
            Ok(())
        } else {
            Err(not_interactable())
        }
    }

    fn click(&mut self, n: NodeId) -> WdRes<Effect> {
        let page = self.page()?;
        let doc = &page.doc;
        if doc.tag(n) == Some("option") {
            self.ensure_interactable(n)?;
            let page = self.page.as_mut().expect("page");
            page.select_option(n, &mut self.clock, &mut self.storage);
            return Ok(Effect::None);
        }
        self.ensure_interactable(n)?;
        let page = self.page.as_mut().expect("page");
        if page.doc.is_control(n) && attr_disabled(&page.doc, n) {
            return Ok(Effect::None);
        }
        if page.is_focusable(n) {
            page.focus(n, &mut self.clock, &mut self.storage);
        } else {
            page.blur(&mut self.clock, &mut self.storage);
        }
        page.emit(n, EventKind::Click, &mut self.clock, &mut self.storage);
        Ok(page.activate(n, &mut self.clock, &mut self.storage))
    }

    fn clear(&mut self, n: NodeId) -> WdRes<()> {
        let page = self.page()?;
        if !is_text_entry(&page.doc, n) || attr_disabled(&page.doc, n) || page.doc.attr(n, "readonly").is_some() {
            return Err(err(400, "invalid element state", "invalid element state: element must be user-editable"));
        }
        self.ensure_interactable(n)?;
        let page = self.page.as_mut().expect("page");
        page.focus(n, &mut self.clock, &mut self.storage);
        let had = page.controls.raw.get(&n).is_some_and(|v| !v.is_empty());
        page.controls.raw.insert(n, String::new());
        if had {
            page.emit(n, EventKind::Change, &mut self.clock, &mut self.storage);
        }
        page.pending_change = false;
        page.focused = None;
        Ok(())
    }

    fn send_keys(&mut self, n: NodeId, text: &str) -> WdRes<Effect> {
        let page = self.page()?;
        let doc = &page.doc;
        let keyboard_target = is_text_entry(doc, n)
            || matches!(doc.tag(n), Some("select"))
            || (doc.tag(n) == Some("input") && matches!(input_type(doc, n).as_str(), "checkbox" | "radio"));
        if !keyboard_target || attr_disabled(doc, n) {
            return Err(not_interactable());
        }
        self.ensure_interactable(n)?;
        let (clock, storage) = (&mut self.clock, &mut self.storage);
        let page = self.page.as_mut().expect("page");
        page.focus(n, clock, storage);
        let doc = &page.doc;
        if doc.tag(n) == Some("select") {
            let typed: String = text.chars().filter(|c| !is_special_key(*c)).collect::<String>().to_lowercase();
            if typed.is_empty() {
                return Ok(Effect::None);
            }
            let hit = options_of(doc, n)
                .into_iter()
                .find(|o| collapse_ws(&doc.text_content(*o)).to_lowercase().starts_with(&typed) && !attr_disabled(doc, *o));
            if let Some(o) = hit {
                if !page.controls.selected.contains(&o) {
                    for other in options_of(doc, n) {
                        page.controls.selected.remove(&other);
                    }
                    page.controls.selected.insert(o);
                    page.emit(n, EventKind::Input, clock, storage);
                    page.emit(n, EventKind::Change, clock, storage);
                }
            }
            return Ok(Effect::None);
        }
        if !is_text_entry(doc, n) {
            // Checkbox or radio: space activates.
            if text.contains(' ') {
                page.emit(n, EventKind::Click, clock, storage);
                return Ok(page.activate(n, clock, storage));
            }
            return Ok(Effect::None);
        }
        let is_textarea = doc.tag(n) == Some("textarea");
        let ty = input_type(doc, n);
        let maxlength = doc
            .attr(n, "maxlength")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|_| matches!(ty.as_str(), "text" | "email" | "password" | "tel" | "search" | "url") || is_textarea);
        for c in text.chars() {
            match c {
                '\u{E003}' => {
                    let raw = page.controls.raw.entry(n).or_default();
                    if raw.pop().is_some() {
                        page.pending_change = true;
                        page.emit(n, EventKind::Input, clock, storage);
                    }
                }
                '\u{E006}' | '\u{E007}' | '\n' if !is_textarea => {
                    return Ok(page.implicit_submission(n));
                }
                '\u{E004}' => page.blur(clock, storage),
                c if is_special_key(c) => {}
                c => {
                    if ty == "number" && !(c.is_ascii_digit() || "+-.eE".contains(c)) {
                        continue;
                    }
                    if ty == "date" && !(c.is_ascii_digit() || "/-. ".contains(c)) {
                        continue;
                    }
                    let raw = page.controls.raw.entry(n).or_default();
                    if maxlength.is_some_and(|m| raw.encode_utf16().count() + c.len_utf16() > m) {
                        continue;
                    }
                    raw.push(c);
                    page.pending_change = true;
                    page.emit(n, EventKind::Input, clock, storage);
                }
            }
        }
        Ok(Effect::None)
    }

    fn execute(&mut self, script: &str, args: &[Value]) -> WdRes<(Value, Effect)> {
        let s = script.trim();
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let arg0 = || args.first().ok_or_else(|| js_error("Cannot read properties of undefined"));
        if s == recorder::READ_LOG_SCRIPT || compact.contains("getElementById('formbench-event-log')") {
            let page = self.page()?;
            return Ok((page.log_json().map_or(Value::Null, Value::String), Effect::None));
        }
        if compact.contains("returndocument.readyState") {
            return Ok((json!("complete"), Effect::None));
        }
        if s.starts_with("/* isDisplayed */") {
            let n = self.arg_node(arg0()?)?;
            return Ok((json!(self.page()?.displayed(n)), Effect::None));
        }
        if s.starts_with("/* getAttribute */") {
            let n = self.arg_node(arg0()?)?;
            let name = args.get(1).and_then(Value::as_str).unwrap_or("");
            return Ok((self.attribute_atom(n, name), Effect::None));
        }
        if s.starts_with("/* submitForm */") {
            let n = self.arg_node(arg0()?)?;
            let page = self.page()?;
            let form = std::iter::once(n)
                .chain(page.doc.ancestors(n))
                .find(|a| page.doc.tag(*a) == Some("form"))
                .ok_or_else(|| js_error("Unable to find containing form element"))?;
            return Ok((Value::Null, Effect::Submit { form, submitter: None, validate: false }));
        }
        let stmt = compact.trim_start_matches("return").trim_end_matches(';');
        if stmt.starts_with("arguments[0].scrollIntoView(") || stmt.starts_with("window.scroll") {
            return Ok((Value::Null, Effect::None));
        }
        if let Some(call) = stmt.strip_prefix("arguments[0]") {
            let n = self.arg_node(arg0()?)?;
            return self.element_call(n, call);
        }
        if let Some((target, call)) = self.document_target(s)? {
            return self.element_call(target, &call);
        }
        Err(js_error(&format!("unsupported script: {}", s.chars().take(80).collect::<String>())))
    }

    /// Resolves `document.<lookup>` at the start of a single-statement
    /// script, returning the element and the remaining call.
    fn document_target(&self, s: &str) -> WdRes<Option<(NodeId, String)>> {
        let re = Regex::new(
            r#"^\s*(?:return\s+)?document\s*\.\s*(?:getElementById\(\s*(?:'([^']*)'|"([^"]*)")\s*\)|querySelector\(\s*(?:'([^']*)'|"([^"]*)")\s*\)|forms\s*\[\s*(\d+)\s*\]|forms\s*\[\s*(?:'([^']*)'|"([^"]*)")\s*\]|getElementsByTagName\(\s*['"]form['"]\s*\)\s*\[\s*(\d+)\s*\])\s*((?:\.\s*form\s*)?\.\s*(?:submit|click)\s*\(\s*\))\s*;?\s*$"#,
        )
        .expect("static regex");
        let Some(c) = re.captures(s) else { return Ok(None) };
        let page = self.page()?;
        let doc = &page.doc;
        let g = |i: usize| c.get(i).map(|m| m.as_str());
        let forms: Vec<NodeId> = doc.elements_by_tag("form").collect();
        let node = if let Some(id) = g(1).or(g(2)) {
            doc.element_by_id(id)
        } else if let Some(sel) = g(3).or(g(4)) {
            let body = json!({ "using": "css selector", "value": sel });
            let found = resolve_webdriver(doc, "css selector", body["value"].as_str().unwrap_or(""), None, &Live(&page.controls))
                .map_err(|e| js_error(&format!("'{sel}' is not a valid selector: {e}")))?;
            found.into_iter().next()
        } else if let Some(i) = g(5).or(g(8)) {
            i.parse::<usize>().ok().and_then(|i| forms.get(i).copied())
        } else if let Some(key) = g(6).or(g(7)) {
            forms
                .iter()
                .copied()
                .find(|f| doc.attr(*f, "id") == Some(key) || doc.attr(*f, "name") == Some(key))
        } else {
            None
        };
        let call: String = g(9).unwrap_or("").chars().filter(|c| !c.is_whitespace()).collect();
        match node {
            Some(n) => Ok(Some((n, call))),
            None => Err(js_error("Cannot read properties of null")),
        }
    }

    fn element_call(&mut self, n: NodeId, call: &str) -> WdRes<(Value, Effect)> {
        let page = self.page()?;
        let doc = &page.doc;
        match call {
            ".submit()" => {
                if doc.tag(n) != Some("form") {
                    return Err(js_error("arguments[0].submit is not a function"));
                }
                Ok((Value::Null, Effect::Submit { form: n, submitter: None, validate: false }))
            }
            ".form.submit()" => {
                let form = doc
                    .form_owner(n)
                    .filter(|_| doc.is_control(n))
                    .ok_or_else(|| js_error("Cannot read properties of null (reading 'submit')"))?;
                Ok((Value::Null, Effect::Submit { form, submitter: None, validate: false }))
            }
            ".click()" => {
                // Script clicks skip interactability checks.
                let (clock, storage) = (&mut self.clock, &mut self.storage);
                let page = self.page.as_mut().expect("page");
                if page.doc.is_control(n) && attr_disabled(&page.doc, n) {
                    return Ok((Value::Null, Effect::None));
                }
                if page.doc.tag(n) == Some("option") {
                    page.select_option(n, clock, storage);
                    return Ok((Value::Null, Effect::None));
                }
                page.emit(n, EventKind::Click, clock, storage);
                Ok((Value::Null, page.activate(n, clock, storage)))
            }
            other => Err(js_error(&format!("unsupported element call `{other}`"))),
        }
    }

    fn attribute_atom(&self, n: NodeId, name: &str) -> Value {
        let Ok(page) = self.page() else { return Value::Null };
        let doc = &page.doc;
        let lname = name.to_ascii_lowercase();
        match lname.as_str() {
            "value" => json!(page.value(n)),
            "checked" | "selected" => {
                if page.is_checked(n) {
                    json!("true")
                } else {
                    Value::Null
                }
            }
            "disabled" | "required" | "readonly" | "multiple" | "hidden" | "autofocus" | "novalidate" => {
                let on = if lname == "disabled" { attr_disabled(doc, n) } else { doc.attr(n, &lname).is_some() };
                if on {
                    json!("true")
                } else {
                    Value::Null
                }
            }
            _ => doc.attr(n, &lname).map_or(Value::Null, |v| json!(v)),
        }
    }
}

fn is_special_key(c: char) -> bool {
    ('\u{E000}'..='\u{F8FF}').contains(&c)
}

impl Page {
    /// Enter in a text field: click the form's default button, or submit
    /// directly when the form has a single text field and no button.
    fn implicit_submission(&mut self, n: NodeId) -> Effect {
        let doc = &self.doc;
        let Some(form) = doc.form_owner(n) else { return Effect::None };
        let members = self.form_members(form);
        if let Some(b) = members.iter().copied().find(|m| is_submit_button(doc, *m)) {
            if attr_disabled(doc, b) {
                return Effect::None;
            }
            return Effect::Submit {
                form,
                submitter: Some(b),
                validate: true,
            };
        }
        let blocking = members.iter().filter(|m| is_text_entry(doc, **m) && doc.tag(**m) == Some("input")).count();
        if blocking == 1 {
            Effect::Submit {
                form,
                submitter: None,
                validate: true,
            }
        } else {
            Effect::None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn date_typing() {
        assert_eq!(typed_date("01/02/2003").as_deref(), Some("2003-01-02"));
        assert_eq!(typed_date("01022003").as_deref(), Some("2003-01-02"));
        assert_eq!(typed_date("1/2/2003").as_deref(), Some("2003-01-02"));
        assert_eq!(typed_date("2003-01-02").as_deref(), Some("2003-01-02"));
        assert_eq!(typed_date("02/30/2003"), None);
        assert_eq!(typed_date("01/02/03"), None);
    }
}
