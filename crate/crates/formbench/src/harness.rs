//! Execution harness: serves a form, runs one script against it in a fresh
//! WebDriver session, reads back the final field state and produces an
//! [`EvaluationRecord`].

use std::io::Write as _;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use formbench_core::coverage::{self, CoverageScope, Observation, Observations};
use formbench_core::field::FieldKind;
use formbench_core::html::dom::Document;
use formbench_core::html::render::{FormSpec, HtmlDocument};
use formbench_core::locate::css;
use formbench_core::metrics::{
    apply_classification, ExecStatus, ExecutionReport, EvaluationRecord, FailureEvidence, SyntaxReport, TraceEntry,
};
use formbench_core::mutation::INJECTED_ATTR;
use formbench_core::recorder::{EventLog, READ_LOG_SCRIPT};
use formbench_core::script::{parse_action_json, ActionScript, Diagnostic, RawScript, TestScript, Verb};
use regex::Regex;
use serde_json::{json, Value};

use crate::refbrowser::RefBrowser;
use crate::runner::{self, Checker, Dialect, Executor, Registry};
use crate::server::{FormServer, ServedForm};
use crate::webdriver::{ElementRef, Session, WdError, WebDriver};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// The endpoint, the embedded server or a required tool is unusable.
    /// Runs hitting this abort without a report.
    #[error("infrastructure error: {0}")]
    Infrastructure(String),
    #[error("unknown dialect `{0}`")]
    UnknownDialect(String),
}

#[derive(Clone, Debug)]
pub struct HarnessConfig {
    /// External WebDriver endpoint; `None` starts the reference browser.
    pub webdriver_url: Option<String>,
    /// Budget per script, covering navigation and all actions.
    pub timeout_ms: u64,
    /// How long each element lookup keeps polling (the session's implicit
    /// wait).
    pub poll_ms: u64,
    pub scope: CoverageScope,
    /// Serve forms with the event recorder installed.
    pub instrument: bool,
    /// Merged into every new session's capabilities.
    pub capabilities: Value,
    pub registry: Registry,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            webdriver_url: None,
            timeout_ms: 30_000,
            poll_ms: 2_000,
            scope: CoverageScope::AllFillable,
            instrument: false,
            capabilities: json!({}),
            registry: Registry::default(),
        }
    }
}

/// One script to evaluate.
#[derive(Clone, Debug)]
pub struct Job<'a> {
    pub form: &'a HtmlDocument,
    pub script: &'a TestScript,
    pub script_id: String,
    /// Page to serve instead of `form.text` (mutant pages).
    pub page: Option<&'a str>,
}

/// Identity of the browser behind the endpoint, as its capabilities report.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BrowserInfo {
    pub webdriver_url: String,
    pub browser_name: String,
    pub browser_version: String,
}

pub struct Harness {
    config: HarnessConfig,
    server: FormServer,
    upstream: String,
    browser: BrowserInfo,
    _browser: Option<RefBrowser>,
}

struct Outcome {
    execution: ExecutionReport,
    trace: Vec<TraceEntry>,
    session_id: Option<String>,
}

fn infra(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Infrastructure(e.to_string())
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

impl Harness {
    pub fn start(config: HarnessConfig) -> Result<Self, HarnessError> {
        let server = FormServer::start(Duration::from_millis(config.timeout_ms.max(1000) + 5_000)).map_err(infra)?;
        let (upstream, browser) = match &config.webdriver_url {
            Some(url) => (url.trim_end_matches('/').to_string(), None),
            None => {
                let b = RefBrowser::start().map_err(infra)?;
                (b.url(), Some(b))
            }
        };
        let wd = WebDriver::new(&upstream, Duration::from_millis(config.timeout_ms.max(10_000)));
        wd.status()
            .map_err(|e| HarnessError::Infrastructure(format!("WebDriver endpoint {upstream} unreachable: {e}")))?;
        let probe = wd
            .new_session(&config.capabilities)
            .map_err(|e| HarnessError::Infrastructure(format!("cannot create a session at {upstream}: {e}")))?;
        let cap = |k: &str| probe.capabilities.get(k).and_then(Value::as_str).unwrap_or("unknown").to_string();
        let info = BrowserInfo {
            webdriver_url: upstream.clone(),
            browser_name: cap("browserName"),
            browser_version: cap("browserVersion"),
        };
        let _ = probe.delete();
        Ok(Self {
            config,
            server,
            upstream,
            browser: info,
            _browser: browser,
        })
    }

    pub fn config(&self) -> &HarnessConfig {
        &self.config
    }

    /// URL of the WebDriver endpoint in use.
    pub fn webdriver_url(&self) -> &str {
        &self.upstream
    }

    pub fn browser(&self) -> &BrowserInfo {
        &self.browser
    }

    pub fn uses_reference_browser(&self) -> bool {
        self._browser.is_some()
    }

    fn upstream_driver(&self) -> WebDriver {
        WebDriver::new(&self.upstream, Duration::from_millis(self.config.timeout_ms.max(1000)))
    }

    /// Evaluates every job, `parallel` at a time. Records come back in job
    /// order; any infrastructure error aborts the batch.
    pub fn evaluate_all(&self, jobs: &[Job<'_>], parallel: usize) -> Result<Vec<EvaluationRecord>, HarnessError> {
        let parallel = parallel.clamp(1, jobs.len().max(1));
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<EvaluationRecord>>> = Mutex::new(vec![None; jobs.len()]);
        let failure: Mutex<Option<HarnessError>> = Mutex::new(None);
        std::thread::scope(|s| {
            for _ in 0..parallel {
                s.spawn(|| loop {
                    if failure.lock().expect("failure lock").is_some() {
                        return;
                    }
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(job) = jobs.get(i) else { return };
                    match self.evaluate(job) {
                        Ok(r) => results.lock().expect("results lock")[i] = Some(r),
                        Err(e) => {
                            failure.lock().expect("failure lock").get_or_insert(e);
                            return;
                        }
                    }
                });
            }
        });
        if let Some(e) = failure.into_inner().expect("failure lock") {
            return Err(e);
        }
        Ok(results
            .into_inner()
            .expect("results lock")
            .into_iter()
            .map(|r| r.expect("every job evaluated"))
            .collect())
    }

    pub fn evaluate(&self, job: &Job<'_>) -> Result<EvaluationRecord, HarnessError> {
        let spec = &job.form.spec;
        let page = job.page.unwrap_or(&job.form.text);
        let (syntax, plan) = self.check(job.script)?;
        let mut record = EvaluationRecord::new(&spec.form_id, &job.script_id, syntax);
        let Some(plan) = plan else {
            apply_classification(&mut record, spec, &FailureEvidence::default());
            return Ok(record);
        };
        let served = self.server.serve(page, self.config.instrument);
        let result = self.run(&served, plan);
        let mut evidence = FailureEvidence {
            snapshot: Some(Document::parse(page)),
            ..FailureEvidence::default()
        };
        let result = result.and_then(|outcome| {
            evidence.trace = outcome.trace.clone();
            let read = self.read_back(&served, spec, outcome.session_id.as_deref());
            if let Some(id) = &outcome.session_id {
                let _ = self.upstream_driver().attach(id).delete();
            }
            let (obs, log) = read?;
            Ok((outcome.execution, obs, log))
        });
        self.server.release(&served);
        let (execution, obs, log) = result?;
        record.coverage = Some(coverage::compute(spec, &obs, self.config.scope));
        record.execution = Some(execution);
        record.event_log = log;
        evidence.observations = Some(obs);
        apply_classification(&mut record, spec, &evidence);
        Ok(record)
    }

    fn check<'s>(&'s self, script: &'s TestScript) -> Result<(SyntaxReport, Option<Plan<'s>>), HarnessError> {
        match script {
            TestScript::Actions(a) => match a.validate() {
                Ok(()) => Ok((SyntaxReport::ok(), Some(Plan::Native(std::borrow::Cow::Borrowed(a))))),
                Err(e) => Ok((
                    SyntaxReport::invalid(vec![Diagnostic {
                        line: 0,
                        column: 0,
                        message: e.to_string(),
                    }]),
                    None,
                )),
            },
            TestScript::Raw(raw) => {
                let dialect = self
                    .config
                    .registry
                    .get(&raw.dialect)
                    .ok_or_else(|| HarnessError::UnknownDialect(raw.dialect.clone()))?;
                match (&dialect.check, &dialect.run) {
                    (Checker::Builtin, Executor::Native) => match parse_action_json(&raw.source) {
                        Ok(a) => Ok((SyntaxReport::ok(), Some(Plan::Native(std::borrow::Cow::Owned(a))))),
                        Err(d) => Ok((SyntaxReport::invalid(vec![d]), None)),
                    },
                    (Checker::Builtin, Executor::Command(_)) => match parse_action_json(&raw.source) {
                        Ok(_) => Ok((SyntaxReport::ok(), Some(Plan::Raw(raw, dialect)))),
                        Err(d) => Ok((SyntaxReport::invalid(vec![d]), None)),
                    },
                    (Checker::Command(tpl), run) => {
                        let report = check_command(tpl, raw, dialect)?;
                        let plan = report.valid.then(|| match run {
                            Executor::Native => match parse_action_json(&raw.source) {
                                Ok(a) => Plan::Native(std::borrow::Cow::Owned(a)),
                                Err(_) => Plan::Raw(raw, dialect),
                            },
                            Executor::Command(_) => Plan::Raw(raw, dialect),
                        });
                        Ok((report, plan))
                    }
                    (Checker::None, Executor::Native) => match parse_action_json(&raw.source) {
                        Ok(a) => Ok((SyntaxReport::ok(), Some(Plan::Native(std::borrow::Cow::Owned(a))))),
                        Err(d) => Ok((SyntaxReport::invalid(vec![d]), None)),
                    },
                    (Checker::None, Executor::Command(_)) => Ok((SyntaxReport::ok(), Some(Plan::Raw(raw, dialect)))),
                }
            }
        }
    }

    fn run(&self, served: &ServedForm, plan: Plan<'_>) -> Result<Outcome, HarnessError> {
        let (token, proxy_url) = self.server.open_run(&self.upstream, &self.config.capabilities);
        let result = match plan {
            Plan::Native(script) => self.execute_native(&proxy_url, served, &script),
            Plan::Raw(raw, dialect) => self.execute_raw(&proxy_url, served, raw, dialect),
        };
        let record = self.server.close_run(&token);
        let (execution, mut native_trace) = result?;
        if let Some(e) = record.infra_error {
            if let Some(id) = &record.session_id {
                let _ = self.upstream_driver().attach(id).delete();
            }
            return Err(HarnessError::Infrastructure(e));
        }
        let trace = if record.trace.is_empty() {
            std::mem::take(&mut native_trace)
        } else {
            record.trace
        };
        let mut execution = execution;
        if execution.status == ExecStatus::AutomationError && execution.failed_action_index.is_none() {
            if let Some((i, e)) = trace.iter().enumerate().find(|(_, e)| e.error.is_some()) {
                execution.failed_action_index = Some(i);
                execution.error_class = e.error.clone();
            }
        }
        Ok(Outcome {
            execution,
            trace,
            session_id: record.session_id,
        })
    }

    fn execute_native(
        &self,
        proxy_url: &str,
        served: &ServedForm,
        script: &ActionScript,
    ) -> Result<(ExecutionReport, Vec<TraceEntry>), HarnessError> {
        let start = Instant::now();
        let budget = self.config.timeout_ms;
        let wd = WebDriver::new(proxy_url, Duration::from_millis(budget.max(1)));
        let session = wd.new_session(&json!({})).map_err(|e| infra(format!("cannot create session: {e}")))?;
        session
            .set_timeouts(self.config.poll_ms, budget.max(1), budget.max(1))
            .map_err(|e| infra(format!("cannot set timeouts: {e}")))?;
        if let Err(e) = session.navigate(&served.url) {
            if e.is_timeout() {
                return Ok((timeout_report(None, start), Vec::new()));
            }
            return Err(infra(format!("cannot load {}: {e}", served.url)));
        }
        for (i, action) in script.actions.iter().enumerate() {
            if elapsed_ms(start) > budget {
                return Ok((timeout_report(Some(i), start), Vec::new()));
            }
            if let Err(e) = perform(&session, action.verb, &action.locator.to_webdriver(), action.payload.as_deref()) {
                if e.is_infrastructure() {
                    return Err(infra(e));
                }
                if e.is_timeout() {
                    return Ok((timeout_report(Some(i), start), Vec::new()));
                }
                let report = ExecutionReport {
                    status: ExecStatus::AutomationError,
                    failed_action_index: Some(i),
                    error_class: Some(e.protocol_error().unwrap_or("unexpected response").to_string()),
                    message: Some(e.to_string()),
                    wall_time_ms: elapsed_ms(start),
                };
                return Ok((report, Vec::new()));
            }
        }
        if elapsed_ms(start) > budget {
            return Ok((timeout_report(None, start), Vec::new()));
        }
        Ok((ExecutionReport::success(elapsed_ms(start)), Vec::new()))
    }

    fn execute_raw(
        &self,
        proxy_url: &str,
        served: &ServedForm,
        raw: &RawScript,
        dialect: &Dialect,
    ) -> Result<(ExecutionReport, Vec<TraceEntry>), HarnessError> {
        let Executor::Command(tpl) = &dialect.run else {
            unreachable!("native dialects are planned natively")
        };
        let dir = tempfile::tempdir().map_err(infra)?;
        let script_path = dir.path().join(format!("script.{}", dialect.extension));
        std::fs::write(&script_path, &raw.source).map_err(infra)?;
        let argv = runner::expand(tpl, &script_path, &served.url, self.config.timeout_ms);
        let stdout = std::fs::File::create(dir.path().join("stdout")).map_err(infra)?;
        let stderr_path = dir.path().join("stderr");
        let stderr = std::fs::File::create(&stderr_path).map_err(infra)?;
        let start = Instant::now();
        let child = Command::new(&argv[0])
            .args(&argv[1..])
            .env("WEBDRIVER_URL", proxy_url)
            .current_dir(dir.path())
            .stdin(Stdio::null())
            .stdout(stdout)
            .stderr(stderr)
            .spawn();
        let mut child = match child {
            Ok(c) => c,
            Err(e) => {
                let report = ExecutionReport {
                    status: ExecStatus::RunnerError,
                    failed_action_index: None,
                    error_class: Some("spawn failed".into()),
                    message: Some(format!("{}: {e}", argv[0])),
                    wall_time_ms: 0,
                };
                return Ok((report, Vec::new()));
            }
        };
        let status = wait_timeout::ChildExt::wait_timeout(&mut child, Duration::from_millis(self.config.timeout_ms))
            .map_err(infra)?;
        let wall = elapsed_ms(start);
        let Some(status) = status else {
            let _ = child.kill();
            let _ = child.wait();
            return Ok((timeout_report(None, start), Vec::new()));
        };
        if status.success() {
            return Ok((ExecutionReport::success(wall), Vec::new()));
        }
        let err_text = std::fs::read_to_string(&stderr_path).unwrap_or_default();
        let last = err_text.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("").trim().to_string();
        let code = status.code();
        let runner_failure = matches!(code, Some(126 | 127))
            || last.starts_with("ModuleNotFoundError")
            || last.starts_with("ImportError");
        let report = ExecutionReport {
            status: if runner_failure {
                ExecStatus::RunnerError
            } else {
                ExecStatus::AutomationError
            },
            failed_action_index: None,
            error_class: if runner_failure {
                Some("runner unavailable".into())
            } else {
                exception_name(&last)
            },
            message: Some(if last.is_empty() {
                format!("exit status {}", code.map_or("signal".to_string(), |c| c.to_string()))
            } else {
                last
            }),
            wall_time_ms: wall,
        };
        Ok((report, Vec::new()))
    }

    /// Final state of the form: the last submission when there was one,
    /// otherwise the live controls of the open session.
    fn read_back(
        &self,
        served: &ServedForm,
        spec: &FormSpec,
        session_id: Option<&str>,
    ) -> Result<(Observations, Option<EventLog>), HarnessError> {
        let session = session_id.map(|id| self.upstream_driver().attach(id));
        let log = match (&session, served.instrumented) {
            (Some(s), true) => read_log(s)?,
            _ => None,
        };
        if let Some(pairs) = self.server.submissions(served).last() {
            return Ok((coverage::observe_submission(spec, pairs), log));
        }
        let Some(session) = session else {
            return Ok((Observations::new(), log));
        };
        match observe_live(&session, spec) {
            Ok(obs) => Ok((obs, log)),
            Err(e) if e.is_infrastructure() => Err(infra(e)),
            // The page may have navigated elsewhere; nothing to read.
            Err(_) => Ok((Observations::new(), log)),
        }
    }
}

enum Plan<'s> {
    Native(std::borrow::Cow<'s, ActionScript>),
    Raw(&'s RawScript, &'s Dialect),
}

fn timeout_report(index: Option<usize>, start: Instant) -> ExecutionReport {
    ExecutionReport {
        status: ExecStatus::Timeout,
        failed_action_index: index,
        error_class: Some("timeout".into()),
        message: None,
        wall_time_ms: elapsed_ms(start),
    }
}

/// `selenium.common.exceptions.NoSuchElementException: Message: ...` ->
/// `NoSuchElementException`.
fn exception_name(line: &str) -> Option<String> {
    let head = line.split(':').next()?.trim();
    let name = head.rsplit('.').next()?;
    (!name.is_empty() && !name.contains(' ')).then(|| name.to_string())
}

fn check_command(tpl: &[String], raw: &RawScript, dialect: &Dialect) -> Result<SyntaxReport, HarnessError> {
    let dir = tempfile::tempdir().map_err(infra)?;
    let path = dir.path().join(format!("script.{}", dialect.extension));
    {
        let mut f = std::fs::File::create(&path).map_err(infra)?;
        f.write_all(raw.source.as_bytes()).map_err(infra)?;
    }
    let argv = runner::expand(tpl, &path, "", 0);
    let out = Command::new(&argv[0])
        .args(&argv[1..])
        .current_dir(dir.path())
        .stdin(Stdio::null())
        .output()
        .map_err(|e| infra(format!("syntax checker `{}` unavailable: {e}", argv[0])))?;
    if out.status.success() {
        return Ok(SyntaxReport::ok());
    }
    let text = String::from_utf8_lossy(&out.stderr).into_owned() + &String::from_utf8_lossy(&out.stdout);
    Ok(SyntaxReport::invalid(vec![diagnostic_from(&text, &path)]))
}

fn diagnostic_from(text: &str, path: &Path) -> Diagnostic {
    let line_re = Regex::new(r"line (\d+)").expect("static regex");
    let line = line_re
        .captures(text)
        .and_then(|c| c[1].parse().ok())
        .unwrap_or(0);
    let message = text
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("syntax error")
        .replace(&*path.to_string_lossy(), "script")
        .trim()
        .to_string();
    Diagnostic { line, column: 0, message }
}

fn perform(session: &Session, verb: Verb, loc: &(&str, String), payload: Option<&str>) -> Result<(), WdError> {
    let el = session.find(loc.0, &loc.1)?;
    match verb {
        Verb::SetValue => session.send_keys(&el, payload.unwrap_or("")),
        Verb::SelectOption => {
            if session.tag_name(&el)? != "select" {
                return Err(WdError::Protocol {
                    error: "unexpected tag name".into(),
                    message: "Select only works on <select> elements".into(),
                });
            }
            let sel = format!("option[value={}]", css::quote(payload.unwrap_or("")));
            let opts = session.find_all_from(&el, "css selector", &sel)?;
            let Some(opt) = opts.first() else {
                return Err(WdError::Protocol {
                    error: "no such element".into(),
                    message: format!("Cannot locate option with value: {}", payload.unwrap_or("")),
                });
            };
            if !session.is_selected(opt)? {
                session.click(opt)?;
            }
            Ok(())
        }
        Verb::SetChecked => {
            if !session.is_selected(&el)? {
                session.click(&el)?;
            }
            Ok(())
        }
        Verb::Click => session.click(&el),
        Verb::SubmitForm => session.execute("arguments[0].submit();", vec![el.to_json()]).map(|_| ()),
    }
}

fn read_log(session: &Session) -> Result<Option<EventLog>, HarnessError> {
    match session.execute(READ_LOG_SCRIPT, Vec::new()) {
        Ok(Value::String(text)) => Ok(Some(
            EventLog::parse(&text).unwrap_or_else(|_| EventLog::empty(true)),
        )),
        Ok(_) => Ok(None),
        Err(e) if e.is_infrastructure() => Err(infra(e)),
        Err(_) => Ok(None),
    }
}

fn field_selector(spec: &FormSpec, name: &str, extra: &str) -> String {
    format!(
        "[id={}] {extra}[name={}]:not([{INJECTED_ATTR}])",
        css::quote(&spec.form_id),
        css::quote(name)
    )
}

/// Reads every fillable logical field from the live page.
pub fn observe_live(session: &Session, spec: &FormSpec) -> Result<Observations, WdError> {
    let mut out = Observations::new();
    for lf in spec.fillable_fields() {
        let obs = match lf.kind {
            FieldKind::Radio => {
                let els = session.find_all("css selector", &field_selector(spec, &lf.name, "input"))?;
                let mut vals = Vec::new();
                for el in &els {
                    if session.is_selected(el)? {
                        vals.push(value_of(session, el)?);
                    }
                }
                Observation::RadioChecked(vals)
            }
            kind => {
                let tag = match kind {
                    FieldKind::Select => "select",
                    FieldKind::Textarea => "textarea",
                    _ => "input",
                };
                let els = session.find_all("css selector", &field_selector(spec, &lf.name, tag))?;
                let Some(el) = els.first() else { continue };
                match kind {
                    FieldKind::Checkbox => Observation::Checked(session.is_selected(el)?),
                    FieldKind::Select => {
                        let idx = session.property(el, "selectedIndex")?.as_i64().unwrap_or(-1);
                        Observation::Selected((idx >= 0).then(|| value_of(session, el)).transpose()?)
                    }
                    _ => Observation::Text(value_of(session, el)?),
                }
            }
        };
        out.insert(lf.name.clone(), obs);
    }
    Ok(out)
}

fn value_of(session: &Session, el: &ElementRef) -> Result<String, WdError> {
    Ok(session.property(el, "value")?.as_str().unwrap_or_default().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exception_names() {
        assert_eq!(
            exception_name("selenium.common.exceptions.NoSuchElementException: Message: x").as_deref(),
            Some("NoSuchElementException")
        );
        assert_eq!(exception_name("ValueError: bad").as_deref(), Some("ValueError"));
        assert_eq!(exception_name("something went wrong: x"), None);
    }

    #[test]
    fn python_diagnostics() {
        let text = "  File \"/tmp/x/script.py\", line 7\n    driver.get(\n              ^\nSyntaxError: '(' was never closed\n";
        let d = diagnostic_from(text, Path::new("/tmp/x/script.py"));
        assert_eq!(d.line, 7);
        assert_eq!(d.message, "SyntaxError: '(' was never closed");
    }
}
