//! In-page interaction recorder: the injected script, the reserved DOM node
//! holding the log, and the log's JSON shape.
//!
//! The script listens (capture phase, on the document) for `input`,
//! `change`, `click` and `focus`, and rewrites the log node's text after
//! every event. The log is mirrored to `sessionStorage` so it survives
//! `form.submit()`; the echo page restores it into the same reserved node.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::html::dom::{Document, NodeData, NodeId};

/// Id of the `<script type="application/json">` node holding the log.
pub const LOG_NODE_ID: &str = "formbench-event-log";
/// Id of the container wrapping everything the recorder injects.
pub const RECORDER_NODE_ID: &str = "formbench-recorder";
pub const LOG_VERSION: u32 = 1;

pub const RECORDER_JS: &str = include_str!("../assets/recorder.js");

/// WebDriver `execute/sync` body returning the raw log text, or null.
pub const READ_LOG_SCRIPT: &str =
    "var n = document.getElementById('formbench-event-log'); return n ? n.textContent : null;";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Input,
    Change,
    Click,
    Focus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetDescriptor {
    pub tag: String,
    pub id: Option<String>,
    pub name: Option<String>,
    pub in_form: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub timestamp_ms: u64,
    pub target_descriptor: TargetDescriptor,
    pub event_kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u32,
    /// Set when the page did not contain exactly one form.
    pub malformed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    pub header: LogHeader,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecorderError {
    #[error("recorder absent: no `{LOG_NODE_ID}` node on the page")]
    Absent,
    #[error("event log is not valid JSON: {0}")]
    Malformed(String),
    #[error("event log timestamps decrease at event {0}")]
    NonMonotonic(usize),
}

impl EventLog {
    pub fn empty(malformed: bool) -> Self {
        Self {
            header: LogHeader {
                version: LOG_VERSION,
                malformed,
            },
            events: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, RecorderError> {
        let log: EventLog = serde_json::from_str(text).map_err(|e| RecorderError::Malformed(e.to_string()))?;
        log.check()?;
        Ok(log)
    }

    pub fn check(&self) -> Result<(), RecorderError> {
        for (i, w) in self.events.windows(2).enumerate() {
            if w[1].timestamp_ms < w[0].timestamp_ms {
                return Err(RecorderError::NonMonotonic(i + 1));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("log serializes")
    }

    /// Events whose target carries `name`.
    pub fn for_name<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Event> + 'a {
        self.events
            .iter()
            .filter(move |e| e.target_descriptor.name.as_deref() == Some(name))
    }
}

/// `<script>` content must not contain `</`; JSON allows escaping `/`.
fn script_safe(json: &str) -> String {
    json.replace("</", "<\\/")
}

fn recorder_markup(malformed: bool) -> String {
    format!(
        "<div id=\"{RECORDER_NODE_ID}\" hidden><script type=\"application/json\" id=\"{LOG_NODE_ID}\">{}</script><script>{}</script></div>",
        script_safe(&EventLog::empty(malformed).to_json()),
        RECORDER_JS.trim_end()
    )
}

/// Injects the recorder just before `</body>` (or at the end when there is
/// none). No existing element is modified. Pages without exactly one form
/// still get a recorder, with `header.malformed` set.
pub fn install(html: &str) -> String {
    let doc = Document::parse(html);
    let forms = doc.elements_by_tag("form").count();
    let markup = recorder_markup(forms != 1);
    let lower = html.to_ascii_lowercase();
    match lower.rfind("</body>") {
        Some(pos) => {
            let mut out = String::with_capacity(html.len() + markup.len());
            out.push_str(&html[..pos]);
            out.push_str(&markup);
            out.push_str(&html[pos..]);
            out
        }
        None => {
            let mut out = html.to_string();
            out.push_str(&markup);
            out
        }
    }
}

/// Markup for the echo page of an instrumented form: an empty log node
/// filled from `sessionStorage` on load.
pub fn echo_restore_markup() -> String {
    format!(
        "<div id=\"{RECORDER_NODE_ID}\" hidden><script type=\"application/json\" id=\"{LOG_NODE_ID}\"></script><script>(function () {{ var s = null; try {{ s = window.sessionStorage.getItem(\"{LOG_NODE_ID}\"); }} catch (e) {{}} if (s) {{ document.getElementById(\"{LOG_NODE_ID}\").textContent = s; }} }})();</script></div>"
    )
}

/// Reads the log node of a DOM snapshot.
pub fn read_log_from(doc: &Document) -> Result<EventLog, RecorderError> {
    let node = doc.element_by_id(LOG_NODE_ID).ok_or(RecorderError::Absent)?;
    let text = doc.text_content(node);
    if text.trim().is_empty() {
        return Ok(EventLog::empty(false));
    }
    EventLog::parse(&text)
}

/// The document without the recorder container.
pub fn strip(doc: &Document) -> Document {
    let mut out = Document::new();
    copy_without(doc, Document::ROOT, &mut out, Document::ROOT);
    out
}

fn copy_without(src: &Document, from: NodeId, dst: &mut Document, to: NodeId) {
    for c in src.children(from) {
        let data = &src.node(*c).data;
        if let NodeData::Element(el) = data {
            if el.attr("id") == Some(RECORDER_NODE_ID) {
                continue;
            }
        }
        let id = dst.append(to, data.clone());
        copy_without(src, *c, dst, id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldKind, FieldSpec};
    use crate::html::render::{render_form, FormSpec, CLASSIC};

    fn page() -> String {
        let spec = FormSpec::new("f", alloc::vec![FieldSpec::new(FieldKind::Email, "email").required(true)]);
        render_form(&spec, CLASSIC).unwrap().text
    }

    #[test]
    fn install_then_strip_is_identity() {
        let html = page();
        let inst = install(&html);
        assert!(inst.contains(LOG_NODE_ID));
        let stripped = strip(&Document::parse(&inst));
        assert_eq!(stripped, Document::parse(&html));
    }

    #[test]
    fn untouched_log_is_empty() {
        let doc = Document::parse(&install(&page()));
        let log = read_log_from(&doc).unwrap();
        assert!(log.events.is_empty());
        assert!(!log.header.malformed);
        assert_eq!(read_log_from(&doc), read_log_from(&doc));
        assert_eq!(read_log_from(&Document::parse(&page())), Err(RecorderError::Absent));
    }

    #[test]
    fn malformed_pages_are_flagged() {
        let doc = Document::parse(&install("<p>no form</p>"));
        assert!(read_log_from(&doc).unwrap().header.malformed);
    }

    #[test]
    fn monotonic_timestamps() {
        let ev = |t| Event {
            timestamp_ms: t,
            target_descriptor: TargetDescriptor {
                tag: "input".into(),
                id: None,
                name: Some("a".into()),
                in_form: true,
            },
            event_kind: EventKind::Input,
        };
        let mut log = EventLog::empty(false);
        log.events = alloc::vec![ev(5), ev(3)];
        assert_eq!(EventLog::parse(&log.to_json()), Err(RecorderError::NonMonotonic(1)));
    }
}
