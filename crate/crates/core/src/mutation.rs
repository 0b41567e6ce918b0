//! Seeded script mutants reproducing the common mis-binding failure modes.
//!
//! Some kinds need the page itself to change (a hidden clone, an
//! out-of-form homonym, a reset button). Those mutants carry a page
//! variant; injected elements are marked with [`INJECTED_ATTR`].

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::field::FieldKind;
use crate::html::dom::{Document, NodeData, NodeId};
use crate::html::parse::is_void;
use crate::html::render::{wrapper_id, HtmlDocument, WRAPPER_HEAVY};
use crate::html::serialize::escape_attr;
use crate::locate::css::{self, MarkupState};
use crate::locate::{xpath, Locator};
use crate::metrics::{ErrorCategory, ExecStatus};
use crate::rng::SeededRng;
use crate::scenario::RenderedForm;
use crate::script::{emit_source, Action, ActionScript, RawScript, TestScript, Verb, ACTION_JSON, PYTHON_SELENIUM};

/// Marks elements a page variant added; coverage ignores them.
pub const INJECTED_ATTR: &str = "data-formbench-injected";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MutationKind {
    WrapperMisbind,
    HiddenTarget,
    WrongGroupMember,
    ContextLeak,
    DropFields(usize),
    SyntaxBreak,
    DisabledTarget,
    NonsubmitClick,
}

impl MutationKind {
    pub const FIXED: [MutationKind; 7] = [
        MutationKind::WrapperMisbind,
        MutationKind::HiddenTarget,
        MutationKind::WrongGroupMember,
        MutationKind::ContextLeak,
        MutationKind::SyntaxBreak,
        MutationKind::DisabledTarget,
        MutationKind::NonsubmitClick,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MutationKind::WrapperMisbind => "wrapper_misbind",
            MutationKind::HiddenTarget => "hidden_target",
            MutationKind::WrongGroupMember => "wrong_group_member",
            MutationKind::ContextLeak => "context_leak",
            MutationKind::DropFields(_) => "drop_fields",
            MutationKind::SyntaxBreak => "syntax_break",
            MutationKind::DisabledTarget => "disabled_target",
            MutationKind::NonsubmitClick => "nonsubmit_click",
        }
    }
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MutationKind::DropFields(k) => write!(f, "drop_fields({k})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown mutation kind `{0}`")]
pub struct ParseKindError(pub String);

impl FromStr for MutationKind {
    type Err = ParseKindError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("drop_fields") {
            let rest = rest.trim();
            let k = rest
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .or_else(|| rest.strip_prefix(':'))
                .and_then(|k| k.trim().parse::<usize>().ok())
                .filter(|k| *k >= 1)
                .ok_or_else(|| ParseKindError(s.to_string()))?;
            return Ok(MutationKind::DropFields(k));
        }
        MutationKind::FIXED
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ParseKindError(s.to_string()))
    }
}

impl Serialize for MutationKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MutationKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What running the mutant should produce.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    pub syntax_valid: bool,
    /// `None` when the mutant is not executed.
    pub status: Option<ExecStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_action_index: Option<usize>,
    /// `None` when the mutant is not expected to fail at all.
    pub category: Option<ErrorCategory>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutant {
    pub kind: MutationKind,
    pub script: TestScript,
    /// Indices into the original script of the altered (or removed) actions.
    pub action_indices: Vec<usize>,
    pub expected: Expected,
    /// Page variant to serve instead of the original document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MutationError {
    #[error("{kind} is not applicable: {reason}")]
    Inapplicable { kind: MutationKind, reason: String },
    #[error("drop_fields needs k >= 1")]
    ZeroDrop,
    #[error("action {0} does not exist")]
    NoSuchAction(usize),
}

fn inapplicable(kind: MutationKind, reason: &str) -> MutationError {
    MutationError::Inapplicable {
        kind,
        reason: reason.to_string(),
    }
}

struct Page {
    form: RenderedForm,
    text: String,
}

impl Page {
    fn new(doc: &HtmlDocument) -> Self {
        let form = RenderedForm::from_html(&doc.text, &doc.spec.form_id);
        let text = form.doc.serialize();
        Self { form, text }
    }

    fn doc(&self) -> &Document {
        &self.form.doc
    }

    fn target(&self, action: &Action) -> Option<NodeId> {
        action.locator.resolve(self.doc(), &MarkupState).ok().flatten()
    }

    fn target_kind(&self, doc: &HtmlDocument, action: &Action) -> Option<(NodeId, FieldKind, String)> {
        let n = self.target(action)?;
        let name = self.doc().attr(n, "name")?.to_string();
        let lf = doc.spec.logical_field(&name)?;
        Some((n, lf.kind, name))
    }

    /// Page text with `snippet` spliced in before node `n`.
    fn insert_before(&self, n: NodeId, snippet: &str) -> String {
        let html = self.doc().outer_html(n);
        let pos = self.text.find(&html).expect("serialized node occurs in serialized page");
        let mut out = String::with_capacity(self.text.len() + snippet.len());
        out.push_str(&self.text[..pos]);
        out.push_str(snippet);
        out.push_str(&self.text[pos..]);
        out
    }

    fn insert_at(&self, marker: &str, after: bool, snippet: &str) -> Option<String> {
        let mut pos = self.text.find(marker)?;
        if after {
            pos += marker.len();
        }
        let mut out = String::with_capacity(self.text.len() + snippet.len());
        out.push_str(&self.text[..pos]);
        out.push_str(snippet);
        out.push_str(&self.text[pos..]);
        Some(out)
    }

    /// Markup of a copy of control `n` without its id, plus extra attributes.
    fn clone_control(&self, n: NodeId, extra: &[(&str, &str)]) -> String {
        let doc = self.doc();
        let el = doc.element(n).expect("control is an element");
        let mut out = String::new();
        out.push('<');
        out.push_str(&el.name);
        let attrs = el.attrs.iter().filter(|(k, _)| k != "id").map(|(k, v)| (k.as_str(), v.as_str()));
        for (k, v) in attrs.chain(extra.iter().copied()) {
            out.push(' ');
            out.push_str(k);
            out.push_str("=\"");
            escape_attr(v, &mut out);
            out.push('"');
        }
        out.push('>');
        if !is_void(&el.name) {
            for c in doc.children(n) {
                out.push_str(&doc.outer_html(*c));
            }
            out.push_str("</");
            out.push_str(&el.name);
            out.push('>');
        }
        out
    }
}

fn structured(kind: MutationKind, script: ActionScript, indices: Vec<usize>, expected: Expected, page: Option<String>) -> Mutant {
    Mutant {
        kind,
        script: TestScript::Actions(script),
        action_indices: indices,
        expected,
        page,
    }
}

fn executed(status: ExecStatus, failed: Option<usize>, category: Option<ErrorCategory>) -> Expected {
    Expected {
        syntax_valid: true,
        status: Some(status),
        failed_action_index: failed,
        category,
    }
}

/// Actions a kind can alter, in script order.
pub fn candidates(script: &ActionScript, kind: MutationKind, doc: &HtmlDocument) -> Vec<usize> {
    let page = Page::new(doc);
    script
        .actions
        .iter()
        .enumerate()
        .filter(|(_, a)| admits(&page, doc, kind, a, false))
        .map(|(i, _)| i)
        .collect()
}

fn admits(page: &Page, doc: &HtmlDocument, kind: MutationKind, a: &Action, explicit: bool) -> bool {
    match kind {
        MutationKind::WrapperMisbind => {
            if doc.style_template_id != WRAPPER_HEAVY {
                return false;
            }
            match page.target_kind(doc, a) {
                Some((_, FieldKind::Radio, _)) => explicit && a.verb == Verb::SetChecked,
                Some((_, k, _)) => matches!(a.verb, Verb::SetValue | Verb::SelectOption) && k != FieldKind::Hidden,
                None => false,
            }
        }
        MutationKind::HiddenTarget | MutationKind::DisabledTarget | MutationKind::ContextLeak => {
            a.verb == Verb::SetValue && page.target_kind(doc, a).is_some_and(|(_, k, _)| k.is_text_like())
        }
        MutationKind::WrongGroupMember => match page.target_kind(doc, a) {
            Some((n, FieldKind::Radio, name)) => {
                let first = page
                    .form
                    .doc
                    .descendant_elements(page.form.form)
                    .find(|m| page.doc().attr(*m, "name") == Some(name.as_str()) && page.doc().tag(*m) == Some("input"));
                first != Some(n)
            }
            _ => false,
        },
        MutationKind::DropFields(_) => a.is_fill(),
        MutationKind::SyntaxBreak => true,
        MutationKind::NonsubmitClick => a.verb == Verb::SubmitForm,
    }
}

/// Applies `kind` to a seeded choice among its candidate actions.
pub fn mutate(script: &ActionScript, kind: MutationKind, doc: &HtmlDocument, seed: u64) -> Result<Mutant, MutationError> {
    let mut rng = SeededRng::new(seed);
    if let MutationKind::DropFields(k) = kind {
        if k == 0 {
            return Err(MutationError::ZeroDrop);
        }
        let mut fills: Vec<usize> = candidates(script, kind, doc);
        if fills.len() < k {
            return Err(inapplicable(kind, &format!("script has only {} fill actions", fills.len())));
        }
        // Partial Fisher-Yates: the first k positions are the drop set.
        for i in 0..k {
            let j = i + rng.index(fills.len() - i);
            fills.swap(i, j);
        }
        let mut dropped: Vec<usize> = fills[..k].to_vec();
        dropped.sort_unstable();
        let actions = script
            .actions
            .iter()
            .enumerate()
            .filter(|(i, _)| !dropped.contains(i))
            .map(|(_, a)| a.clone())
            .collect();
        let out = ActionScript {
            actions,
            target_form: script.target_form.clone(),
        };
        return Ok(structured(
            kind,
            out,
            dropped,
            executed(ExecStatus::Success, None, Some(ErrorCategory::Other)),
            None,
        ));
    }
    let cands = candidates(script, kind, doc);
    if cands.is_empty() {
        return Err(inapplicable(kind, reason(kind)));
    }
    let index = *rng.pick(&cands);
    mutate_at(script, kind, doc, index)
}

fn reason(kind: MutationKind) -> &'static str {
    match kind {
        MutationKind::WrapperMisbind => "needs the wrapper-heavy style and a set_value or select_option action",
        MutationKind::HiddenTarget | MutationKind::DisabledTarget | MutationKind::ContextLeak => {
            "needs a set_value action on a text-like field"
        }
        MutationKind::WrongGroupMember => "needs a radio action whose option is not the first member",
        MutationKind::NonsubmitClick => "needs a submit_form action",
        MutationKind::DropFields(_) | MutationKind::SyntaxBreak => "script is empty",
    }
}

/// Applies `kind` to action `index`. Unlike [`mutate`], a wrapper misbind
/// may target a radio action here; the click lands on the wrapper and the
/// script runs on without error.
pub fn mutate_at(script: &ActionScript, kind: MutationKind, doc: &HtmlDocument, index: usize) -> Result<Mutant, MutationError> {
    let action = script.actions.get(index).ok_or(MutationError::NoSuchAction(index))?;
    let page = Page::new(doc);
    if matches!(kind, MutationKind::DropFields(_)) || !admits(&page, doc, kind, action, true) {
        return Err(inapplicable(kind, reason(kind)));
    }
    let mut out = script.clone();
    let idx = alloc::vec![index];
    let (_, field_kind, name) = page.target_kind(doc, action).unwrap_or((0, FieldKind::Text, String::new()));
    match kind {
        MutationKind::WrapperMisbind => {
            out.actions[index].locator = Locator::xpath(&format!("//div[@id={}]", xpath::quote(&wrapper_id(&name))));
            let expected = if field_kind == FieldKind::Radio {
                executed(ExecStatus::Success, None, Some(ErrorCategory::WrapperMisbind))
            } else {
                executed(ExecStatus::AutomationError, Some(index), Some(ErrorCategory::WrapperMisbind))
            };
            Ok(structured(kind, out, idx, expected, None))
        }
        MutationKind::HiddenTarget | MutationKind::DisabledTarget => {
            let n = page.target(action).expect("admitted action resolves");
            let tag = page.doc().tag(n).unwrap_or("input").to_string();
            let extra: &[(&str, &str)] = if kind == MutationKind::HiddenTarget {
                &[(INJECTED_ATTR, "hidden"), ("style", "display:none")]
            } else {
                &[(INJECTED_ATTR, "disabled"), ("disabled", "")]
            };
            let variant = page.insert_before(n, &page.clone_control(n, extra));
            out.actions[index].locator = Locator::css(&format!("{tag}[name={}]", css::quote(&name)));
            Ok(structured(
                kind,
                out,
                idx,
                executed(ExecStatus::AutomationError, Some(index), Some(ErrorCategory::HiddenOrDisabled)),
                Some(variant),
            ))
        }
        MutationKind::ContextLeak => {
            let n = page.target(action).expect("admitted action resolves");
            let control = page.clone_control(n, &[]);
            let snippet = format!("\n<div class=\"site-search\" {INJECTED_ATTR}=\"context\">\n{control}\n</div>");
            let variant = page
                .insert_at("<body>", true, &snippet)
                .ok_or_else(|| inapplicable(kind, "page has no <body> tag"))?;
            out.actions[index].locator = Locator::name(&name);
            Ok(structured(
                kind,
                out,
                idx,
                executed(ExecStatus::Success, None, Some(ErrorCategory::ContextLeakage)),
                Some(variant),
            ))
        }
        MutationKind::WrongGroupMember => {
            out.actions[index].locator = Locator::xpath(&format!(
                "//input[@type='radio' and @name={}]",
                xpath::quote(&name)
            ));
            // The first member still counts as a filled group.
            Ok(structured(kind, out, idx, executed(ExecStatus::Success, None, None), None))
        }
        MutationKind::NonsubmitClick => {
            let button = format!("<button type=\"reset\" {INJECTED_ATTR}=\"reset\">Clear</button>\n");
            let variant = page
                .insert_at("</form>", false, &button)
                .ok_or_else(|| inapplicable(kind, "page has no </form> tag"))?;
            out.actions[index] = Action::new(
                Locator::css(&format!("#{} button[type=\"reset\"]", css_ident(&script.target_form))),
                Verb::Click,
                None,
            );
            Ok(structured(
                kind,
                out,
                idx,
                executed(ExecStatus::Success, None, Some(ErrorCategory::SubmitMisuse)),
                Some(variant),
            ))
        }
        MutationKind::SyntaxBreak => {
            let raw = emit_source(script, ACTION_JSON).expect("action-json always emits");
            Ok(Mutant {
                kind,
                script: TestScript::Raw(break_source(&raw, index)),
                action_indices: idx,
                expected: Expected {
                    syntax_valid: false,
                    status: None,
                    failed_action_index: None,
                    category: Some(ErrorCategory::Other),
                },
                page: None,
            })
        }
        MutationKind::DropFields(_) => unreachable!("handled above"),
    }
}

fn css_ident(id: &str) -> String {
    let mut out = String::new();
    for (i, c) in id.chars().enumerate() {
        let plain = c.is_ascii_alphanumeric() || c == '-' || c == '_' || !c.is_ascii();
        if plain && !(i == 0 && c.is_ascii_digit()) {
            out.push(c);
        } else {
            out.push_str(&format!("\\{:x} ", c as u32));
        }
    }
    out
}

/// Source with a guaranteed parse error at action `index`.
pub fn break_source(raw: &RawScript, index: usize) -> RawScript {
    let source = match raw.dialect.as_str() {
        ACTION_JSON => {
            let mut positions = raw.source.match_indices("\"verb\"").map(|(p, _)| p);
            let pos = positions.nth(index).or_else(|| raw.source.find('{')).unwrap_or(0);
            let mut s = raw.source.clone();
            s.insert(pos, '@');
            s
        }
        PYTHON_SELENIUM => {
            let mut s = raw.source.clone();
            s.push_str("driver.find_element(\n");
            s
        }
        _ => {
            let mut s = raw.source.clone();
            s.push_str("\n@@ (\n");
            s
        }
    };
    RawScript {
        source,
        dialect: raw.dialect.clone(),
    }
}

/// The page text with every injected element removed; equals the
/// serialized original for every page variant.
pub fn strip_injected(page: &str) -> String {
    let doc = Document::parse(page);
    let mut out = Document::new();
    copy_clean(&doc, Document::ROOT, &mut out, Document::ROOT);
    out.serialize()
}

fn copy_clean(src: &Document, from: NodeId, dst: &mut Document, to: NodeId) {
    let mut skip_ws = false;
    for c in src.children(from) {
        let data = &src.node(*c).data;
        if let NodeData::Element(el) = data {
            if el.has_attr(INJECTED_ATTR) {
                skip_ws = true;
                continue;
            }
        }
        if skip_ws {
            skip_ws = false;
            if let NodeData::Text(t) = data {
                if t == "\n" {
                    continue;
                }
            }
        }
        let id = dst.append(to, data.clone());
        copy_clean(src, *c, dst, id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;
    use crate::html::render::{render_form, FormSpec, CLASSIC};
    use crate::scenario::{reference_scenario, FieldSelection};
    use crate::script::{compile, parse_action_json};

    fn spec() -> FormSpec {
        FormSpec::new(
            "form-0001",
            alloc::vec![
                FieldSpec::new(FieldKind::Email, "mail").with_id("mail").required(true),
                FieldSpec::new(FieldKind::Text, "search").required(true),
                FieldSpec::new(FieldKind::Select, "size").with_options(&[("s", "S"), ("m", "M")]).required(true),
                FieldSpec::new(FieldKind::Radio, "color")
                    .with_options(&[("red", "Red"), ("blue", "Blue"), ("green", "Green")])
                    .required(true),
                FieldSpec::new(FieldKind::Checkbox, "agree").required(true),
            ],
        )
    }

    fn setup(style: &str) -> (HtmlDocument, ActionScript) {
        let spec = spec();
        let doc = render_form(&spec, style).unwrap();
        let s = reference_scenario(&spec, 3, FieldSelection::AllFillable).unwrap();
        (doc, compile(&s, &spec).unwrap())
    }

    #[test]
    fn kind_round_trip() {
        for k in MutationKind::FIXED.into_iter().chain([MutationKind::DropFields(2)]) {
            assert_eq!(k.to_string().parse::<MutationKind>().unwrap(), k);
        }
        assert_eq!("drop_fields(2)".parse::<MutationKind>(), Ok(MutationKind::DropFields(2)));
        assert!("drop_fields(0)".parse::<MutationKind>().is_err());
        assert!("nope".parse::<MutationKind>().is_err());
    }

    #[test]
    fn wrapper_requires_style() {
        let (doc, script) = setup(CLASSIC);
        assert!(matches!(
            mutate(&script, MutationKind::WrapperMisbind, &doc, 0),
            Err(MutationError::Inapplicable { .. })
        ));
        let (doc, script) = setup(WRAPPER_HEAVY);
        let m = mutate(&script, MutationKind::WrapperMisbind, &doc, 0).unwrap();
        let TestScript::Actions(a) = &m.script else { panic!() };
        let i = m.action_indices[0];
        assert!(a.actions[i].locator.value.starts_with("//div[@id='field-"));
        assert_eq!(m.expected.status, Some(ExecStatus::AutomationError));
        assert_eq!(m.expected.failed_action_index, Some(i));
    }

    #[test]
    fn drop_fields_counts() {
        let (doc, script) = setup(CLASSIC);
        let m = mutate(&script, MutationKind::DropFields(2), &doc, 9).unwrap();
        let TestScript::Actions(a) = &m.script else { panic!() };
        assert_eq!(a.fill_count(), script.fill_count() - 2);
        assert_eq!(a.actions.last().unwrap().verb, Verb::SubmitForm);
        assert!(mutate(&script, MutationKind::DropFields(9), &doc, 9).is_err());
    }

    #[test]
    fn deterministic() {
        let (doc, script) = setup(WRAPPER_HEAVY);
        for k in MutationKind::FIXED {
            let a = mutate(&script, k, &doc, 77);
            let b = mutate(&script, k, &doc, 77);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn syntax_break_is_invalid() {
        let (doc, script) = setup(CLASSIC);
        for seed in 0..8 {
            let m = mutate(&script, MutationKind::SyntaxBreak, &doc, seed).unwrap();
            let TestScript::Raw(raw) = &m.script else { panic!() };
            assert!(parse_action_json(&raw.source).is_err());
        }
    }

    #[test]
    fn variants_only_add_marked_elements() {
        let (doc, script) = setup(CLASSIC);
        let original = Document::parse(&doc.text).serialize();
        for k in [MutationKind::HiddenTarget, MutationKind::DisabledTarget, MutationKind::ContextLeak, MutationKind::NonsubmitClick] {
            let m = mutate(&script, k, &doc, 1).unwrap();
            let page = m.page.expect("variant");
            assert!(page.contains(INJECTED_ATTR));
            assert_eq!(strip_injected(&page), original, "{k}");
        }
    }

    #[test]
    fn context_leak_is_ambiguous() {
        let (doc, script) = setup(CLASSIC);
        let m = mutate(&script, MutationKind::ContextLeak, &doc, 5).unwrap();
        let TestScript::Actions(a) = &m.script else { panic!() };
        let page = Document::parse(m.page.as_ref().unwrap());
        let hits = a.actions[m.action_indices[0]].locator.resolve_all(&page, None, &MarkupState).unwrap();
        assert_eq!(hits.len(), 2);
        let form = page.element_by_id("form-0001").unwrap();
        assert!(!page.is_ancestor(form, hits[0]));
    }

    #[test]
    fn wrong_group_member_targets_first_radio() {
        let (doc, script) = setup(CLASSIC);
        match mutate(&script, MutationKind::WrongGroupMember, &doc, 0) {
            Ok(m) => assert_eq!(m.expected.category, None),
            Err(MutationError::Inapplicable { .. }) => {
                // The seeded option was the first member.
            }
            Err(e) => panic!("{e}"),
        }
    }
}
