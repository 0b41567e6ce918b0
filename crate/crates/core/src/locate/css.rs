//! CSS selector parsing and matching (Selectors level 3 plus `:not()` with
//! selector lists).

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::html::dom::{Document, NodeId};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid selector `{selector}`: {reason}")]
pub struct SelectorError {
    pub selector: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectorList(pub Vec<Complex>);

#[derive(Clone, Debug, PartialEq)]
pub struct Complex {
    /// Left to right; the combinator of the first compound is unused.
    parts: Vec<(Combinator, Compound)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Combinator {
    Descendant,
    Child,
    Next,
    Subsequent,
}

#[derive(Clone, Debug, PartialEq, Default)]
struct Compound {
    tag: Option<String>,
    simples: Vec<Simple>,
}

#[derive(Clone, Debug, PartialEq)]
enum Simple {
    Id(String),
    Class(String),
    Attr {
        name: String,
        op: AttrOp,
        value: String,
        case_insensitive: bool,
    },
    Not(Box<SelectorList>),
    Nth {
        a: i64,
        b: i64,
        of_type: bool,
        from_end: bool,
    },
    OnlyChild,
    OnlyOfType,
    Checked,
    Disabled,
    Enabled,
    Empty,
    Root,
    /// Dynamic pseudo-classes (`:hover`, `:focus`, ...) never match a
    /// static snapshot.
    Never,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum AttrOp {
    Exists,
    Equals,
    Includes,
    Dash,
    Prefix,
    Suffix,
    Substring,
}

/// Dynamic element state consulted by `:checked`, `:disabled`, `:enabled`.
pub trait ElementState {
    fn checked(&self, doc: &Document, node: NodeId) -> bool;
    fn disabled(&self, doc: &Document, node: NodeId) -> bool {
        attr_disabled(doc, node)
    }
}

/// State read from markup attributes only.
pub struct MarkupState;

impl ElementState for MarkupState {
    fn checked(&self, doc: &Document, node: NodeId) -> bool {
        match doc.tag(node) {
            Some("option") => doc.attr(node, "selected").is_some(),
            Some("input") => doc.attr(node, "checked").is_some(),
            _ => false,
        }
    }
}

/// `disabled` attribute on the element or an enclosing disabled fieldset.
pub fn attr_disabled(doc: &Document, node: NodeId) -> bool {
    if !matches!(
        doc.tag(node),
        Some("input" | "select" | "textarea" | "button" | "option" | "optgroup" | "fieldset")
    ) {
        return false;
    }
    if doc.attr(node, "disabled").is_some() {
        return true;
    }
    if doc.tag(node) == Some("option") {
        return doc
            .ancestors(node)
            .find(|a| matches!(doc.tag(*a), Some("select" | "optgroup")))
            .is_some_and(|a| doc.attr(a, "disabled").is_some());
    }
    doc.ancestors(node)
        .any(|a| doc.tag(a) == Some("fieldset") && doc.attr(a, "disabled").is_some())
}

impl SelectorList {
    pub fn parse(input: &str) -> Result<Self, SelectorError> {
        let mut p = Parser {
            src: input,
            chars: input.chars().collect(),
            pos: 0,
        };
        let list = p.list()?;
        p.ws();
        if p.pos < p.chars.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(list)
    }

    pub fn matches(&self, doc: &Document, node: NodeId) -> bool {
        self.matches_with(doc, node, &MarkupState)
    }

    pub fn matches_with(&self, doc: &Document, node: NodeId, state: &dyn ElementState) -> bool {
        doc.element(node).is_some() && self.0.iter().any(|c| c.matches(doc, node, state))
    }

    /// Matching elements among the strict descendants of `scope` (the whole
    /// document when `None`), in document order.
    pub fn query_all(&self, doc: &Document, scope: Option<NodeId>, state: &dyn ElementState) -> Vec<NodeId> {
        let root = scope.unwrap_or(Document::ROOT);
        doc.descendant_elements(root)
            .filter(|n| self.matches_with(doc, *n, state))
            .collect()
    }

    pub fn complexes(&self) -> &[Complex] {
        &self.0
    }
}

impl Complex {
    /// (ids, classes/attributes/pseudo-classes, types)
    pub fn specificity(&self) -> (u32, u32, u32) {
        let mut s = (0, 0, 0);
        for (_, c) in &self.parts {
            if c.tag.is_some() {
                s.2 += 1;
            }
            for simple in &c.simples {
                match simple {
                    Simple::Id(_) => s.0 += 1,
                    Simple::Not(inner) => {
                        let best = inner.0.iter().map(Complex::specificity).max().unwrap_or((0, 0, 0));
                        s.0 += best.0;
                        s.1 += best.1;
                        s.2 += best.2;
                    }
                    _ => s.1 += 1,
                }
            }
        }
        s
    }

    pub fn matches(&self, doc: &Document, node: NodeId, state: &dyn ElementState) -> bool {
        self.match_from(self.parts.len() - 1, doc, node, state)
    }

    fn match_from(&self, idx: usize, doc: &Document, node: NodeId, state: &dyn ElementState) -> bool {
        let (comb, compound) = &self.parts[idx];
        if !compound.matches(doc, node, state) {
            return false;
        }
        if idx == 0 {
            return true;
        }
        match comb {
            Combinator::Child => doc
                .parent_element(node)
                .is_some_and(|p| self.match_from(idx - 1, doc, p, state)),
            Combinator::Descendant => doc
                .ancestors(node)
                .any(|a| self.match_from(idx - 1, doc, a, state)),
            Combinator::Next => prev_element_siblings(doc, node)
                .first()
                .is_some_and(|s| self.match_from(idx - 1, doc, *s, state)),
            Combinator::Subsequent => prev_element_siblings(doc, node)
                .iter()
                .any(|s| self.match_from(idx - 1, doc, *s, state)),
        }
    }
}

fn prev_element_siblings(doc: &Document, node: NodeId) -> Vec<NodeId> {
    doc.preceding_siblings(node)
        .into_iter()
        .filter(|s| doc.element(*s).is_some())
        .collect()
}

fn element_siblings(doc: &Document, node: NodeId) -> Vec<NodeId> {
    match doc.parent(node) {
        Some(p) => doc.element_children(p).collect(),
        None => alloc::vec![node],
    }
}

impl Compound {
    fn matches(&self, doc: &Document, node: NodeId, state: &dyn ElementState) -> bool {
        let Some(el) = doc.element(node) else { return false };
        if let Some(t) = &self.tag {
            if !t.eq_ignore_ascii_case(&el.name) {
                return false;
            }
        }
        self.simples.iter().all(|s| match s {
            Simple::Id(id) => el.attr("id") == Some(id.as_str()),
            Simple::Class(c) => el.classes().any(|k| k == c),
            Simple::Attr {
                name,
                op,
                value,
                case_insensitive,
            } => match el.attr(name) {
                None => false,
                Some(actual) => attr_matches(actual, *op, value, *case_insensitive),
            },
            Simple::Not(inner) => !inner.matches_with(doc, node, state),
            Simple::Nth { a, b, of_type, from_end } => {
                let mut sibs = element_siblings(doc, node);
                if *of_type {
                    sibs.retain(|s| doc.tag(*s) == Some(el.name.as_str()));
                }
                if *from_end {
                    sibs.reverse();
                }
                let pos = sibs.iter().position(|s| *s == node).map(|p| p as i64 + 1).unwrap_or(0);
                nth_matches(*a, *b, pos)
            }
            Simple::OnlyChild => element_siblings(doc, node).len() == 1,
            Simple::OnlyOfType => {
                element_siblings(doc, node)
                    .iter()
                    .filter(|s| doc.tag(**s) == Some(el.name.as_str()))
                    .count()
                    == 1
            }
            Simple::Checked => state.checked(doc, node),
            Simple::Disabled => state.disabled(doc, node),
            Simple::Enabled => {
                matches!(el.name.as_str(), "input" | "select" | "textarea" | "button" | "option")
                    && !state.disabled(doc, node)
            }
            Simple::Empty => doc.children(node).is_empty(),
            Simple::Root => doc.parent(node) == Some(Document::ROOT),
            Simple::Never => false,
        })
    }
}

fn nth_matches(a: i64, b: i64, pos: i64) -> bool {
    if pos <= 0 {
        return false;
    }
    if a == 0 {
        return pos == b;
    }
    let diff = pos - b;
    diff % a == 0 && diff / a >= 0
}

fn attr_matches(actual: &str, op: AttrOp, value: &str, ci: bool) -> bool {
    let (actual, value) = if ci {
        (actual.to_lowercase(), value.to_lowercase())
    } else {
        (actual.to_string(), value.to_string())
    };
    match op {
        AttrOp::Exists => true,
        AttrOp::Equals => actual == value,
        AttrOp::Includes => !value.is_empty() && actual.split_ascii_whitespace().any(|w| w == value),
        AttrOp::Dash => actual == value || actual.starts_with(&(value.clone() + "-")),
        AttrOp::Prefix => !value.is_empty() && actual.starts_with(&value),
        AttrOp::Suffix => !value.is_empty() && actual.ends_with(&value),
        AttrOp::Substring => !value.is_empty() && actual.contains(&value),
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<char>,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, reason: &str) -> SelectorError {
        SelectorError {
            selector: self.src.to_string(),
            reason: reason.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn ws(&mut self) -> bool {
        let start = self.pos;
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
        self.pos > start
    }

    fn list(&mut self) -> Result<SelectorList, SelectorError> {
        let mut out = Vec::new();
        loop {
            self.ws();
            out.push(self.complex()?);
            self.ws();
            if self.peek() == Some(',') {
                self.pos += 1;
                continue;
            }
            break;
        }
        Ok(SelectorList(out))
    }

    fn complex(&mut self) -> Result<Complex, SelectorError> {
        let mut parts = Vec::new();
        let first = self.compound()?;
        parts.push((Combinator::Descendant, first));
        loop {
            let had_ws = self.ws();
            let comb = match self.peek() {
                Some('>') => Combinator::Child,
                Some('+') => Combinator::Next,
                Some('~') => Combinator::Subsequent,
                Some(',') | Some(')') | None => break,
                _ if had_ws => Combinator::Descendant,
                _ => return Err(self.err("expected combinator")),
            };
            if comb != Combinator::Descendant {
                self.pos += 1;
                self.ws();
            }
            let c = self.compound()?;
            parts.push((comb, c));
        }
        Ok(Complex { parts })
    }

    fn compound(&mut self) -> Result<Compound, SelectorError> {
        let mut c = Compound::default();
        match self.peek() {
            Some('*') => {
                self.pos += 1;
            }
            Some(ch) if is_ident_start(ch) => {
                c.tag = Some(self.ident()?.to_ascii_lowercase());
            }
            _ => {}
        }
        loop {
            match self.peek() {
                Some('#') => {
                    self.pos += 1;
                    c.simples.push(Simple::Id(self.ident()?));
                }
                Some('.') => {
                    self.pos += 1;
                    c.simples.push(Simple::Class(self.ident()?));
                }
                Some('[') => {
                    self.pos += 1;
                    c.simples.push(self.attribute()?);
                }
                Some(':') => {
                    self.pos += 1;
                    if self.peek() == Some(':') {
                        return Err(self.err("pseudo-elements are not supported"));
                    }
                    c.simples.push(self.pseudo()?);
                }
                _ => break,
            }
        }
        if c.tag.is_none() && c.simples.is_empty() && self.chars.get(self.pos.wrapping_sub(1)) != Some(&'*') {
            return Err(self.err("expected a selector"));
        }
        Ok(c)
    }

    fn ident(&mut self) -> Result<String, SelectorError> {
        let mut out = String::new();
        while let Some(ch) = self.peek() {
            if ch == '\\' {
                self.pos += 1;
                let Some(next) = self.peek() else { break };
                if next.is_ascii_hexdigit() {
                    let mut hex = String::new();
                    while hex.len() < 6 && self.peek().is_some_and(|c| c.is_ascii_hexdigit()) {
                        hex.push(self.peek().unwrap());
                        self.pos += 1;
                    }
                    if self.peek() == Some(' ') {
                        self.pos += 1;
                    }
                    let code = u32::from_str_radix(&hex, 16).unwrap_or(0xfffd);
                    out.push(char::from_u32(code).unwrap_or('\u{fffd}'));
                } else {
                    out.push(next);
                    self.pos += 1;
                }
            } else if is_ident_char(ch) {
                out.push(ch);
                self.pos += 1;
            } else {
                break;
            }
        }
        if out.is_empty() {
            return Err(self.err("expected identifier"));
        }
        Ok(out)
    }

    fn string_or_ident(&mut self) -> Result<String, SelectorError> {
        match self.peek() {
            Some(q @ ('"' | '\'')) => {
                self.pos += 1;
                let mut out = String::new();
                loop {
                    match self.peek() {
                        None => return Err(self.err("unterminated string")),
                        Some(c) if c == q => {
                            self.pos += 1;
                            return Ok(out);
                        }
                        Some('\\') => {
                            self.pos += 1;
                            if let Some(n) = self.peek() {
                                out.push(n);
                                self.pos += 1;
                            }
                        }
                        Some(c) => {
                            out.push(c);
                            self.pos += 1;
                        }
                    }
                }
            }
            _ => self.ident(),
        }
    }

    fn attribute(&mut self) -> Result<Simple, SelectorError> {
        self.ws();
        let name = self.ident()?.to_ascii_lowercase();
        self.ws();
        let op = match self.peek() {
            Some(']') => {
                self.pos += 1;
                return Ok(Simple::Attr {
                    name,
                    op: AttrOp::Exists,
                    value: String::new(),
                    case_insensitive: false,
                });
            }
            Some('=') => {
                self.pos += 1;
                AttrOp::Equals
            }
            Some(c @ ('~' | '|' | '^' | '$' | '*')) => {
                self.pos += 1;
                if self.peek() != Some('=') {
                    return Err(self.err("expected `=` in attribute selector"));
                }
                self.pos += 1;
                match c {
                    '~' => AttrOp::Includes,
                    '|' => AttrOp::Dash,
                    '^' => AttrOp::Prefix,
                    '$' => AttrOp::Suffix,
                    _ => AttrOp::Substring,
                }
            }
            _ => return Err(self.err("bad attribute selector")),
        };
        self.ws();
        let value = self.string_or_ident()?;
        self.ws();
        let mut case_insensitive = false;
        if matches!(self.peek(), Some('i' | 'I')) {
            case_insensitive = true;
            self.pos += 1;
            self.ws();
        } else if matches!(self.peek(), Some('s' | 'S')) {
            self.pos += 1;
            self.ws();
        }
        if self.peek() != Some(']') {
            return Err(self.err("expected `]`"));
        }
        self.pos += 1;
        Ok(Simple::Attr {
            name,
            op,
            value,
            case_insensitive,
        })
    }

    fn pseudo(&mut self) -> Result<Simple, SelectorError> {
        let name = self.ident()?.to_ascii_lowercase();
        let functional = self.peek() == Some('(');
        if functional {
            self.pos += 1;
            self.ws();
            let simple = match name.as_str() {
                "not" => Simple::Not(Box::new(self.list()?)),
                "nth-child" | "nth-of-type" | "nth-last-child" | "nth-last-of-type" => {
                    let mut arg = String::new();
                    while let Some(c) = self.peek() {
                        if c == ')' {
                            break;
                        }
                        arg.push(c);
                        self.pos += 1;
                    }
                    let (a, b) = parse_nth(arg.trim()).ok_or_else(|| self.err("bad nth expression"))?;
                    Simple::Nth {
                        a,
                        b,
                        of_type: name.ends_with("of-type"),
                        from_end: name.contains("last"),
                    }
                }
                _ => return Err(self.err("unsupported functional pseudo-class")),
            };
            self.ws();
            if self.peek() != Some(')') {
                return Err(self.err("expected `)`"));
            }
            self.pos += 1;
            return Ok(simple);
        }
        let nth = |a, b, of_type, from_end| Simple::Nth { a, b, of_type, from_end };
        Ok(match name.as_str() {
            "first-child" => nth(0, 1, false, false),
            "last-child" => nth(0, 1, false, true),
            "first-of-type" => nth(0, 1, true, false),
            "last-of-type" => nth(0, 1, true, true),
            "only-child" => Simple::OnlyChild,
            "only-of-type" => Simple::OnlyOfType,
            "checked" => Simple::Checked,
            "disabled" => Simple::Disabled,
            "enabled" => Simple::Enabled,
            "empty" => Simple::Empty,
            "root" => Simple::Root,
            "hover" | "focus" | "active" | "visited" | "link" | "focus-within" | "focus-visible"
            | "target" | "invalid" | "valid" | "placeholder-shown" | "required" | "optional" => Simple::Never,
            _ => return Err(self.err("unsupported pseudo-class")),
        })
    }
}

fn parse_nth(arg: &str) -> Option<(i64, i64)> {
    let s: String = arg.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
    match s.as_str() {
        "odd" => return Some((2, 1)),
        "even" => return Some((2, 0)),
        _ => {}
    }
    if let Some(npos) = s.find('n') {
        let a_part = &s[..npos];
        let a = match a_part {
            "" | "+" => 1,
            "-" => -1,
            other => other.parse().ok()?,
        };
        let b_part = &s[npos + 1..];
        let b = if b_part.is_empty() {
            0
        } else {
            b_part.trim_start_matches('+').parse().ok()?
        };
        Some((a, b))
    } else {
        Some((0, s.parse().ok()?))
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '-' || c == '\\' || !c.is_ascii()
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-' || !c.is_ascii()
}

/// Quotes `value` as a CSS string literal.
pub fn quote(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('"');
    for c in value.chars() {
        match c {
            '"' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\a "),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAGE: &str = r#"<html><body>
        <header><input name="search" id="top"></header>
        <form id="f"><div class="row a"><label for="e">E</label><input id="e" type="email" name="email" required></div>
        <div class="row"><input type="radio" name="c" value="red" checked><input type="radio" name="c" value="blue"></div>
        <select name="s"><option value="">-</option><option value="x" selected>X</option></select>
        <fieldset disabled><input name="inner"></fieldset>
        </form></body></html>"#;

    fn q(sel: &str) -> Vec<NodeId> {
        let doc = Document::parse(PAGE);
        SelectorList::parse(sel).unwrap().query_all(&doc, None, &MarkupState)
    }

    fn names(sel: &str) -> Vec<String> {
        let doc = Document::parse(PAGE);
        q(sel)
            .into_iter()
            .map(|n| {
                let e = doc.element(n).unwrap();
                e.attr("name").or(e.attr("id")).unwrap_or(&e.name).to_string()
            })
            .collect()
    }

    #[test]
    fn basic_selectors() {
        assert_eq!(names("#e"), ["email"]);
        assert_eq!(names("[name=\"search\"]"), ["search"]);
        assert_eq!(names("form [name='search']"), Vec::<String>::new());
        assert_eq!(names("input[type=radio][value=blue]"), ["c"]);
        assert_eq!(names("div.row.a > input"), ["email"]);
        assert_eq!(names("label + input"), ["email"]);
        assert_eq!(names("form input:not([type=radio]):not([name=inner])"), ["email"]);
        assert_eq!(names("input:checked"), ["c"]);
        assert_eq!(names("option:checked"), ["option"]);
        assert_eq!(names("input:disabled"), ["inner"]);
        assert_eq!(names("option[value =\"x\"]"), ["option"]);
        assert_eq!(names("div.row:nth-of-type(2) input:first-child").len(), 1);
        assert_eq!(names("[id], select").len(), 4);
    }

    #[test]
    fn invalid_selectors_are_errors() {
        for bad in ["", "div >", "[name", "a::before", ":bogus", "#"] {
            assert!(SelectorList::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn specificity_orders() {
        let s = |x: &str| SelectorList::parse(x).unwrap().0[0].specificity();
        assert!(s("#a") > s(".a.b.c"));
        assert!(s(".a") > s("div span"));
        assert_eq!(s("div:not(#x) .y"), (1, 1, 1));
    }

    #[test]
    fn quoting_round_trips() {
        let doc = Document::parse(r#"<input name='a"b'>"#);
        let sel = alloc::format!("input[name={}]", quote("a\"b"));
        assert_eq!(SelectorList::parse(&sel).unwrap().query_all(&doc, None, &MarkupState).len(), 1);
    }
}
