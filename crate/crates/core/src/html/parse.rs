//! Lenient HTML parser.
//!
//! Handles what real form pages contain: doctype, comments, void elements,
//! raw-text (`script`, `style`) and escapable raw-text (`textarea`, `title`)
//! elements, quoted/unquoted/boolean attributes, character references, and
//! the common implied end tags (`p`, `li`, `option`, table cells). It does
//! not build `html`/`head`/`body` when they are missing.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::dom::{Document, Element, NodeData, NodeId};

pub const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

const CLOSES_P: &[&str] = &[
    "address", "article", "aside", "blockquote", "details", "div", "dl", "fieldset", "figure",
    "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "main", "menu", "nav",
    "ol", "p", "pre", "section", "table", "ul",
];

pub fn is_void(name: &str) -> bool {
    VOID_ELEMENTS.contains(&name)
}

pub fn is_raw_text(name: &str) -> bool {
    matches!(name, "script" | "style")
}

fn is_escapable_raw_text(name: &str) -> bool {
    matches!(name, "textarea" | "title")
}

struct Builder {
    doc: Document,
    stack: Vec<NodeId>,
}

impl Builder {
    fn current(&self) -> NodeId {
        *self.stack.last().expect("root stays on the stack")
    }

    fn open_index(&self, name: &str, stop_at: &[&str]) -> Option<usize> {
        for (i, n) in self.stack.iter().enumerate().rev() {
            match self.doc.tag(*n) {
                Some(t) if t == name => return Some(i),
                Some(t) if stop_at.contains(&t) => return None,
                _ => {}
            }
        }
        None
    }

    fn close(&mut self, name: &str, stop_at: &[&str]) {
        if let Some(i) = self.open_index(name, stop_at) {
            self.stack.truncate(i);
        }
    }

    fn in_foreign(&self) -> bool {
        self.stack
            .iter()
            .any(|n| matches!(self.doc.tag(*n), Some("svg" | "math")))
    }

    fn text(&mut self, text: String) {
        if text.is_empty() {
            return;
        }
        let cur = self.current();
        if let Some(&last) = self.doc.children(cur).last() {
            if let NodeData::Text(prev) = &mut self.doc.node_mut(last).data {
                prev.push_str(&text);
                return;
            }
        }
        self.doc.append(cur, NodeData::Text(text));
    }

    fn start(&mut self, name: String, attrs: Vec<(String, String)>, self_closing: bool) -> bool {
        let n = name.as_str();
        if CLOSES_P.contains(&n) {
            self.close("p", &["button", "table", "td", "th"]);
        }
        match n {
            "li" => self.close("li", &["ul", "ol"]),
            "dt" | "dd" => {
                self.close("dt", &["dl"]);
                self.close("dd", &["dl"]);
            }
            "option" => {
                if self.doc.tag(self.current()) == Some("option") {
                    self.stack.pop();
                }
            }
            "optgroup" => {
                if self.doc.tag(self.current()) == Some("option") {
                    self.stack.pop();
                }
                if self.doc.tag(self.current()) == Some("optgroup") {
                    self.stack.pop();
                }
            }
            "tr" => self.close("tr", &["table", "tbody", "thead", "tfoot"]),
            "td" | "th" => {
                self.close("td", &["tr", "table"]);
                self.close("th", &["tr", "table"]);
            }
            "form" => {
                if self.open_index("form", &[]).is_some() {
                    return false;
                }
            }
            _ => {}
        }
        let cur = self.current();
        let id = self.doc.append(cur, NodeData::Element(Element { name, attrs }));
        let foreign_self_close = self_closing && self.in_foreign();
        if !is_void(self.doc.tag(id).unwrap()) && !foreign_self_close {
            self.stack.push(id);
            return true;
        }
        false
    }

    fn end(&mut self, name: &str) {
        if is_void(name) {
            return;
        }
        if let Some(i) = self.open_index(name, &[]) {
            if i > 0 {
                self.stack.truncate(i);
            }
        }
    }
}

pub fn parse(html: &str) -> Document {
    let mut b = Builder {
        doc: Document::new(),
        stack: alloc::vec![Document::ROOT],
    };
    let bytes = html.as_bytes();
    let mut i = 0;
    let mut text_start = 0;
    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let rest = &html[i..];
        let next = bytes.get(i + 1).copied();
        let flush = |b: &mut Builder, from: usize, to: usize| {
            if to > from {
                b.text(decode_entities(&html[from..to]));
            }
        };
        if rest.starts_with("<!--") {
            flush(&mut b, text_start, i);
            let end = rest[4..].find("-->").map(|e| i + 4 + e);
            let (body, after) = match end {
                Some(e) => (&html[i + 4..e], e + 3),
                None => (&html[i + 4..], bytes.len()),
            };
            let cur = b.current();
            b.doc.append(cur, NodeData::Comment(body.to_string()));
            i = after;
            text_start = i;
        } else if next == Some(b'!') || next == Some(b'?') {
            flush(&mut b, text_start, i);
            let end = rest.find('>').map(|e| i + e).unwrap_or(bytes.len());
            let inner = &html[(i + 2).min(end)..end];
            if inner.len() >= 7 && inner[..7].eq_ignore_ascii_case("doctype") {
                b.doc.append(Document::ROOT, NodeData::Doctype(inner[7..].trim().to_string()));
            }
            i = (end + 1).min(bytes.len());
            text_start = i;
        } else if next == Some(b'/') && bytes.get(i + 2).is_some_and(|c| c.is_ascii_alphabetic()) {
            flush(&mut b, text_start, i);
            let (name, after) = read_name(html, i + 2);
            let end = html[after..].find('>').map(|e| after + e + 1).unwrap_or(bytes.len());
            b.end(&name);
            i = end;
            text_start = i;
        } else if next.is_some_and(|c| c.is_ascii_alphabetic()) {
            flush(&mut b, text_start, i);
            let (name, after) = read_name(html, i + 1);
            let (attrs, self_closing, end) = read_attrs(html, after);
            let pushed = b.start(name.clone(), attrs, self_closing);
            i = end;
            if pushed && (is_raw_text(&name) || is_escapable_raw_text(&name)) {
                let close = find_close_tag(html, i, &name);
                let content = &html[i..close.0];
                if !content.is_empty() {
                    let t = if is_raw_text(&name) {
                        content.to_string()
                    } else {
                        decode_entities(content.strip_prefix('\n').unwrap_or(content))
                    };
                    if !t.is_empty() {
                        let cur = b.current();
                        b.doc.append(cur, NodeData::Text(t));
                    }
                }
                b.stack.pop();
                i = close.1;
            }
            text_start = i;
        } else {
            i += 1;
        }
    }
    if text_start < bytes.len() {
        b.text(decode_entities(&html[text_start..]));
    }
    b.doc
}

fn read_name(html: &str, start: usize) -> (String, usize) {
    let bytes = html.as_bytes();
    let mut j = start;
    while j < bytes.len() && !bytes[j].is_ascii_whitespace() && bytes[j] != b'>' && bytes[j] != b'/' {
        j += 1;
    }
    (html[start..j].to_ascii_lowercase(), j)
}

fn read_attrs(html: &str, mut j: usize) -> (Vec<(String, String)>, bool, usize) {
    let bytes = html.as_bytes();
    let mut attrs: Vec<(String, String)> = Vec::new();
    let mut self_closing = false;
    loop {
        while j < bytes.len() && bytes[j].is_ascii_whitespace() {
            j += 1;
        }
        if j >= bytes.len() {
            return (attrs, self_closing, j);
        }
        match bytes[j] {
            b'>' => return (attrs, self_closing, j + 1),
            b'/' => {
                self_closing = bytes.get(j + 1) == Some(&b'>');
                j += 1;
                continue;
            }
            _ => {}
        }
        self_closing = false;
        let start = j;
        while j < bytes.len()
            && !bytes[j].is_ascii_whitespace()
            && !matches!(bytes[j], b'=' | b'>')
            && !(bytes[j] == b'/' && bytes.get(j + 1) == Some(&b'>'))
        {
            j += 1;
        }
        let name = html[start..j].to_ascii_lowercase();
        let mut k = j;
        while k < bytes.len() && bytes[k].is_ascii_whitespace() {
            k += 1;
        }
        let mut value = String::new();
        if bytes.get(k) == Some(&b'=') {
            k += 1;
            while k < bytes.len() && bytes[k].is_ascii_whitespace() {
                k += 1;
            }
            match bytes.get(k) {
                Some(&q @ (b'"' | b'\'')) => {
                    let vstart = k + 1;
                    let vend = html[vstart..].find(q as char).map(|e| vstart + e).unwrap_or(bytes.len());
                    value = decode_entities(&html[vstart..vend]);
                    j = (vend + 1).min(bytes.len());
                }
                _ => {
                    let vstart = k;
                    while k < bytes.len() && !bytes[k].is_ascii_whitespace() && bytes[k] != b'>' {
                        k += 1;
                    }
                    value = decode_entities(&html[vstart..k]);
                    j = k;
                }
            }
        }
        if !name.is_empty() && !attrs.iter().any(|(n, _)| *n == name) {
            attrs.push((name, value));
        }
        if j == start {
            j += 1;
        }
    }
}

/// Returns (content end, position after the closing tag).
fn find_close_tag(html: &str, from: usize, name: &str) -> (usize, usize) {
    let bytes = html.as_bytes();
    let mut j = from;
    while let Some(p) = html[j..].find("</") {
        let at = j + p;
        let cand = &html[at + 2..];
        if cand.len() >= name.len() && cand[..name.len()].eq_ignore_ascii_case(name) {
            let after_name = at + 2 + name.len();
            let boundary = bytes.get(after_name).copied();
            if matches!(boundary, None | Some(b'>' | b'/' | b' ' | b'\t' | b'\n' | b'\r' | b'\x0c')) {
                let end = html[after_name..].find('>').map(|e| after_name + e + 1).unwrap_or(bytes.len());
                return (at, end);
            }
        }
        j = at + 2;
    }
    (bytes.len(), bytes.len())
}

const NAMED_ENTITIES: &[(&str, &str)] = &[
    ("amp", "&"),
    ("lt", "<"),
    ("gt", ">"),
    ("quot", "\""),
    ("apos", "'"),
    ("nbsp", "\u{a0}"),
    ("copy", "\u{a9}"),
    ("reg", "\u{ae}"),
    ("trade", "\u{2122}"),
    ("hellip", "\u{2026}"),
    ("mdash", "\u{2014}"),
    ("ndash", "\u{2013}"),
    ("laquo", "\u{ab}"),
    ("raquo", "\u{bb}"),
    ("times", "\u{d7}"),
    ("middot", "\u{b7}"),
    ("bull", "\u{2022}"),
    ("rsquo", "\u{2019}"),
    ("lsquo", "\u{2018}"),
    ("rdquo", "\u{201d}"),
    ("ldquo", "\u{201c}"),
];

pub fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(p) = rest.find('&') {
        out.push_str(&rest[..p]);
        let tail = &rest[p + 1..];
        let semi = tail.find(';').filter(|e| *e <= 12);
        let decoded = semi.and_then(|e| {
            let name = &tail[..e];
            if let Some(num) = name.strip_prefix('#') {
                let code = if let Some(hex) = num.strip_prefix('x').or_else(|| num.strip_prefix('X')) {
                    u32::from_str_radix(hex, 16).ok()
                } else {
                    num.parse::<u32>().ok()
                };
                code.map(|c| char::from_u32(c).unwrap_or('\u{fffd}').to_string())
            } else {
                NAMED_ENTITIES
                    .iter()
                    .find(|(n, _)| *n == name)
                    .map(|(_, v)| v.to_string())
            }
            .map(|v| (v, e))
        });
        match decoded {
            Some((v, e)) => {
                out.push_str(&v);
                rest = &tail[e + 1..];
            }
            None => {
                out.push('&');
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_basic_form() {
        let doc = parse(
            r#"<!DOCTYPE html><html><body><form id="f"><label for="e">E&amp;mail</label>
            <input type=email id="e" name='email' required><select name="s"><option value="">-<option value="a" selected>A</select>
            <textarea name="t">a &lt; b</textarea></form></body></html>"#,
        );
        let form = doc.element_by_id("f").unwrap();
        let input = doc.element_by_id("e").unwrap();
        assert!(doc.is_ancestor(form, input));
        let el = doc.element(input).unwrap();
        assert_eq!(el.attr("type"), Some("email"));
        assert_eq!(el.attr("name"), Some("email"));
        assert_eq!(el.attr("required"), Some(""));
        let select = doc.elements_by_tag("select").next().unwrap();
        let opts: Vec<_> = doc.element_children(select).collect();
        assert_eq!(opts.len(), 2, "option closes the previous option");
        let ta = doc.elements_by_tag("textarea").next().unwrap();
        assert_eq!(doc.text_content(ta), "a < b");
        assert_eq!(doc.text_content(doc.elements_by_tag("label").next().unwrap()), "E&mail");
    }

    #[test]
    fn raw_text_is_not_parsed() {
        let doc = parse("<style>a > b { color: red }</style><script>if (a < b) {}</script><p>x");
        let style = doc.elements_by_tag("style").next().unwrap();
        assert_eq!(doc.text_content(style), "a > b { color: red }");
        assert_eq!(doc.elements().count(), 3);
    }

    #[test]
    fn p_is_closed_by_block() {
        let doc = parse("<p>one<div>two</div>");
        let p = doc.elements_by_tag("p").next().unwrap();
        let div = doc.elements_by_tag("div").next().unwrap();
        assert!(!doc.is_ancestor(p, div));
    }

    #[test]
    fn stray_end_tags_are_ignored() {
        let doc = parse("<div></span><span>a</div>b");
        assert_eq!(doc.elements().count(), 2);
        let div = doc.elements_by_tag("div").next().unwrap();
        assert_eq!(doc.text_content(div), "a");
    }

    #[test]
    fn nested_form_start_is_ignored() {
        let doc = parse("<form id=a><form id=b><input name=x></form>");
        assert_eq!(doc.elements_by_tag("form").count(), 1);
    }

    #[test]
    fn entities() {
        assert_eq!(decode_entities("&#65;&#x42;&quot;&bogus;&"), "AB\"&bogus;&");
    }
}
