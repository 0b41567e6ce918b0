//! A small cascade over `<style>` blocks and inline `style` attributes,
//! enough to decide whether a control is rendered and reachable.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::dom::{Document, NodeData, NodeId};
use crate::locate::css::{Complex, SelectorList};

#[derive(Clone, Debug)]
struct Rule {
    selector: Complex,
    specificity: (u32, u32, u32),
    order: usize,
    decls: Vec<(String, String, bool)>,
}

/// Author stylesheet collected from every `<style>` element of a document.
#[derive(Clone, Debug, Default)]
pub struct StyleSheet {
    rules: Vec<Rule>,
}

/// Why an element would not be interactable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Visibility {
    pub display_none: bool,
    pub visibility_hidden: bool,
    pub zero_size: bool,
    pub offscreen: bool,
}

impl Visibility {
    pub fn is_visible(&self) -> bool {
        !(self.display_none || self.visibility_hidden || self.zero_size || self.offscreen)
    }

    /// Hidden in the sense of not rendered at all (as opposed to offscreen).
    pub fn is_hidden(&self) -> bool {
        self.display_none || self.visibility_hidden || self.zero_size
    }
}

/// Parses `prop: value; ...` declarations into (property, value,
/// important), property names and values lowercased.
pub fn parse_declarations(text: &str) -> Vec<(String, String, bool)> {
    text.split(';')
        .filter_map(|d| {
            let (k, v) = d.split_once(':')?;
            let k = k.trim().to_ascii_lowercase();
            let v = v.trim().to_ascii_lowercase();
            let (v, important) = match v.strip_suffix("!important") {
                Some(rest) => (rest.trim().to_string(), true),
                None => (v, false),
            };
            (!k.is_empty()).then_some((k, v, important))
        })
        .collect()
}

fn strip_comments(css: &str) -> String {
    let mut out = String::with_capacity(css.len());
    let mut rest = css;
    while let Some(start) = rest.find("/*") {
        out.push_str(&rest[..start]);
        match rest[start + 2..].find("*/") {
            Some(end) => rest = &rest[start + 2 + end + 2..],
            None => return out,
        }
    }
    out.push_str(rest);
    out
}

impl StyleSheet {
    pub fn parse(css: &str) -> Self {
        let mut sheet = StyleSheet::default();
        sheet.add(css);
        sheet
    }

    /// Appends the rules of `css`. At-rule blocks are skipped and rules
    /// with selectors this engine cannot parse are ignored, as a browser
    /// would.
    pub fn add(&mut self, css: &str) {
        let css = strip_comments(css);
        let bytes = css.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let Some(open) = css[i..].find('{').map(|p| p + i) else { break };
            let prelude = css[i..open].trim();
            // Find the matching close brace.
            let mut depth = 0;
            let mut close = bytes.len();
            for (j, b) in bytes.iter().enumerate().skip(open) {
                match b {
                    b'{' => depth += 1,
                    b'}' => {
                        depth -= 1;
                        if depth == 0 {
                            close = j;
                            break;
                        }
                    }
                    _ => {}
                }
            }
            let body = &css[open + 1..close.min(css.len())];
            i = close + 1;
            if prelude.starts_with('@') {
                continue;
            }
            let Ok(list) = SelectorList::parse(prelude) else { continue };
            let decls = parse_declarations(body);
            for c in list.complexes() {
                let order = self.rules.len();
                self.rules.push(Rule {
                    specificity: c.specificity(),
                    selector: c.clone(),
                    order,
                    decls: decls.clone(),
                });
            }
        }
    }

    pub fn from_document(doc: &Document) -> Self {
        let mut sheet = StyleSheet::default();
        for n in doc.elements_by_tag("style") {
            sheet.add(&doc.text_content(n));
        }
        sheet
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Cascaded (not inherited) value of `prop` on `node`. Precedence:
    /// important inline, important rules, inline, rules; rules ordered by
    /// specificity then source order.
    pub fn specified(&self, doc: &Document, node: NodeId, prop: &str) -> Option<String> {
        let inline = doc.attr(node, "style").map(parse_declarations).unwrap_or_default();
        let inline_decl = |important: bool| {
            inline
                .iter()
                .rev()
                .find(|(k, _, imp)| k == prop && *imp == important)
                .map(|(_, v, _)| v.clone())
        };
        let state = crate::locate::css::MarkupState;
        let rule_decl = |important: bool| {
            self.rules
                .iter()
                .filter(|r| r.decls.iter().any(|(k, _, imp)| k == prop && *imp == important))
                .filter(|r| r.selector.matches(doc, node, &state))
                .max_by_key(|r| (r.specificity, r.order))
                .and_then(|r| {
                    r.decls
                        .iter()
                        .rev()
                        .find(|(k, _, imp)| k == prop && *imp == important)
                        .map(|(_, v, _)| v.clone())
                })
        };
        inline_decl(true)
            .or_else(|| rule_decl(true))
            .or_else(|| inline_decl(false))
            .or_else(|| rule_decl(false))
    }

    fn display_none(&self, doc: &Document, node: NodeId) -> bool {
        let el = match doc.element(node) {
            Some(e) => e,
            None => return false,
        };
        if matches!(el.name.as_str(), "head" | "script" | "style" | "template" | "title" | "meta" | "link") {
            return true;
        }
        if el.name == "input" && el.input_type() == "hidden" {
            return true;
        }
        match self.specified(doc, node, "display") {
            Some(d) => d == "none",
            None => el.has_attr("hidden"),
        }
    }

    pub fn visibility(&self, doc: &Document, node: NodeId) -> Visibility {
        let mut v = Visibility::default();
        if !matches!(doc.node(node).data, NodeData::Element(_)) {
            v.display_none = true;
            return v;
        }
        // Options render with their select.
        let subject = if doc.tag(node) == Some("option") {
            doc.ancestors(node).find(|a| doc.tag(*a) == Some("select")).unwrap_or(node)
        } else {
            node
        };
        v.display_none = core::iter::once(subject)
            .chain(doc.ancestors(subject))
            .any(|n| self.display_none(doc, n));
        // `visibility` inherits: nearest specified value wins.
        v.visibility_hidden = core::iter::once(subject)
            .chain(doc.ancestors(subject))
            .find_map(|n| self.specified(doc, n, "visibility"))
            .is_some_and(|val| val == "hidden" || val == "collapse");
        let zero = |val: Option<String>| val.is_some_and(|s| is_zero_length(&s));
        v.zero_size = zero(self.specified(doc, subject, "width")) || zero(self.specified(doc, subject, "height"));
        v.offscreen = core::iter::once(subject).chain(doc.ancestors(subject)).any(|n| {
            let positioned = self
                .specified(doc, n, "position")
                .is_some_and(|p| p == "absolute" || p == "fixed");
            positioned
                && ["left", "top"].iter().any(|p| {
                    self.specified(doc, n, p)
                        .and_then(|s| px(&s))
                        .is_some_and(|x| x <= -1000.0)
                })
        });
        v
    }
}

fn is_zero_length(s: &str) -> bool {
    px(s).is_some_and(|x| x == 0.0) || s == "0%"
}

fn px(s: &str) -> Option<f64> {
    let s = s.trim();
    let num = s.strip_suffix("px").unwrap_or(s);
    num.trim().parse::<f64>().ok()
}

/// Convenience: parses the document's stylesheet and computes the
/// visibility of a single node.
pub fn visibility_of(doc: &Document, node: NodeId) -> Visibility {
    StyleSheet::from_document(doc).visibility(doc, node)
}

impl core::fmt::Display for Visibility {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if self.display_none {
            parts.push("display:none".to_string());
        }
        if self.visibility_hidden {
            parts.push("visibility:hidden".to_string());
        }
        if self.zero_size {
            parts.push("zero-size".to_string());
        }
        if self.offscreen {
            parts.push("offscreen".to_string());
        }
        if parts.is_empty() {
            f.write_str("visible")
        } else {
            f.write_str(&parts.join(", "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vis(html: &str, id: &str) -> Visibility {
        let doc = Document::parse(html);
        let n = doc.element_by_id(id).unwrap();
        visibility_of(&doc, n)
    }

    #[test]
    fn cascade_and_inheritance() {
        let page = r#"<style>/* c */ .x { display: none } #b.x { display: block }
            @media print { #c { display:none } }
            .v { visibility: hidden } .v .w { visibility: visible }
            .off { position: absolute; left: -9999px }</style>
            <div class="x"><input id="a"></div>
            <div id="b" class="x"><input id="bb"></div>
            <input id="c">
            <div class="v"><input id="d"><span class="w"><input id="e"></span></div>
            <div class="off"><input id="f"></div>
            <input id="g" style="width:0">
            <input id="h" type="hidden">
            <p hidden><input id="i"></p>"#;
        assert!(vis(page, "a").display_none);
        assert!(vis(page, "bb").is_visible());
        assert!(vis(page, "c").is_visible());
        assert!(vis(page, "d").visibility_hidden);
        assert!(vis(page, "e").is_visible());
        assert!(vis(page, "f").offscreen && !vis(page, "f").is_hidden());
        assert!(vis(page, "g").zero_size);
        assert!(vis(page, "h").display_none);
        assert!(vis(page, "i").display_none);
    }

    #[test]
    fn important_ordering() {
        let page = r#"<style>#a{display:none} #b{display:none !important}</style>
            <input id="a" style="display:inline"><input id="b" style="display:inline">"#;
        assert!(vis(page, "a").is_visible());
        assert!(vis(page, "b").display_none);
    }
}
