use alloc::string::String;

use super::dom::{Document, NodeData, NodeId};
use super::parse::{is_raw_text, is_void};

pub fn escape_text(s: &str, out: &mut String) {
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            c => out.push(c),
        }
    }
}

pub fn escape_attr(s: &str, out: &mut String) {
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            c => out.push(c),
        }
    }
}

pub fn serialize(doc: &Document, id: NodeId) -> String {
    let mut out = String::new();
    for c in doc.children(id) {
        write_node(doc, *c, &mut out);
    }
    out
}

pub fn outer_html(doc: &Document, id: NodeId) -> String {
    let mut out = String::new();
    write_node(doc, id, &mut out);
    out
}

fn write_node(doc: &Document, id: NodeId, out: &mut String) {
    match &doc.node(id).data {
        NodeData::Document => {
            for c in doc.children(id) {
                write_node(doc, *c, out);
            }
        }
        NodeData::Doctype(d) => {
            out.push_str("<!DOCTYPE ");
            out.push_str(d);
            out.push('>');
        }
        NodeData::Comment(c) => {
            out.push_str("<!--");
            out.push_str(c);
            out.push_str("-->");
        }
        NodeData::Text(t) => {
            let raw = doc
                .parent(id)
                .and_then(|p| doc.tag(p))
                .is_some_and(is_raw_text);
            if raw {
                out.push_str(t);
            } else {
                escape_text(t, out);
            }
        }
        NodeData::Element(e) => {
            out.push('<');
            out.push_str(&e.name);
            for (k, v) in &e.attrs {
                out.push(' ');
                out.push_str(k);
                out.push_str("=\"");
                escape_attr(v, out);
                out.push('"');
            }
            out.push('>');
            if is_void(&e.name) {
                return;
            }
            for c in doc.children(id) {
                write_node(doc, *c, out);
            }
            out.push_str("</");
            out.push_str(&e.name);
            out.push('>');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::dom::Document;

    #[test]
    fn reparse_of_serialization_is_stable() {
        let src = r#"<!DOCTYPE html><html><head><style>a>b{}</style></head><body><p class="x">a &amp; b<br><input name="q" value="&quot;"></p></body></html>"#;
        let doc = Document::parse(src);
        let once = doc.serialize();
        let twice = Document::parse(&once).serialize();
        assert_eq!(once, twice);
        assert!(once.contains("<style>a>b{}</style>"));
        assert!(once.contains(r#"value="&quot;""#));
    }
}
