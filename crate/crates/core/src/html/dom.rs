//! Arena DOM used for snapshots and the reference browser.
//!
//! Node ids are assigned in parse order, which is document order, so sorting
//! ids sorts nodes the way a browser would report them.

use alloc::string::String;
use alloc::vec::Vec;

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Element {
    /// Lowercase tag name.
    pub name: String,
    /// Lowercase attribute names, source order, first occurrence wins.
    pub attrs: Vec<(String, String)>,
}

impl Element {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn has_attr(&self, name: &str) -> bool {
        self.attrs.iter().any(|(k, _)| k == name)
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.attr("class").unwrap_or("").split_ascii_whitespace()
    }

    /// `type` of an `<input>`, lowercased, defaulting to `text`.
    pub fn input_type(&self) -> String {
        self.attr("type")
            .map(|t| t.trim().to_ascii_lowercase())
            .filter(|t| !t.is_empty())
            .unwrap_or_else(|| String::from("text"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeData {
    Document,
    Doctype(String),
    Element(Element),
    Text(String),
    Comment(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub data: NodeData,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    nodes: Vec<Node>,
}

impl Default for Document {
    fn default() -> Self {
        Self::new()
    }
}

impl Document {
    pub const ROOT: NodeId = 0;

    pub fn new() -> Self {
        Self {
            nodes: alloc::vec![Node {
                parent: None,
                children: Vec::new(),
                data: NodeData::Document,
            }],
        }
    }

    pub fn parse(html: &str) -> Self {
        super::parse::parse(html)
    }

    pub fn append(&mut self, parent: NodeId, data: NodeData) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            parent: Some(parent),
            children: Vec::new(),
            data,
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id]
    }

    pub fn element(&self, id: NodeId) -> Option<&Element> {
        match &self.nodes.get(id)?.data {
            NodeData::Element(e) => Some(e),
            _ => None,
        }
    }

    pub fn tag(&self, id: NodeId) -> Option<&str> {
        self.element(id).map(|e| e.name.as_str())
    }

    pub fn attr(&self, id: NodeId, name: &str) -> Option<&str> {
        self.element(id).and_then(|e| e.attr(name))
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    pub fn parent_element(&self, id: NodeId) -> Option<NodeId> {
        self.parent(id).filter(|p| self.element(*p).is_some())
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn element_children(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes[id]
            .children
            .iter()
            .copied()
            .filter(move |c| self.element(*c).is_some())
    }

    /// Strict descendants in document order.
    pub fn descendants(&self, id: NodeId) -> Descendants<'_> {
        let mut stack: Vec<NodeId> = self.nodes[id].children.clone();
        stack.reverse();
        Descendants { doc: self, stack }
    }

    pub fn descendant_elements(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.descendants(id).filter(move |n| self.element(*n).is_some())
    }

    /// All elements in document order.
    pub fn elements(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.descendant_elements(Self::ROOT)
    }

    /// Proper ancestors, nearest first (excluding the document node).
    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let mut cur = self.nodes[id].parent;
        core::iter::from_fn(move || {
            let n = cur?;
            if n == Self::ROOT {
                return None;
            }
            cur = self.nodes[n].parent;
            Some(n)
        })
    }

    pub fn is_ancestor(&self, ancestor: NodeId, node: NodeId) -> bool {
        self.ancestors(node).any(|a| a == ancestor)
    }

    pub fn closest(&self, id: NodeId, tag: &str) -> Option<NodeId> {
        if self.tag(id) == Some(tag) {
            return Some(id);
        }
        self.ancestors(id).find(|a| self.tag(*a) == Some(tag))
    }

    pub fn element_by_id(&self, id: &str) -> Option<NodeId> {
        self.elements().find(|n| self.attr(*n, "id") == Some(id))
    }

    pub fn elements_by_tag<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = NodeId> + 'a {
        self.elements().filter(move |n| self.tag(*n) == Some(tag))
    }

    /// Concatenated text of all descendant text nodes.
    pub fn text_content(&self, id: NodeId) -> String {
        let mut out = String::new();
        if let NodeData::Text(t) = &self.nodes[id].data {
            out.push_str(t);
        }
        for d in self.descendants(id) {
            if let NodeData::Text(t) = &self.nodes[d].data {
                out.push_str(t);
            }
        }
        out
    }

    /// Element siblings before `id`, nearest first.
    pub fn preceding_siblings(&self, id: NodeId) -> Vec<NodeId> {
        let Some(p) = self.parent(id) else { return Vec::new() };
        let sibs = &self.nodes[p].children;
        let pos = sibs.iter().position(|s| *s == id).unwrap_or(0);
        sibs[..pos].iter().rev().copied().collect()
    }

    /// Siblings after `id`, nearest first.
    pub fn following_siblings(&self, id: NodeId) -> Vec<NodeId> {
        let Some(p) = self.parent(id) else { return Vec::new() };
        let sibs = &self.nodes[p].children;
        let pos = sibs.iter().position(|s| *s == id).unwrap_or(sibs.len());
        sibs[(pos + 1).min(sibs.len())..].to_vec()
    }

    /// Form-associated controls (`input`, `select`, `textarea`, `button`).
    pub fn is_control(&self, id: NodeId) -> bool {
        matches!(self.tag(id), Some("input" | "select" | "textarea" | "button"))
    }

    /// The form owning a control: explicit `form=` attribute, else the
    /// nearest ancestor form.
    pub fn form_owner(&self, id: NodeId) -> Option<NodeId> {
        if let Some(fid) = self.attr(id, "form") {
            if let Some(f) = self.element_by_id(fid) {
                if self.tag(f) == Some("form") {
                    return Some(f);
                }
            }
        }
        self.ancestors(id).find(|a| self.tag(*a) == Some("form"))
    }

    pub fn serialize(&self) -> String {
        super::serialize::serialize(self, Self::ROOT)
    }

    pub fn outer_html(&self, id: NodeId) -> String {
        super::serialize::outer_html(self, id)
    }
}

pub struct Descendants<'a> {
    doc: &'a Document,
    stack: Vec<NodeId>,
}

impl Iterator for Descendants<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        let n = self.stack.pop()?;
        let kids = &self.doc.nodes[n].children;
        self.stack.extend(kids.iter().rev().copied());
        Some(n)
    }
}
