//! Locators (strategy + value) and their resolution against a DOM snapshot.

pub mod css;
pub mod xpath;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::html::dom::{Document, NodeId};
use css::{ElementState, SelectorList};
use xpath::XPath;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Id,
    Name,
    Css,
    Xpath,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Id => "id",
            Strategy::Name => "name",
            Strategy::Css => "css",
            Strategy::Xpath => "xpath",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Locator {
    pub strategy: Strategy,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LocateError {
    #[error(transparent)]
    Css(#[from] css::SelectorError),
    #[error(transparent)]
    XPath(#[from] xpath::XPathError),
}

impl Locator {
    pub fn new(strategy: Strategy, value: &str) -> Self {
        Self {
            strategy,
            value: value.to_string(),
        }
    }

    pub fn id(value: &str) -> Self {
        Self::new(Strategy::Id, value)
    }

    pub fn name(value: &str) -> Self {
        Self::new(Strategy::Name, value)
    }

    pub fn css(value: &str) -> Self {
        Self::new(Strategy::Css, value)
    }

    pub fn xpath(value: &str) -> Self {
        Self::new(Strategy::Xpath, value)
    }

    /// The W3C WebDriver `(using, value)` pair. `id` and `name` have no
    /// W3C strategy and map to attribute selectors, as client libraries do.
    pub fn to_webdriver(&self) -> (&'static str, String) {
        match self.strategy {
            Strategy::Id => ("css selector", format!("[id={}]", css::quote(&self.value))),
            Strategy::Name => ("css selector", format!("[name={}]", css::quote(&self.value))),
            Strategy::Css => ("css selector", self.value.clone()),
            Strategy::Xpath => ("xpath", self.value.clone()),
        }
    }

    /// All matching elements in document order, searching below `scope`
    /// (the whole document when `None`).
    pub fn resolve_all(
        &self,
        doc: &Document,
        scope: Option<NodeId>,
        state: &dyn ElementState,
    ) -> Result<Vec<NodeId>, LocateError> {
        let (using, value) = self.to_webdriver();
        resolve_webdriver(doc, using, &value, scope, state)
    }

    /// First match, as `find_element` returns it.
    pub fn resolve(&self, doc: &Document, state: &dyn ElementState) -> Result<Option<NodeId>, LocateError> {
        Ok(self.resolve_all(doc, None, state)?.into_iter().next())
    }
}

impl fmt::Display for Locator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.strategy, self.value)
    }
}

/// Resolves a W3C `(using, value)` pair. Supports `css selector`, `xpath`,
/// `tag name`, `link text` and `partial link text`.
pub fn resolve_webdriver(
    doc: &Document,
    using: &str,
    value: &str,
    scope: Option<NodeId>,
    state: &dyn ElementState,
) -> Result<Vec<NodeId>, LocateError> {
    match using {
        "css selector" => Ok(SelectorList::parse(value)?.query_all(doc, scope, state)),
        "xpath" => Ok(XPath::parse(value)?.select_elements(doc, scope)?),
        "tag name" => {
            let tag = value.to_ascii_lowercase();
            let root = scope.unwrap_or(Document::ROOT);
            Ok(doc.descendant_elements(root).filter(|n| doc.tag(*n) == Some(tag.as_str())).collect())
        }
        "link text" | "partial link text" => {
            let root = scope.unwrap_or(Document::ROOT);
            let partial = using == "partial link text";
            Ok(doc
                .descendant_elements(root)
                .filter(|n| doc.tag(*n) == Some("a"))
                .filter(|n| {
                    let text = doc.text_content(*n);
                    let text = text.trim();
                    if partial {
                        text.contains(value)
                    } else {
                        text == value
                    }
                })
                .collect())
        }
        other => Err(LocateError::Css(css::SelectorError {
            selector: value.to_string(),
            reason: format!("unsupported locator strategy `{other}`"),
        })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use css::MarkupState;

    #[test]
    fn strategies_resolve() {
        let doc = Document::parse(r#"<div id="w"><input id="e" name="email"></div><input name="email">"#);
        let st = MarkupState;
        assert_eq!(Locator::id("e").resolve_all(&doc, None, &st).unwrap().len(), 1);
        assert_eq!(Locator::name("email").resolve_all(&doc, None, &st).unwrap().len(), 2);
        assert_eq!(Locator::css("#w > input").resolve_all(&doc, None, &st).unwrap().len(), 1);
        assert_eq!(Locator::xpath("//div[@id='w']").resolve(&doc, &st).unwrap(), doc.element_by_id("w"));
        assert!(Locator::css("#").resolve(&doc, &st).is_err());
    }

    #[test]
    fn serde_shape() {
        let l = Locator::id("mail");
        assert_eq!(serde_json::to_string(&l).unwrap(), r#"{"strategy":"id","value":"mail"}"#);
    }
}
