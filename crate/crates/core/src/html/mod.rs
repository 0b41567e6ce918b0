//! HTML: the form renderer, a lenient parser and DOM for snapshots, and the
//! computed-visibility model used to decide whether a control is
//! interactable.

pub mod dom;
pub mod parse;
pub mod render;
pub mod serialize;
pub mod style;

pub use dom::{Document, Element, NodeData, NodeId};
