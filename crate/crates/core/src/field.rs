//! Form-field configurations, the unit of the field pool.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Text,
    Email,
    Password,
    Number,
    Tel,
    Date,
    Textarea,
    Select,
    Checkbox,
    Radio,
    Hidden,
    Submit,
}

impl FieldKind {
    pub const ALL: [FieldKind; 12] = [
        FieldKind::Text,
        FieldKind::Email,
        FieldKind::Password,
        FieldKind::Number,
        FieldKind::Tel,
        FieldKind::Date,
        FieldKind::Textarea,
        FieldKind::Select,
        FieldKind::Checkbox,
        FieldKind::Radio,
        FieldKind::Hidden,
        FieldKind::Submit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Text => "text",
            FieldKind::Email => "email",
            FieldKind::Password => "password",
            FieldKind::Number => "number",
            FieldKind::Tel => "tel",
            FieldKind::Date => "date",
            FieldKind::Textarea => "textarea",
            FieldKind::Select => "select",
            FieldKind::Checkbox => "checkbox",
            FieldKind::Radio => "radio",
            FieldKind::Hidden => "hidden",
            FieldKind::Submit => "submit",
        }
    }

    pub fn parse(s: &str) -> Option<FieldKind> {
        FieldKind::ALL.iter().copied().find(|k| k.as_str() == s)
    }

    /// Kinds filled by typing text.
    pub fn is_text_like(self) -> bool {
        matches!(
            self,
            FieldKind::Text
                | FieldKind::Email
                | FieldKind::Password
                | FieldKind::Number
                | FieldKind::Tel
                | FieldKind::Date
                | FieldKind::Textarea
        )
    }

    pub fn has_options(self) -> bool {
        matches!(self, FieldKind::Select | FieldKind::Radio)
    }

    /// Kinds a test script is expected to fill.
    pub fn is_fillable(self) -> bool {
        !matches!(self, FieldKind::Hidden | FieldKind::Submit)
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectOption {
    pub value: String,
    pub label: String,
}

impl SelectOption {
    pub fn new(value: &str, label: &str) -> Self {
        Self {
            value: value.to_string(),
            label: label.to_string(),
        }
    }
}

/// Value constraint carried by a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Constraint {
    Pattern { pattern: String },
    Range { min: f64, max: f64 },
    MaxLength { maxlength: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placeholder: Option<String>,
    #[serde(default)]
    pub required: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<SelectOption>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<Constraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("field name is empty")]
    EmptyName,
    #[error("field `{0}`: id must be non-empty and contain no whitespace")]
    BadId(String),
    #[error("field `{0}`: {1} fields need at least one option")]
    MissingOptions(String, FieldKind),
    #[error("field `{0}`: {1} fields take no options")]
    UnexpectedOptions(String, FieldKind),
    #[error("field `{0}`: option values must be non-empty and distinct")]
    BadOptionValue(String),
    #[error("field `{0}`: submit fields are never required")]
    RequiredSubmit(String),
    #[error("field `{0}`: constraint not applicable to {1} fields")]
    ConstraintNotApplicable(String, FieldKind),
    #[error("field `{0}`: range min {1} exceeds max {2}")]
    InvertedRange(String, f64, f64),
    #[error("field `{0}`: maxlength must be at least 1")]
    ZeroMaxLength(String),
    #[error("field `{0}`: invalid pattern: {1}")]
    BadPattern(String, String),
}

impl FieldSpec {
    pub fn new(kind: FieldKind, name: &str) -> Self {
        Self {
            kind,
            name: name.to_string(),
            id: None,
            label: None,
            placeholder: None,
            required: false,
            options: Vec::new(),
            constraint: None,
            group: None,
        }
    }

    pub fn with_id(mut self, id: &str) -> Self {
        self.id = Some(id.to_string());
        self
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn with_placeholder(mut self, placeholder: &str) -> Self {
        self.placeholder = Some(placeholder.to_string());
        self
    }

    pub fn required(mut self, required: bool) -> Self {
        self.required = required;
        self
    }

    pub fn with_options(mut self, options: &[(&str, &str)]) -> Self {
        self.options = options.iter().map(|(v, l)| SelectOption::new(v, l)).collect();
        self
    }

    pub fn with_constraint(mut self, constraint: Constraint) -> Self {
        self.constraint = Some(constraint);
        self
    }

    pub fn with_group(mut self, group: &str) -> Self {
        self.group = Some(group.to_string());
        self
    }

    /// The HTML `name` the rendered control carries. Radio fields sharing a
    /// group render under the group key.
    pub fn control_name(&self) -> &str {
        match (&self.kind, &self.group) {
            (FieldKind::Radio, Some(g)) => g,
            _ => &self.name,
        }
    }

    /// Human-readable caption, falling back to a prettified name.
    pub fn caption(&self) -> String {
        match &self.label {
            Some(l) => l.clone(),
            None => prettify(&self.name),
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let name = || self.name.clone();
        if self.name.is_empty() {
            return Err(FieldError::EmptyName);
        }
        if let Some(id) = &self.id {
            if id.is_empty() || id.chars().any(char::is_whitespace) {
                return Err(FieldError::BadId(name()));
            }
        }
        if self.kind.has_options() {
            if self.options.is_empty() {
                return Err(FieldError::MissingOptions(name(), self.kind));
            }
            for (i, o) in self.options.iter().enumerate() {
                if o.value.is_empty() || self.options[..i].iter().any(|p| p.value == o.value) {
                    return Err(FieldError::BadOptionValue(name()));
                }
            }
        } else if !self.options.is_empty() {
            return Err(FieldError::UnexpectedOptions(name(), self.kind));
        }
        if self.kind == FieldKind::Submit && self.required {
            return Err(FieldError::RequiredSubmit(name()));
        }
        if let Some(c) = &self.constraint {
            let applicable = match c {
                Constraint::Range { .. } => self.kind == FieldKind::Number,
                Constraint::Pattern { .. } => matches!(
                    self.kind,
                    FieldKind::Text | FieldKind::Email | FieldKind::Password | FieldKind::Tel
                ),
                Constraint::MaxLength { .. } => matches!(
                    self.kind,
                    FieldKind::Text
                        | FieldKind::Email
                        | FieldKind::Password
                        | FieldKind::Tel
                        | FieldKind::Textarea
                ),
            };
            if !applicable {
                return Err(FieldError::ConstraintNotApplicable(name(), self.kind));
            }
            match c {
                Constraint::Range { min, max } => {
                    if !(min <= max) {
                        return Err(FieldError::InvertedRange(name(), *min, *max));
                    }
                }
                Constraint::MaxLength { maxlength } => {
                    if *maxlength == 0 {
                        return Err(FieldError::ZeroMaxLength(name()));
                    }
                }
                Constraint::Pattern { pattern } => {
                    crate::dummy::compile_pattern(pattern)
                        .map_err(|e| FieldError::BadPattern(name(), e))?;
                }
            }
        }
        Ok(())
    }
}

/// `first_name` -> `First name`.
pub fn prettify(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for (i, ch) in name.chars().enumerate() {
        let ch = if ch == '_' || ch == '-' { ' ' } else { ch };
        if i == 0 {
            out.extend(ch.to_uppercase());
        } else {
            out.push(ch);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_without_options_is_rejected() {
        let f = FieldSpec::new(FieldKind::Select, "country");
        assert!(matches!(f.validate(), Err(FieldError::MissingOptions(..))));
    }

    #[test]
    fn options_on_text_rejected() {
        let f = FieldSpec::new(FieldKind::Text, "q").with_options(&[("a", "A")]);
        assert!(matches!(f.validate(), Err(FieldError::UnexpectedOptions(..))));
    }

    #[test]
    fn submit_cannot_be_required() {
        let f = FieldSpec::new(FieldKind::Submit, "go").required(true);
        assert_eq!(f.validate(), Err(FieldError::RequiredSubmit("go".into())));
        let f = FieldSpec::new(FieldKind::Submit, "go")
            .with_constraint(Constraint::MaxLength { maxlength: 3 });
        assert!(f.validate().is_err());
    }

    #[test]
    fn inverted_range_rejected() {
        let f = FieldSpec::new(FieldKind::Number, "age")
            .with_constraint(Constraint::Range { min: 5.0, max: 1.0 });
        assert!(matches!(f.validate(), Err(FieldError::InvertedRange(..))));
    }

    #[test]
    fn whitespace_id_rejected() {
        let f = FieldSpec::new(FieldKind::Text, "q").with_id("a b");
        assert!(matches!(f.validate(), Err(FieldError::BadId(_))));
    }

    #[test]
    fn bad_pattern_rejected() {
        let f = FieldSpec::new(FieldKind::Text, "q").with_constraint(Constraint::Pattern {
            pattern: "(".into(),
        });
        assert!(matches!(f.validate(), Err(FieldError::BadPattern(..))));
    }

    #[test]
    fn constraint_json_shapes() {
        let c: Constraint = serde_json::from_str(r#"{"min": 1, "max": 9}"#).unwrap();
        assert_eq!(c, Constraint::Range { min: 1.0, max: 9.0 });
        let c: Constraint = serde_json::from_str(r#"{"maxlength": 8}"#).unwrap();
        assert_eq!(c, Constraint::MaxLength { maxlength: 8 });
        let c: Constraint = serde_json::from_str(r#"{"pattern": "^\\d+$"}"#).unwrap();
        assert!(matches!(c, Constraint::Pattern { .. }));
    }

    #[test]
    fn radio_group_controls_share_name() {
        let f = FieldSpec::new(FieldKind::Radio, "color_a")
            .with_options(&[("red", "Red")])
            .with_group("color");
        assert_eq!(f.control_name(), "color");
        assert_eq!(prettify("first_name"), "First name");
    }
}
