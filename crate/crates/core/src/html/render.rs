//! Form assembly: ground-truth [`FormSpec`] to styled HTML text.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::serialize::{escape_attr, escape_text};
use crate::field::{Constraint, FieldError, FieldKind, FieldSpec, SelectOption};

pub const CLASSIC: &str = "classic";
pub const WRAPPER_HEAVY: &str = "wrapper-heavy";
pub const STYLES: [&str; 2] = [CLASSIC, WRAPPER_HEAVY];

/// Label of the empty first option rendered in every select.
pub const SELECT_PLACEHOLDER: &str = "Choose...";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    pub form_id: String,
    pub fields: Vec<FieldSpec>,
    pub action: String,
    pub submit_label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HtmlDocument {
    pub text: String,
    pub spec: FormSpec,
    pub style_template_id: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("unknown style template `{0}` (known: classic, wrapper-heavy)")]
    UnknownStyle(String),
    #[error("form has no fields")]
    NoFields,
    #[error("form id must be non-empty and contain no whitespace")]
    BadFormId,
    #[error("form has {0} submit fields; at most one is allowed")]
    MultipleSubmits(usize),
    #[error("duplicate field name `{0}`")]
    DuplicateName(String),
    #[error("duplicate element id `{0}`")]
    DuplicateId(String),
    #[error("radio group `{0}` mixes required and optional members")]
    MixedGroup(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// One coverage unit: a single control, or a whole radio group.
#[derive(Clone, Debug, PartialEq)]
pub struct LogicalField {
    /// The rendered control name (the group key for grouped radios).
    pub name: String,
    pub kind: FieldKind,
    pub required: bool,
    /// Indices into `FormSpec::fields` of the specs merged into this unit.
    pub members: Vec<usize>,
    /// Options in render order (radio options merged across members).
    pub options: Vec<SelectOption>,
}

impl LogicalField {
    pub fn is_fillable(&self) -> bool {
        self.kind.is_fillable()
    }
}

impl FormSpec {
    pub fn new(form_id: &str, fields: Vec<FieldSpec>) -> Self {
        Self {
            form_id: form_id.to_string(),
            fields,
            action: "submit".to_string(),
            submit_label: "Submit".to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if self.form_id.is_empty() || self.form_id.chars().any(char::is_whitespace) {
            return Err(RenderError::BadFormId);
        }
        if self.fields.is_empty() {
            return Err(RenderError::NoFields);
        }
        let submits = self.fields.iter().filter(|f| f.kind == FieldKind::Submit).count();
        if submits > 1 {
            return Err(RenderError::MultipleSubmits(submits));
        }
        let mut names: Vec<&str> = Vec::new();
        let mut ids: Vec<String> = alloc::vec![self.form_id.clone()];
        for f in &self.fields {
            f.validate()?;
            if names.contains(&f.name.as_str()) {
                return Err(RenderError::DuplicateName(f.name.clone()));
            }
            names.push(&f.name);
        }
        for lf in self.logical_fields() {
            if lf.kind == FieldKind::Radio {
                let first = self.fields[lf.members[0]].required;
                if lf.members.iter().any(|m| self.fields[*m].required != first) {
                    return Err(RenderError::MixedGroup(lf.name));
                }
            }
        }
        for id in self.element_ids() {
            if ids.contains(&id) {
                return Err(RenderError::DuplicateId(id));
            }
            ids.push(id);
        }
        Ok(())
    }

    /// Every element id the renderer emits for fields (excluding the form
    /// and wrapper ids).
    fn element_ids(&self) -> Vec<String> {
        let mut out = Vec::new();
        for lf in self.logical_fields() {
            let head = &self.fields[lf.members[0]];
            if let Some(id) = &head.id {
                out.push(id.clone());
            }
            if lf.kind == FieldKind::Radio {
                for i in 0..lf.options.len() {
                    out.push(radio_member_id(&lf.name, i));
                }
            }
        }
        out
    }

    /// Coverage units in document order. Radio fields sharing a group key
    /// merge into one unit positioned at the first member.
    pub fn logical_fields(&self) -> Vec<LogicalField> {
        let mut out: Vec<LogicalField> = Vec::new();
        for (i, f) in self.fields.iter().enumerate() {
            let name = f.control_name().to_string();
            if f.kind == FieldKind::Radio {
                if let Some(existing) = out.iter_mut().find(|l| l.kind == FieldKind::Radio && l.name == name) {
                    existing.members.push(i);
                    existing.required |= f.required;
                    for o in &f.options {
                        if !existing.options.iter().any(|e| e.value == o.value) {
                            existing.options.push(o.clone());
                        }
                    }
                    continue;
                }
            }
            out.push(LogicalField {
                name,
                kind: f.kind,
                required: f.required,
                members: alloc::vec![i],
                options: f.options.clone(),
            });
        }
        out
    }

    /// Logical fields a script is expected to fill.
    pub fn fillable_fields(&self) -> Vec<LogicalField> {
        self.logical_fields().into_iter().filter(|l| l.is_fillable()).collect()
    }

    pub fn logical_field(&self, name: &str) -> Option<LogicalField> {
        self.logical_fields().into_iter().find(|l| l.name == name)
    }

    pub fn has_submit_field(&self) -> bool {
        self.fields.iter().any(|f| f.kind == FieldKind::Submit)
    }
}

/// Id of the `i`-th (0-based) radio input of group `control`.
pub fn radio_member_id(control: &str, i: usize) -> String {
    format!("{}--{}", control.replace('_', "-"), i + 1)
}

/// Id of the wrapper element around a field in the wrapper-heavy style.
pub fn wrapper_id(control: &str) -> String {
    format!("field-{control}")
}

pub fn render_form(spec: &FormSpec, style_template_id: &str) -> Result<HtmlDocument, RenderError> {
    if !STYLES.contains(&style_template_id) {
        return Err(RenderError::UnknownStyle(style_template_id.to_string()));
    }
    spec.validate()?;
    let wrapped = style_template_id == WRAPPER_HEAVY;
    let mut body = String::new();
    for lf in spec.logical_fields() {
        let head = &spec.fields[lf.members[0]];
        let mut inner = String::new();
        render_field(&lf, head, wrapped, &mut inner);
        if head.kind == FieldKind::Hidden {
            body.push_str(&inner);
            continue;
        }
        if wrapped {
            body.push_str("<div class=\"fb-wrap\" id=\"");
            escape_attr(&wrapper_id(&lf.name), &mut body);
            body.push_str("\">\n<div class=\"fb-field\">\n");
            body.push_str(&inner);
            body.push_str("</div>\n</div>\n");
        } else {
            body.push_str("<div class=\"form-row\">\n");
            body.push_str(&inner);
            body.push_str("</div>\n");
        }
    }
    if !spec.has_submit_field() {
        body.push_str("<div class=\"form-actions\">\n<button type=\"submit\">");
        escape_text(&spec.submit_label, &mut body);
        body.push_str("</button>\n</div>\n");
    }
    let mut text = String::with_capacity(body.len() + 2048);
    text.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>");
    escape_text(&spec.form_id, &mut text);
    text.push_str("</title>\n<style>\n");
    text.push_str(BASE_CSS);
    if wrapped {
        text.push_str(WRAPPER_CSS);
    }
    text.push_str("</style>\n</head>\n<body>\n<main class=\"fb-page\">\n<form id=\"");
    escape_attr(&spec.form_id, &mut text);
    text.push_str("\" action=\"");
    escape_attr(&spec.action, &mut text);
    text.push_str("\" method=\"post\">\n");
    text.push_str(&body);
    text.push_str("</form>\n</main>\n</body>\n</html>\n");
    Ok(HtmlDocument {
        text,
        spec: spec.clone(),
        style_template_id: style_template_id.to_string(),
    })
}

fn attr(out: &mut String, name: &str, value: &str) {
    out.push(' ');
    out.push_str(name);
    out.push_str("=\"");
    escape_attr(value, out);
    out.push('"');
}

fn label(out: &mut String, f: &FieldSpec, for_id: Option<&str>) {
    out.push_str("<label");
    if let Some(id) = for_id {
        attr(out, "for", id);
    }
    out.push('>');
    escape_text(&f.caption(), out);
    if f.required {
        out.push_str(" <span class=\"req\">*</span>");
    }
    out.push_str("</label>\n");
}

fn common_attrs(out: &mut String, f: &FieldSpec) {
    attr(out, "name", &f.name);
    if let Some(id) = &f.id {
        attr(out, "id", id);
    }
}

fn constraint_attrs(out: &mut String, f: &FieldSpec) {
    match &f.constraint {
        Some(Constraint::Pattern { pattern }) => attr(out, "pattern", pattern),
        Some(Constraint::Range { min, max }) => {
            attr(out, "min", &format_num(*min));
            attr(out, "max", &format_num(*max));
        }
        Some(Constraint::MaxLength { maxlength }) => attr(out, "maxlength", &maxlength.to_string()),
        None => {}
    }
}

/// Shortest decimal rendering of a finite float (`3` rather than `3.0`).
pub fn format_num(x: f64) -> String {
    if x == (x as i64) as f64 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn render_field(lf: &LogicalField, f: &FieldSpec, _wrapped: bool, out: &mut String) {
    match f.kind {
        FieldKind::Text
        | FieldKind::Email
        | FieldKind::Password
        | FieldKind::Number
        | FieldKind::Tel
        | FieldKind::Date => {
            label(out, f, f.id.as_deref());
            out.push_str("<input");
            attr(out, "type", f.kind.as_str());
            common_attrs(out, f);
            if let Some(p) = &f.placeholder {
                attr(out, "placeholder", p);
            }
            if f.kind == FieldKind::Number {
                attr(out, "step", "any");
            }
            constraint_attrs(out, f);
            if f.required {
                out.push_str(" required");
            }
            out.push_str(">\n");
        }
        FieldKind::Textarea => {
            label(out, f, f.id.as_deref());
            out.push_str("<textarea");
            common_attrs(out, f);
            if let Some(p) = &f.placeholder {
                attr(out, "placeholder", p);
            }
            attr(out, "rows", "4");
            constraint_attrs(out, f);
            if f.required {
                out.push_str(" required");
            }
            out.push_str("></textarea>\n");
        }
        FieldKind::Select => {
            label(out, f, f.id.as_deref());
            out.push_str("<select");
            common_attrs(out, f);
            if f.required {
                out.push_str(" required");
            }
            out.push_str(">\n<option value=\"\">");
            out.push_str(SELECT_PLACEHOLDER);
            out.push_str("</option>\n");
            for o in &f.options {
                out.push_str("<option");
                attr(out, "value", &o.value);
                out.push('>');
                escape_text(&o.label, out);
                out.push_str("</option>\n");
            }
            out.push_str("</select>\n");
        }
        FieldKind::Checkbox => {
            out.push_str("<div class=\"fb-check\">\n<input type=\"checkbox\"");
            common_attrs(out, f);
            attr(out, "value", "yes");
            if f.required {
                out.push_str(" required");
            }
            out.push_str(">\n");
            label(out, f, f.id.as_deref());
            out.push_str("</div>\n");
        }
        FieldKind::Radio => {
            out.push_str("<fieldset class=\"fb-radio\"");
            if let Some(id) = &f.id {
                attr(out, "id", id);
            }
            out.push_str(">\n<legend>");
            let caption = if f.group.is_some() {
                crate::field::prettify(&lf.name)
            } else {
                f.caption()
            };
            escape_text(&caption, out);
            if lf.required {
                out.push_str(" <span class=\"req\">*</span>");
            }
            out.push_str("</legend>\n");
            for (i, o) in lf.options.iter().enumerate() {
                let id = radio_member_id(&lf.name, i);
                out.push_str("<span class=\"fb-option\"><input type=\"radio\"");
                attr(out, "name", &lf.name);
                attr(out, "id", &id);
                attr(out, "value", &o.value);
                if lf.required {
                    out.push_str(" required");
                }
                out.push_str("><label");
                attr(out, "for", &id);
                out.push('>');
                escape_text(&o.label, out);
                out.push_str("</label></span>\n");
            }
            out.push_str("</fieldset>\n");
        }
        FieldKind::Hidden => {
            out.push_str("<input type=\"hidden\"");
            common_attrs(out, f);
            attr(out, "value", &format!("{}-token", f.name));
            out.push_str(">\n");
        }
        FieldKind::Submit => {
            out.push_str("<button type=\"submit\"");
            common_attrs(out, f);
            out.push('>');
            escape_text(&f.caption(), out);
            out.push_str("</button>\n");
        }
    }
}

const BASE_CSS: &str = "body { margin: 0; background: #f3f4f6; font-family: Helvetica, Arial, sans-serif; color: #1f2933; }
.fb-page { max-width: 640px; margin: 32px auto; padding: 24px 32px; background: #ffffff; border: 1px solid #d9dee4; border-radius: 8px; }
form .form-row, form .fb-wrap { margin-bottom: 16px; }
label { display: block; margin-bottom: 4px; font-weight: 600; }
.req { color: #c0392b; }
input[type=text], input[type=email], input[type=password], input[type=number], input[type=tel], input[type=date], textarea, select { box-sizing: border-box; width: 100%; padding: 8px 10px; border: 1px solid #b8c2cc; border-radius: 4px; font-size: 15px; }
fieldset.fb-radio { margin: 0; padding: 8px 12px; border: 1px solid #d9dee4; border-radius: 4px; }
.fb-option { display: inline-block; margin-right: 16px; }
.fb-option label, .fb-check label { display: inline; font-weight: normal; margin-left: 4px; }
button[type=submit] { padding: 10px 20px; border: 0; border-radius: 4px; background: #2563eb; color: #ffffff; font-size: 15px; }
";

const WRAPPER_CSS: &str = ".fb-wrap { position: relative; padding: 6px 55% 6px 6px; background: #fafbfc; border: 1px dashed #d9dee4; }
.fb-field { padding: 2px; }
";
