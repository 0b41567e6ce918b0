//! Input coverage: which fillable fields ended up correctly filled.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dummy;
use crate::field::FieldKind;
use crate::html::render::{FormSpec, LogicalField};

/// Which logical fields form the coverage denominator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageScope {
    /// Every non-hidden, non-submit field.
    #[default]
    AllFillable,
    /// Only required fields.
    RequiredOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub denominator_fields: Vec<String>,
    pub covered_fields: Vec<String>,
    pub coverage: f64,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.covered_fields.len() == self.denominator_fields.len()
    }

    pub fn uncovered(&self) -> Vec<&str> {
        self.denominator_fields
            .iter()
            .filter(|f| !self.covered_fields.contains(f))
            .map(String::as_str)
            .collect()
    }
}

/// Final state of one logical field as read back from the browser.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "value", rename_all = "snake_case")]
pub enum Observation {
    /// Current value of a text-like control.
    Text(String),
    /// Value of the selected option of a select, if any option is selected.
    Selected(Option<String>),
    Checked(bool),
    /// Values of every checked member of a radio group.
    RadioChecked(Vec<String>),
}

/// Observations keyed by logical field name. Missing entries count as
/// untouched.
pub type Observations = BTreeMap<String, Observation>;

pub fn denominator(spec: &FormSpec, scope: CoverageScope) -> Vec<LogicalField> {
    spec.fillable_fields()
        .into_iter()
        .filter(|lf| scope == CoverageScope::AllFillable || lf.required)
        .collect()
}

/// Whether one logical field counts as correctly filled.
pub fn is_covered(spec: &FormSpec, lf: &LogicalField, obs: Option<&Observation>) -> bool {
    let head = &spec.fields[lf.members[0]];
    match (lf.kind, obs) {
        (FieldKind::Select, Some(Observation::Selected(Some(v)))) => {
            !v.is_empty() && lf.options.iter().any(|o| &o.value == v)
        }
        (FieldKind::Checkbox, Some(Observation::Checked(c))) => *c,
        (FieldKind::Radio, Some(Observation::RadioChecked(vals))) => vals.len() == 1,
        (k, Some(Observation::Text(v))) if k.is_text_like() => dummy::text_value_valid(head, v),
        _ => false,
    }
}

pub fn compute(spec: &FormSpec, obs: &Observations, scope: CoverageScope) -> CoverageReport {
    let denom = denominator(spec, scope);
    let covered: Vec<String> = denom
        .iter()
        .filter(|lf| is_covered(spec, lf, obs.get(&lf.name)))
        .map(|lf| lf.name.clone())
        .collect();
    let coverage = if denom.is_empty() {
        1.0
    } else {
        covered.len() as f64 / denom.len() as f64
    };
    CoverageReport {
        denominator_fields: denom.into_iter().map(|lf| lf.name).collect(),
        covered_fields: covered,
        coverage,
    }
}

/// Observations from an `application/x-www-form-urlencoded` submission
/// body (already decoded into pairs). Later pairs win for single-valued
/// controls.
pub fn observe_submission(spec: &FormSpec, pairs: &[(String, String)]) -> Observations {
    let mut out = Observations::new();
    for lf in spec.fillable_fields() {
        let values: Vec<&String> = pairs.iter().filter(|(k, _)| *k == lf.name).map(|(_, v)| v).collect();
        let obs = match lf.kind {
            FieldKind::Select => Observation::Selected(values.last().map(|v| (*v).clone())),
            FieldKind::Checkbox => Observation::Checked(!values.is_empty()),
            FieldKind::Radio => Observation::RadioChecked(values.into_iter().cloned().collect()),
            _ => Observation::Text(values.last().map(|v| (*v).clone()).unwrap_or_default()),
        };
        out.insert(lf.name.clone(), obs);
    }
    out
}

/// Decodes an urlencoded body into pairs (`+` as space, `%XX` escapes,
/// invalid UTF-8 replaced).
pub fn parse_urlencoded(body: &[u8]) -> Vec<(String, String)> {
    let decode = |s: &[u8]| {
        let mut out = Vec::with_capacity(s.len());
        let mut i = 0;
        while i < s.len() {
            match s[i] {
                b'+' => out.push(b' '),
                b'%' if i + 2 < s.len() => {
                    let hex = core::str::from_utf8(&s[i + 1..i + 3]).ok().and_then(|h| u8::from_str_radix(h, 16).ok());
                    match hex {
                        Some(b) => {
                            out.push(b);
                            i += 2;
                        }
                        None => out.push(b'%'),
                    }
                }
                b => out.push(b),
            }
            i += 1;
        }
        String::from_utf8_lossy(&out).into_owned()
    };
    body.split(|b| *b == b'&')
        .filter(|p| !p.is_empty())
        .map(|p| match p.iter().position(|b| *b == b'=') {
            Some(eq) => (decode(&p[..eq]), decode(&p[eq + 1..])),
            None => (decode(p), String::new()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Constraint, FieldSpec};
    use alloc::string::ToString;

    fn spec() -> FormSpec {
        FormSpec::new(
            "f",
            alloc::vec![
                FieldSpec::new(FieldKind::Text, "zip").with_constraint(Constraint::Pattern { pattern: r"\d+".into() }),
                FieldSpec::new(FieldKind::Select, "s").with_options(&[("a", "A")]).required(true),
                FieldSpec::new(FieldKind::Checkbox, "agree"),
                FieldSpec::new(FieldKind::Radio, "c").with_options(&[("r", "R"), ("b", "B")]),
                FieldSpec::new(FieldKind::Hidden, "tok"),
                FieldSpec::new(FieldKind::Submit, "go"),
            ],
        )
    }

    #[test]
    fn rules() {
        let mut obs = Observations::new();
        obs.insert("zip".into(), Observation::Text("abc".into()));
        obs.insert("s".into(), Observation::Selected(Some("a".into())));
        obs.insert("agree".into(), Observation::Checked(true));
        obs.insert("c".into(), Observation::RadioChecked(alloc::vec!["r".into(), "b".into()]));
        let r = compute(&spec(), &obs, CoverageScope::AllFillable);
        assert_eq!(r.denominator_fields, ["zip", "s", "agree", "c"]);
        assert_eq!(r.covered_fields, ["s", "agree"]);
        assert_eq!(r.coverage, 0.5);
        let r = compute(&spec(), &obs, CoverageScope::RequiredOnly);
        assert_eq!(r.coverage, 1.0);
    }

    #[test]
    fn placeholder_option_is_not_coverage() {
        let mut obs = Observations::new();
        obs.insert("s".into(), Observation::Selected(Some(String::new())));
        assert!(!compute(&spec(), &obs, CoverageScope::AllFillable).covered_fields.contains(&"s".to_string()));
    }

    #[test]
    fn urlencoded() {
        let pairs = parse_urlencoded(b"zip=12+3&s=a&c=r&msg=a%26b%zz&flag");
        assert_eq!(pairs[0], ("zip".into(), "12 3".into()));
        assert_eq!(pairs[3], ("msg".into(), "a&b%zz".into()));
        assert_eq!(pairs[4], ("flag".into(), "".into()));
        let obs = observe_submission(&spec(), &pairs);
        assert_eq!(obs["c"], Observation::RadioChecked(alloc::vec!["r".into()]));
        assert_eq!(obs["agree"], Observation::Checked(false));
    }
}
