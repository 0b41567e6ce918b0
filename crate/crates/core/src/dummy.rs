//! Dummy-data generation and the value-validity rules shared by scenario
//! validation and coverage.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use regex_automata::meta::Regex;
use regex_syntax::hir::{Class, Hir, HirKind};

use crate::field::{Constraint, FieldKind, FieldSpec};
use crate::html::render::format_num;
use crate::num::round_half_up;
use crate::rng::{derive_seed, SeededRng};

/// Longest value the pattern search will produce.
pub const PATTERN_LENGTH_BUDGET: usize = 128;
/// Generation attempts before a pattern is declared unsatisfiable.
pub const PATTERN_ATTEMPTS: u64 = 64;

/// An HTML `pattern` attribute compiled with whole-value anchoring.
#[derive(Clone, Debug)]
pub struct Pattern {
    source: String,
    regex: Regex,
    hir: Hir,
}

pub fn compile_pattern(pattern: &str) -> Result<Pattern, String> {
    let wrapped = format!("^(?:{pattern})$");
    let hir = regex_syntax::Parser::new()
        .parse(&wrapped)
        .map_err(|e| e.to_string())?;
    let regex = Regex::new(&wrapped).map_err(|e| e.to_string())?;
    Ok(Pattern {
        source: pattern.to_string(),
        regex,
        hir,
    })
}

impl Pattern {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn is_match(&self, value: &str) -> bool {
        self.regex.is_match(value)
    }

    /// A non-empty matching string, searched deterministically under `seed`.
    /// Attempt 0 takes the shortest choices; later attempts randomize.
    pub fn generate(&self, seed: u64) -> Option<String> {
        for attempt in 0..PATTERN_ATTEMPTS {
            let mut rng = SeededRng::new(derive_seed(seed, attempt));
            let mut out = String::new();
            if !emit(&self.hir, attempt == 0, &mut rng, &mut out) {
                continue;
            }
            if !out.is_empty() && out.len() <= PATTERN_LENGTH_BUDGET && self.is_match(&out) {
                return Some(out);
            }
        }
        None
    }
}

fn emit(hir: &Hir, minimal: bool, rng: &mut SeededRng, out: &mut String) -> bool {
    if out.len() > PATTERN_LENGTH_BUDGET {
        return false;
    }
    match hir.kind() {
        HirKind::Empty | HirKind::Look(_) => true,
        HirKind::Literal(lit) => match core::str::from_utf8(&lit.0) {
            Ok(s) => {
                out.push_str(s);
                true
            }
            Err(_) => false,
        },
        HirKind::Class(Class::Unicode(cls)) => {
            let ranges: Vec<(char, char)> = cls.ranges().iter().map(|r| (r.start(), r.end())).collect();
            match pick_char(&ranges, minimal, rng) {
                Some(c) => {
                    out.push(c);
                    true
                }
                None => false,
            }
        }
        HirKind::Class(Class::Bytes(cls)) => {
            let ranges: Vec<(char, char)> = cls
                .ranges()
                .iter()
                .filter(|r| r.start() < 0x80)
                .map(|r| (r.start() as char, r.end().min(0x7f) as char))
                .collect();
            match pick_char(&ranges, minimal, rng) {
                Some(c) => {
                    out.push(c);
                    true
                }
                None => false,
            }
        }
        HirKind::Repetition(rep) => {
            let min = rep.min as usize;
            let max = rep.max.map(|m| m as usize).unwrap_or(usize::MAX);
            let n = if minimal {
                min.max(1).min(max)
            } else {
                let hi = max.min(min + 4);
                min + rng.below((hi - min + 1) as u64) as usize
            };
            (0..n).all(|_| emit(&rep.sub, minimal, rng, out))
        }
        HirKind::Capture(cap) => emit(&cap.sub, minimal, rng, out),
        HirKind::Concat(parts) => parts.iter().all(|p| emit(p, minimal, rng, out)),
        HirKind::Alternation(alts) => {
            let i = if minimal { 0 } else { rng.index(alts.len()) };
            emit(&alts[i], minimal, rng, out)
        }
    }
}

/// Prefers ASCII alphanumerics, then any printable ASCII, then anything.
fn pick_char(ranges: &[(char, char)], minimal: bool, rng: &mut SeededRng) -> Option<char> {
    let contains = |c: char| ranges.iter().any(|(a, b)| *a <= c && c <= *b);
    let preferred: Vec<char> = ('0'..='9')
        .chain('a'..='z')
        .chain('A'..='Z')
        .filter(|c| contains(*c))
        .collect();
    if !preferred.is_empty() {
        return Some(if minimal { preferred[0] } else { *rng.pick(&preferred) });
    }
    let printable: Vec<char> = (' '..='~').filter(|c| contains(*c)).collect();
    if !printable.is_empty() {
        return Some(if minimal { printable[0] } else { *rng.pick(&printable) });
    }
    ranges.first().map(|(a, _)| *a)
}

/// HTML "valid e-mail address" (the `type=email` grammar).
pub fn is_valid_email(s: &str) -> bool {
    let Some((local, domain)) = s.split_once('@') else { return false };
    if local.is_empty() || domain.is_empty() {
        return false;
    }
    let local_ok = local
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || ".!#$%&'*+/=?^_`{|}~-".contains(c));
    let label_ok = |l: &str| {
        let b = l.as_bytes();
        !b.is_empty()
            && b.len() <= 63
            && b.iter().all(|c| c.is_ascii_alphanumeric() || *c == b'-')
            && b[0] != b'-'
            && b[b.len() - 1] != b'-'
    };
    local_ok && domain.split('.').all(label_ok)
}

/// HTML "valid floating-point number".
pub fn parse_html_number(s: &str) -> Option<f64> {
    let b = s.as_bytes();
    let mut i = 0;
    if b.first() == Some(&b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i > int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == frac_start {
            return None;
        }
        digits = true;
    }
    if !digits {
        return None;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return None;
        }
    }
    if i != b.len() {
        return None;
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn is_leap(y: u32) -> bool {
    (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
}

pub fn days_in_month(y: u32, m: u32) -> u32 {
    match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(y) => 29,
        2 => 28,
        _ => 0,
    }
}

fn valid_ymd(y: u32, m: u32, d: u32) -> Option<(u32, u32, u32)> {
    (y >= 1 && (1..=12).contains(&m) && d >= 1 && d <= days_in_month(y, m)).then_some((y, m, d))
}

fn digits(s: &str, n: usize) -> Option<u32> {
    (s.len() == n && s.bytes().all(|b| b.is_ascii_digit())).then(|| s.parse().ok())?
}

/// Parses `mm/dd/yyyy`, requiring a real calendar date.
pub fn parse_us_date(s: &str) -> Option<(u32, u32, u32)> {
    let mut it = s.split('/');
    let (m, d, y) = (it.next()?, it.next()?, it.next()?);
    if it.next().is_some() {
        return None;
    }
    valid_ymd(digits(y, 4)?, digits(m, 2)?, digits(d, 2)?)
}

/// Parses `yyyy-mm-dd` (the value a date input holds).
pub fn parse_iso_date(s: &str) -> Option<(u32, u32, u32)> {
    let mut it = s.split('-');
    let (y, m, d) = (it.next()?, it.next()?, it.next()?);
    if it.next().is_some() {
        return None;
    }
    valid_ymd(digits(y, 4)?, digits(m, 2)?, digits(d, 2)?)
}

pub fn us_to_iso(s: &str) -> Option<String> {
    let (y, m, d) = parse_us_date(s)?;
    Some(format!("{y:04}-{m:02}-{d:02}"))
}

/// Whether `value` is acceptable for the field's kind, ignoring the
/// constraint. Empty values are never acceptable.
pub fn kind_accepts(kind: FieldKind, value: &str) -> bool {
    if value.is_empty() {
        return false;
    }
    match kind {
        FieldKind::Email => is_valid_email(value),
        FieldKind::Number => parse_html_number(value).is_some(),
        FieldKind::Date => parse_iso_date(value).is_some() || parse_us_date(value).is_some(),
        _ => true,
    }
}

/// Whether `value` satisfies the field's constraint (vacuously true when
/// there is none).
pub fn constraint_accepts(field: &FieldSpec, value: &str) -> bool {
    match &field.constraint {
        None => true,
        Some(Constraint::Pattern { pattern }) => compile_pattern(pattern).is_ok_and(|p| p.is_match(value)),
        Some(Constraint::Range { min, max }) => {
            parse_html_number(value).is_some_and(|x| *min <= x && x <= *max)
        }
        Some(Constraint::MaxLength { maxlength }) => value.encode_utf16().count() <= *maxlength as usize,
    }
}

/// Text-like coverage rule: non-empty, kind-valid, constraint-satisfying.
pub fn text_value_valid(field: &FieldSpec, value: &str) -> bool {
    kind_accepts(field.kind, value) && constraint_accepts(field, value)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DummyError {
    #[error("field `{0}`: no value satisfying pattern `{1}` within {PATTERN_LENGTH_BUDGET} characters")]
    UnsatisfiablePattern(String, String),
    #[error("field `{0}`: no value of kind {1} satisfies the constraint")]
    Unsatisfiable(String, FieldKind),
    #[error("field `{0}`: {1} fields take no dummy data")]
    NotFillable(String, FieldKind),
}

fn text_for(field: &FieldSpec) -> String {
    let key = field.name.to_ascii_lowercase();
    let table: [(&[&str], &str); 14] = [
        (&["first"], "Jane"),
        (&["last", "surname"], "Doe"),
        (&["name"], "Jane Doe"),
        (&["city", "town"], "Springfield"),
        (&["zip", "postal", "postcode"], "12345"),
        (&["country"], "United States"),
        (&["state", "province", "region"], "Oregon"),
        (&["street", "address"], "742 Evergreen Terrace"),
        (&["company", "organization", "employer"], "Acme Corp"),
        (&["title", "job", "position", "role"], "Engineer"),
        (&["url", "website", "site"], "https://example.com"),
        (&["user", "login", "handle"], "jdoe42"),
        (&["code", "coupon", "promo"], "SAVE10"),
        (&["comment", "message", "note", "bio", "description", "feedback"], "This is a sample message."),
    ];
    for (keys, v) in table {
        if keys.iter().any(|k| key.contains(k)) {
            return v.to_string();
        }
    }
    format!("Sample {}", field.caption().to_ascii_lowercase())
}

fn truncate_utf16(s: &str, max: usize) -> String {
    let mut out = String::new();
    let mut n = 0;
    for c in s.chars() {
        n += c.len_utf16();
        if n > max {
            break;
        }
        out.push(c);
    }
    out
}

/// A deterministic, constraint-satisfying value for `field`. Dates use
/// `mm/dd/yyyy`; select/radio return an option value; checkboxes `true`.
pub fn dummy_value(field: &FieldSpec, seed: u64) -> Result<String, DummyError> {
    let mut rng = SeededRng::new(seed);
    let base = match field.kind {
        FieldKind::Hidden | FieldKind::Submit => {
            return Err(DummyError::NotFillable(field.name.clone(), field.kind));
        }
        FieldKind::Select | FieldKind::Radio => return Ok(rng.pick(&field.options).value.clone()),
        FieldKind::Checkbox => return Ok("true".to_string()),
        FieldKind::Date => {
            let y = 1970 + rng.below(50) as u32;
            let m = 1 + rng.below(12) as u32;
            let d = 1 + rng.below(days_in_month(y, m) as u64) as u32;
            return Ok(format!("{m:02}/{d:02}/{y:04}"));
        }
        FieldKind::Number => match &field.constraint {
            Some(Constraint::Range { min, max }) => {
                let mid = (min + max) / 2.0;
                let rounded = round_half_up(mid);
                let v = if *min <= rounded && rounded <= *max { rounded } else { mid };
                format_num(v)
            }
            _ => "42".to_string(),
        },
        FieldKind::Email => "jane.doe@example.com".to_string(),
        FieldKind::Password => "S3cure!pass42".to_string(),
        FieldKind::Tel => "555-010-0199".to_string(),
        FieldKind::Textarea => "This is a sample message.".to_string(),
        FieldKind::Text => text_for(field),
    };
    let value = match &field.constraint {
        Some(Constraint::Pattern { pattern }) => {
            let compiled = compile_pattern(pattern)
                .map_err(|_| DummyError::UnsatisfiablePattern(field.name.clone(), pattern.clone()))?;
            if compiled.is_match(&base) {
                base
            } else {
                let mut found = None;
                for attempt in 0..PATTERN_ATTEMPTS {
                    let candidate = compiled.generate(derive_seed(seed, attempt));
                    match candidate {
                        Some(c) if kind_accepts(field.kind, &c) => {
                            found = Some(c);
                            break;
                        }
                        Some(_) => continue,
                        None => break,
                    }
                }
                found.ok_or_else(|| DummyError::UnsatisfiablePattern(field.name.clone(), pattern.clone()))?
            }
        }
        Some(Constraint::MaxLength { maxlength }) => truncate_utf16(&base, *maxlength as usize),
        _ => base,
    };
    if text_value_valid(field, &value) {
        Ok(value)
    } else {
        Err(DummyError::Unsatisfiable(field.name.clone(), field.kind))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn emails() {
        assert!(is_valid_email("a@b.co"));
        assert!(is_valid_email("x.y+z@sub-domain.example"));
        assert!(!is_valid_email("a@"));
        assert!(!is_valid_email("a b@c.d"));
        assert!(!is_valid_email("a@-c.d"));
        assert!(!is_valid_email("abc"));
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_html_number("42"), Some(42.0));
        assert_eq!(parse_html_number("-1.5e3"), Some(-1500.0));
        assert_eq!(parse_html_number(".5"), Some(0.5));
        for bad in ["", "+1", "1.", "1e", "abc", " 1", "1 "] {
            assert_eq!(parse_html_number(bad), None, "{bad}");
        }
    }

    #[test]
    fn dates() {
        assert_eq!(parse_us_date("01/02/2003"), Some((2003, 1, 2)));
        assert_eq!(parse_us_date("02/29/2024"), Some((2024, 2, 29)));
        assert_eq!(parse_us_date("02/29/2023"), None);
        assert_eq!(parse_us_date("13/45/2024"), None);
        assert_eq!(parse_us_date("1/2/2003"), None);
        assert_eq!(us_to_iso("12/31/1999").as_deref(), Some("1999-12-31"));
        assert!(parse_iso_date("2024-02-30").is_none());
    }

    #[test]
    fn pattern_generation() {
        for p in [r"\d{5}", r"[A-Z]{2}-\d{3,4}", r"(foo|bar)+baz", r"[^a-z]{3}", r"\w+@\w+\.com"] {
            let c = compile_pattern(p).unwrap();
            let v = c.generate(7).unwrap();
            assert!(c.is_match(&v), "{p} -> {v}");
        }
        assert!(compile_pattern("(").is_err());
        assert!(compile_pattern(r"a{200}").unwrap().generate(1).is_none());
    }

    #[test]
    fn number_midpoint() {
        let f = FieldSpec::new(FieldKind::Number, "age").with_constraint(Constraint::Range { min: 18.0, max: 99.0 });
        assert_eq!(dummy_value(&f, 0).unwrap(), "59");
        let f = FieldSpec::new(FieldKind::Number, "r").with_constraint(Constraint::Range { min: 0.2, max: 0.3 });
        assert_eq!(dummy_value(&f, 0).unwrap(), "0.25");
    }

    #[test]
    fn maxlength_truncates() {
        let f = FieldSpec::new(FieldKind::Textarea, "bio").with_constraint(Constraint::MaxLength { maxlength: 4 });
        assert_eq!(dummy_value(&f, 0).unwrap(), "This");
    }

    proptest! {
        #[test]
        fn dummy_dates_are_calendar_valid(seed in any::<u64>()) {
            let f = FieldSpec::new(FieldKind::Date, "dob");
            let v = dummy_value(&f, seed).unwrap();
            prop_assert!(parse_us_date(&v).is_some(), "{}", v);
        }

        #[test]
        fn ranged_numbers_stay_in_range(a in -1000i32..1000, w in 0u32..500) {
            let (min, max) = (a as f64 / 4.0, (a as f64 / 4.0) + w as f64 / 8.0);
            let f = FieldSpec::new(FieldKind::Number, "n").with_constraint(Constraint::Range { min, max });
            let v = parse_html_number(&dummy_value(&f, 1).unwrap()).unwrap();
            prop_assert!(min <= v && v <= max);
        }
    }
}
