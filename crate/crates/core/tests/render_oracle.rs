//! Rendered forms checked with an independent HTML parser.

use std::collections::BTreeMap;

use formbench_core::corpus::{build_corpus, CorpusParams};
use formbench_core::html::render::{render_form, CLASSIC, WRAPPER_HEAVY};
use formbench_core::{FieldKind, FieldPool, FieldSpec, FormSpec};
use scraper::{Html, Selector};

fn sel(s: &str) -> Selector {
    Selector::parse(s).unwrap()
}

/// (name, kind, required) of every control scraper finds inside the form,
/// radio groups collapsed to one entry.
fn controls(html: &str, form_id: &str) -> Vec<(String, FieldKind, bool)> {
    let doc = Html::parse_document(html);
    let forms: Vec<_> = doc.select(&sel("form")).collect();
    assert_eq!(forms.len(), 1, "exactly one form");
    let form = forms[0];
    assert_eq!(form.value().attr("id"), Some(form_id));
    let mut out: Vec<(String, FieldKind, bool)> = Vec::new();
    for el in form.select(&sel("input, select, textarea, button")) {
        let v = el.value();
        let Some(name) = v.attr("name") else { continue };
        let required = v.attr("required").is_some();
        let kind = match v.name() {
            "select" => FieldKind::Select,
            "textarea" => FieldKind::Textarea,
            "button" => FieldKind::Submit,
            _ => FieldKind::parse(v.attr("type").unwrap_or("text")).expect("known input type"),
        };
        if kind == FieldKind::Radio && out.iter().any(|(n, k, _)| n == name && *k == FieldKind::Radio) {
            continue;
        }
        out.push((name.to_string(), kind, required));
    }
    out
}

fn expected(spec: &FormSpec) -> Vec<(String, FieldKind, bool)> {
    spec.logical_fields()
        .into_iter()
        .map(|lf| (lf.name, lf.kind, lf.required))
        .collect()
}

#[test]
fn corpus_round_trips_through_scraper() {
    let pool = FieldPool::builtin();
    for style in [CLASSIC, WRAPPER_HEAVY] {
        let mut params = CorpusParams::new(1234, 60);
        params.style = style.to_string();
        let corpus = build_corpus(&pool, &params).unwrap();
        for doc in &corpus.documents {
            assert_eq!(controls(&doc.text, &doc.spec.form_id), expected(&doc.spec), "{}", doc.spec.form_id);
        }
    }
}

#[test]
fn radio_group_is_one_logical_field() {
    let spec = FormSpec::new(
        "f",
        vec![
            FieldSpec::new(FieldKind::Radio, "color_red").with_options(&[("red", "Red")]).with_group("color"),
            FieldSpec::new(FieldKind::Radio, "color_blue").with_options(&[("blue", "Blue")]).with_group("color"),
        ],
    );
    let doc = render_form(&spec, CLASSIC).unwrap();
    let html = Html::parse_document(&doc.text);
    let radios: Vec<_> = html.select(&sel("form input[type=radio]")).collect();
    assert_eq!(radios.len(), 2);
    let names: BTreeMap<&str, usize> = radios.iter().fold(BTreeMap::new(), |mut m, r| {
        *m.entry(r.value().attr("name").unwrap()).or_insert(0) += 1;
        m
    });
    assert_eq!(names.len(), 1, "one group");
    assert_eq!(spec.logical_fields().len(), 1);
}

#[test]
fn attributes_are_verbatim() {
    let spec = FormSpec::new(
        "f",
        vec![
            FieldSpec::new(FieldKind::Email, "mail")
                .with_id("mail")
                .with_placeholder("you@\"example\".com")
                .required(true),
            FieldSpec::new(FieldKind::Text, "q"),
        ],
    );
    let doc = render_form(&spec, WRAPPER_HEAVY).unwrap();
    let html = Html::parse_document(&doc.text);
    let mail = html.select(&sel("#mail")).next().unwrap();
    assert_eq!(mail.value().attr("placeholder"), Some("you@\"example\".com"));
    assert_eq!(mail.value().attr("name"), Some("mail"));
    assert!(mail.value().attr("required").is_some());
    // The wrapper div the misbind mutant targets exists and wraps the control.
    let wrap = html.select(&sel("div#field-mail")).next().unwrap();
    assert!(wrap.select(&sel("#mail")).next().is_some());
    // No visible control starts hidden or disabled.
    assert_eq!(html.select(&sel("form [disabled], form [hidden]")).count(), 0);
}

#[test]
fn single_text_field() {
    let spec = FormSpec::new("f", vec![FieldSpec::new(FieldKind::Text, "q")]);
    let a = render_form(&spec, CLASSIC).unwrap();
    let b = render_form(&spec, CLASSIC).unwrap();
    assert_eq!(a.text, b.text);
    let html = Html::parse_document(&a.text);
    let inputs: Vec<_> = html.select(&sel("input")).collect();
    assert_eq!(inputs.len(), 1);
    assert_eq!(inputs[0].value().attr("name"), Some("q"));
}

#[test]
fn own_parser_agrees_with_scraper_on_element_counts() {
    use formbench_core::html::dom::Document;
    let pool = FieldPool::builtin();
    let corpus = build_corpus(&pool, &CorpusParams::new(5, 30)).unwrap();
    for doc in &corpus.documents {
        let ours = Document::parse(&doc.text);
        let theirs = Html::parse_document(&doc.text);
        for tag in ["input", "select", "option", "textarea", "label", "div", "fieldset", "button"] {
            assert_eq!(
                ours.elements_by_tag(tag).count(),
                theirs.select(&sel(tag)).count(),
                "{tag} in {}",
                doc.spec.form_id
            );
        }
    }
}
