//! Corpus statistics: field-type mix, fields per form, characters per form.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::field::FieldKind;
use crate::html::render::HtmlDocument;

/// Width of a `chars_per_form` bucket, in characters.
pub const CHARS_BUCKET_WIDTH: usize = 500;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    /// Inclusive lower bound.
    pub lo: usize,
    /// Exclusive upper bound.
    pub hi: usize,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bucket_width: usize,
    /// Non-empty buckets in ascending order.
    pub buckets: Vec<Bucket>,
}

impl Histogram {
    pub fn from_values(values: impl IntoIterator<Item = usize>, bucket_width: usize) -> Self {
        assert!(bucket_width > 0);
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for v in values {
            *counts.entry(v / bucket_width).or_insert(0) += 1;
        }
        Self {
            bucket_width,
            buckets: counts
                .into_iter()
                .map(|(b, count)| Bucket {
                    lo: b * bucket_width,
                    hi: (b + 1) * bucket_width,
                    count,
                })
                .collect(),
        }
    }

    pub fn total(&self) -> usize {
        self.buckets.iter().map(|b| b.count).sum()
    }

    pub fn bucket_of(&self, value: usize) -> Option<&Bucket> {
        self.buckets.iter().find(|b| b.lo <= value && value < b.hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub n_forms: usize,
    /// Share of each kind among all field entries of the corpus.
    pub field_type_distribution: BTreeMap<FieldKind, f64>,
    /// One bucket per exact field count.
    pub fields_per_form: Histogram,
    /// Document length in characters, in 500-character buckets.
    pub chars_per_form: Histogram,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("corpus is empty")]
    Empty,
}

/// Length of a document as counted for `chars_per_form`.
pub fn document_chars(doc: &HtmlDocument) -> usize {
    doc.text.chars().count()
}

pub fn corpus_stats(corpus: &[HtmlDocument]) -> Result<StatsReport, StatsError> {
    if corpus.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut kinds: BTreeMap<FieldKind, usize> = BTreeMap::new();
    for doc in corpus {
        for f in &doc.spec.fields {
            *kinds.entry(f.kind).or_insert(0) += 1;
        }
    }
    let total: usize = kinds.values().sum();
    let field_type_distribution = kinds
        .into_iter()
        .map(|(k, n)| (k, n as f64 / total as f64))
        .collect();
    Ok(StatsReport {
        n_forms: corpus.len(),
        field_type_distribution,
        fields_per_form: Histogram::from_values(corpus.iter().map(|d| d.spec.fields.len()), 1),
        chars_per_form: Histogram::from_values(corpus.iter().map(document_chars), CHARS_BUCKET_WIDTH),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;
    use crate::html::render::{render_form, FormSpec, CLASSIC};

    #[test]
    fn distribution_arithmetic() {
        let spec = FormSpec::new(
            "f",
            alloc::vec![
                FieldSpec::new(FieldKind::Text, "a"),
                FieldSpec::new(FieldKind::Text, "b"),
                FieldSpec::new(FieldKind::Text, "c"),
                FieldSpec::new(FieldKind::Select, "d").with_options(&[("x", "X")]),
            ],
        );
        let doc = render_form(&spec, CLASSIC).unwrap();
        let s = corpus_stats(&[doc.clone()]).unwrap();
        assert_eq!(s.field_type_distribution[&FieldKind::Text], 0.75);
        assert_eq!(s.field_type_distribution[&FieldKind::Select], 0.25);
        assert_eq!(s.fields_per_form.total(), 1);
        assert_eq!(s.fields_per_form.buckets[0].lo, 4);
        let b = s.chars_per_form.bucket_of(document_chars(&doc)).unwrap();
        assert_eq!(b.count, 1);
        assert_eq!(corpus_stats(&[]), Err(StatsError::Empty));
    }
}
