//! Seeded corpus construction and the corpus manifest.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::field::FieldKind;
use crate::html::render::{render_form, FormSpec, HtmlDocument, RenderError, STYLES};
use crate::pool::{canonicalize, sample_fields_with, CountRange, FieldPool, SampleError};
use crate::rng::derive_seed;

/// Draws per form before giving up on finding a usable field set.
pub const MAX_ATTEMPTS: u64 = 64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub seed: u64,
    pub count: usize,
    pub fields_min: usize,
    pub fields_max: usize,
    pub style: String,
}

impl CorpusParams {
    pub fn new(seed: u64, count: usize) -> Self {
        let range = CountRange::default();
        Self {
            seed,
            count,
            fields_min: range.min,
            fields_max: range.max,
            style: crate::html::render::CLASSIC.to_string(),
        }
    }

    pub fn range(&self) -> CountRange {
        CountRange::new(self.fields_min, self.fields_max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub form_id: String,
    pub sha256: String,
    pub spec: FormSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub params: CorpusParams,
    pub pool_size: usize,
    pub pool_digest: String,
    pub corpus_digest: String,
    pub forms: Vec<ManifestEntry>,
    /// Configuration of the run that wrote the corpus, if recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_config: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub documents: Vec<HtmlDocument>,
    pub manifest: CorpusManifest,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("count must be at least 1")]
    Empty,
    #[error("unknown style template `{0}`")]
    UnknownStyle(String),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("form {index}: no field set with a required fillable field after {attempts} draws")]
    NoRequiredField { index: usize, attempts: u64 },
    #[error("form {index}: {source}")]
    Render { index: usize, source: RenderError },
}

pub fn file_name(index: usize) -> String {
    format!("{:04}.html", index + 1)
}

pub fn form_id(index: usize) -> String {
    format!("form-{:04}", index + 1)
}

pub fn hex(bytes: &[u8]) -> String {
    const DIGITS: &[u8; 16] = b"0123456789abcdef";
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push(DIGITS[(b >> 4) as usize] as char);
        out.push(DIGITS[(b & 15) as usize] as char);
    }
    out
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

pub fn pool_digest(pool: &FieldPool) -> String {
    let mut h = Sha256::new();
    for e in pool.entries() {
        h.update(canonicalize(e).0.as_bytes());
        h.update(b"\n");
    }
    hex(&h.finalize())
}

/// Digest over file names and per-document digests, in corpus order.
pub fn corpus_digest<'a>(entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    let mut h = Sha256::new();
    for (file, digest) in entries {
        h.update(file.as_bytes());
        h.update(b"\0");
        h.update(digest.as_bytes());
        h.update(b"\n");
    }
    hex(&h.finalize())
}

fn usable(spec: &FormSpec) -> bool {
    spec.fillable_fields().iter().any(|lf| lf.required)
}

/// The `index`-th form of a corpus. Its sub-seed depends only on
/// `(seed, index)`; a draw without any required fillable field, or one that
/// fails to render, is redrawn from a seed derived from the sub-seed.
pub fn build_form(pool: &FieldPool, params: &CorpusParams, index: usize) -> Result<HtmlDocument, CorpusError> {
    let sub = derive_seed(params.seed, index as u64);
    let mut last_render_error = None;
    for attempt in 0..MAX_ATTEMPTS {
        let s = if attempt == 0 { sub } else { derive_seed(sub, attempt) };
        let fields = sample_fields_with(pool, params.range(), s, |cand, accepted| {
            cand.kind != FieldKind::Submit || accepted.iter().all(|f| f.kind != FieldKind::Submit)
        })?;
        let spec = FormSpec::new(&form_id(index), fields);
        if !usable(&spec) {
            continue;
        }
        match render_form(&spec, &params.style) {
            Ok(doc) => return Ok(doc),
            Err(e) => last_render_error = Some(e),
        }
    }
    Err(match last_render_error {
        Some(source) => CorpusError::Render { index, source },
        None => CorpusError::NoRequiredField {
            index,
            attempts: MAX_ATTEMPTS,
        },
    })
}

pub fn build_corpus(pool: &FieldPool, params: &CorpusParams) -> Result<Corpus, CorpusError> {
    if params.count == 0 {
        return Err(CorpusError::Empty);
    }
    if !STYLES.contains(&params.style.as_str()) {
        return Err(CorpusError::UnknownStyle(params.style.clone()));
    }
    let mut documents = Vec::with_capacity(params.count);
    let mut forms = Vec::with_capacity(params.count);
    for i in 0..params.count {
        let doc = build_form(pool, params, i)?;
        forms.push(ManifestEntry {
            file: file_name(i),
            form_id: doc.spec.form_id.clone(),
            sha256: sha256_hex(doc.text.as_bytes()),
            spec: doc.spec.clone(),
        });
        documents.push(doc);
    }
    let digest = corpus_digest(forms.iter().map(|f| (f.file.as_str(), f.sha256.as_str())));
    Ok(Corpus {
        documents,
        manifest: CorpusManifest {
            params: params.clone(),
            pool_size: pool.len(),
            pool_digest: pool_digest(pool),
            corpus_digest: digest,
            forms,
            run_config: None,
        },
    })
}

impl CorpusManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn entry(&self, form_id: &str) -> Option<&ManifestEntry> {
        self.forms.iter().find(|f| f.form_id == form_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_seed_sensitive() {
        let pool = FieldPool::builtin();
        let a = build_corpus(&pool, &CorpusParams::new(42, 5)).unwrap();
        let b = build_corpus(&pool, &CorpusParams::new(42, 5)).unwrap();
        let c = build_corpus(&pool, &CorpusParams::new(43, 5)).unwrap();
        assert_eq!(a.manifest.corpus_digest, b.manifest.corpus_digest);
        assert_ne!(a.manifest.corpus_digest, c.manifest.corpus_digest);
        assert_eq!(a.documents[0].spec.form_id, "form-0001");
        assert_eq!(a.manifest.forms[4].file, "0005.html");
    }

    #[test]
    fn every_form_is_usable() {
        let pool = FieldPool::builtin();
        let params = CorpusParams::new(7, 40);
        let corpus = build_corpus(&pool, &params).unwrap();
        for d in &corpus.documents {
            let n = d.spec.fields.len();
            assert!((params.fields_min..=params.fields_max).contains(&n));
            assert!(usable(&d.spec));
            assert!(d.spec.fields.iter().filter(|f| f.kind == FieldKind::Submit).count() <= 1);
        }
    }

    #[test]
    fn prefix_stable() {
        // Form i depends only on (seed, i), not on the corpus size.
        let pool = FieldPool::builtin();
        let small = build_corpus(&pool, &CorpusParams::new(9, 3)).unwrap();
        let large = build_corpus(&pool, &CorpusParams::new(9, 6)).unwrap();
        assert_eq!(small.documents[..], large.documents[..3]);
    }

    #[test]
    fn rejects_bad_params() {
        let pool = FieldPool::builtin();
        assert_eq!(build_corpus(&pool, &CorpusParams::new(1, 0)), Err(CorpusError::Empty));
        let mut p = CorpusParams::new(1, 1);
        p.style = "fancy".into();
        assert!(matches!(build_corpus(&pool, &p), Err(CorpusError::UnknownStyle(_))));
    }
}
