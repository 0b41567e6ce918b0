//! Corpus directories: `NNNN.html` files plus `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use formbench_core::corpus::{corpus_digest, sha256_hex, Corpus, CorpusManifest};
use formbench_core::html::render::HtmlDocument;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum CorpusIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid manifest: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("{file}: content does not match the manifest digest")]
    Digest { file: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusIoError + '_ {
    move |source| CorpusIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes every document and the manifest (with `run_config` embedded).
pub fn write_corpus(dir: &Path, corpus: &Corpus, run_config: serde_json::Value) -> Result<CorpusManifest, CorpusIoError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    for (doc, entry) in corpus.documents.iter().zip(&corpus.manifest.forms) {
        let path = dir.join(&entry.file);
        fs::write(&path, doc.text.as_bytes()).map_err(io(&path))?;
    }
    let mut manifest = corpus.manifest.clone();
    manifest.run_config = Some(run_config);
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_json() + "\n").map_err(io(&path))?;
    Ok(manifest)
}

/// Reads a corpus directory, checking every file against its digest.
pub fn read_corpus(dir: &Path) -> Result<Corpus, CorpusIoError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    let manifest: CorpusManifest = serde_json::from_str(&text).map_err(|e| CorpusIoError::Manifest {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let mut documents = Vec::with_capacity(manifest.forms.len());
    for entry in &manifest.forms {
        let p = dir.join(&entry.file);
        let text = fs::read_to_string(&p).map_err(io(&p))?;
        if sha256_hex(text.as_bytes()) != entry.sha256 {
            return Err(CorpusIoError::Digest { file: entry.file.clone() });
        }
        documents.push(HtmlDocument {
            text,
            spec: entry.spec.clone(),
            style_template_id: manifest.params.style.clone(),
        });
    }
    let digest = corpus_digest(manifest.forms.iter().map(|f| (f.file.as_str(), f.sha256.as_str())));
    if digest != manifest.corpus_digest {
        return Err(CorpusIoError::Manifest {
            path,
            message: "corpus digest does not match the listed files".into(),
        });
    }
    Ok(Corpus { documents, manifest })
}
