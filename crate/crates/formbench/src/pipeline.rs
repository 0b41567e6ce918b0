//! Generation loop: prompt a provider per form, parse the answer, execute
//! the code on its own form and keep (or keep all) candidates.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use formbench_core::dataset::{
    filter_executable, parse_response, Decoding, Discarded, FilterMode, InstructionTriple, Provenance, RejectedCandidate,
    TripleMetadata,
};
use formbench_core::html::render::HtmlDocument;
use formbench_core::prompt::{self, PromptError};
use formbench_core::script::TestScript;

use crate::harness::{Harness, HarnessError, Job};
use crate::provider::{GenerationRequest, Provider, ProviderError};

#[derive(Clone, Debug)]
pub struct DatasetOptions {
    pub dialect: String,
    pub template_id: String,
    pub decoding: Decoding,
    /// Generation attempts per form; later attempts run only while no
    /// earlier one executed.
    pub attempts: u32,
    pub filter: FilterMode,
    pub parallel: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Clone, Debug, Default)]
pub struct DatasetRun {
    pub kept: Vec<InstructionTriple>,
    pub discarded: Vec<Discarded>,
    pub rejected: Vec<RejectedCandidate>,
    /// Parsed candidates before filtering.
    pub candidates: usize,
}

#[derive(Default)]
struct FormResult {
    candidates: Vec<InstructionTriple>,
    rejected: Vec<RejectedCandidate>,
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn run_form(
    doc: &HtmlDocument,
    provider: &dyn Provider,
    harness: &Harness,
    opts: &DatasetOptions,
) -> Result<FormResult, PipelineError> {
    let template = prompt::template(&opts.template_id)?;
    let prompt_text = template.render(&doc.text)?;
    let mut out = FormResult::default();
    for attempt in 1..=opts.attempts.max(1) {
        let request = GenerationRequest {
            form_id: &doc.spec.form_id,
            html: &doc.text,
            prompt: &prompt_text,
            template_id: &opts.template_id,
            decoding: &opts.decoding,
            attempt,
        };
        let text = provider.generate(&request)?;
        let (scenario, code) = match parse_response(&text, &opts.dialect) {
            Ok(pair) => pair,
            Err(rejection) => {
                log::info!("{} attempt {attempt}: rejected: {rejection}", doc.spec.form_id);
                out.rejected.push(RejectedCandidate {
                    form_id: doc.spec.form_id.clone(),
                    attempt,
                    rejection,
                });
                continue;
            }
        };
        let script = TestScript::Raw(code.clone());
        let record = harness.evaluate(&Job {
            form: doc,
            script: &script,
            script_id: format!("{}-a{attempt}", doc.spec.form_id),
            page: None,
        })?;
        let executed_ok = record.executed_ok();
        out.candidates.push(InstructionTriple {
            html: doc.text.clone(),
            scenario,
            code,
            metadata: TripleMetadata {
                form_id: doc.spec.form_id.clone(),
                attempt,
                executed_ok,
                execution: record.execution,
                provenance: Provenance {
                    provider: provider.name(),
                    template_id: opts.template_id.clone(),
                    timestamp: timestamp(),
                    decoding: opts.decoding.clone(),
                },
            },
        });
        if executed_ok {
            break;
        }
    }
    Ok(out)
}

/// Runs the loop over `forms`. Provider and infrastructure failures abort
/// the whole batch.
pub fn generate_dataset(
    forms: &[HtmlDocument],
    provider: &dyn Provider,
    harness: &Harness,
    opts: &DatasetOptions,
) -> Result<DatasetRun, PipelineError> {
    let parallel = opts.parallel.clamp(1, forms.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<FormResult>>> = Mutex::new((0..forms.len()).map(|_| None).collect());
    let failure: Mutex<Option<PipelineError>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..parallel {
            s.spawn(|| loop {
                if failure.lock().expect("failure lock").is_some() {
                    return;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(doc) = forms.get(i) else { return };
                match run_form(doc, provider, harness, opts) {
                    Ok(r) => results.lock().expect("results lock")[i] = Some(r),
                    Err(e) => {
                        failure.lock().expect("failure lock").get_or_insert(e);
                        return;
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().expect("failure lock") {
        return Err(e);
    }
    let mut candidates = Vec::new();
    let mut rejected = Vec::new();
    for r in results.into_inner().expect("results lock").into_iter().flatten() {
        candidates.extend(r.candidates);
        rejected.extend(r.rejected);
    }
    let n = candidates.len();
    let outcome = filter_executable(candidates, opts.filter);
    Ok(DatasetRun {
        kept: outcome.kept,
        discarded: outcome.discarded,
        rejected,
        candidates: n,
    })
}
