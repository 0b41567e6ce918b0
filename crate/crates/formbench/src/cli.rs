//! Command line: argument parsing, subcommands and exit codes.
//!
//! Exit codes: 0 for a completed run, 1 for usage errors (bad flags, bad
//! inputs), 2 for infrastructure errors. An infrastructure error aborts
//! before any report is written.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use formbench_core::corpus::{build_corpus, Corpus, CorpusParams};
use formbench_core::coverage::{parse_urlencoded, CoverageScope};
use formbench_core::dataset::{from_jsonl, to_jsonl, DatasetManifest, Decoding, FilterMode};
use formbench_core::html::render::{FormSpec, HtmlDocument, CLASSIC, STYLES};
use formbench_core::metrics::{aggregate, per_field_type_errors, taxonomy_counts, AggregateOptions};
use formbench_core::mutation::{break_source, mutate, MutationKind};
use formbench_core::pool::{CountRange, FieldPool, Provenance};
use formbench_core::prompt::DEFAULT_TEMPLATE;
use formbench_core::recorder;
use formbench_core::rng::derive_seed;
use formbench_core::scenario::{reference_scenario, FieldSelection};
use formbench_core::script::{compile, emit_source, RawScript, TestScript, ACTION_JSON, PYTHON_SELENIUM};
use formbench_core::stats::corpus_stats;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::{ProviderConfig, ReportFormat, RunConfig, REFERENCE_ENDPOINT};
use crate::corpus_io::{read_corpus, write_corpus};
use crate::harness::{Harness, HarnessConfig, HarnessError, Job};
use crate::pipeline::{generate_dataset, DatasetOptions, PipelineError};
use crate::provider::{CannedProvider, ChatProvider, OracleProvider, Provider, ProviderError};
use crate::report::{to_json, AnalysisReport, EvaluationSummary, RecordsFile};
use crate::runner::Registry;
use crate::server::{HttpServer, Response};

pub const RECORDS_FILE: &str = "records.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const DATASET_FILE: &str = "dataset.jsonl";
pub const DATASET_MANIFEST_FILE: &str = "manifest.json";
pub const POOL_FILE: &str = "pool.json";
pub const POOL_MANIFEST_FILE: &str = "pool-manifest.json";
pub const STATS_FILE: &str = "stats.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Infrastructure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Infrastructure(_) => 2,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Infrastructure(_) => CliError::Infrastructure(e.to_string()),
            HarnessError::UnknownDialect(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Harness(h) => h.into(),
            PipelineError::Provider(ProviderError::Missing { .. } | ProviderError::Config(_)) => {
                CliError::Usage(e.to_string())
            }
            PipelineError::Provider(_) => CliError::Infrastructure(e.to_string()),
            PipelineError::Prompt(_) => CliError::Usage(e.to_string()),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Infrastructure(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Infrastructure(format!("{}: {e}", dir.display())))
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[derive(Parser, Debug)]
#[command(name = "formbench", version, about = "Form-interaction benchmark: corpus generation, script evaluation and dataset building")]
pub struct Cli {
    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a deduplicated field pool.
    GenPool(GenPoolArgs),
    /// Generate a seeded form corpus.
    GenForms(GenFormsArgs),
    /// Prompt a provider for scenarios and scripts, execute them and write
    /// an instruction dataset.
    GenDataset(GenDatasetArgs),
    /// Run scripts against their forms and score them.
    Evaluate(EvaluateArgs),
    /// Recompute metrics, error taxonomy and corpus statistics from records.
    Analyze(AnalyzeArgs),
    /// Serve a corpus over HTTP for manual inspection.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
pub struct GenPoolArgs {
    /// Pool files (JSON lists of field records) to merge. The built-in
    /// pool when none is given.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
    /// Mark merged inputs as LLM-generated rather than curated files.
    #[arg(long)]
    pub llm_generated: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct CorpusArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = CountRange::default().min)]
    pub fields_min: usize,
    #[arg(long, default_value_t = CountRange::default().max)]
    pub fields_max: usize,
    /// Style template (classic or wrapper-heavy).
    #[arg(long, default_value = CLASSIC)]
    pub style: String,
    /// Field pool file; the built-in pool when omitted.
    #[arg(long)]
    pub pool: Option<PathBuf>,
}

impl CorpusArgs {
    fn params(&self) -> Result<CorpusParams, CliError> {
        if !STYLES.contains(&self.style.as_str()) {
            return Err(usage(format!("unknown style `{}` (expected one of {})", self.style, STYLES.join(", "))));
        }
        if self.fields_min == 0 || self.fields_min > self.fields_max {
            return Err(usage(format!(
                "invalid field count range {}..={}",
                self.fields_min, self.fields_max
            )));
        }
        Ok(CorpusParams {
            seed: self.seed,
            count: self.count,
            fields_min: self.fields_min,
            fields_max: self.fields_max,
            style: self.style.clone(),
        })
    }

    fn pool(&self) -> Result<FieldPool, CliError> {
        match &self.pool {
            None => Ok(FieldPool::builtin()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
                FieldPool::parse(&text, Provenance::File).map_err(|e| usage(format!("{}: {e}", p.display())))
            }
        }
    }

    fn build(&self) -> Result<Corpus, CliError> {
        let params = self.params()?;
        let pool = self.pool()?;
        build_corpus(&pool, &params).map_err(usage)
    }

    fn record(&self, rc: &mut RunConfig) {
        rc.seed = Some(self.seed);
        rc.count = Some(self.count);
        rc.fields_min = Some(self.fields_min);
        rc.fields_max = Some(self.fields_max);
        rc.style = Some(self.style.clone());
        if let Some(p) = &self.pool {
            rc.paths.insert("pool".into(), path_str(p));
        }
    }
}

#[derive(Args, Debug)]
pub struct GenFormsArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Output directory for the HTML files and manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct BrowserArgs {
    /// W3C WebDriver endpoint. The built-in reference browser when unset.
    #[arg(long, env = "WEBDRIVER_URL")]
    pub webdriver_url: Option<String>,
    /// Budget per script in milliseconds.
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
    /// Element lookup polling budget in milliseconds.
    #[arg(long, default_value_t = 2_000)]
    pub poll_ms: u64,
    /// JSON object merged into session capabilities.
    #[arg(long)]
    pub capabilities: Option<String>,
    /// TOML file adding or replacing script dialects.
    #[arg(long)]
    pub runners: Option<PathBuf>,
    /// Scripts evaluated concurrently, each in its own session.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    /// Serve forms with the event recorder installed.
    #[arg(long)]
    pub instrument: bool,
}

impl BrowserArgs {
    fn endpoint(&self) -> Option<String> {
        self.webdriver_url.clone().filter(|u| !u.trim().is_empty())
    }

    fn harness_config(&self, scope: CoverageScope) -> Result<HarnessConfig, CliError> {
        let capabilities = match &self.capabilities {
            None => json!({}),
            Some(text) => {
                let v: Value = serde_json::from_str(text).map_err(|e| usage(format!("--capabilities: {e}")))?;
                if !v.is_object() {
                    return Err(usage("--capabilities must be a JSON object"));
                }
                v
            }
        };
        let mut registry = Registry::default();
        if let Some(p) = &self.runners {
            registry.load_overrides(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        }
        if self.parallel == 0 {
            return Err(usage("--parallel must be at least 1"));
        }
        if self.timeout_ms == 0 {
            return Err(usage("--timeout-ms must be positive"));
        }
        Ok(HarnessConfig {
            webdriver_url: self.endpoint(),
            timeout_ms: self.timeout_ms,
            poll_ms: self.poll_ms,
            scope,
            instrument: self.instrument,
            capabilities,
            registry,
        })
    }

    fn record(&self, rc: &mut RunConfig, config: &HarnessConfig) {
        rc.webdriver_url = Some(self.endpoint().unwrap_or_else(|| REFERENCE_ENDPOINT.to_string()));
        rc.timeout_ms = Some(self.timeout_ms);
        rc.poll_ms = Some(self.poll_ms);
        rc.parallel = Some(self.parallel);
        rc.instrument = Some(self.instrument);
        rc.runners = config.registry.dialects.clone();
        rc.coverage_scope = Some(config.scope);
    }
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Corpus directory written by gen-forms.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Evaluate reference scripts compiled from each form.
    #[arg(long, conflicts_with = "scripts", required_unless_present = "scripts")]
    pub oracle: bool,
    /// Scripts: a directory of `<form_id>.<ext>` files, or a JSONL file of
    /// `{form_id, script_id?, dialect?, source}` lines or dataset triples.
    #[arg(long)]
    pub scripts: Option<PathBuf>,
    /// Apply a mutation to each oracle script (e.g. wrapper_misbind,
    /// drop_fields(2) or drop_fields:2).
    #[arg(long, requires = "oracle")]
    pub mutation: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub mutation_seed: u64,
    /// Dialect of oracle scripts, and the default for script files.
    #[arg(long, default_value = ACTION_JSON)]
    pub dialect: String,
    /// Score coverage over required fields only.
    #[arg(long)]
    pub required_only: bool,
    /// Average coverage over executed scripts instead of all scripts.
    #[arg(long)]
    pub coverage_over_executed: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub report: ReportFormat,
    /// Directory for records.json and summary.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub browser: BrowserArgs,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// records.json written by evaluate.
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub coverage_over_executed: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub report: ReportFormat,
    /// Also write the report as JSON to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    /// Reference scenarios and scripts, with optional seeded faults.
    Oracle,
    /// Recorded responses from a JSONL file.
    Canned,
    /// OpenAI-compatible chat completions endpoint.
    Openai,
}

#[derive(Args, Debug)]
pub struct GenDatasetArgs {
    /// Existing corpus directory; otherwise a corpus is generated from the
    /// generation flags.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub generate: CorpusArgs,
    #[arg(long, value_enum, default_value_t = ProviderKind::Oracle)]
    pub provider: ProviderKind,
    /// JSONL responses for the canned provider.
    #[arg(long)]
    pub responses: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, env = "LLM_API_BASE")]
    pub api_base: Option<String>,
    #[arg(long, env = "LLM_API_KEY", hide_env_values = true)]
    pub api_key: Option<String>,
    /// Share of oracle responses made to fail.
    #[arg(long, default_value_t = 0.0)]
    pub fault_rate: f64,
    #[arg(long, default_value = DEFAULT_TEMPLATE)]
    pub template: String,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 2048)]
    pub max_tokens: u32,
    /// Generation attempts per form; stops at the first executable one.
    #[arg(long, default_value_t = 1)]
    pub attempts: u32,
    /// Keep only executable candidates (default).
    #[arg(long, overrides_with = "no_filter")]
    pub filter: bool,
    /// Keep every parsed candidate.
    #[arg(long, overrides_with = "filter")]
    pub no_filter: bool,
    #[arg(long, default_value = PYTHON_SELENIUM)]
    pub dialect: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub browser: BrowserArgs,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8000)]
    pub port: u16,
    #[arg(long)]
    pub instrument: bool,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenPool(a) => gen_pool(a),
        Command::GenForms(a) => gen_forms(a),
        Command::GenDataset(a) => gen_dataset(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Analyze(a) => analyze(a),
        Command::Serve(a) => serve(a),
    }
}

fn gen_pool(a: GenPoolArgs) -> Result<(), CliError> {
    let mut rc = RunConfig::new("gen-pool");
    let pool = if a.inputs.is_empty() {
        FieldPool::builtin()
    } else {
        let provenance = if a.llm_generated { Provenance::LlmGenerated } else { Provenance::File };
        let mut entries = Vec::new();
        for p in &a.inputs {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            let part = FieldPool::parse(&text, provenance).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            entries.extend(part.entries().iter().cloned());
        }
        FieldPool::from_entries(entries, provenance).map_err(usage)?
    };
    for (i, p) in a.inputs.iter().enumerate() {
        rc.paths.insert(format!("input{i}"), path_str(p));
    }
    rc.paths.insert("out".into(), path_str(&a.out));
    create_dir(&a.out)?;
    write_file(&a.out.join(POOL_FILE), &pool.dump())?;
    let digest = formbench_core::corpus::pool_digest(&pool);
    let manifest = json!({
        "run_config": rc.to_value(),
        "size": pool.len(),
        "digest": digest,
        "provenance": format!("{:?}", pool.provenance()),
    });
    write_file(&a.out.join(POOL_MANIFEST_FILE), &to_json(&manifest))?;
    println!("pool_size {}\npool_digest {digest}", pool.len());
    Ok(())
}

fn gen_forms(a: GenFormsArgs) -> Result<(), CliError> {
    let mut rc = RunConfig::new("gen-forms");
    a.corpus.record(&mut rc);
    rc.paths.insert("out".into(), path_str(&a.out));
    let corpus = a.corpus.build()?;
    let manifest = write_corpus(&a.out, &corpus, rc.to_value()).map_err(|e| CliError::Infrastructure(e.to_string()))?;
    let stats = corpus_stats(&corpus.documents).map_err(usage)?;
    write_file(
        &a.out.join(STATS_FILE),
        &to_json(&json!({ "run_config": rc.to_value(), "stats": stats })),
    )?;
    println!("forms {}\ncorpus_digest {}", manifest.forms.len(), manifest.corpus_digest);
    Ok(())
}

fn load_corpus(dir: &Path) -> Result<Corpus, CliError> {
    read_corpus(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))
}

/// One script to evaluate, owned.
struct Item {
    form: usize,
    script_id: String,
    script: TestScript,
    page: Option<String>,
}

fn oracle_items(
    corpus: &Corpus,
    dialect: &str,
    selection: FieldSelection,
    mutation: Option<(MutationKind, u64)>,
) -> Result<(Vec<Item>, usize), CliError> {
    let mut items = Vec::new();
    let mut skipped = 0;
    for (i, doc) in corpus.documents.iter().enumerate() {
        let spec = &doc.spec;
        let scenario = reference_scenario(spec, derive_seed(corpus.manifest.params.seed, i as u64), selection).map_err(usage)?;
        let script = compile(&scenario, spec).map_err(usage)?;
        let (script, page, suffix) = match mutation {
            None => (TestScript::Actions(script), None, String::new()),
            Some((kind, seed)) => match mutate(&script, kind, doc, derive_seed(seed, i as u64)) {
                Ok(m) => {
                    let converted = match (&m.script, dialect) {
                        (TestScript::Raw(_), d) if d != ACTION_JSON => {
                            let raw = emit_source(&script, d).map_err(usage)?;
                            let index = m.action_indices.first().copied().unwrap_or(0);
                            TestScript::Raw(break_source(&raw, index))
                        }
                        _ => m.script.clone(),
                    };
                    (converted, m.page, format!("-{}", kind.name()))
                }
                Err(e) => {
                    log::info!("{}: {} not applicable: {e}", spec.form_id, kind);
                    skipped += 1;
                    continue;
                }
            },
        };
        let script = match (script, dialect) {
            (TestScript::Actions(a), d) if d != ACTION_JSON => TestScript::Raw(emit_source(&a, d).map_err(usage)?),
            (s, _) => s,
        };
        items.push(Item {
            form: i,
            script_id: format!("{}-oracle{suffix}", spec.form_id),
            script,
            page,
        });
    }
    Ok((items, skipped))
}

#[derive(Deserialize)]
struct ScriptLine {
    form_id: String,
    #[serde(default)]
    script_id: Option<String>,
    #[serde(default)]
    dialect: Option<String>,
    source: String,
}

fn script_items(corpus: &Corpus, path: &Path, registry: &Registry, default_dialect: &str) -> Result<Vec<Item>, CliError> {
    let by_id: BTreeMap<&str, usize> = corpus
        .documents
        .iter()
        .enumerate()
        .map(|(i, d)| (d.spec.form_id.as_str(), i))
        .collect();
    let by_file: BTreeMap<String, usize> = corpus
        .manifest
        .forms
        .iter()
        .enumerate()
        .map(|(i, e)| (e.file.trim_end_matches(".html").to_string(), i))
        .collect();
    let lookup = |id: &str| -> Result<usize, CliError> {
        by_id
            .get(id)
            .or_else(|| by_file.get(id))
            .copied()
            .ok_or_else(|| usage(format!("script for unknown form `{id}`")))
    };
    let mut items = Vec::new();
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        for p in entries {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let ext = p.extension().and_then(|s| s.to_str()).unwrap_or_default();
            let dialect = match registry.get(default_dialect) {
                Some(d) if d.extension == ext => default_dialect.to_string(),
                _ => registry
                    .dialects
                    .values()
                    .find(|d| d.extension == ext)
                    .map_or_else(|| default_dialect.to_string(), |d| d.name.clone()),
            };
            let source = std::fs::read_to_string(&p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            items.push(Item {
                form: lookup(&stem)?,
                script_id: stem,
                script: TestScript::Raw(RawScript { source, dialect }),
                page: None,
            });
        }
        return Ok(items);
    }
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line).map_err(|e| usage(format!("{}:{}: {e}", path.display(), n + 1)))?;
        if v.get("metadata").is_some() && v.get("code").is_some() {
            let triple = from_jsonl(line).map_err(|e| usage(format!("{}:{}: {e}", path.display(), n + 1)))?;
            let t = triple.into_iter().next().expect("one line");
            items.push(Item {
                form: lookup(&t.metadata.form_id)?,
                script_id: format!("{}-a{}", t.metadata.form_id, t.metadata.attempt),
                script: TestScript::Raw(t.code),
                page: None,
            });
        } else {
            let l: ScriptLine = serde_json::from_value(v).map_err(|e| usage(format!("{}:{}: {e}", path.display(), n + 1)))?;
            items.push(Item {
                form: lookup(&l.form_id)?,
                script_id: l.script_id.unwrap_or_else(|| format!("{}-l{}", l.form_id, n + 1)),
                script: TestScript::Raw(RawScript {
                    source: l.source,
                    dialect: l.dialect.unwrap_or_else(|| default_dialect.to_string()),
                }),
                page: None,
            });
        }
    }
    Ok(items)
}

fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let scope = if a.required_only { CoverageScope::RequiredOnly } else { CoverageScope::AllFillable };
    let selection = if a.required_only { FieldSelection::RequiredOnly } else { FieldSelection::AllFillable };
    let config = a.browser.harness_config(scope)?;
    if config.registry.get(&a.dialect).is_none() {
        return Err(usage(format!("unknown dialect `{}`", a.dialect)));
    }
    let mutation = a
        .mutation
        .as_deref()
        .map(|m| m.parse::<MutationKind>().map_err(usage))
        .transpose()?;
    let corpus = load_corpus(&a.corpus)?;

    let mut rc = RunConfig::new("evaluate");
    a.browser.record(&mut rc, &config);
    rc.seed = Some(corpus.manifest.params.seed);
    rc.count = Some(corpus.documents.len());
    rc.style = Some(corpus.manifest.params.style.clone());
    rc.paths.insert("corpus".into(), path_str(&a.corpus));
    if let Some(out) = &a.out {
        rc.paths.insert("out".into(), path_str(out));
    }
    rc.dialect = Some(a.dialect.clone());
    rc.coverage_over_executed = Some(a.coverage_over_executed);
    rc.report = Some(a.report);
    rc.scripts = Some(a.scripts.as_deref().map_or_else(|| "oracle".to_string(), path_str));
    rc.mutation = mutation.map(|m| m.to_string());

    let (items, skipped) = match &a.scripts {
        Some(p) => (script_items(&corpus, p, &config.registry, &a.dialect)?, 0),
        None => oracle_items(&corpus, &a.dialect, selection, mutation.map(|m| (m, a.mutation_seed)))?,
    };
    if skipped > 0 {
        eprintln!("{skipped} form(s) skipped: mutation not applicable");
    }

    let parallel = a.browser.parallel;
    let harness = Harness::start(config)?;
    let jobs: Vec<Job<'_>> = items
        .iter()
        .map(|it| Job {
            form: &corpus.documents[it.form],
            script: &it.script,
            script_id: it.script_id.clone(),
            page: it.page.as_deref(),
        })
        .collect();
    let records = harness.evaluate_all(&jobs, parallel)?;
    let browser = harness.browser().clone();
    drop(harness);

    let summary = aggregate(
        &records,
        AggregateOptions {
            coverage_over_executed: a.coverage_over_executed,
        },
    )
    .map_err(usage)?;
    let taxonomy = taxonomy_counts(&records)
        .into_iter()
        .map(|(k, v)| (k.as_str().to_string(), v))
        .collect();
    let run_config = rc.to_value();
    let report = EvaluationSummary {
        run_config: run_config.clone(),
        browser: browser.clone(),
        summary,
        taxonomy,
    };
    if let Some(out) = &a.out {
        create_dir(out)?;
        let file = RecordsFile {
            run_config,
            browser,
            records,
        };
        write_file(&out.join(RECORDS_FILE), &to_json(&file))?;
        write_file(&out.join(SUMMARY_FILE), &to_json(&report))?;
    }
    match a.report {
        ReportFormat::Json => print!("{}", to_json(&report)),
        ReportFormat::Table => print!("{}", report.to_table()),
    }
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.records).map_err(|e| usage(format!("{}: {e}", a.records.display())))?;
    let file: RecordsFile = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", a.records.display())))?;
    let corpus = load_corpus(&a.corpus)?;
    for r in &file.records {
        r.check_invariants()
            .map_err(|e| usage(format!("record {}/{}: {e}", r.form_id, r.script_id)))?;
    }
    let scope = file
        .run_config
        .get("coverage_scope")
        .and_then(|v| serde_json::from_value::<CoverageScope>(v.clone()).ok())
        .unwrap_or(CoverageScope::AllFillable);
    let specs: BTreeMap<String, FormSpec> = corpus
        .documents
        .iter()
        .map(|d| (d.spec.form_id.clone(), d.spec.clone()))
        .collect();
    let summary = aggregate(
        &file.records,
        AggregateOptions {
            coverage_over_executed: a.coverage_over_executed,
        },
    )
    .map_err(usage)?;
    let mut rc = RunConfig::new("analyze");
    rc.paths.insert("records".into(), path_str(&a.records));
    rc.paths.insert("corpus".into(), path_str(&a.corpus));
    rc.coverage_scope = Some(scope);
    rc.coverage_over_executed = Some(a.coverage_over_executed);
    rc.report = Some(a.report);
    let report = AnalysisReport {
        run_config: rc.to_value(),
        source_run_config: file.run_config.clone(),
        summary,
        taxonomy: taxonomy_counts(&file.records)
            .into_iter()
            .map(|(k, v)| (k.as_str().to_string(), v))
            .collect(),
        per_field_type_errors: per_field_type_errors(&file.records, &specs, scope)
            .into_iter()
            .map(|(k, v)| (k.as_str().to_string(), v))
            .collect(),
        corpus_stats: corpus_stats(&corpus.documents).map_err(usage)?,
    };
    if let Some(out) = &a.out {
        write_file(out, &to_json(&report))?;
    }
    match a.report {
        ReportFormat::Json => print!("{}", to_json(&report)),
        ReportFormat::Table => print!("{}", report.to_table()),
    }
    Ok(())
}

fn gen_dataset(a: GenDatasetArgs) -> Result<(), CliError> {
    let config = a.browser.harness_config(CoverageScope::AllFillable)?;
    if config.registry.get(&a.dialect).is_none() {
        return Err(usage(format!("unknown dialect `{}`", a.dialect)));
    }
    if !(0.0..=1.0).contains(&a.fault_rate) {
        return Err(usage("--fault-rate must lie in [0, 1]"));
    }
    if a.attempts == 0 {
        return Err(usage("--attempts must be at least 1"));
    }
    formbench_core::prompt::template(&a.template).map_err(usage)?;
    let filter = if a.no_filter { FilterMode::NoFilter } else { FilterMode::Filter };
    let corpus = match &a.corpus {
        Some(dir) => load_corpus(dir)?,
        None => a.generate.build()?,
    };
    let seed = corpus.manifest.params.seed;
    let decoding = Decoding {
        temperature: a.temperature,
        max_output_tokens: a.max_tokens,
    };

    let mut rc = RunConfig::new("gen-dataset");
    a.browser.record(&mut rc, &config);
    match &a.corpus {
        Some(dir) => {
            rc.paths.insert("corpus".into(), path_str(dir));
            rc.seed = Some(seed);
            rc.count = Some(corpus.documents.len());
            rc.style = Some(corpus.manifest.params.style.clone());
        }
        None => a.generate.record(&mut rc),
    }
    rc.paths.insert("out".into(), path_str(&a.out));
    rc.filter = Some(filter);
    rc.dialect = Some(a.dialect.clone());
    rc.attempts = Some(a.attempts);
    let mut pc = ProviderConfig {
        kind: format!("{:?}", a.provider).to_lowercase(),
        template_id: a.template.clone(),
        decoding: decoding.clone(),
        ..ProviderConfig::default()
    };

    let provider: Box<dyn Provider> = match a.provider {
        ProviderKind::Oracle => {
            pc.fault_rate = Some(a.fault_rate);
            Box::new(OracleProvider::new(&corpus.documents, seed, &a.dialect, a.fault_rate))
        }
        ProviderKind::Canned => {
            let path = a.responses.as_ref().ok_or_else(|| usage("--provider canned needs --responses"))?;
            pc.responses = Some(path_str(path));
            Box::new(CannedProvider::load(path).map_err(usage)?)
        }
        ProviderKind::Openai => {
            let base = a
                .api_base
                .clone()
                .filter(|b| !b.is_empty())
                .ok_or_else(|| usage("--provider openai needs --api-base or LLM_API_BASE"))?;
            let model = a.model.clone().ok_or_else(|| usage("--provider openai needs --model"))?;
            pc.api_base = Some(base.clone());
            pc.model = Some(model.clone());
            Box::new(ChatProvider::new(&base, a.api_key.clone().filter(|k| !k.is_empty()), &model))
        }
    };
    rc.provider = Some(pc);

    let parallel = a.browser.parallel;
    let harness = Harness::start(config)?;
    let run = generate_dataset(
        &corpus.documents,
        provider.as_ref(),
        &harness,
        &DatasetOptions {
            dialect: a.dialect.clone(),
            template_id: a.template.clone(),
            decoding,
            attempts: a.attempts,
            filter,
            parallel,
        },
    )?;
    drop(harness);

    let manifest = DatasetManifest {
        filter_mode: filter,
        seed,
        corpus_digest: corpus.manifest.corpus_digest.clone(),
        kept: run.kept.len(),
        discarded: run.discarded.len(),
        rejected: run.rejected.len(),
        discarded_detail: run.discarded,
        rejected_detail: run.rejected,
        run_config: Some(rc.to_value()),
    };
    create_dir(&a.out)?;
    write_file(&a.out.join(DATASET_FILE), &to_jsonl(&run.kept))?;
    write_file(&a.out.join(DATASET_MANIFEST_FILE), &to_json(&manifest))?;
    println!(
        "candidates {}\nkept {}\ndiscarded {}\nrejected {}",
        run.candidates, manifest.kept, manifest.discarded, manifest.rejected
    );
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn echo_page(pairs: &[(String, String)], instrument: bool) -> String {
    let mut out = String::from("<!DOCTYPE html><html><head><title>Submitted</title></head><body><table>\n");
    for (k, v) in pairs {
        let _ = writeln!(out, "<tr><th>{}</th><td>{}</td></tr>", escape(k), escape(v));
    }
    out.push_str("</table><p><a href=\"/\">index</a></p>");
    if instrument {
        out.push_str(&recorder::echo_restore_markup());
    }
    out.push_str("</body></html>\n");
    out
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let corpus = load_corpus(&a.corpus)?;
    let pages: Arc<BTreeMap<String, String>> = Arc::new(
        corpus
            .manifest
            .forms
            .iter()
            .zip(&corpus.documents)
            .map(|(e, d): (_, &HtmlDocument)| {
                let text = if a.instrument { recorder::install(&d.text) } else { d.text.clone() };
                (e.file.clone(), text)
            })
            .collect(),
    );
    let mut index = String::from("<!DOCTYPE html><html><head><title>formbench corpus</title></head><body><ul>\n");
    for e in &corpus.manifest.forms {
        let _ = writeln!(index, "<li><a href=\"/forms/{0}\">{1}</a></li>", e.file, e.form_id);
    }
    index.push_str("</ul></body></html>\n");
    let addr = format!("{}:{}", a.host, a.port);
    let served = Arc::clone(&pages);
    let instrument = a.instrument;
    let server = HttpServer::bind(&addr, move |rq| {
        let path = rq.path.as_str();
        if path == "/" {
            return Response::html(200, index.clone());
        }
        if path.ends_with("/submit") {
            let body = if rq.method == "POST" {
                String::from_utf8_lossy(&rq.body).into_owned()
            } else {
                rq.query.clone().unwrap_or_default()
            };
            return Response::html(200, echo_page(&parse_urlencoded(body.as_bytes()), instrument));
        }
        match path.strip_prefix("/forms/").and_then(|f| served.get(f)) {
            Some(page) => Response::html(200, page.clone()),
            None => Response::not_found(),
        }
    })
    .map_err(|e| CliError::Infrastructure(format!("cannot listen on {addr}: {e}")))?;
    eprintln!("serving {} forms at {}/", pages.len(), server.base_url());
    loop {
        std::thread::sleep(Duration::from_secs(3600));
    }
}
