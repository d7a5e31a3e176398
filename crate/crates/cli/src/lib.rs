//! The `sentiment` command line: ingest → clean → translate → annotate →
//! train → eval → report, plus `reproduce-tables`.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure (the message names the
//! path), 2 usage error.

pub mod http_backend;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sentiment_core::annotate::{AnnotationStore, AnnotatorPolicy};
use sentiment_core::corpus::{self, ingest, CaseFold, Format, SurveyRecord};
use sentiment_core::encoder::{load_checkpoint, save_checkpoint, EncoderConfig};
use sentiment_core::eval::{evaluate, render_report, render_tables, run_approach, MetricsReport, Overrides, ReportFormat};
use sentiment_core::published::{render_reproduction, reproduce};
use sentiment_core::synth::separable_corpus;
use sentiment_core::train::{
    approach_config, fit_records, write_history, Approach, FitOptions, DEFAULT_SEED, DESK_LEARNING_RATE,
};
use sentiment_core::translate::{
    translate_corpus, DictionaryBackend, IdentityBackend, TranslateOptions, TranslationBackend, TranslationCache,
};

use http_backend::{HttpBackend, API_KEY_VAR, ENDPOINT_VAR};

/// A problem with the command line itself; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "sentiment", version, about = "Survey-response sentiment pipeline")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read a CSV or JSONL corpus and write it back as canonical records.
    Ingest(IngestArgs),
    /// Drop blank and unclear responses and fold case.
    Clean(CleanArgs),
    /// Translate record texts through a backend, with a persistent cache.
    #[command(after_help = translate_env_help())]
    Translate(TranslateArgs),
    /// Clean and translate in one pass (clean first unless --translate-first).
    #[command(after_help = translate_env_help())]
    Prepare(PrepareArgs),
    /// Serve the committee annotation HTTP API until interrupted.
    AnnotateServe(ServeArgs),
    /// Train an encoder on every record of a labeled corpus.
    Train(TrainArgs),
    /// Run one approach end to end (split, train, score) and write its report.
    Eval(EvalArgs),
    /// Render one or more report JSON files as JSON or Markdown tables.
    Report(ReportArgs),
    /// Recompute the published metric tables from the published confusion matrices.
    ReproduceTables(ReproduceArgs),
}

fn translate_env_help() -> String {
    format!(
        "Environment for --backend http:\n  {ENDPOINT_VAR}  translation endpoint URL (required)\n  {API_KEY_VAR}   API key sent as ?key= (optional)"
    )
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Jsonl => Format::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CaseFoldArg {
    Upper,
    Lower,
    None,
}

impl From<CaseFoldArg> for CaseFold {
    fn from(c: CaseFoldArg) -> Self {
        match c {
            CaseFoldArg::Upper => CaseFold::Upper,
            CaseFoldArg::Lower => CaseFold::Lower,
            CaseFoldArg::None => CaseFold::None,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Identity,
    Dictionary,
    Http,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportArg {
    Json,
    Md,
}

impl From<ReportArg> for ReportFormat {
    fn from(r: ReportArg) -> Self {
        match r {
            ReportArg::Json => ReportFormat::Json,
            ReportArg::Md => ReportFormat::Markdown,
        }
    }
}

#[derive(Debug, Args)]
struct CorpusIo {
    /// Input corpus.
    #[arg(long)]
    input: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Output path (format from its extension, JSONL unless `.csv`); stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[command(flatten)]
    io: CorpusIo,
}

#[derive(Debug, Args)]
struct CleanArgs {
    #[command(flatten)]
    io: CorpusIo,
    #[arg(long, value_enum, default_value = "upper")]
    case_fold: CaseFoldArg,
}

#[derive(Debug, Args)]
struct BackendFlags {
    #[arg(long, value_enum, default_value = "identity")]
    backend: BackendArg,
    /// JSON object of source → target strings for --backend dictionary.
    #[arg(long = "dict")]
    dict: Option<PathBuf>,
    /// JSONL translation cache, created if missing.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, default_value = "fa")]
    source_lang: String,
    #[arg(long, default_value = "en")]
    target_lang: String,
    /// Texts per backend call.
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    /// Backend calls in flight at once.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
}

#[derive(Debug, Args)]
struct TranslateArgs {
    #[command(flatten)]
    io: CorpusIo,
    #[command(flatten)]
    backend: BackendFlags,
}

#[derive(Debug, Args)]
struct PrepareArgs {
    #[command(flatten)]
    io: CorpusIo,
    #[arg(long, value_enum, default_value = "upper")]
    case_fold: CaseFoldArg,
    /// Translate before cleaning instead of after.
    #[arg(long)]
    translate_first: bool,
    #[command(flatten)]
    backend: BackendFlags,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Corpus whose records are offered for annotation.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Append-only judgment journal, replayed on start.
    #[arg(long)]
    journal: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Reject judgments from annotators not listed with --annotator.
    #[arg(long)]
    reject_unknown: bool,
    /// Pre-registered annotator id (repeatable).
    #[arg(long = "annotator")]
    annotators: Vec<String>,
}

#[derive(Debug, Args)]
struct EncoderFlags {
    #[arg(long, default_value_t = 64)]
    d_model: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 128)]
    d_ff: usize,
    #[arg(long, default_value_t = 64)]
    max_len: usize,
    /// Minimum token frequency for the vocabulary.
    #[arg(long, default_value_t = 1)]
    min_count: usize,
    /// Train only the attention projections.
    #[arg(long)]
    attention_only: bool,
}

impl EncoderFlags {
    fn fit_options(&self) -> FitOptions {
        FitOptions {
            encoder: EncoderConfig {
                d_model: self.d_model,
                n_heads: self.heads,
                n_layers: self.layers,
                d_ff: self.d_ff,
                max_len: self.max_len,
                ..EncoderConfig::default()
            },
            vocab_min_count: self.min_count,
            attention_only: self.attention_only,
        }
    }
}

#[derive(Debug, Args)]
struct HyperFlags {
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate (default 5e-5; 1e-3 for eval --synthetic).
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    warmup_steps: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Seed for splitting, initialization, shuffling and synthetic data.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl HyperFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            epochs: self.epochs,
            learning_rate: self.lr,
            train_batch_size: self.batch_size,
            warmup_steps: self.warmup_steps,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Labeled corpus; every record is used for training.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Where to write the trained checkpoint (plus a `.json` sidecar).
    #[arg(long)]
    checkpoint: PathBuf,
    /// Approach whose hyperparameters to start from.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    approach: u8,
    /// Training-history JSONL.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Also write `<checkpoint>.epoch<N>.bin` after every epoch.
    #[arg(long)]
    per_epoch: bool,
    #[command(flatten)]
    hyper: HyperFlags,
    #[command(flatten)]
    encoder: EncoderFlags,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    approach: u8,
    /// Labeled corpus.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Use a generated 350 + 350 keyword-separable corpus instead of --input.
    #[arg(long)]
    synthetic: bool,
    /// Score this existing checkpoint on the whole input instead of training.
    #[arg(long, conflicts_with = "checkpoint")]
    model: Option<PathBuf>,
    /// Save the trained checkpoint here.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    history: Option<PathBuf>,
    /// Report file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    report: ReportArg,
    #[command(flatten)]
    hyper: HyperFlags,
    #[command(flatten)]
    encoder: EncoderFlags,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Report JSON written by `eval` (repeatable; one table row each).
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "md")]
    report: ReportArg,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            eprintln!("run with --help for usage");
            2
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => {
            let records = read_corpus(&a.io.input, a.io.format)?;
            write_corpus(a.io.output.as_deref(), &records)
        }
        Command::Clean(a) => {
            let records = read_corpus(&a.io.input, a.io.format)?;
            let before = records.len();
            let cleaned = corpus::clean(records, a.case_fold.into());
            log::info!("kept {} of {before} records", cleaned.len());
            write_corpus(a.io.output.as_deref(), &cleaned)
        }
        Command::Translate(a) => {
            let records = read_corpus(&a.io.input, a.io.format)?;
            let out = translate(records, &a.backend)?;
            write_corpus(a.io.output.as_deref(), &out)
        }
        Command::Prepare(a) => {
            let records = read_corpus(&a.io.input, a.io.format)?;
            let fold = a.case_fold.into();
            let out = if a.translate_first {
                let non_blank = records.into_iter().filter(|r| !r.text.trim().is_empty()).collect();
                corpus::clean(translate(non_blank, &a.backend)?, fold)
            } else {
                translate(corpus::clean(records, fold), &a.backend)?
            };
            write_corpus(a.io.output.as_deref(), &out)
        }
        Command::AnnotateServe(a) => annotate_serve(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => {
            let mut reports = Vec::new();
            for path in &a.input {
                let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let r: MetricsReport = serde_json::from_str(&raw).with_context(|| format!("parsing report {}", path.display()))?;
                reports.push(r);
            }
            let text = match a.report {
                ReportArg::Md => render_tables(&reports),
                ReportArg::Json if reports.len() == 1 => render_report(&reports[0], ReportFormat::Json),
                ReportArg::Json => serde_json::to_string_pretty(&reports)? + "\n",
            };
            write_text(a.output.as_deref(), &text)
        }
        Command::ReproduceTables(a) => {
            let started = Instant::now();
            let text = render_reproduction(&reproduce());
            log::info!("recomputed in {:?}", started.elapsed());
            write_text(a.output.as_deref(), &text)
        }
    }
}

fn read_corpus(path: &Path, format: Option<FormatArg>) -> Result<Vec<SurveyRecord>> {
    let format = format.map(Format::from).or_else(|| Format::from_path(path)).unwrap_or(Format::Jsonl);
    ingest(path, format).with_context(|| format!("reading corpus {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating directory {}", parent.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_corpus(path: Option<&Path>, records: &[SurveyRecord]) -> Result<()> {
    match path {
        Some(p) => {
            let format = match Format::from_path(p) {
                Some(Format::Csv) => Format::Csv,
                _ => Format::Jsonl,
            };
            let mut w = create(p)?;
            corpus::write_records(&mut w, records, format).with_context(|| format!("writing {}", p.display()))?;
            w.flush().with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let stdout = io::stdout();
            corpus::write_records(stdout.lock(), records, Format::Jsonl).context("writing to stdout")
        }
    }
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())
                .and_then(|_| w.flush())
                .with_context(|| format!("writing {}", p.display()))
        }
        None => {
            print!("{text}");
            io::stdout().flush().context("writing to stdout")
        }
    }
}

fn translate(records: Vec<SurveyRecord>, flags: &BackendFlags) -> Result<Vec<SurveyRecord>> {
    let backend: Box<dyn TranslationBackend> = match flags.backend {
        BackendArg::Identity => Box::new(IdentityBackend),
        BackendArg::Dictionary => {
            let path = flags.dict.as_ref().ok_or_else(|| usage("--backend dictionary needs --dict <path>"))?;
            Box::new(DictionaryBackend::from_json_file(path).map_err(|e| anyhow!("loading dictionary {e}"))?)
        }
        BackendArg::Http => Box::new(HttpBackend::from_env().map_err(usage)?),
    };
    let cache = match &flags.cache {
        Some(p) => TranslationCache::open(p).with_context(|| format!("opening cache {}", p.display()))?,
        None => TranslationCache::in_memory(),
    };
    let opts = TranslateOptions {
        source_lang: flags.source_lang.clone(),
        target_lang: flags.target_lang.clone(),
        batch_size: flags.batch_size,
        parallelism: flags.parallelism,
    };
    Ok(translate_corpus(records, &backend, &cache, &opts)?)
}

fn annotate_serve(a: ServeArgs) -> Result<()> {
    let records = read_corpus(&a.input, a.format)?;
    let policy = if a.reject_unknown {
        AnnotatorPolicy::Reject
    } else {
        AnnotatorPolicy::AutoRegister
    };
    let mut store = AnnotationStore::new(records, policy)?;
    if let Some(j) = &a.journal {
        store = store.with_journal(j).with_context(|| format!("opening journal {}", j.display()))?;
    }
    for id in a.annotators {
        store.register_annotator(id);
    }
    let runtime = tokio::runtime::Runtime::new().context("starting async runtime")?;
    let addr = SocketAddr::new(a.host, a.port);
    runtime
        .block_on(sentiment_server::run(addr, sentiment_server::shared(store)))
        .with_context(|| format!("serving on {addr}"))
}

fn approach_of(n: u8) -> Approach {
    Approach::try_from(n).expect("range checked by the parser")
}

fn epoch_path(checkpoint: &Path, epoch: usize) -> PathBuf {
    let stem = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    checkpoint.with_file_name(format!("{stem}.epoch{epoch}.bin"))
}

fn save_history(path: Option<&Path>, history: &[sentiment_core::train::EpochStats]) -> Result<()> {
    if let Some(p) = path {
        let mut w = create(p)?;
        write_history(&mut w, history).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let records = read_corpus(&a.input, a.format)?;
    let (config, _) = approach_config(approach_of(a.approach), a.hyper.seed);
    let config = a.hyper.overrides().apply(config);
    let fit = a.encoder.fit_options();
    let checkpoint_path = a.checkpoint.clone();
    if let Some(dir) = a.checkpoint.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating directory {}", dir.display()))?;
    }
    let (checkpoint, history) = fit_records::<f64>(&records, &config, &fit, |stats, params, vocab| {
        log::info!("epoch {} mean loss {:.6} lr {:e}", stats.epoch, stats.mean_loss, stats.lr);
        if a.per_epoch {
            let path = epoch_path(&checkpoint_path, stats.epoch);
            save_checkpoint(&path, params, vocab).map_err(|e| format!("writing checkpoint {}: {e}", path.display()))?;
        }
        Ok(())
    })?;
    save_checkpoint(&a.checkpoint, &checkpoint.params, &checkpoint.vocab)
        .with_context(|| format!("writing checkpoint {}", a.checkpoint.display()))?;
    save_history(a.history.as_deref(), &history)?;
    log::info!("trained on {} records; checkpoint {}", records.len(), a.checkpoint.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let approach = approach_of(a.approach);
    let seed = a.hyper.seed;
    let corpus = match &a.input {
        Some(p) => read_corpus(p, a.format)?,
        None => separable_corpus(350, seed),
    };
    let mut overrides = a.hyper.overrides();
    if a.synthetic && overrides.learning_rate.is_none() {
        overrides.learning_rate = Some(DESK_LEARNING_RATE);
    }
    let report = if let Some(model) = &a.model {
        let checkpoint = load_checkpoint::<f64>(model).with_context(|| format!("loading checkpoint {}", model.display()))?;
        let (config, _) = approach_config(approach, seed);
        evaluate(approach, &corpus, &checkpoint, config.eval_batch_size)?
    } else {
        let run = run_approach::<f64>(&corpus, approach, seed, &a.encoder.fit_options(), &overrides)?;
        log::info!("approach {approach}: trained on {}, tested on {}", run.train_size, run.test_size);
        if let Some(p) = &a.checkpoint {
            save_checkpoint(p, &run.checkpoint.params, &run.checkpoint.vocab)
                .with_context(|| format!("writing checkpoint {}", p.display()))?;
        }
        save_history(a.history.as_deref(), &run.history)?;
        run.report
    };
    write_text(a.output.as_deref(), &render_report(&report, a.report.into()))
}
