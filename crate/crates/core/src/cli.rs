//! The `sni-sight` command line.
//!
//! Every subcommand writes a run manifest next to its outputs holding the
//! fully resolved command (absolute paths, explicit seed) and the toolkit
//! version. `sni-sight rerun <manifest>` executes it again; all randomness
//! comes from `--seed` through derived streams, so outputs repeat byte for
//! byte.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, Dataset, SplitSide, WebsiteUniverse};
use crate::pcap::PcapError;
use crate::pipeline::{
    ablate_scrub, compare_reports, evaluate_dataset, train_fc, train_lstm, write_predictions, EvalOptions,
    FcModelSpec, LstmModelSpec, ModelKind, PipelineError, TrainOptions, TrainRun,
};
use crate::synth::{generate_corpus, write_corpus, LabelPlan, Preset, SynthConfig, SynthError};
use crate::tls::{events_to_trace, extract_from_reader, ExtractOptions};
use crate::trace::{read_traces, write_traces, Trace, TraceFileError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable holding the log filter (`error` … `trace`).
pub const LOG_ENV: &str = "SNI_SIGHT_LOG";
pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{failed} of {total} captures failed")]
    Extraction { failed: usize, total: usize },
    #[error("{path}: {source}")]
    Pcap { path: PathBuf, source: PcapError },
    #[error(transparent)]
    TraceFile(#[from] TraceFileError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[command(name = "sni-sight", version, about = "Predict which websites a capture visited from its TLS server names")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GlobalArgs {
    /// Root of every random stream used by the run.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Website list, one per line or a JSON array; defaults to the built-in
    /// 20 sites.
    #[arg(long, global = true)]
    pub universe: Option<PathBuf>,
    /// Also write the run manifest to this path.
    #[arg(long, global = true)]
    pub tee_manifest: Option<PathBuf>,
    /// Print a human-readable summary to stdout.
    #[arg(long, global = true)]
    pub summary: bool,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Turn pcap captures into a trace file.
    Extract(ExtractArgs),
    /// Generate a labeled synthetic corpus.
    Synth(SynthArgs),
    /// Split traces and build the vocabulary.
    Dataset(DatasetArgs),
    /// Train the LSTM or the fully-connected model.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Paired t-test over the per-class accuracies of two reports.
    Compare(CompareArgs),
    /// Execute the command recorded in a run manifest again.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExtractArgs {
    /// Capture files or directories (searched recursively for *.pcap).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output trace file (JSON lines).
    #[arg(long, short)]
    pub out: PathBuf,
    /// Comma-separated sites visited in every capture. Without it the label
    /// is read from the file name: `site+site+site[__N].pcap`.
    #[arg(long, value_delimiter = ',')]
    pub label: Option<Vec<String>>,
    /// Abort on the first capture that fails to parse.
    #[arg(long)]
    pub strict: bool,
    /// Keep repeated ClientHellos for the same name on the same flow.
    #[arg(long)]
    pub no_dedup: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// Triples covering every pair of sites.
    Cover,
    /// `--count` random triples.
    Random,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Generator config (JSON). Overrides --preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    pub preset: Preset,
    #[arg(long, value_enum, default_value_t = LabelSource::Cover)]
    pub labels: LabelSource,
    /// JSON array of label sets; overrides --labels.
    #[arg(long)]
    pub label_file: Option<PathBuf>,
    /// Number of random triples for `--labels random`.
    #[arg(long, default_value_t = 843)]
    pub count: usize,
    /// Traces per label.
    #[arg(long, default_value_t = 11)]
    pub repetitions: u64,
    /// Also write one pcap per trace under `pcap/`.
    #[arg(long)]
    pub pcap: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DatasetArgs {
    /// Trace files, concatenated in order.
    #[arg(required = true)]
    pub traces: Vec<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
    /// LSTM window length T.
    #[arg(long, default_value_t = 20)]
    pub window: usize,
    #[arg(long, default_value_t = 0.85)]
    pub train_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long, short)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Checkpoint path.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Model spec (JSON); flags below override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// FC epochs.
    #[arg(long)]
    pub epochs: Option<u64>,
    /// LSTM early-stopping patience, in evaluations.
    #[arg(long)]
    pub patience: Option<u32>,
    /// LSTM window; must equal the dataset's.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long)]
    pub eval_every: Option<u64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Continue the run stored in this checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop after this many steps (LSTM) or epochs (FC) and save a
    /// resumable checkpoint.
    #[arg(long)]
    pub pause_after: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long, short)]
    pub checkpoint: PathBuf,
    #[arg(long, short)]
    pub dataset: PathBuf,
    /// Output directory for report.json, report.csv and predictions.jsonl.
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitSide::Test)]
    pub split: SplitSide,
    /// Drop events naming a site before scoring; also writes ablation.json.
    #[arg(long)]
    pub scrub: bool,
    /// Override the model's decision threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    pub manifest: PathBuf,
}

/// Written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub cli: Cli,
    /// Values the command derived beyond its flags (model spec, universe).
    pub resolved: serde_json::Value,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn absolute(p: &mut PathBuf) -> Result<(), CliError> {
    if p.is_relative() {
        *p = std::path::absolute(&*p).map_err(io_err(p))?;
    }
    Ok(())
}

fn absolute_opt(p: &mut Option<PathBuf>) -> Result<(), CliError> {
    p.as_mut().map_or(Ok(()), absolute)
}

impl Cli {
    /// Makes every path absolute so the manifest can be replayed from any
    /// directory.
    pub fn resolve_paths(&mut self) -> Result<(), CliError> {
        absolute_opt(&mut self.global.universe)?;
        absolute_opt(&mut self.global.tee_manifest)?;
        match &mut self.command {
            Command::Extract(a) => {
                a.inputs.iter_mut().try_for_each(absolute)?;
                absolute(&mut a.out)
            }
            Command::Synth(a) => {
                absolute(&mut a.out)?;
                absolute_opt(&mut a.config)?;
                absolute_opt(&mut a.label_file)
            }
            Command::Dataset(a) => {
                a.traces.iter_mut().try_for_each(absolute)?;
                absolute(&mut a.out)
            }
            Command::Train(a) => {
                absolute(&mut a.dataset)?;
                absolute(&mut a.out)?;
                absolute_opt(&mut a.spec)?;
                absolute_opt(&mut a.resume)
            }
            Command::Eval(a) => {
                absolute(&mut a.checkpoint)?;
                absolute(&mut a.dataset)?;
                absolute(&mut a.out)
            }
            Command::Compare(a) => {
                absolute(&mut a.a)?;
                absolute(&mut a.b)?;
                absolute(&mut a.out)
            }
            Command::Rerun(a) => absolute(&mut a.manifest),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code; errors are reported on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

pub fn run(mut cli: Cli) -> Result<(), CliError> {
    cli.resolve_paths()?;
    if let Command::Rerun(a) = &cli.command {
        let manifest = RunManifest::read(&a.manifest)?;
        if matches!(manifest.cli.command, Command::Rerun(_)) {
            return Err(CliError::Usage("a manifest cannot record a rerun".into()));
        }
        log::info!("replaying {}", a.manifest.display());
        return run(manifest.cli);
    }
    let (resolved, outputs, manifest_path) = match &cli.command {
        Command::Extract(a) => cmd_extract(&cli.global, a)?,
        Command::Synth(a) => cmd_synth(&cli.global, a)?,
        Command::Dataset(a) => cmd_dataset(&cli.global, a)?,
        Command::Train(a) => cmd_train(&cli.global, a)?,
        Command::Eval(a) => cmd_eval(&cli.global, a)?,
        Command::Compare(a) => cmd_compare(&cli.global, a)?,
        Command::Rerun(_) => unreachable!("handled above"),
    };
    let manifest = RunManifest { toolkit_version: crate::VERSION.to_string(), cli: cli.clone(), resolved, outputs };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(&manifest_path, &text).map_err(io_err(&manifest_path))?;
    if let Some(tee) = &cli.global.tee_manifest {
        fs::write(tee, &text).map_err(io_err(tee))?;
    }
    Ok(())
}

type Outcome = (serde_json::Value, Vec<PathBuf>, PathBuf);

/// Manifest path for a single-file output.
fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn create_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(io_err(p)),
        _ => Ok(()),
    }
}

fn load_universe(global: &GlobalArgs) -> Result<WebsiteUniverse, CliError> {
    match &global.universe {
        Some(path) => Ok(WebsiteUniverse::parse(&fs::read_to_string(path).map_err(io_err(path))?)?),
        None => Ok(WebsiteUniverse::default_sites()),
    }
}

/// Fails if `--universe` was given and differs from the stored one.
fn check_universe(global: &GlobalArgs, stored: &WebsiteUniverse) -> Result<(), CliError> {
    if global.universe.is_some() && &load_universe(global)? != stored {
        return Err(PipelineError::UniverseMismatch.into());
    }
    Ok(())
}

/// `*.pcap` files under `path`, sorted; `path` itself if it is a file.
fn collect_pcaps(path: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if !path.is_dir() {
        out.push(path.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> =
        fs::read_dir(path).map_err(io_err(path))?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>().map_err(io_err(path))?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_pcaps(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "pcap") {
            out.push(p);
        }
    }
    Ok(())
}

/// `a.com+b.org+c.net__07.pcap` → `[a.com, b.org, c.net]`.
pub fn label_from_file_name(path: &Path) -> Vec<String> {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = stem.split("__").next().unwrap_or_default();
    stem.split('+').filter(|s| !s.is_empty()).map(str::to_ascii_lowercase).collect()
}

pub fn cmd_extract(global: &GlobalArgs, args: &ExtractArgs) -> Result<Outcome, CliError> {
    let mut files = Vec::new();
    for input in &args.inputs {
        collect_pcaps(input, &mut files)?;
    }
    if files.is_empty() {
        return Err(CliError::Usage("no capture files found in the given inputs".into()));
    }
    let options = ExtractOptions { dedup_window: if args.no_dedup { None } else { ExtractOptions::default().dedup_window } };
    let mut traces: Vec<Trace> = Vec::new();
    let mut failures: Vec<(PathBuf, String)> = Vec::new();
    for file in &files {
        let result = fs::File::open(file)
            .map_err(PcapError::from)
            .and_then(|f| extract_from_reader(std::io::BufReader::new(f), options));
        match result {
            Ok(extraction) => {
                let label = args.label.clone().unwrap_or_else(|| label_from_file_name(file));
                log::info!("{}: {} server names", file.display(), extraction.events.len());
                traces.push(events_to_trace(label, &extraction.events));
            }
            Err(source) => {
                eprintln!("{}: {source}", file.display());
                if args.strict {
                    return Err(CliError::Pcap { path: file.clone(), source });
                }
                failures.push((file.clone(), source.to_string()));
            }
        }
    }
    create_parent(&args.out)?;
    write_traces(&args.out, &traces).map_err(io_err(&args.out))?;
    if global.summary {
        println!("{} captures, {} traces, {} failed", files.len(), traces.len(), failures.len());
    }
    if !failures.is_empty() {
        // the manifest is still written for the successful part
        let resolved = serde_json::json!({ "files": files, "failures": failures });
        let manifest = RunManifest {
            toolkit_version: crate::VERSION.to_string(),
            cli: Cli { global: global.clone(), command: Command::Extract(args.clone()) },
            resolved,
            outputs: vec![args.out.clone()],
        };
        let path = sidecar(&args.out);
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(io_err(&path))?;
        return Err(CliError::Extraction { failed: failures.len(), total: files.len() });
    }
    Ok((serde_json::json!({ "files": files }), vec![args.out.clone()], sidecar(&args.out)))
}

pub fn cmd_synth(global: &GlobalArgs, args: &SynthArgs) -> Result<Outcome, CliError> {
    let config = match &args.config {
        Some(path) => {
            let config: SynthConfig = serde_json::from_str(&fs::read_to_string(path).map_err(io_err(path))?)?;
            config.validate()?;
            config
        }
        None => SynthConfig::preset(args.preset, load_universe(global)?, global.seed)?,
    };
    let plan = match &args.label_file {
        Some(path) => LabelPlan::Explicit(serde_json::from_str(&fs::read_to_string(path).map_err(io_err(path))?)?),
        None => match args.labels {
            LabelSource::Cover => LabelPlan::Cover,
            LabelSource::Random => LabelPlan::Random { count: args.count },
        },
    };
    let labels = plan.labels(&config.universe, global.seed)?;
    let corpus = generate_corpus(&config, &labels, args.repetitions)?;
    write_corpus(&args.out, &corpus)?;
    let config_path = args.out.join("synth_config.json");
    fs::write(&config_path, serde_json::to_string_pretty(&config)? + "\n").map_err(io_err(&config_path))?;
    let mut outputs = vec![
        args.out.join(crate::corpus::TRACES_FILE),
        args.out.join(crate::synth::TRUTH_FILE),
        config_path,
    ];
    if args.pcap {
        let dir = args.out.join("pcap");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let width = corpus.len().to_string().len().max(4);
        for (i, t) in corpus.iter().enumerate() {
            let path = dir.join(format!("{}__{i:0width$}.pcap", t.trace.label.join("+")));
            fs::write(&path, t.to_pcap()).map_err(io_err(&path))?;
        }
        outputs.push(dir);
    }
    if global.summary {
        let events: usize = corpus.iter().map(|t| t.trace.len()).sum();
        println!("{} labels × {} = {} traces, {events} events", labels.len(), args.repetitions, corpus.len());
    }
    let resolved = serde_json::json!({ "labels": labels.len(), "traces": corpus.len() });
    Ok((resolved, outputs, args.out.join(RUN_MANIFEST)))
}

pub fn cmd_dataset(global: &GlobalArgs, args: &DatasetArgs) -> Result<Outcome, CliError> {
    let universe = load_universe(global)?;
    let mut traces = Vec::new();
    for path in &args.traces {
        traces.extend(read_traces(path)?);
    }
    let dataset = Dataset::build(traces, universe, args.window, args.train_fraction, global.seed)?;
    dataset.save(&args.out)?;
    if global.summary {
        let m = &dataset.manifest;
        println!(
            "{} traces ({} train, {} test), vocabulary {}",
            dataset.traces.len(),
            m.split.train.len(),
            m.split.test.len(),
            m.vocabulary.len()
        );
    }
    let resolved = serde_json::json!({ "universe": dataset.universe(), "vocabulary_size": dataset.vocabulary().len() });
    Ok((resolved, vec![args.out.clone()], args.out.join(RUN_MANIFEST)))
}

fn read_spec<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T, CliError> {
    match path {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p).map_err(io_err(p))?)?),
        None => Ok(T::default()),
    }
}

/// The LSTM spec after applying flag overrides.
pub fn lstm_spec(args: &TrainArgs, dataset_window: usize) -> Result<LstmModelSpec, CliError> {
    let mut spec: LstmModelSpec = read_spec(&args.spec)?;
    spec.window = args.window.unwrap_or(dataset_window);
    if spec.window != dataset_window {
        return Err(CliError::Usage(format!("window {} differs from the dataset's {dataset_window}", spec.window)));
    }
    if args.epochs.is_some() {
        return Err(CliError::Usage("--epochs applies to the fc model".into()));
    }
    spec.lr = args.lr.unwrap_or(spec.lr);
    spec.patience = args.patience.unwrap_or(spec.patience);
    spec.hidden = args.hidden.unwrap_or(spec.hidden);
    spec.max_steps = args.max_steps.unwrap_or(spec.max_steps);
    spec.eval_every = args.eval_every.unwrap_or(spec.eval_every);
    spec.threshold = args.threshold.unwrap_or(spec.threshold);
    Ok(spec)
}

/// The FC spec after applying flag overrides.
pub fn fc_spec(args: &TrainArgs) -> Result<FcModelSpec, CliError> {
    let mut spec: FcModelSpec = read_spec(&args.spec)?;
    for (flag, set) in [
        ("--patience", args.patience.is_some()),
        ("--max-steps", args.max_steps.is_some()),
        ("--eval-every", args.eval_every.is_some()),
        ("--window", args.window.is_some()),
        ("--hidden", args.hidden.is_some()),
    ] {
        if set {
            return Err(CliError::Usage(format!("{flag} applies to the lstm model")));
        }
    }
    spec.lr = args.lr.unwrap_or(spec.lr);
    spec.epochs = args.epochs.unwrap_or(spec.epochs);
    spec.threshold = args.threshold.unwrap_or(spec.threshold);
    Ok(spec)
}

pub fn cmd_train(global: &GlobalArgs, args: &TrainArgs) -> Result<Outcome, CliError> {
    let dataset = Dataset::load(&args.dataset)?;
    check_universe(global, dataset.universe())?;
    let resume = match &args.resume {
        Some(path) => Some(crate::nn::load_checkpoint(path).map_err(PipelineError::from)?),
        None => None,
    };
    let opts = TrainOptions { resume: resume.as_ref(), pause_after: args.pause_after };
    let (run, resolved): (TrainRun, serde_json::Value) = match args.model {
        ModelKind::Lstm => {
            let spec = lstm_spec(args, dataset.manifest.window)?;
            (train_lstm(&dataset, &spec, global.seed, opts)?, serde_json::to_value(&spec)?)
        }
        ModelKind::Fc => {
            let spec = fc_spec(args)?;
            (train_fc(&dataset, &spec, global.seed, opts)?, serde_json::to_value(&spec)?)
        }
    };
    create_parent(&args.out)?;
    let ckpt = run.to_checkpoint()?;
    crate::nn::save_checkpoint(&args.out, &ckpt).map_err(PipelineError::from)?;
    let summary = &run.model.meta.summary;
    log::info!("{}: {:?} after {} steps", args.out.display(), summary.stop_reason, summary.steps);
    if global.summary {
        println!(
            "{} stopped ({:?}) after {} steps / {} epochs; best validation loss {:?}",
            args.model.as_str(),
            summary.stop_reason,
            summary.steps,
            summary.epochs,
            summary.best_val_loss
        );
    }
    let resolved = serde_json::json!({ "spec": resolved, "summary": summary });
    Ok((resolved, vec![args.out.clone()], sidecar(&args.out)))
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const ABLATION_JSON: &str = "ablation.json";

pub fn cmd_eval(global: &GlobalArgs, args: &EvalArgs) -> Result<Outcome, CliError> {
    let dataset = Dataset::load(&args.dataset)?;
    check_universe(global, dataset.universe())?;
    let model = crate::pipeline::Model::load(&args.checkpoint)?;
    let opts = EvalOptions { threshold: args.threshold, ..EvalOptions::default() };
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let mut outputs = Vec::new();
    let evaluation = if args.scrub {
        let traces = dataset.traces_of(args.split);
        let (ablation, scrubbed) = ablate_scrub(&model, dataset.vocabulary(), dataset.universe(), &traces, &opts)?;
        let path = args.out.join(ABLATION_JSON);
        fs::write(&path, serde_json::to_string_pretty(&ablation)? + "\n").map_err(io_err(&path))?;
        outputs.push(path);
        if global.summary {
            println!(
                "unscrubbed {:.4}, scrubbed {:.4}; {} of {} events removed",
                ablation.unscrubbed.accuracy(),
                ablation.scrubbed.accuracy(),
                ablation.events_removed,
                ablation.events_before
            );
        }
        scrubbed
    } else {
        evaluate_dataset(&model, &dataset, args.split, &opts)?
    };
    let (json, csv, preds) = (args.out.join(REPORT_JSON), args.out.join(REPORT_CSV), args.out.join(PREDICTIONS));
    evaluation.report.write_json(&json)?;
    evaluation.report.write_csv(&csv)?;
    write_predictions(&preds, &evaluation.predictions)?;
    outputs.extend([json, csv, preds]);
    if global.summary {
        let r = &evaluation.report;
        println!(
            "{} samples, accuracy {:.4}, {:.2} of {:.2} labels recovered",
            r.samples.samples,
            r.accuracy(),
            r.samples.mean_labels_recovered,
            r.samples.mean_label_size
        );
        // a closed stdout (`| head`) is not a failure of the evaluation
        let mut out = std::io::stdout().lock();
        let _ = r.write_csv_to(&mut out).and_then(|()| out.flush());
    }
    let resolved = serde_json::json!({ "threshold": evaluation.report.threshold, "model": model.meta.kind });
    Ok((resolved, outputs, args.out.join(RUN_MANIFEST)))
}

pub fn cmd_compare(global: &GlobalArgs, args: &CompareArgs) -> Result<Outcome, CliError> {
    let a = crate::pipeline::EvalReport::read_json(&args.a)?;
    let b = crate::pipeline::EvalReport::read_json(&args.b)?;
    let comparison = compare_reports(&a, &b)?;
    create_parent(&args.out)?;
    fs::write(&args.out, serde_json::to_string_pretty(&comparison)? + "\n").map_err(io_err(&args.out))?;
    if global.summary {
        let t = &comparison.test;
        println!(
            "accuracy {:.4} vs {:.4}; t = {:.4}, df = {}, p = {:.4e}",
            comparison.a_overall, comparison.b_overall, t.t, t.df, t.p
        );
    }
    Ok((serde_json::Value::Null, vec![args.out.clone()], sidecar(&args.out)))
}
