//! `simplaug`: simplify raw text, build augmented training sets, prepare
//! evaluation data and measure how far simplifications drift.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 invalid
//! input data, 4 backend failure.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use simplaug::augment::{self, AugmentationPlan, EvalMode, FilterMode, RunManifest, Strategy};
use simplaug::backend::{simplify_batch, BackendSpec, Simplifier, BACKEND_ENV};
use simplaug::dataset::{self, Dataset, Task};
use simplaug::metrics::{divergence_report_for, BleuConfig, ZeroPolicy};
use simplaug::preservation::filter_stats;
use simplaug::{AugmentError, BackendError, DatasetError};

#[derive(Debug)]
enum CliError {
    Io(String),
    Config(String),
    Input(String),
    Backend(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Backend(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Config(m) | CliError::Input(m) | CliError::Backend(m) => m,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } => CliError::Io(e.to_string()),
            DatasetError::WrongTask { .. } => CliError::Config(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Spec(_) | BackendError::Lexicon { .. } => CliError::Config(e.to_string()),
            BackendError::EmptyInput { .. } => CliError::Input(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

impl From<AugmentError> for CliError {
    fn from(e: AugmentError) -> Self {
        match e {
            AugmentError::Plan(p) => CliError::Config(p.to_string()),
            AugmentError::Backend(b) => b.into(),
            AugmentError::Dataset(d) => d.into(),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "simplaug",
    version,
    about = "Text simplification for NLP training and evaluation data"
)]
struct Cli {
    /// Log level: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simplify raw text, one input per line.
    Simplify(SimplifyArgs),
    /// Build an augmented training set and its manifest.
    Augment(AugmentArgs),
    /// Rewrite evaluation data for prediction-time simplification.
    PrepareEval(PrepareEvalArgs),
    /// BLEU divergence between original and simplified datasets.
    Report(ReportArgs),
    /// How many relation simplifications keep both entities.
    FilterStats(FilterStatsArgs),
}

#[derive(Args)]
struct BackendArgs {
    /// echo, rules[:LEXICON], proc:COMMAND or http:URL.
    #[arg(long, env = BACKEND_ENV)]
    backend: Option<String>,
    #[arg(long, default_value_t = simplaug::backend::DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    /// Seconds to wait for a backend answer (and for the proc handshake).
    #[arg(long, default_value_t = simplaug::backend::DEFAULT_TIMEOUT.as_secs_f64())]
    timeout: f64,
    /// Concurrent requests for http backends.
    #[arg(long, default_value_t = simplaug::backend::DEFAULT_HTTP_CONCURRENCY)]
    concurrency: usize,
}

impl BackendArgs {
    fn spec(&self) -> Result<BackendSpec> {
        let raw = self.backend.as_deref().ok_or_else(|| {
            CliError::Config(format!("no backend given (use --backend or {BACKEND_ENV})"))
        })?;
        let mut spec: BackendSpec = raw.parse()?;
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err(CliError::Config(
                "timeout must be a positive number of seconds".into(),
            ));
        }
        spec.batch_size = self.batch_size;
        spec.timeout = Duration::from_secs_f64(self.timeout);
        spec.max_concurrency = self.concurrency;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    output: PathBuf,
    /// Overwrite an existing output or manifest.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SimplifyArgs {
    #[command(flatten)]
    backend: BackendArgs,
    /// Input file; standard input when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Append,
    Swap,
    ReplaceIfPreserved,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Append => Strategy::Append,
            StrategyArg::Swap => Strategy::Swap,
            StrategyArg::ReplaceIfPreserved => Strategy::ReplaceIfPreserved,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    EntityPreservation,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalModeArg {
    Original,
    Simplified,
    SimplifiedComplement,
}

impl From<EvalModeArg> for EvalMode {
    fn from(m: EvalModeArg) -> Self {
        match m {
            EvalModeArg::Original => EvalMode::Original,
            EvalModeArg::Simplified => EvalMode::Simplified,
            EvalModeArg::SimplifiedComplement => EvalMode::SimplifiedComplement,
        }
    }
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long, value_parser = parse_task)]
    task: Task,
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// Share of examples to simplify (append and swap).
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    seed: u64,
    /// Defaults to entity-preservation for relation data, none otherwise.
    #[arg(long, value_enum)]
    filter: Option<FilterArg>,
    /// Comma-separated text fields to simplify.
    #[arg(long, value_delimiter = ',')]
    fields: Vec<String>,
    #[arg(long, default_value = augment::DEFAULT_ID_SUFFIX)]
    id_suffix: String,
}

#[derive(Args)]
struct PrepareEvalArgs {
    #[arg(long, value_parser = parse_task)]
    task: Task,
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    out: OutputArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long, value_enum)]
    mode: EvalModeArg,
    #[arg(long, value_delimiter = ',')]
    fields: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ZeroPolicyArg {
    ScoreZero,
    CapOrder,
}

#[derive(Args)]
struct ReportArgs {
    /// Task of both datasets; read from the manifest when --manifest is used.
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    #[arg(long, requires = "simplified", conflicts_with = "manifest")]
    original: Option<PathBuf>,
    #[arg(long, requires = "original")]
    simplified: Option<PathBuf>,
    /// Manifest of an augment or prepare-eval run; compares its input and output.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Write the structured report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    max_order: usize,
    #[arg(long, value_enum, default_value = "cap-order")]
    zero_policy: ZeroPolicyArg,
    #[arg(long)]
    case_sensitive: bool,
}

#[derive(Args)]
struct FilterStatsArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    /// Write the structured record here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    s.parse()
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

fn check_writable(out: &OutputArgs) -> Result<()> {
    if out.force {
        return Ok(());
    }
    for p in [out.output.clone(), manifest_path(&out.output)] {
        if p.exists() {
            return Err(CliError::Config(format!(
                "{} exists (use --force to overwrite)",
                p.display()
            )));
        }
    }
    Ok(())
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_dataset(task: Task, path: &Path) -> Result<Dataset> {
    Ok(dataset::read(task, path)?)
}

fn open_backend(args: &BackendArgs) -> Result<(BackendSpec, Box<dyn Simplifier>)> {
    let spec = args.spec()?;
    let backend = spec.open()?;
    Ok((spec, backend))
}

fn cmd_simplify(args: SimplifyArgs) -> Result<()> {
    let text = match &args.input {
        Some(p) => {
            fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?
        }
        None => {
            let mut s = String::new();
            io::stdin()
                .lock()
                .read_to_string(&mut s)
                .map_err(|e| CliError::Io(format!("stdin: {e}")))?;
            s
        }
    };
    let lines: Vec<&str> = text.lines().collect();
    let nonblank: Vec<&str> = lines
        .iter()
        .copied()
        .filter(|l| !l.trim().is_empty())
        .collect();
    let (_, mut backend) = open_backend(&args.backend)?;
    let outcomes = simplify_batch(&mut backend, &nonblank)?;
    let mut outcomes = outcomes.into_iter();
    let mut out = String::new();
    let mut failed = 0;
    for line in lines {
        if line.trim().is_empty() {
            out.push('\n');
            continue;
        }
        let o = outcomes.next().expect("one outcome per non-blank line");
        failed += o.error.is_some() as usize;
        out.push_str(&o.simplified);
        out.push('\n');
    }
    if failed > 0 {
        log::warn!("{failed} line(s) failed and were copied unchanged");
    }
    match &args.output {
        Some(p) => write_file(p, out.as_bytes()),
        None => io::stdout()
            .lock()
            .write_all(out.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn finish_run(out: &OutputArgs, result: &Dataset, manifest: RunManifest) -> Result<()> {
    write_file(&out.output, &result.to_bytes())?;
    write_file(&manifest_path(&out.output), manifest.to_json().as_bytes())?;
    let c = &manifest.counts;
    eprintln!(
        "wrote {} records (input {}, selected {}, appended {}, swapped {}, failed {}, unchanged {}, filtered {})",
        c.output, c.input, c.selected, c.appended, c.swapped, c.failed, c.unchanged, c.filtered
    );
    Ok(())
}

fn cmd_augment(args: AugmentArgs) -> Result<()> {
    let strategy: Strategy = args.strategy.into();
    if strategy == Strategy::ReplaceIfPreserved && args.fraction.is_some() {
        return Err(CliError::Config(
            "--fraction cannot be used with replace-if-preserved".into(),
        ));
    }
    let filter = match args.filter {
        Some(FilterArg::EntityPreservation) => FilterMode::EntityPreservation,
        Some(FilterArg::None) => FilterMode::None,
        None => FilterMode::for_task(args.task),
    };
    let mut plan = AugmentationPlan::new(strategy, args.fraction, args.seed, filter);
    plan.fields = args.fields;
    plan.id_suffix = args.id_suffix;
    plan.validate(args.task)
        .map_err(|e| CliError::Config(e.to_string()))?;
    check_writable(&args.out)?;

    let input = read_dataset(args.task, &args.input)?;
    let (spec, mut backend) = open_backend(&args.backend)?;
    let (result, counts) = augment::augment(&input, &mut backend, &plan)?;
    let manifest = RunManifest {
        tool: "simplaug".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "augment".into(),
        task: args.task,
        input: args.input.display().to_string(),
        output: args.out.output.display().to_string(),
        backend: spec.to_string(),
        seed: Some(plan.seed),
        plan: Some(plan),
        eval_mode: None,
        counts,
    };
    finish_run(&args.out, &result, manifest)
}

fn cmd_prepare_eval(args: PrepareEvalArgs) -> Result<()> {
    let mode: EvalMode = args.mode.into();
    check_writable(&args.out)?;
    let input = read_dataset(args.task, &args.input)?;
    let (spec, mut backend): (String, Box<dyn Simplifier>) = match (mode, &args.backend.backend) {
        (EvalMode::Original, None) => ("echo".into(), Box::new(simplaug::backend::EchoBackend)),
        _ => {
            let (spec, backend) = open_backend(&args.backend)?;
            (spec.to_string(), backend)
        }
    };
    let (result, counts) = augment::prepare_eval(&input, &mut backend, mode, &args.fields)?;
    let manifest = RunManifest {
        tool: "simplaug".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "prepare-eval".into(),
        task: args.task,
        input: args.input.display().to_string(),
        output: args.out.output.display().to_string(),
        backend: spec,
        plan: None,
        eval_mode: Some(mode),
        seed: None,
        counts,
    };
    finish_run(&args.out, &result, manifest)
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let cfg = BleuConfig {
        max_order: args.max_order,
        zero_policy: match args.zero_policy {
            ZeroPolicyArg::ScoreZero => ZeroPolicy::ScoreZero,
            ZeroPolicyArg::CapOrder => ZeroPolicy::CapOrder,
        },
        lowercase: !args.case_sensitive,
    };
    if cfg.max_order == 0 {
        return Err(CliError::Config("--max-order must be at least 1".into()));
    }
    let (task, original, simplified, suffix) =
        match (&args.manifest, &args.original, &args.simplified) {
            (Some(m), _, _) => {
                let text = fs::read_to_string(m)
                    .map_err(|e| CliError::Io(format!("{}: {e}", m.display())))?;
                let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| {
                    CliError::Input(format!("{}: not a run manifest ({e})", m.display()))
                })?;
                if args.task.is_some_and(|t| t != manifest.task) {
                    return Err(CliError::Config(
                        "--task disagrees with the manifest".into(),
                    ));
                }
                let suffix = manifest
                    .plan
                    .as_ref()
                    .filter(|p| p.strategy == Strategy::Append)
                    .map(|p| p.id_suffix.clone());
                (
                    manifest.task,
                    PathBuf::from(&manifest.input),
                    PathBuf::from(&manifest.output),
                    suffix,
                )
            }
            (None, Some(o), Some(s)) => {
                let task = args.task.ok_or_else(|| {
                    CliError::Config("--task is required with --original/--simplified".into())
                })?;
                (task, o.clone(), s.clone(), None)
            }
            _ => {
                return Err(CliError::Config(
                    "give either --manifest or both --original and --simplified".into(),
                ))
            }
        };
    let original = read_dataset(task, &original)?;
    let simplified = read_dataset(task, &simplified)?;
    let pairs = dataset::align_for_report(&original, &simplified, suffix.as_deref())?;
    let report = divergence_report_for(&original.text_field_names(), &pairs, &cfg);
    print!("{}", report.render_text());
    if let Some(out) = &args.out {
        let json = serde_json::to_string_pretty(&report.to_json()).expect("report serializes");
        write_file(out, format!("{json}\n").as_bytes())?;
    }
    Ok(())
}

fn cmd_filter_stats(args: FilterStatsArgs) -> Result<()> {
    let input = read_dataset(Task::Relation, &args.input)?;
    let (_, mut backend) = open_backend(&args.backend)?;
    let texts: Vec<String> = match &input.examples {
        dataset::Examples::Relation(v) => v.iter().map(|e| e.text()).collect(),
        _ => unreachable!("read as relation data"),
    };
    let outcomes = simplify_batch(&mut backend, &texts)?;
    let stats = filter_stats(&input, &outcomes).map_err(CliError::Input)?;
    println!("{}", stats.summary_line());
    println!("{}", stats.changed_line());
    if let Some(out) = &args.out {
        let json = serde_json::to_string_pretty(&stats).expect("stats serialize");
        write_file(out, format!("{json}\n").as_bytes())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .target(env_logger::Target::Stderr)
        .init();
    let result = match cli.command {
        Command::Simplify(a) => cmd_simplify(a),
        Command::Augment(a) => cmd_augment(a),
        Command::PrepareEval(a) => cmd_prepare_eval(a),
        Command::Report(a) => cmd_report(a),
        Command::FilterStats(a) => cmd_filter_stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("simplaug: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
