//! The `helm` command line: interactive classification, compilation, journal
//! evaluation, the scheduler benchmark, engine comparison and the HTTP service.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use helm_core::bms::SchedulerPolicy;
use helm_core::harness::{
    compare_engines, random_tree_benchmark, single_attribute_cases, summarize, write_csv,
    TreeBenchConfig, REFERENCE_COUNTS,
};
use helm_core::net::{save_network, validate, Evidence, Network};
use helm_core::session::{CompiledModel, EngineKind, JournalEntry, Session, DEFAULT_STOP_THRESHOLD};

mod classify;
pub mod service;

pub use classify::classify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "helm", version, about = "Ship classification with belief networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Interactive session: answer questions, volunteer evidence, watch the ranking.
    Classify(ClassifyArgs),
    /// Compile a feature model into network files.
    Compile(CompileArgs),
    /// Replay journal files and print the resulting rankings.
    Eval(EvalArgs),
    /// Activation counts of the agenda policies on random trees (CSV).
    BenchSched(BenchArgs),
    /// Run both engines on the same evidence and report agreement (JSON).
    Compare(CompareArgs),
    /// HTTP/JSON service for operator consoles.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Feature model JSON file.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "bms")]
    engine: EngineKind,
    /// Stop once the leading class reaches this probability.
    #[arg(long, default_value_t = DEFAULT_STOP_THRESHOLD)]
    threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Target {
    Bms,
    Prospector,
    Both,
}

#[derive(Debug, Args)]
struct CompileArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "both")]
    engine: Target,
    /// Write `<model>.<engine>.json` files here instead of printing.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "bms")]
    engine: EngineKind,
    /// Journal files as written by the service or `classify`.
    #[arg(required = true)]
    journals: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 24)]
    nodes: usize,
    #[arg(long, default_value_t = 8)]
    evidence: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    max_states: usize,
    /// Comma-separated subset of lifo, fifo, fifo-dedup.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<SchedulerPolicy>>,
    /// Write 0 in the timing column so output is byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// JSON list of evidence lists; defaults to every single-attribute observation.
    #[arg(long)]
    cases: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8642)]
    port: u16,
    /// Directory of feature models; falls back to $HELM_MODELS_DIR, then ./models.
    #[arg(long)]
    models_dir: Option<PathBuf>,
    /// Where session journals are written on shutdown.
    #[arg(long, default_value = "journals")]
    journal_dir: PathBuf,
}

pub fn load_model(path: &Path) -> anyhow::Result<Arc<CompiledModel>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let name = model_name(path);
    let model = CompiledModel::from_json(&name, &text).with_context(|| format!("model {}", path.display()))?;
    Ok(Arc::new(model))
}

/// File stem, so `models/stern-plan-view.json` is `stern-plan-view`.
pub fn model_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run_cli<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command, input, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_DATA
        }
    }
}

fn dispatch(command: Command, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    match command {
        Command::Classify(args) => {
            if !(args.threshold > 0.0) {
                bail!("threshold must be positive");
            }
            let model = load_model(&args.model.model)?;
            let mut session = Session::start("cli", model, args.engine);
            classify(&mut session, args.threshold, input, out)
        }
        Command::Compile(args) => compile(args, out, err),
        Command::Eval(args) => eval(args, out),
        Command::BenchSched(args) => bench(args, out, err),
        Command::Compare(args) => compare(args, out, err),
        Command::Serve(args) => {
            let models_dir = args
                .models_dir
                .or_else(|| std::env::var_os("HELM_MODELS_DIR").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("models"));
            let config = service::ServeConfig {
                port: args.port,
                models_dir,
                journal_dir: args.journal_dir,
            };
            tokio::runtime::Runtime::new()?.block_on(service::serve(config, err))
        }
    }
}

fn compile(args: CompileArgs, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    let model = load_model(&args.model.model)?;
    let mut outputs = Vec::new();
    if args.engine != Target::Prospector {
        outputs.push(("bms", Network::Variable((*model.variables).clone())));
    }
    if args.engine != Target::Bms {
        outputs.push(("prospector", Network::Proposition((*model.propositions).clone())));
    }
    for (kind, network) in outputs {
        for note in validate(&network).notes {
            writeln!(err, "note ({kind}): {note}")?;
        }
        let text = save_network(&network);
        match &args.out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("{}.{kind}.json", model.name));
                std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
                writeln!(err, "wrote {}", path.display())?;
            }
            None => out.write_all(text.as_bytes())?,
        }
    }
    Ok(())
}

/// A journal file: either a bare entry list or an object holding one under `journal`.
fn read_journal(path: &Path) -> anyhow::Result<Vec<JournalEntry>> {
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum File {
        Bare(Vec<JournalEntry>),
        Wrapped { journal: Vec<JournalEntry> },
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: File = serde_json::from_str(&text).with_context(|| format!("journal {}", path.display()))?;
    Ok(match file {
        File::Bare(j) | File::Wrapped { journal: j } => j,
    })
}

fn eval(args: EvalArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let model = load_model(&args.model.model)?;
    let mut results = Vec::new();
    for path in &args.journals {
        let journal = read_journal(path)?;
        let session = Session::replay(&model_name(path), Arc::clone(&model), args.engine, journal)
            .with_context(|| format!("replaying {}", path.display()))?;
        let ranking: Vec<serde_json::Value> = session
            .ranking()?
            .into_iter()
            .map(|(class, p)| serde_json::json!({ "class": class, "probability": p }))
            .collect();
        results.push(serde_json::json!({
            "journal": path.display().to_string(),
            "engine": args.engine,
            "ranking": ranking,
        }));
    }
    serde_json::to_writer_pretty(&mut *out, &results)?;
    writeln!(out)?;
    Ok(())
}

fn bench(args: BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    if args.nodes == 0 || args.max_states < 2 {
        bail!("need --nodes >= 1 and --max-states >= 2");
    }
    let mut config = TreeBenchConfig::new(args.nodes, args.evidence, args.trials, args.seed);
    config.max_states = args.max_states;
    if let Some(policies) = args.policies {
        config.policies = policies;
    }
    let records = random_tree_benchmark(&config)?;
    write_csv(&records, !args.no_timing, out)?;
    let summary = summarize(&records);
    let medians: Vec<String> = summary.medians.iter().map(|(p, m)| format!("{p}={m}")).collect();
    let reference: Vec<String> = REFERENCE_COUNTS.iter().map(|(p, c)| format!("{p}={c}")).collect();
    writeln!(err, "median activations: {}", medians.join(" "))?;
    writeln!(err, "reference (24-node tree, 8 observations): {}", reference.join(" "))?;
    writeln!(
        err,
        "trials {} failed {} ordering violations {} max policy spread {:.1e}",
        summary.trials, summary.failures, summary.ordering_violations, summary.max_policy_spread
    )?;
    for r in records.iter().filter(|r| r.failed()) {
        writeln!(err, "trial {} failed: {}", r.trial, r.failure.as_deref().unwrap_or(""))?;
    }
    Ok(())
}

fn compare(args: CompareArgs, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    let model = load_model(&args.model.model)?;
    let cases: Vec<Vec<Evidence>> = match &args.cases {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("cases {}", path.display()))?
        }
        None => single_attribute_cases(&model),
    };
    writeln!(
        err,
        "reference (original image trials, not reproducible here): both engines ranked the correct class first on the same 39 of 52 images; its rank differed on 4"
    )?;
    let report = compare_engines(&model, &cases)?;
    writeln!(
        err,
        "top class agrees on {} of {} cases; mean rank difference {:.3}",
        report.top_agreements,
        report.cases.len(),
        report.mean_rank_difference
    )?;
    serde_json::to_writer_pretty(&mut *out, &report)?;
    writeln!(out)?;
    Ok(())
}
