//! `twofold`: ask questions, build retrieval indexes, run benchmarks and
//! ablations, and inspect reasoning traces.
//!
//! Exit status is 0 on success, 1 when a question fails at run time and 2 for
//! configuration or usage errors.

mod commands;
mod config;
mod show;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twofold_core::agents::TemplateError;
use twofold_core::harness::{DatasetError, HarnessError};
use twofold_core::{BackendError, ConfigError, EngineError, IngestError, ModelError};

use crate::config::{Overrides, UsageError};

#[derive(Debug, Parser)]
#[command(name = "twofold", version, about = "Reflection-gated two-system question answering")]
struct Cli {
    /// Run configuration file (TOML). Flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Log level: error, warn, info, debug or trace. RUST_LOG takes precedence.
    #[arg(long, global = true, value_name = "LEVEL")]
    log_level: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Answer one question and save its trace.
    Ask(AskArgs),
    /// Run a dataset through one pipeline configuration.
    Bench(BenchArgs),
    /// Run a dataset through every ablation preset (or a chosen subset).
    Ablate(AblateArgs),
    /// Retrieval index management.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Reasoning trace inspection.
    #[command(subcommand)]
    Trace(TraceCommand),
}

#[derive(Debug, Args)]
struct BackendArgs {
    /// Replay completions from a JSON script instead of calling a server.
    #[arg(long, value_name = "PATH")]
    script: Option<PathBuf>,
    /// Chat-completion base URL, e.g. http://localhost:8000/v1.
    #[arg(long, value_name = "URL")]
    endpoint: Option<String>,
    /// Model name sent to the endpoint.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// BM25 index snapshot used by the Search stage.
    #[arg(long, value_name = "PATH")]
    index: Option<PathBuf>,
    /// Directory of `<agent>.txt` prompt templates overriding the defaults.
    #[arg(long, value_name = "DIR")]
    prompts: Option<PathBuf>,
    /// Documents retrieved per search query.
    #[arg(long, value_name = "K")]
    k_retrieval: Option<usize>,
}

#[derive(Debug, Args)]
struct AskArgs {
    /// Question text. Use --file to read a dataset row instead.
    #[arg(required_unless_present = "file", conflicts_with = "file")]
    question: Option<String>,
    /// JSONL dataset file; the first row (or the row named by --id) is asked.
    #[arg(long, value_name = "PATH")]
    file: Option<PathBuf>,
    /// Question id for the trace (with text) or row to pick (with --file).
    #[arg(long)]
    id: Option<String>,
    /// Multiple-choice option as LABEL=TEXT; repeat for each option.
    #[arg(long = "option", value_name = "LABEL=TEXT")]
    options: Vec<String>,
    /// Ablation preset name or slug.
    #[arg(long)]
    preset: Option<String>,
    /// Run System 2 regardless of the reflection verdict.
    #[arg(long)]
    force_system2: bool,
    /// Directory receiving `traces/<id>.json` (default runs/ask).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSONL dataset.
    #[arg(long, value_name = "PATH")]
    dataset: Option<PathBuf>,
    /// Use only the first N questions (after shuffling, if seeded).
    #[arg(long, value_name = "N")]
    limit: Option<usize>,
    /// Shuffle the dataset with this seed before applying --limit.
    #[arg(long)]
    seed: Option<u64>,
    /// Questions answered concurrently.
    #[arg(long, value_name = "N")]
    parallelism: Option<usize>,
    /// Disable the worker pool entirely.
    #[arg(long)]
    sequential: bool,
    /// Run directory. An existing run there is resumed.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Method name recorded in the report.
    #[arg(long)]
    name: Option<String>,
    /// Discard an existing run in --out instead of resuming it.
    #[arg(long)]
    fresh: bool,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Ablation preset name or slug.
    #[arg(long)]
    preset: Option<String>,
    /// Run System 2 regardless of the reflection verdict.
    #[arg(long)]
    force_system2: bool,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct AblateArgs {
    /// Comma-separated preset slugs to run (default: all).
    #[arg(long, value_delimiter = ',', value_name = "SLUG,...")]
    presets: Vec<String>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum IndexCommand {
    /// Build a BM25 index from a corpus.jsonl file.
    Build {
        /// JSONL corpus with `id`, optional `title` and `text` per line.
        #[arg(long, value_name = "PATH")]
        corpus: PathBuf,
        /// Where to write the index snapshot.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Term-frequency saturation.
        #[arg(long, default_value_t = 1.2)]
        k1: f64,
        /// Length normalization.
        #[arg(long, default_value_t = 0.75)]
        b: f64,
    },
}

#[derive(Debug, Subcommand)]
enum TraceCommand {
    /// Print a stored trace, one section per agent step.
    Show {
        /// Trace JSON file, or a run directory together with --id.
        path: PathBuf,
        /// Question id when PATH is a run directory.
        #[arg(long)]
        id: Option<String>,
        /// Include the prompts sent on every attempt.
        #[arg(long)]
        prompts: bool,
        /// Print the raw JSON instead.
        #[arg(long)]
        json: bool,
    },
}

impl RunArgs {
    fn overrides(&self, log_level: Option<String>) -> Overrides {
        Overrides {
            index: self.pipeline.index.clone(),
            prompts: self.pipeline.prompts.clone(),
            k_retrieval: self.pipeline.k_retrieval,
            script: self.backend.script.clone(),
            endpoint: self.backend.endpoint.clone(),
            model: self.backend.model.clone(),
            dataset: self.dataset.clone(),
            limit: self.limit,
            seed: self.seed,
            parallelism: self.parallelism,
            sequential: self.sequential,
            out: self.out.clone(),
            name: self.name.clone(),
            log_level,
            ..Overrides::default()
        }
    }
}

/// 2 for anything the user can fix by changing flags, files or config;
/// 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>()
            || cause.is::<ConfigError>()
            || cause.is::<DatasetError>()
            || cause.is::<IngestError>()
            || cause.is::<TemplateError>()
            || cause.is::<ModelError>()
            || cause.is::<clap::Error>()
        {
            return 2;
        }
        if let Some(BackendError::Config(_)) = cause.downcast_ref::<BackendError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<EngineError>() {
            if e.is_config() {
                return 2;
            }
        }
        if let Some(e) = cause.downcast_ref::<HarnessError>() {
            match e {
                HarnessError::Config(_) | HarnessError::ConfigMismatch(_) => return 2,
                HarnessError::Engine(e) if e.is_config() => return 2,
                _ => {}
            }
        }
    }
    1
}

/// The error chain joined with `: `, skipping causes whose text the previous
/// message already includes.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !last.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
        last = text;
    }
    out
}

fn init_logging(level: &str) {
    let env = env_logger::Env::default().default_filter_or(level);
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let cfg_path = cli.config.as_deref();
    match cli.command {
        Command::Ask(a) => {
            let flags = Overrides {
                preset: a.preset.clone(),
                force_system2: a.force_system2,
                index: a.pipeline.index.clone(),
                prompts: a.pipeline.prompts.clone(),
                k_retrieval: a.pipeline.k_retrieval,
                script: a.backend.script.clone(),
                endpoint: a.backend.endpoint.clone(),
                model: a.backend.model.clone(),
                out: a.out.clone(),
                log_level: cli.log_level,
                ..Overrides::default()
            };
            let rc = config::RunConfig::load(cfg_path, &flags)?;
            init_logging(&rc.log_level);
            let question = commands::ask_question(a.question.as_deref(), a.file.as_deref(), a.id.as_deref(), &a.options)?;
            commands::ask(&rc, &question)
        }
        Command::Bench(b) => {
            let flags = Overrides {
                preset: b.preset.clone(),
                force_system2: b.force_system2,
                ..b.run.overrides(cli.log_level)
            };
            let rc = config::RunConfig::load(cfg_path, &flags)?;
            init_logging(&rc.log_level);
            commands::bench(&rc, b.run.fresh)
        }
        Command::Ablate(a) => {
            let rc = config::RunConfig::load(cfg_path, &a.run.overrides(cli.log_level))?;
            init_logging(&rc.log_level);
            commands::ablate(&rc, &a.presets, a.run.fresh)
        }
        Command::Index(IndexCommand::Build { corpus, out, k1, b }) => {
            init_logging(cli.log_level.as_deref().unwrap_or("warn"));
            commands::index_build(&corpus, &out, k1, b)
        }
        Command::Trace(TraceCommand::Show { path, id, prompts, json }) => {
            show::trace_show(&path, id.as_deref(), prompts, json)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
