//! Benchmark execution into a run directory.
//!
//! ```text
//! <out>/config.json        pipeline configuration snapshot
//! <out>/traces/<id>.json   one reasoning trace per question
//! <out>/results.jsonl      one QuestionResult per line
//! <out>/report.json        aggregates, stratified table, all rows
//! <out>/results.csv
//! <out>/stratified.csv     when every question has a difficulty
//! ```
//!
//! Rerunning into the same directory skips questions that already have a
//! successful row; errored questions are attempted again.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::engine::{Engine, EngineError};
use crate::exec::{self, Execution};
use crate::harness::metrics::{score, Score};
use crate::harness::report::{write_stratified_csv, QuestionResult, Report, ReportError};
use crate::model::{Question, QuestionKind};
use crate::trace::ReasoningTrace;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(
        "{0} holds a run with a different pipeline configuration; choose another output directory or start fresh"
    )]
    ConfigMismatch(PathBuf),
    #[error(transparent)]
    Report(#[from] ReportError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Method name recorded in the report.
    pub name: String,
    /// Dataset label recorded in the report.
    pub dataset: String,
    /// Maximum number of questions in flight; 0 lets the pool decide.
    pub parallelism: usize,
    pub execution: Execution,
    /// Discard an existing run in `out_dir` instead of resuming it.
    pub fresh: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            out_dir: out_dir.into(),
            name: "run".to_string(),
            dataset: String::new(),
            parallelism: 1,
            execution: Execution::default(),
            fresh: false,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    name: String,
    dataset: String,
    config: PipelineConfig,
}

/// File name used for a question's trace.
pub fn trace_file_name(question_id: &str) -> String {
    let safe: String = question_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.json")
}

fn read_results(path: &Path) -> Result<Vec<QuestionResult>, HarnessError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<QuestionResult>(&line) {
            Ok(r) => out.push(r),
            // A torn final line from an interrupted run.
            Err(e) => log::warn!("{}:{}: skipping unreadable row: {e}", path.display(), i + 1),
        }
    }
    Ok(out)
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

fn evaluate(engine: &Engine, question: &Question, traces: &Path) -> (QuestionResult, Option<EngineError>) {
    let (predicted, trace, error) = match engine.try_answer(question) {
        Ok(a) => (a.final_answer, a.trace, None),
        Err(f) => (String::new(), f.trace, Some(f.error)),
    };
    let trace_path = traces.join(trace_file_name(&question.id));
    let trace_path = match trace.save(&trace_path) {
        Ok(()) => Some(format!("traces/{}", trace_file_name(&question.id))),
        Err(e) => {
            log::error!("could not write trace {}: {e}", trace_path.display());
            None
        }
    };
    let mut result = QuestionResult {
        question_id: question.id.clone(),
        kind: question.kind(),
        predicted: predicted.clone(),
        gold: question.gold.clone(),
        correct: None,
        em: None,
        f1: None,
        system2_triggered: trace.system2_triggered,
        difficulty: question.difficulty,
        usage: trace.total_usage,
        backend_calls: trace.backend_calls(),
        trace_path,
        error: error.as_ref().map(ToString::to_string),
    };
    let s = match (&error, question.kind()) {
        (None, _) => score(question, &predicted),
        (Some(_), QuestionKind::Mcq) => Score::Mcq { correct: false },
        (Some(_), QuestionKind::OpenQa) => Score::Open { em: false, f1: 0.0 },
    };
    result.set_score(s);
    (result, error)
}

/// Answers every question, persisting traces and rows as it goes, and
/// writes the report. Per-question failures are recorded and scored as
/// wrong; only configuration problems abort the run.
pub fn run_benchmark(engine: &Engine, questions: &[Question], opts: &RunOptions) -> Result<Report, HarnessError> {
    let out = &opts.out_dir;
    let traces = out.join("traces");
    std::fs::create_dir_all(&traces).map_err(io_err(&traces))?;

    let snapshot_path = out.join("config.json");
    let results_path = out.join("results.jsonl");
    if opts.fresh {
        for p in [&results_path, &snapshot_path] {
            if p.exists() {
                std::fs::remove_file(p).map_err(io_err(p))?;
            }
        }
    }
    if let Ok(text) = std::fs::read_to_string(&snapshot_path) {
        let old: Snapshot = serde_json::from_str(&text).map_err(|_| HarnessError::ConfigMismatch(out.clone()))?;
        if old.config != *engine.config() {
            return Err(HarnessError::ConfigMismatch(out.clone()));
        }
    }
    let snapshot = Snapshot {
        name: opts.name.clone(),
        dataset: opts.dataset.clone(),
        config: engine.config().clone(),
    };
    write_atomic(&snapshot_path, &serde_json::to_string_pretty(&snapshot).expect("snapshot serializes"))?;

    let wanted: HashMap<&str, &Question> = questions.iter().map(|q| (q.id.as_str(), q)).collect();
    let mut done: HashMap<String, QuestionResult> = HashMap::new();
    for r in read_results(&results_path)? {
        if r.error.is_none() && wanted.contains_key(r.question_id.as_str()) {
            done.insert(r.question_id.clone(), r);
        }
    }
    let pending: Vec<&Question> = questions.iter().filter(|q| !done.contains_key(&q.id)).collect();
    log::info!(
        "{}: {} question(s), {} already done, {} to run",
        opts.name,
        questions.len(),
        done.len(),
        pending.len()
    );

    let sink = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&results_path)
        .map_err(io_err(&results_path))?;
    let sink = Mutex::new(sink);
    let outcomes = exec::map_with(opts.execution, opts.parallelism, &pending, |q| {
        let (result, error) = evaluate(engine, q, &traces);
        if let Some(e) = &error {
            log::warn!("question {} failed: {e}", q.id);
        }
        let line = serde_json::to_string(&result).expect("result serializes");
        let mut f = sink.lock().expect("results lock");
        if let Err(e) = writeln!(f, "{line}") {
            log::error!("could not append to {}: {e}", results_path.display());
        }
        (result, error)
    });
    drop(sink);

    let mut fatal = None;
    for (result, error) in outcomes {
        if let Some(e) = error {
            if e.is_config() && fatal.is_none() {
                fatal = Some(e);
            }
        }
        done.insert(result.question_id.clone(), result);
    }
    if let Some(e) = fatal {
        return Err(HarnessError::Engine(e));
    }

    let results: Vec<QuestionResult> = questions.iter().filter_map(|q| done.remove(&q.id)).collect();
    let report = Report::new(&opts.name, &opts.dataset, engine.config().clone(), results);

    // Rewrite the rows once, in report order, without duplicates.
    let mut rows = String::new();
    for r in &report.results {
        rows.push_str(&serde_json::to_string(r).expect("result serializes"));
        rows.push('\n');
    }
    write_atomic(&results_path, &rows)?;
    write_atomic(&out.join("report.json"), &report.to_json())?;
    report.write_results_csv(&out.join("results.csv"))?;
    if let Some(rows) = &report.stratified {
        write_stratified_csv(rows, &out.join("stratified.csv"))?;
    }
    Ok(report)
}

/// Loads every trace referenced by a report from its run directory.
pub fn load_traces(out_dir: &Path, report: &Report) -> Result<Vec<ReasoningTrace>, HarnessError> {
    report
        .results
        .iter()
        .filter_map(|r| r.trace_path.as_ref())
        .map(|p| {
            let path = out_dir.join(p);
            ReasoningTrace::load(&path).map_err(io_err(&path))
        })
        .collect()
}

pub fn load_report(out_dir: &Path) -> Result<Report, HarnessError> {
    let path = out_dir.join("report.json");
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Io {
        path,
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })
}
