use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use twofold_core::agents::PromptSet;
use twofold_core::harness::{
    ablation_sweep, load_dataset, parse_jsonl, run_benchmark, trace_file_name, Aggregates, Report, RunOptions,
};
use twofold_core::{
    ablation_presets, preset, Bm25Index, Bm25Params, Corpus, Engine, PipelineConfig, Preset, Question, Retriever,
};

use crate::config::{usage, RunConfig};

fn retriever(rc: &RunConfig) -> anyhow::Result<Option<Arc<dyn Retriever>>> {
    match &rc.index {
        Some(path) => {
            let idx = Bm25Index::load(path).with_context(|| format!("loading index {}", path.display()))?;
            log::info!("loaded index {} ({} documents)", path.display(), idx.len());
            Ok(Some(Arc::new(idx)))
        }
        None => Ok(None),
    }
}

fn engine(rc: &RunConfig, pipeline: PipelineConfig) -> anyhow::Result<Engine> {
    let spec = rc
        .backend
        .as_ref()
        .ok_or_else(|| usage("no backend configured: pass --script, --endpoint with --model, or a [backend] section"))?;
    let mut engine = Engine::new(pipeline, spec.build()?, retriever(rc)?)?;
    for (agent, spec) in &rc.agent_backends {
        engine = engine.with_agent_backend(*agent, spec.build()?);
    }
    if let Some(dir) = &rc.prompts {
        engine = engine.with_prompts(PromptSet::with_overrides(dir)?);
    }
    Ok(engine)
}

fn parse_option(raw: &str) -> anyhow::Result<(String, String)> {
    match raw.split_once('=') {
        Some((l, t)) if !l.trim().is_empty() => Ok((l.trim().to_string(), t.trim().to_string())),
        _ => Err(usage(format!("--option expects LABEL=TEXT, got `{raw}`"))),
    }
}

/// The question for `ask`, from literal text or from a dataset file.
pub fn ask_question(
    text: Option<&str>,
    file: Option<&Path>,
    id: Option<&str>,
    options: &[String],
) -> anyhow::Result<Question> {
    if let Some(path) = file {
        if !options.is_empty() {
            return Err(usage("--option cannot be combined with --file"));
        }
        let body = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let questions = parse_jsonl(&body, None)?;
        let picked = match id {
            Some(id) => questions.into_iter().find(|q| q.id == id),
            None => questions.into_iter().next(),
        };
        return picked.ok_or_else(|| usage(format!("no matching question in {}", path.display())));
    }
    let text = text.ok_or_else(|| usage("a question text or --file is required"))?;
    let id = id.unwrap_or("ask");
    let q = if options.is_empty() {
        Question::open(id, text)?
    } else {
        let opts = options.iter().map(|o| parse_option(o)).collect::<anyhow::Result<Vec<_>>>()?;
        Question::mcq(id, text, opts)?
    };
    Ok(q)
}

pub fn ask(rc: &RunConfig, question: &Question) -> anyhow::Result<ExitCode> {
    let engine = engine(rc, rc.pipeline.clone())?;
    let out = rc.out.clone().unwrap_or_else(|| PathBuf::from("runs/ask"));
    let trace_path = out.join("traces").join(trace_file_name(&question.id));
    let (trace, result) = match engine.try_answer(question) {
        Ok(a) => (a.trace, Ok(a.final_answer)),
        Err(f) => (f.trace, Err(f.error)),
    };
    trace
        .save(&trace_path)
        .with_context(|| format!("writing {}", trace_path.display()))?;
    let answer = result?;
    let u = trace.total_usage;
    println!("answer: {answer}");
    println!("system 2: {}", if trace.system2_triggered { "triggered" } else { "not triggered" });
    println!(
        "tokens: {} (prompt {}, completion {}{})",
        u.total(),
        u.prompt_tokens,
        u.completion_tokens,
        if trace.usage_estimated { ", estimated" } else { "" }
    );
    println!("trace: {}", trace_path.display());
    Ok(ExitCode::SUCCESS)
}

fn run_options(rc: &RunConfig, default_out: &str, fresh: bool) -> anyhow::Result<RunOptions> {
    let dataset = rc.dataset.as_ref().ok_or_else(|| usage("no dataset: pass --dataset or set [dataset] path"))?;
    Ok(RunOptions {
        name: rc.name.clone(),
        dataset: dataset.path.display().to_string(),
        parallelism: rc.parallelism,
        execution: rc.execution,
        fresh,
        ..RunOptions::new(rc.out.clone().unwrap_or_else(|| PathBuf::from(default_out)))
    })
}

fn pct(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into())
}

fn summary(a: &Aggregates) -> String {
    let mut s = format!("questions {} | accuracy {:.2}", a.questions, a.accuracy);
    if a.em.is_some() {
        s.push_str(&format!(" | em {} | f1 {}", pct(a.em), pct(a.f1)));
    }
    s.push_str(&format!(
        " | system 2 {:.2}% | mean tokens {:.1} (completion {:.1}) | errored {}",
        a.trigger_rate, a.mean_tokens, a.mean_completion_tokens, a.errored
    ));
    s
}

fn print_stratified(report: &Report) {
    let Some(rows) = &report.stratified else { return };
    println!("{:<10} {:<9} {:>7} {:>9} {:>9}", "difficulty", "system", "correct", "incorrect", "accuracy");
    for r in rows {
        println!(
            "{:<10} {:<9} {:>7} {:>9} {:>9.2}",
            r.difficulty.label(),
            r.system.label(),
            r.correct,
            r.incorrect,
            r.accuracy
        );
    }
}

pub fn bench(rc: &RunConfig, fresh: bool) -> anyhow::Result<ExitCode> {
    let default_out = format!("runs/{}", rc.name);
    let opts = run_options(rc, &default_out, fresh)?;
    let questions = load_dataset(rc.dataset.as_ref().expect("checked by run_options"))?;
    let engine = engine(rc, rc.pipeline.clone())?;
    let report = run_benchmark(&engine, &questions, &opts)?;
    println!("{}", summary(&report.aggregates));
    print_stratified(&report);
    println!("run directory: {}", opts.out_dir.display());
    Ok(if report.aggregates.errored > 0 {
        eprintln!(
            "{} question(s) failed; rerun the same command to retry them",
            report.aggregates.errored
        );
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn selected_presets(slugs: &[String]) -> anyhow::Result<Vec<Preset>> {
    if slugs.is_empty() {
        return Ok(ablation_presets());
    }
    Ok(slugs.iter().map(|s| preset(s)).collect::<Result<Vec<_>, _>>()?)
}

pub fn ablate(rc: &RunConfig, slugs: &[String], fresh: bool) -> anyhow::Result<ExitCode> {
    let presets = selected_presets(slugs)?;
    let opts = run_options(rc, "runs/ablation", fresh)?;
    let questions = load_dataset(rc.dataset.as_ref().expect("checked by run_options"))?;
    // The base engine only carries numeric settings; each preset supplies the
    // stages and gating, and is validated before any call is made.
    let base = PipelineConfig {
        stages: Default::default(),
        system1_enabled: true,
        reflection_enabled: false,
        force_system2: false,
        ..rc.pipeline.clone()
    };
    let engine = engine(rc, base)?;
    let outcome = ablation_sweep(&engine, &questions, &presets, &opts)?;
    let width = outcome.rows.iter().map(|r| r.name.len()).max().unwrap_or(6).max(6);
    let open = outcome.rows.iter().any(|r| r.em.is_some());
    let mut header = format!("{:<width$}  {:>8}", "Method", "Accuracy");
    if open {
        header.push_str(&format!("  {:>6}  {:>6}", "EM", "F1"));
    }
    header.push_str(&format!("  {:>6}  {:>9}  {:>7}", "S2 %", "Tokens", "Errored"));
    println!("{header}");
    for r in &outcome.rows {
        let mut line = format!("{:<width$}  {:>8.2}", r.name, r.accuracy);
        if open {
            line.push_str(&format!("  {:>6}  {:>6}", pct(r.em), pct(r.f1)));
        }
        line.push_str(&format!(
            "  {:>6.2}  {:>9.1}  {:>7}",
            r.trigger_rate, r.mean_completion_tokens, r.errored
        ));
        println!("{line}");
    }
    println!("run directory: {}", opts.out_dir.display());
    let errored: usize = outcome.rows.iter().map(|r| r.errored).sum();
    Ok(if errored > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

pub fn index_build(corpus: &Path, out: &Path, k1: f64, b: f64) -> anyhow::Result<ExitCode> {
    let docs = Corpus::load_jsonl(corpus).with_context(|| format!("reading {}", corpus.display()))?;
    let n = docs.len();
    let idx = Bm25Index::build(docs, Bm25Params { k1, b })?;
    // A write failure is a runtime error, not a problem with the corpus.
    idx.save(out)
        .map_err(|e| anyhow::anyhow!("writing {}: {e}", out.display()))?;
    println!("indexed {n} documents (avgdl {:.2}) into {}", idx.avgdl(), out.display());
    Ok(ExitCode::SUCCESS)
}
