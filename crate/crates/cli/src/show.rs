use std::fmt::Write as _;
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use twofold_core::harness::trace_file_name;
use twofold_core::{AgentStep, ReasoningTrace};

use crate::config::usage;

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("    {l}\n")).collect()
}

fn section(step: &AgentStep, prompts: bool) -> String {
    let mut s = String::new();
    let n = step.attempts.len();
    let _ = writeln!(
        s,
        "== {} == {} attempt{}, {} tokens (prompt {}, completion {}), {} ms{}",
        step.agent.name(),
        n,
        if n == 1 { "" } else { "s" },
        step.usage.total(),
        step.usage.prompt_tokens,
        step.usage.completion_tokens,
        step.wall_ms,
        if step.fail_open { ", failed open" } else { "" }
    );
    for (i, a) in step.attempts.iter().enumerate() {
        if prompts {
            let _ = writeln!(s, "  attempt {} system prompt:\n{}", i + 1, indent(&a.system_prompt));
            let _ = writeln!(s, "  attempt {} user prompt:\n{}", i + 1, indent(&a.user_prompt));
        }
        match &a.parse_error {
            Some(reason) => {
                let _ = writeln!(s, "  attempt {} rejected: {reason}", i + 1);
            }
            None => s.push_str(&indent(&a.completion)),
        }
    }
    for r in &step.retrievals {
        let _ = writeln!(
            s,
            "  search [{}] \"{}\" (k={}) -> {}",
            r.subquestion_id,
            r.query,
            r.k,
            if r.doc_ids.is_empty() { "no hits".to_string() } else { r.doc_ids.join(", ") }
        );
    }
    s
}

/// Human-readable rendering of a trace, one section per agent step.
pub fn render(trace: &ReasoningTrace, prompts: bool) -> String {
    let u = trace.total_usage;
    let mut s = format!(
        "question {} | answer {} | system 2 {}\ntokens {} (prompt {}, completion {}{}) over {} backend calls\n",
        trace.question_id,
        if trace.final_answer.is_empty() { "(none)" } else { &trace.final_answer },
        if trace.system2_triggered { "triggered" } else { "not triggered" },
        u.total(),
        u.prompt_tokens,
        u.completion_tokens,
        if trace.usage_estimated { ", estimated" } else { "" },
        trace.backend_calls()
    );
    for step in &trace.steps {
        s.push('\n');
        s.push_str(&section(step, prompts));
    }
    s
}

pub fn trace_show(path: &Path, id: Option<&str>, prompts: bool, json: bool) -> anyhow::Result<ExitCode> {
    let file = match (path.is_dir(), id) {
        (true, Some(id)) => path.join("traces").join(trace_file_name(id)),
        (true, None) => return Err(usage(format!("{} is a directory; pass --id", path.display()))),
        (false, _) => path.to_path_buf(),
    };
    if !file.is_file() {
        return Err(usage(format!("no trace at {}", file.display())));
    }
    let trace = ReasoningTrace::load(&file).with_context(|| format!("reading {}", file.display()))?;
    if json {
        println!("{}", trace.to_json());
    } else {
        print!("{}", render(&trace, prompts));
    }
    Ok(ExitCode::SUCCESS)
}
