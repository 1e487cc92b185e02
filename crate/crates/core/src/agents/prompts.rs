//! Prompt templates.
//!
//! Templates use `{{name}}` placeholders and are rendered in a single pass:
//! substituted values are never rescanned, so a question containing `{{x}}`
//! stays literal. Injected lines that would read as a block fence are
//! prefixed with `> ` so the model never sees a stray fence inside data.
//!
//! Each agent ships a default template. A directory holding `<agent>.txt`
//! files (for example `reflection.txt`) overrides the matching defaults;
//! the file has a `[system]` section followed by a `[user]` section.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::block::{fence, fence_tag};
use super::TemplateError;
use crate::config::{Agent, PipelineConfig};
use crate::model::{
    EvidenceDoc, Hypothesis, HypothesisVerdict, IntegratedHypothesis, KeyInsight, Plan, Question,
    QuickAnswer, ReflectionVerdict, VerdictStatus,
};

pub type RenderContext = BTreeMap<&'static str, String>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub agent: Agent,
    pub system_text: String,
    pub user_template: String,
}

/// Rendered prompt pair, ready for a chat request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

/// Placeholder names each agent's template may use.
pub fn placeholders(agent: Agent) -> &'static [&'static str] {
    match agent {
        Agent::Quick => &["question", "options", "answer_rule"],
        Agent::Reflection => &["question", "options", "steps", "answer"],
        Agent::Planning => &["question", "options", "prior_attempt", "max_subquestions"],
        Agent::Search => &["question", "subquestions"],
        Agent::Reading => &["question", "documents"],
        Agent::Hypothesis => &["question", "options", "scope", "option_line"],
        Agent::Integration => &["question", "hypotheses", "evidence"],
        Agent::Decision => &["question", "options", "findings", "ranking_rule", "answer_rule"],
    }
}

enum Piece<'a> {
    Lit(&'a str),
    Hole(&'a str),
}

fn pieces(template: &str) -> Result<Vec<Piece<'_>>, TemplateError> {
    let mut out = Vec::new();
    let mut rest = template;
    let mut offset = 0;
    while let Some(start) = rest.find("{{") {
        out.push(Piece::Lit(&rest[..start]));
        let after = &rest[start + 2..];
        let end = after
            .find("}}")
            .ok_or(TemplateError::Unterminated(offset + start))?;
        out.push(Piece::Hole(after[..end].trim()));
        let consumed = start + 2 + end + 2;
        offset += consumed;
        rest = &rest[consumed..];
    }
    out.push(Piece::Lit(rest));
    Ok(out)
}

fn neutralize(value: &str) -> String {
    if !value.lines().any(|l| fence_tag(l).is_some()) {
        return value.to_string();
    }
    value
        .split('\n')
        .map(|l| {
            if fence_tag(l).is_some() {
                format!("> {l}")
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Substitutes every `{{name}}` in `template` from `context`.
pub fn render(template: &str, context: &RenderContext) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    for piece in pieces(template)? {
        match piece {
            Piece::Lit(s) => out.push_str(s),
            Piece::Hole(name) => {
                let v = context
                    .get(name)
                    .ok_or_else(|| TemplateError::Unbound(name.to_string()))?;
                out.push_str(&neutralize(v));
            }
        }
    }
    Ok(out)
}

impl PromptTemplate {
    pub fn parse(agent: Agent, source: &str) -> Result<Self, TemplateError> {
        let file_err = |reason: &str| TemplateError::File {
            path: format!("{}.txt", agent.slug()),
            reason: reason.to_string(),
        };
        let source = source.replace("\r\n", "\n");
        let body = source
            .trim_start()
            .strip_prefix("[system]\n")
            .ok_or_else(|| file_err("must start with a [system] line"))?;
        let (system, user) = body
            .split_once("\n[user]\n")
            .ok_or_else(|| file_err("missing [user] section"))?;
        let template = PromptTemplate {
            agent,
            system_text: system.trim_end().to_string(),
            user_template: user.trim_end().to_string(),
        };
        template.check_placeholders()?;
        Ok(template)
    }

    fn check_placeholders(&self) -> Result<(), TemplateError> {
        let allowed = placeholders(self.agent);
        for text in [&self.system_text, &self.user_template] {
            for piece in pieces(text)? {
                if let Piece::Hole(name) = piece {
                    if !allowed.contains(&name) {
                        return Err(TemplateError::UnknownPlaceholder {
                            agent: self.agent.name().to_string(),
                            placeholder: name.to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn render(&self, context: &RenderContext) -> Result<Prompt, TemplateError> {
        Ok(Prompt {
            system: render(&self.system_text, context)?,
            user: render(&self.user_template, context)?,
        })
    }
}

fn default_source(agent: Agent) -> &'static str {
    match agent {
        Agent::Quick => include_str!("../../prompts/quick.txt"),
        Agent::Reflection => include_str!("../../prompts/reflection.txt"),
        Agent::Planning => include_str!("../../prompts/planning.txt"),
        Agent::Search => include_str!("../../prompts/search.txt"),
        Agent::Reading => include_str!("../../prompts/reading.txt"),
        Agent::Hypothesis => include_str!("../../prompts/hypothesis.txt"),
        Agent::Integration => include_str!("../../prompts/integration.txt"),
        Agent::Decision => include_str!("../../prompts/decision.txt"),
    }
}

/// One template per agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    templates: BTreeMap<Agent, PromptTemplate>,
}

impl Default for PromptSet {
    fn default() -> Self {
        let templates = Agent::ALL
            .into_iter()
            .map(|a| {
                let t = PromptTemplate::parse(a, default_source(a))
                    .expect("embedded prompt templates are valid");
                (a, t)
            })
            .collect();
        PromptSet { templates }
    }
}

impl PromptSet {
    /// Defaults, with any `<agent>.txt` found in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = PromptSet::default();
        for agent in Agent::ALL {
            let path = dir.join(format!("{}.txt", agent.slug()));
            if !path.exists() {
                continue;
            }
            let source = std::fs::read_to_string(&path).map_err(|e| TemplateError::File {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
            let t = PromptTemplate::parse(agent, &source).map_err(|e| match e {
                TemplateError::File { reason, .. } => TemplateError::File {
                    path: path.display().to_string(),
                    reason,
                },
                other => other,
            })?;
            set.templates.insert(agent, t);
        }
        Ok(set)
    }

    pub fn get(&self, agent: Agent) -> &PromptTemplate {
        &self.templates[&agent]
    }

    pub fn render(&self, agent: Agent, context: &RenderContext) -> Result<Prompt, TemplateError> {
        self.get(agent).render(context)
    }
}

/// Suffix appended to the user prompt when a reply failed to parse. `retry`
/// counts from 1 so that consecutive retries never send identical prompts.
pub fn retry_feedback(tag: &str, reason: &str, retry: u32) -> String {
    format!(
        "\n\nRetry {retry}: your previous reply could not be used: {reason}. Reply again with exactly one {} block, closed by {}.",
        fence(tag),
        fence(super::block::END_TAG)
    )
}

pub fn truncate_chars(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        None => s.to_string(),
        Some((cut, _)) => format!("{} [truncated]", &s[..cut]),
    }
}

// ---- context builders ----------------------------------------------------

fn options_text(q: &Question) -> String {
    if q.options.is_empty() {
        return "(none; this is an open-ended question)".to_string();
    }
    q.options
        .iter()
        .map(|o| format!("{}. {}", o.label, o.text))
        .collect::<Vec<_>>()
        .join("\n")
}

fn answer_rule(q: &Question) -> String {
    if q.options.is_empty() {
        "ANSWER must be a short answer phrase, not a sentence.".to_string()
    } else {
        let labels: Vec<&str> = q.option_labels().collect();
        format!(
            "ANSWER must be exactly one option label: {}.",
            labels.join(", ")
        )
    }
}

fn base(q: &Question) -> RenderContext {
    let mut c = RenderContext::new();
    c.insert("question", q.text.clone());
    c.insert("options", options_text(q));
    c
}

fn steps_text(quick: &QuickAnswer, cap: usize) -> String {
    quick
        .steps
        .iter()
        .map(|s| {
            format!(
                "Step {}: {}\n  -> {}",
                s.index,
                s.subquestion,
                truncate_chars(&s.subanswer, cap)
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn quick_context(q: &Question) -> RenderContext {
    let mut c = base(q);
    c.insert("answer_rule", answer_rule(q));
    c
}

pub fn reflection_context(q: &Question, quick: &QuickAnswer, cfg: &PipelineConfig) -> RenderContext {
    let mut c = base(q);
    c.insert("steps", steps_text(quick, cfg.max_injected_chars));
    c.insert("answer", quick.final_answer.clone());
    c
}

pub fn planning_context(
    q: &Question,
    prior: Option<(&QuickAnswer, Option<&ReflectionVerdict>)>,
    cfg: &PipelineConfig,
) -> RenderContext {
    let mut c = base(q);
    let prior_text = match prior {
        None => "(none)".to_string(),
        Some((quick, verdict)) => {
            let mut s = steps_text(quick, cfg.max_injected_chars);
            let _ = write!(s, "\nProposed answer: {}", quick.final_answer);
            if let Some(v) = verdict {
                let flagged: Vec<String> = v.flagged_steps.iter().map(u32::to_string).collect();
                let _ = write!(
                    s,
                    "\nReview: {}\nFlagged steps: {}",
                    if v.rationale.is_empty() { "(no rationale)" } else { &v.rationale },
                    if flagged.is_empty() { "none".to_string() } else { flagged.join(", ") }
                );
            }
            s
        }
    };
    c.insert("prior_attempt", prior_text);
    c.insert("max_subquestions", cfg.max_subquestions.to_string());
    c
}

fn plan_text(plan: &Plan) -> String {
    plan.subquestions
        .iter()
        .map(|s| format!("{}: {}", s.id, s.text))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn search_context(q: &Question, plan: &Plan) -> RenderContext {
    let mut c = RenderContext::new();
    c.insert("question", q.text.clone());
    c.insert("subquestions", plan_text(plan));
    c
}

fn doc_line(d: &EvidenceDoc, cap: usize) -> String {
    format!(
        "[{}] (doc {}) {}",
        d.label,
        d.doc.doc_id,
        truncate_chars(&d.doc.text, cap)
    )
}

pub fn reading_context(q: &Question, plan: &Plan, docs: &[EvidenceDoc], cfg: &PipelineConfig) -> RenderContext {
    let mut c = RenderContext::new();
    c.insert("question", q.text.clone());
    let mut out = String::new();
    for sq in &plan.subquestions {
        let _ = writeln!(out, "{}: {}", sq.id, sq.text);
        let mine: Vec<&EvidenceDoc> = docs.iter().filter(|d| d.subquestion_id == sq.id).collect();
        if mine.is_empty() {
            out.push_str("  (no documents; use general knowledge)\n");
        }
        for d in mine {
            let _ = writeln!(out, "  {}", doc_line(d, cfg.max_doc_chars));
        }
    }
    c.insert("documents", out.trim_end().to_string());
    c
}

pub fn hypothesis_context(q: &Question, cfg: &PipelineConfig) -> RenderContext {
    let mut c = base(q);
    if q.options.is_empty() {
        c.insert(
            "scope",
            format!(
                "Propose between 1 and {} plausible explanations or candidate answers.",
                cfg.max_hypotheses
            ),
        );
        c.insert("option_line", "H2: <hypothesis>".to_string());
    } else {
        let labels: Vec<&str> = q.option_labels().collect();
        c.insert(
            "scope",
            format!(
                "Write exactly one hypothesis for each answer option ({}) and name its option in H<n>_OPTION.",
                labels.join(", ")
            ),
        );
        c.insert("option_line", "H1_OPTION: <option label>".to_string());
    }
    c
}

fn hypotheses_text(hs: &[Hypothesis]) -> String {
    hs.iter()
        .map(|h| match &h.option_label {
            Some(l) => format!("{} (option {}): {}", h.id, l, h.statement),
            None => format!("{}: {}", h.id, h.statement),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// The most recent evidence representation available to downstream stages.
#[derive(Debug, Clone, Copy)]
pub enum EvidenceView<'a> {
    None,
    Documents(&'a [EvidenceDoc]),
    Insights(&'a [KeyInsight]),
}

impl EvidenceView<'_> {
    pub fn ids(&self) -> Vec<String> {
        match self {
            EvidenceView::None => Vec::new(),
            EvidenceView::Documents(d) => d.iter().map(|d| d.label.clone()).collect(),
            EvidenceView::Insights(k) => k.iter().map(|k| k.id.clone()).collect(),
        }
    }

    fn text(&self, cfg: &PipelineConfig) -> String {
        match self {
            EvidenceView::None => "(no evidence was gathered)".to_string(),
            EvidenceView::Documents([]) => "(no documents were retrieved)".to_string(),
            EvidenceView::Documents(docs) => docs
                .iter()
                .map(|d| format!("{} for {}", doc_line(d, cfg.max_doc_chars), d.subquestion_id))
                .collect::<Vec<_>>()
                .join("\n"),
            EvidenceView::Insights(ks) => ks
                .iter()
                .map(|k| {
                    let src = if k.source_doc_ids.is_empty() {
                        "general knowledge".to_string()
                    } else {
                        format!("docs {}", k.source_doc_ids.join(", "))
                    };
                    format!("{} ({}; {}): {}", k.id, k.subquestion_id, src, k.text)
                })
                .collect::<Vec<_>>()
                .join("\n"),
        }
    }
}

pub fn integration_context(
    q: &Question,
    hypotheses: &[Hypothesis],
    evidence: EvidenceView<'_>,
    cfg: &PipelineConfig,
) -> RenderContext {
    let mut c = RenderContext::new();
    c.insert("question", q.text.clone());
    c.insert("hypotheses", hypotheses_text(hypotheses));
    c.insert("evidence", evidence.text(cfg));
    c
}

fn status_text(s: VerdictStatus) -> &'static str {
    match s {
        VerdictStatus::Supported => "supported",
        VerdictStatus::Refuted => "refuted",
        VerdictStatus::Inconclusive => "inconclusive",
    }
}

/// What the decision agent sees depends on which earlier stages ran.
pub struct DecisionInputs<'a> {
    pub hypotheses: &'a [Hypothesis],
    pub integration: Option<(&'a [HypothesisVerdict], &'a IntegratedHypothesis)>,
    pub evidence: EvidenceView<'a>,
}

pub fn decision_context(q: &Question, inputs: &DecisionInputs<'_>, cfg: &PipelineConfig) -> RenderContext {
    let mut c = base(q);
    let mut findings = String::new();
    if !inputs.hypotheses.is_empty() {
        let _ = writeln!(findings, "Candidate hypotheses:\n{}\n", hypotheses_text(inputs.hypotheses));
    }
    match inputs.integration {
        Some((verdicts, integrated)) => {
            findings.push_str("Hypothesis test results:\n");
            for v in verdicts {
                let cited = if v.cited_insights.is_empty() {
                    "none".to_string()
                } else {
                    v.cited_insights.join(", ")
                };
                let _ = writeln!(
                    findings,
                    "{}: {} (evidence: {}) {}",
                    v.hypothesis_id,
                    status_text(v.status),
                    cited,
                    v.justification
                );
            }
            let _ = write!(findings, "\nIntegrated hypothesis: {}", integrated.text);
        }
        None => {
            if !matches!(inputs.evidence, EvidenceView::None) {
                let _ = write!(findings, "Evidence:\n{}", inputs.evidence.text(cfg));
            }
        }
    }
    if findings.trim().is_empty() {
        findings = "(no earlier findings)".to_string();
    }
    c.insert("findings", findings.trim_end().to_string());
    let ids: Vec<&str> = inputs.hypotheses.iter().map(|h| h.id.as_str()).collect();
    c.insert(
        "ranking_rule",
        if ids.is_empty() {
            "RANKING must be none.".to_string()
        } else {
            format!("RANKING must list each of {} exactly once.", ids.join(", "))
        },
    );
    c.insert("answer_rule", answer_rule(q));
    c
}
