//! Deterministic stand-in for a language model, shared by the integration
//! tests, the acceptance suite and the benches.
//!
//! Each case fixes what the quick pass answers, whether reflection escalates
//! and what the deliberative pipeline concludes. Replies are well-formed
//! blocks built from the ids that actually appear in the prompt, so every
//! pipeline configuration can be driven end to end.
#![allow(dead_code)]

pub mod oracles;

use std::sync::Arc;

use twofold_core::agents::{render_plan, render_quick, render_reflection, render_search};
use twofold_core::backend::{BackendError, ChatRequest, FnBackend, LlmBackend};
use twofold_core::{
    Bm25Index, Bm25Params, Corpus, CorpusDoc, Difficulty, Plan, PlannedSubquestion, Question, QuickAnswer,
    ReflectionDecision, ReflectionVerdict, SearchDecision, SubStep,
};

#[derive(Debug, Clone)]
pub struct SimCase {
    pub question: Question,
    pub quick_answer: String,
    pub escalate: bool,
    pub deliberate_answer: String,
    /// Whether planned subquestion P1 asks for a lookup.
    pub retrieve: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SimModel {
    pub cases: Vec<SimCase>,
}

/// Ids such as `H3` or `K12` at the start of trimmed lines, in order, unique.
pub fn leading_ids(text: &str, prefix: char) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for line in text.lines() {
        let t = line.trim_start().trim_start_matches('[');
        let mut chars = t.chars();
        if chars.next() != Some(prefix) {
            continue;
        }
        let digits: String = chars.take_while(|c| c.is_ascii_digit()).collect();
        if digits.is_empty() {
            continue;
        }
        let rest = &t[1 + digits.len()..];
        if !(rest.starts_with(':') || rest.starts_with(' ') || rest.starts_with(']') || rest.is_empty()) {
            continue;
        }
        let id = format!("{prefix}{digits}");
        if !out.contains(&id) {
            out.push(id);
        }
    }
    out
}

fn section<'a>(text: &'a str, header: &str) -> &'a str {
    match text.find(header) {
        Some(i) => &text[i + header.len()..],
        None => "",
    }
}

fn agent_of(req: &ChatRequest) -> &str {
    req.system_text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("Agent: "))
        .unwrap_or("")
}

fn block(tag: &str, body: &str) -> String {
    format!("=== {tag} ===\n{body}\n=== END ===")
}

impl SimCase {
    fn quick(&self) -> QuickAnswer {
        QuickAnswer {
            steps: vec![
                SubStep {
                    index: 1,
                    subquestion: "Which facts does the question give?".into(),
                    subanswer: "The stem lists the relevant findings.".into(),
                },
                SubStep {
                    index: 2,
                    subquestion: "What follows for the original question?".into(),
                    subanswer: format!("The answer is {}.", self.quick_answer),
                },
            ],
            final_answer: self.quick_answer.clone(),
            raw: String::new(),
        }
    }

    fn plan(&self) -> Plan {
        Plan {
            subquestions: vec![
                PlannedSubquestion {
                    id: "P1".into(),
                    text: "Which mechanism links the findings?".into(),
                },
                PlannedSubquestion {
                    id: "P2".into(),
                    text: "Which candidate fits best?".into(),
                },
            ],
        }
    }

    fn search(&self) -> Vec<SearchDecision> {
        vec![
            SearchDecision {
                subquestion_id: "P1".into(),
                needs_retrieval: self.retrieve,
                queries: if self.retrieve {
                    vec!["beta blocker heart rate".into(), "renal sodium handling".into()]
                } else {
                    Vec::new()
                },
            },
            SearchDecision {
                subquestion_id: "P2".into(),
                needs_retrieval: false,
                queries: Vec::new(),
            },
        ]
    }

    fn reading(&self, user: &str) -> String {
        let docs = leading_ids(section(user, "retrieved documents:"), 'R');
        let sources = if docs.is_empty() { "none".to_string() } else { docs.join(", ") };
        block(
            "READING",
            &format!(
                "K1: The documents describe the mechanism.\nK1_FOR: P1\nK1_SOURCES: {sources}\n\
                 K2: General knowledge points to one candidate.\nK2_FOR: P2\nK2_SOURCES: none"
            ),
        )
    }

    fn hypotheses(&self) -> String {
        let mut body = String::new();
        if self.question.options.is_empty() {
            body.push_str(&format!("H1: The answer is {}.\nH2: The answer is something else.", self.deliberate_answer));
        } else {
            for (i, o) in self.question.options.iter().enumerate() {
                if i > 0 {
                    body.push('\n');
                }
                body.push_str(&format!("H{n}: Option {l} explains the findings.\nH{n}_OPTION: {l}", n = i + 1, l = o.label));
            }
        }
        block("HYPOTHESES", &body)
    }

    /// Which hypothesis id backs the deliberate answer.
    fn favoured(&self, ids: &[String]) -> Option<String> {
        if self.question.options.is_empty() {
            return ids.first().cloned();
        }
        let pos = self.question.options.iter().position(|o| o.label == self.deliberate_answer)?;
        ids.get(pos).cloned()
    }

    fn integration(&self, user: &str) -> String {
        let hyps = leading_ids(section(user, "Hypotheses:"), 'H');
        let ev_text = section(user, "\nEvidence:");
        let mut evidence = leading_ids(ev_text, 'K');
        evidence.extend(leading_ids(ev_text, 'R'));
        let fav = self.favoured(&hyps);
        let mut body = String::new();
        for h in &hyps {
            let (status, cite) = match (Some(h) == fav.as_ref(), evidence.first()) {
                (true, Some(e)) => ("SUPPORTED", e.clone()),
                _ => ("INCONCLUSIVE", "none".to_string()),
            };
            body.push_str(&format!("{h}_STATUS: {status}\n{h}_EVIDENCE: {cite}\n{h}_REASON: Weighed against the evidence.\n"));
        }
        let from = match (&fav, evidence.is_empty()) {
            (Some(f), false) => f.clone(),
            _ => "none".to_string(),
        };
        body.push_str(&format!("INTEGRATED: The findings favour {}.\nINTEGRATED_FROM: {from}", self.deliberate_answer));
        block("INTEGRATION", &body)
    }

    fn decision(&self, user: &str) -> String {
        let hyps = leading_ids(section(user, "Candidate hypotheses:"), 'H');
        let mut ranking = hyps.clone();
        if let Some(f) = self.favoured(&hyps) {
            ranking.retain(|h| *h != f);
            ranking.insert(0, f);
        }
        let ranking = if ranking.is_empty() { "none".to_string() } else { ranking.join(", ") };
        block(
            "DECISION",
            &format!(
                "RANKING: {ranking}\nANSWER: {}\nJUSTIFICATION: It fits the findings best.",
                self.deliberate_answer
            ),
        )
    }

    pub fn reply(&self, req: &ChatRequest) -> Result<String, BackendError> {
        let user = &req.user_text;
        Ok(match agent_of(req) {
            "Quick" => render_quick(&self.quick()),
            "Reflection" => render_reflection(&ReflectionVerdict {
                decision: if self.escalate {
                    ReflectionDecision::Escalate
                } else {
                    ReflectionDecision::Accept
                },
                rationale: if self.escalate {
                    "Step 2 is not supported.".into()
                } else {
                    String::new()
                },
                flagged_steps: if self.escalate { vec![2] } else { Vec::new() },
            }),
            "Planning" => render_plan(&self.plan()),
            "Search" => render_search(&self.search()),
            "Reading" => self.reading(user),
            "Hypothesis" => self.hypotheses(),
            "Integration" => self.integration(user),
            "Decision" => self.decision(user),
            other => return Err(BackendError::InvalidRequest(format!("unknown agent `{other}`"))),
        })
    }
}

impl SimModel {
    pub fn new(cases: Vec<SimCase>) -> Self {
        SimModel { cases }
    }

    pub fn case_for(&self, req: &ChatRequest) -> Option<&SimCase> {
        self.cases.iter().find(|c| req.user_text.contains(&c.question.text))
    }

    pub fn respond(&self, req: &ChatRequest) -> Result<String, BackendError> {
        match self.case_for(req) {
            Some(c) => c.reply(req),
            None => Err(BackendError::InvalidRequest("prompt matches no simulated case".into())),
        }
    }

    pub fn backend(self) -> Arc<dyn LlmBackend> {
        Arc::new(FnBackend::new(move |req: &ChatRequest| self.respond(req)))
    }

    pub fn questions(&self) -> Vec<Question> {
        self.cases.iter().map(|c| c.question.clone()).collect()
    }
}

/// `n` multiple-choice cases with a fixed, seed-free pattern: every third
/// case escalates, the quick answer is right on even indices and the
/// deliberate answer is right unless the index is divisible by five.
pub fn mcq_cases(n: usize) -> Vec<SimCase> {
    (0..n)
        .map(|i| {
            let q = Question::mcq(
                format!("m{i:03}"),
                format!("Case m{i:03}: a patient presents with finding {i}. What is the best next step?"),
                [("A", "Observe"), ("B", "Treat"), ("C", "Refer"), ("D", "Operate")],
            )
            .unwrap()
            .with_gold(["B"])
            .with_difficulty(Difficulty::ALL[i % 5]);
            SimCase {
                question: q,
                quick_answer: if i % 2 == 0 { "B" } else { "C" }.into(),
                escalate: i % 3 == 0,
                deliberate_answer: if i % 5 == 0 { "D" } else { "B" }.into(),
                retrieve: i % 4 != 1,
            }
        })
        .collect()
}

pub fn open_cases(n: usize) -> Vec<SimCase> {
    (0..n)
        .map(|i| {
            let q = Question::open(format!("o{i:03}"), format!("Case o{i:03}: which city hosts landmark {i}?"))
                .unwrap()
                .with_gold(["Paris", "Paris, France"]);
            SimCase {
                question: q,
                quick_answer: if i % 2 == 0 { "the Paris" } else { "Lyon" }.into(),
                escalate: i % 2 == 1,
                deliberate_answer: if i % 3 == 0 { "Paris France" } else { "Paris" }.into(),
                retrieve: true,
            }
        })
        .collect()
}

pub fn corpus() -> Corpus {
    Corpus::new(vec![
        CorpusDoc::new("d1", "Beta blockers lower heart rate and myocardial oxygen demand."),
        CorpusDoc::new("d2", "The kidney regulates sodium handling along the nephron."),
        CorpusDoc::new("d3", "Loop diuretics block sodium reabsorption in the thick ascending limb."),
        CorpusDoc::new("d4", "Heart rate rises with sympathetic stimulation."),
        CorpusDoc::new("d5", "Paris is the capital of France."),
        CorpusDoc::new("d6", "Renal blood flow is autoregulated."),
    ])
    .unwrap()
}

pub fn index() -> Arc<Bm25Index> {
    Arc::new(Bm25Index::build(corpus(), Bm25Params::default()).unwrap())
}
