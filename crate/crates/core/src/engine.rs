//! The orchestrator: quick answer, reflection gate, and the configured
//! deliberative stage sequence.
//!
//! A single [`Engine::answer`] call is strictly sequential. The engine itself
//! is immutable and can be shared across threads; concurrent calls are safe
//! as long as the backends and the retriever are.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::agents::prompts::{self, DecisionInputs, EvidenceView, RenderContext};
use crate::agents::{self, ParseError, PromptSet, TemplateError};
use crate::backend::{BackendError, ChatRequest, LlmBackend};
use crate::config::{stage_sequence, Agent, ConfigError, PipelineConfig, Stage};
use crate::model::{
    Decision, EvidenceDoc, Hypothesis, HypothesisVerdict, IntegratedHypothesis, KeyInsight,
    ModelError, Plan, Question, QuickAnswer, ReflectionDecision, ReflectionVerdict, SearchDecision,
};
use crate::retrieval::Retriever;
use crate::trace::{AgentStep, Attempt, ReasoningTrace, RetrievalCall};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("invalid question: {0}")]
    Question(#[from] ModelError),
    #[error("{agent} agent: backend error: {source}")]
    Backend {
        agent: Agent,
        #[source]
        source: BackendError,
    },
    #[error("{agent} agent: reply unusable after {attempts} attempt(s): {reason}")]
    Parse {
        agent: Agent,
        attempts: u32,
        reason: String,
    },
    #[error("{agent} agent: prompt template error: {source}")]
    Template {
        agent: Agent,
        #[source]
        source: TemplateError,
    },
}

impl EngineError {
    pub fn agent(&self) -> Option<Agent> {
        match self {
            EngineError::Backend { agent, .. }
            | EngineError::Parse { agent, .. }
            | EngineError::Template { agent, .. } => Some(*agent),
            _ => None,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, EngineError::Config(_) | EngineError::Template { .. })
    }
}

/// Everything the deliberative stages produced. Absent stages leave their
/// fields empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct System2Outcome {
    pub plan: Option<Plan>,
    pub search: Vec<SearchDecision>,
    pub documents: Vec<EvidenceDoc>,
    pub insights: Option<Vec<KeyInsight>>,
    pub hypotheses: Option<Vec<Hypothesis>>,
    pub verdicts: Option<Vec<HypothesisVerdict>>,
    pub integrated: Option<IntegratedHypothesis>,
    pub decision: Option<Decision>,
}

#[derive(Debug, Clone)]
pub struct Answer {
    pub final_answer: String,
    pub trace: ReasoningTrace,
    pub quick: Option<QuickAnswer>,
    pub reflection: Option<ReflectionVerdict>,
    pub system2: Option<System2Outcome>,
}

/// A failed question together with whatever was traced before the failure.
#[derive(Debug)]
pub struct Failure {
    pub error: EngineError,
    pub trace: ReasoningTrace,
}

enum CallError {
    Backend(BackendError),
    Parse { attempts: u32, reason: String },
    Template(TemplateError),
}

pub struct Engine {
    config: PipelineConfig,
    backend: Arc<dyn LlmBackend>,
    overrides: BTreeMap<Agent, Arc<dyn LlmBackend>>,
    retriever: Option<Arc<dyn Retriever>>,
    prompts: Arc<PromptSet>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("config", &self.config)
            .field("overrides", &self.overrides.keys().collect::<Vec<_>>())
            .field("retriever", &self.retriever.is_some())
            .finish()
    }
}

impl Engine {
    pub fn new(
        config: PipelineConfig,
        backend: Arc<dyn LlmBackend>,
        retriever: Option<Arc<dyn Retriever>>,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        if config.has(Stage::Search) && retriever.is_none() {
            return Err(ConfigError::MissingRetriever);
        }
        Ok(Engine {
            config,
            backend,
            overrides: BTreeMap::new(),
            retriever,
            prompts: Arc::new(PromptSet::default()),
        })
    }

    pub fn with_prompts(mut self, prompts: PromptSet) -> Self {
        self.prompts = Arc::new(prompts);
        self
    }

    /// Routes one agent's calls to a different backend.
    pub fn with_agent_backend(mut self, agent: Agent, backend: Arc<dyn LlmBackend>) -> Self {
        self.overrides.insert(agent, backend);
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// A copy of this engine running a different pipeline configuration.
    pub fn reconfigured(&self, config: PipelineConfig) -> Result<Engine, ConfigError> {
        let mut e = Engine::new(config, self.backend.clone(), self.retriever.clone())?;
        e.overrides = self.overrides.clone();
        e.prompts = self.prompts.clone();
        Ok(e)
    }

    fn backend_for(&self, agent: Agent) -> &dyn LlmBackend {
        self.overrides
            .get(&agent)
            .map(|b| b.as_ref())
            .unwrap_or(self.backend.as_ref())
    }

    /// Renders the agent prompt and calls the backend, re-prompting with the
    /// parse failure reason up to `max_parse_retries` times. Every attempt is
    /// recorded on `step`.
    fn call<T, P>(&self, agent: Agent, tag: &str, ctx: &RenderContext, step: &mut AgentStep, parse: P) -> Result<T, CallError>
    where
        T: Serialize,
        P: Fn(&str) -> Result<T, ParseError>,
    {
        let started = Instant::now();
        let prompt = self.prompts.render(agent, ctx).map_err(CallError::Template)?;
        let mut user = prompt.user.clone();
        let max_attempts = self.config.max_parse_retries + 1;
        let mut result = Err(CallError::Parse {
            attempts: 0,
            reason: String::new(),
        });
        for attempt in 1..=max_attempts {
            let request = ChatRequest {
                system_text: prompt.system.clone(),
                user_text: user.clone(),
                temperature: self.config.temperature,
                max_tokens: self.config.max_tokens,
                stop: None,
            };
            let completion = match self.backend_for(agent).complete(&request) {
                Ok(c) => c,
                Err(e) => {
                    result = Err(CallError::Backend(e));
                    break;
                }
            };
            let parsed = parse(&completion.text);
            step.push_attempt(Attempt {
                system_prompt: request.system_text,
                user_prompt: request.user_text,
                completion: completion.text,
                usage: completion.usage,
                latency_ms: completion.latency_ms,
                usage_estimated: completion.usage_estimated,
                parse_error: parsed.as_ref().err().map(|e| e.reason.clone()),
            });
            match parsed {
                Ok(value) => {
                    step.parsed = serde_json::to_value(&value).ok();
                    result = Ok(value);
                    break;
                }
                Err(e) => {
                    log::debug!("{agent} reply rejected (attempt {attempt}): {}", e.reason);
                    user = format!("{}{}", prompt.user, prompts::retry_feedback(tag, &e.reason, attempt));
                    result = Err(CallError::Parse {
                        attempts: attempt,
                        reason: e.reason,
                    });
                }
            }
        }
        step.wall_ms = started.elapsed().as_millis() as u64;
        result
    }

    fn run_agent<T, P>(
        &self,
        agent: Agent,
        tag: &str,
        ctx: &RenderContext,
        trace: &mut ReasoningTrace,
        parse: P,
    ) -> Result<T, EngineError>
    where
        T: Serialize,
        P: Fn(&str) -> Result<T, ParseError>,
    {
        let mut step = AgentStep::new(agent);
        let out = self.call(agent, tag, ctx, &mut step, parse);
        trace.push(step);
        out.map_err(|e| match e {
            CallError::Backend(source) => EngineError::Backend { agent, source },
            CallError::Parse { attempts, reason } => EngineError::Parse {
                agent,
                attempts,
                reason,
            },
            CallError::Template(source) => EngineError::Template { agent, source },
        })
    }

    /// The quick, subquestion-decomposed answer.
    pub fn run_system1(&self, question: &Question, trace: &mut ReasoningTrace) -> Result<QuickAnswer, EngineError> {
        let ctx = prompts::quick_context(question);
        self.run_agent(Agent::Quick, agents::QUICK_TAG, &ctx, trace, |raw| {
            agents::parse_quick(raw, &question.options)
        })
    }

    /// Reviews the quick answer. A reply that stays unparseable after all
    /// retries is treated as an escalation.
    pub fn reflect(
        &self,
        question: &Question,
        quick: &QuickAnswer,
        trace: &mut ReasoningTrace,
    ) -> Result<ReflectionVerdict, EngineError> {
        let ctx = prompts::reflection_context(question, quick, &self.config);
        let mut step = AgentStep::new(Agent::Reflection);
        let out = self.call(Agent::Reflection, agents::REFLECTION_TAG, &ctx, &mut step, |raw| {
            agents::parse_reflection(raw, quick)
        });
        let verdict = match out {
            Ok(v) => Ok(v),
            Err(CallError::Parse { reason, attempts }) => {
                log::warn!(
                    "reflection unparseable after {attempts} attempt(s) for {}: {reason}; escalating",
                    question.id
                );
                let v = ReflectionVerdict {
                    decision: ReflectionDecision::Escalate,
                    rationale: format!("reflection reply unusable: {reason}"),
                    flagged_steps: Vec::new(),
                };
                step.fail_open = true;
                step.parsed = serde_json::to_value(&v).ok();
                Ok(v)
            }
            Err(CallError::Backend(source)) => Err(EngineError::Backend {
                agent: Agent::Reflection,
                source,
            }),
            Err(CallError::Template(source)) => Err(EngineError::Template {
                agent: Agent::Reflection,
                source,
            }),
        };
        trace.push(step);
        verdict
    }

    fn retrieve(
        &self,
        decisions: &[SearchDecision],
        step: &mut AgentStep,
    ) -> Vec<EvidenceDoc> {
        let Some(retriever) = &self.retriever else {
            return Vec::new();
        };
        let mut docs: Vec<EvidenceDoc> = Vec::new();
        for d in decisions.iter().filter(|d| d.needs_retrieval) {
            let mut seen = HashSet::new();
            for query in &d.queries {
                let hits = retriever.search(query, self.config.k_retrieval);
                step.retrievals.push(RetrievalCall {
                    subquestion_id: d.subquestion_id.clone(),
                    query: query.clone(),
                    k: self.config.k_retrieval,
                    doc_ids: hits.iter().map(|h| h.doc_id.clone()).collect(),
                });
                for hit in hits {
                    if seen.insert(hit.doc_id.clone()) {
                        docs.push(EvidenceDoc {
                            label: format!("R{}", docs.len() + 1),
                            subquestion_id: d.subquestion_id.clone(),
                            doc: hit,
                        });
                    }
                }
            }
        }
        docs
    }

    /// Runs the configured stages in canonical order.
    pub fn run_system2(
        &self,
        question: &Question,
        prior: Option<(&QuickAnswer, Option<&ReflectionVerdict>)>,
        trace: &mut ReasoningTrace,
    ) -> Result<System2Outcome, EngineError> {
        let cfg = &self.config;
        let mut out = System2Outcome::default();
        for stage in stage_sequence(cfg)? {
            match stage {
                Stage::Planning => {
                    let ctx = prompts::planning_context(question, prior, cfg);
                    let plan = self.run_agent(Agent::Planning, agents::PLAN_TAG, &ctx, trace, |raw| {
                        agents::parse_plan(raw, cfg.max_subquestions)
                    })?;
                    out.plan = Some(plan);
                }
                Stage::Search => {
                    let plan = out.plan.as_ref().expect("planning precedes search");
                    let ctx = prompts::search_context(question, plan);
                    let mut step = AgentStep::new(Agent::Search);
                    let res = self.call(Agent::Search, agents::SEARCH_TAG, &ctx, &mut step, |raw| {
                        agents::parse_search(raw, plan)
                    });
                    match res {
                        Ok(decisions) => {
                            out.documents = self.retrieve(&decisions, &mut step);
                            out.search = decisions;
                            trace.push(step);
                        }
                        Err(e) => {
                            trace.push(step);
                            return Err(match e {
                                CallError::Backend(source) => EngineError::Backend { agent: Agent::Search, source },
                                CallError::Parse { attempts, reason } => EngineError::Parse {
                                    agent: Agent::Search,
                                    attempts,
                                    reason,
                                },
                                CallError::Template(source) => EngineError::Template { agent: Agent::Search, source },
                            });
                        }
                    }
                }
                Stage::Reading => {
                    let plan = out.plan.as_ref().expect("planning precedes reading");
                    let docs = &out.documents;
                    let ctx = prompts::reading_context(question, plan, docs, cfg);
                    let insights = self.run_agent(Agent::Reading, agents::READING_TAG, &ctx, trace, |raw| {
                        agents::parse_reading(raw, plan, docs)
                    })?;
                    out.insights = Some(insights);
                }
                Stage::Hypothesis => {
                    let ctx = prompts::hypothesis_context(question, cfg);
                    let hs = self.run_agent(Agent::Hypothesis, agents::HYPOTHESES_TAG, &ctx, trace, |raw| {
                        agents::parse_hypotheses(raw, &question.options, cfg.max_hypotheses)
                    })?;
                    out.hypotheses = Some(hs);
                }
                Stage::Integration => {
                    let hs = out.hypotheses.as_deref().expect("hypothesis precedes integration");
                    let view = evidence_view(cfg, &out);
                    let ids = view.ids();
                    let ctx = prompts::integration_context(question, hs, view, cfg);
                    let (verdicts, integrated) =
                        self.run_agent(Agent::Integration, agents::INTEGRATION_TAG, &ctx, trace, |raw| {
                            agents::parse_integration(raw, hs, &ids)
                        })?;
                    out.verdicts = Some(verdicts);
                    out.integrated = Some(integrated);
                }
                Stage::Decision => {
                    let hs = out.hypotheses.as_deref().unwrap_or(&[]);
                    let inputs = DecisionInputs {
                        hypotheses: hs,
                        integration: out.verdicts.as_deref().zip(out.integrated.as_ref()),
                        evidence: evidence_view(cfg, &out),
                    };
                    let ctx = prompts::decision_context(question, &inputs, cfg);
                    let decision = self.run_agent(Agent::Decision, agents::DECISION_TAG, &ctx, trace, |raw| {
                        agents::parse_decision(raw, hs, &question.options)
                    })?;
                    out.decision = Some(decision);
                }
            }
        }
        Ok(out)
    }

    /// Answers one question, recording every backend call in the trace.
    pub fn answer(&self, question: &Question) -> Result<Answer, EngineError> {
        self.try_answer(question).map_err(|f| f.error)
    }

    /// Like [`Engine::answer`], but a failure keeps the partial trace so the
    /// calls made before the error are still accounted for.
    #[allow(clippy::result_large_err)] // failures are rare; the trace is returned by value
    pub fn try_answer(&self, question: &Question) -> Result<Answer, Failure> {
        let mut trace = ReasoningTrace::new(&question.id);
        match self.answer_into(question, &mut trace) {
            Ok((final_answer, quick, reflection, system2)) => {
                trace.final_answer = final_answer.clone();
                Ok(Answer {
                    final_answer,
                    trace,
                    quick,
                    reflection,
                    system2,
                })
            }
            Err(error) => Err(Failure { error, trace }),
        }
    }

    #[allow(clippy::type_complexity)]
    fn answer_into(
        &self,
        question: &Question,
        trace: &mut ReasoningTrace,
    ) -> Result<(String, Option<QuickAnswer>, Option<ReflectionVerdict>, Option<System2Outcome>), EngineError> {
        question.validate()?;
        let mut quick = None;
        let mut reflection = None;
        if self.config.system1_enabled {
            let q = self.run_system1(question, trace)?;
            if self.config.reflection_enabled {
                reflection = Some(self.reflect(question, &q, trace)?);
            }
            quick = Some(q);
        }
        let escalated = reflection
            .as_ref()
            .is_some_and(|v| v.decision == ReflectionDecision::Escalate);
        if self.config.system2_unconditional() || escalated {
            let prior = quick.as_ref().map(|q| (q, reflection.as_ref()));
            let outcome = self.run_system2(question, prior, trace)?;
            let answer = outcome
                .decision
                .as_ref()
                .expect("decision stage always runs last")
                .answer
                .clone();
            Ok((answer, quick, reflection, Some(outcome)))
        } else {
            let answer = quick.as_ref().expect("system 1 ran").final_answer.clone();
            Ok((answer, quick, reflection, None))
        }
    }
}

/// Most recent evidence representation: insights if reading ran, otherwise
/// the retrieved documents if search ran, otherwise nothing.
fn evidence_view<'a>(cfg: &PipelineConfig, out: &'a System2Outcome) -> EvidenceView<'a> {
    match (&out.insights, cfg.has(Stage::Search)) {
        (Some(k), _) => EvidenceView::Insights(k),
        (None, true) => EvidenceView::Documents(&out.documents),
        (None, false) => EvidenceView::None,
    }
}
