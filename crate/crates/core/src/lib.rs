//! Reflection-gated two-tier question answering.
//!
//! A fast subquestion-decomposed pass answers first. A reflection agent
//! reviews it and either accepts the answer or escalates to a configurable
//! deliberative pipeline (planning, search, reading, hypothesis generation,
//! integration and decision). Every model call is captured in a
//! [`ReasoningTrace`].
//!
//! ```no_run
//! use std::sync::Arc;
//! use twofold_core::{Engine, PipelineConfig, Question, ScriptedBackend};
//!
//! let backend = Arc::new(ScriptedBackend::from_file("script.json".as_ref()).unwrap());
//! let cfg = PipelineConfig::default().with_stages([]);
//! # let cfg = twofold_core::preset("s1").unwrap().config;
//! let engine = Engine::new(cfg, backend, None).unwrap();
//! let q = Question::open("q1", "What is the capital of France?").unwrap();
//! let answer = engine.answer(&q).unwrap();
//! println!("{}", answer.final_answer);
//! ```

pub mod agents;
pub mod backend;
pub mod config;
pub mod engine;
pub mod exec;
pub mod harness;
pub mod model;
pub mod retrieval;
pub mod trace;

pub use backend::{
    BackendError, BackendKind, BackendSpec, ChatRequest, Completion, FnBackend, HttpChatBackend, LlmBackend,
    RetryPolicy, ScriptEntry, ScriptedBackend,
};
pub use config::{ablation_presets, preset, stage_sequence, Agent, ConfigError, PipelineConfig, Preset, Stage};
pub use engine::{Answer, Engine, EngineError, Failure, System2Outcome};
pub use exec::Execution;
pub use model::*;
pub use retrieval::{Bm25Index, Bm25Params, Corpus, CorpusDoc, IngestError, Retriever};
pub use trace::{AgentStep, Attempt, ReasoningTrace, RetrievalCall};
