//! Per-question record of every agent call, serialized as one JSON document.
//!
//! Field names are part of the on-disk format; see the README for the schema.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Agent;
use crate::model::TokenUsage;

/// One backend call made on behalf of an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub system_prompt: String,
    pub user_prompt: String,
    pub completion: String,
    pub usage: TokenUsage,
    pub latency_ms: u64,
    #[serde(default)]
    pub usage_estimated: bool,
    /// Parse failure reason, when this attempt was rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalCall {
    pub subquestion_id: String,
    pub query: String,
    pub k: usize,
    pub doc_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub agent: Agent,
    pub attempts: Vec<Attempt>,
    /// Parsed payload of the accepted attempt, as JSON.
    pub parsed: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retrievals: Vec<RetrievalCall>,
    /// Sum of attempt usages.
    pub usage: TokenUsage,
    pub wall_ms: u64,
    /// Set when a failed reflection was replaced by the escalate fallback.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fail_open: bool,
}

impl AgentStep {
    pub fn new(agent: Agent) -> Self {
        AgentStep {
            agent,
            attempts: Vec::new(),
            parsed: None,
            retrievals: Vec::new(),
            usage: TokenUsage::ZERO,
            wall_ms: 0,
            fail_open: false,
        }
    }

    pub fn push_attempt(&mut self, attempt: Attempt) {
        self.usage += attempt.usage;
        self.attempts.push(attempt);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub question_id: String,
    pub steps: Vec<AgentStep>,
    pub system2_triggered: bool,
    pub final_answer: String,
    pub total_usage: TokenUsage,
    /// True when any usage figure was estimated rather than server-reported.
    #[serde(default)]
    pub usage_estimated: bool,
}

impl ReasoningTrace {
    pub fn new(question_id: impl Into<String>) -> Self {
        ReasoningTrace {
            question_id: question_id.into(),
            steps: Vec::new(),
            system2_triggered: false,
            final_answer: String::new(),
            total_usage: TokenUsage::ZERO,
            usage_estimated: false,
        }
    }

    pub fn push(&mut self, step: AgentStep) {
        self.total_usage += step.usage;
        self.usage_estimated |= step.attempts.iter().any(|a| a.usage_estimated);
        if step.agent.is_system2() {
            self.system2_triggered = true;
        }
        self.steps.push(step);
    }

    pub fn agents(&self) -> Vec<Agent> {
        self.steps.iter().map(|s| s.agent).collect()
    }

    pub fn backend_calls(&self) -> usize {
        self.steps.iter().map(|s| s.attempts.len()).sum()
    }

    pub fn retrieval_calls(&self) -> usize {
        self.steps.iter().map(|s| s.retrievals.len()).sum()
    }

    /// Checks usage conservation and the trigger flag against the steps.
    pub fn check_consistency(&self) -> Result<(), String> {
        for s in &self.steps {
            let sum: TokenUsage = s.attempts.iter().map(|a| a.usage).sum();
            if sum != s.usage {
                return Err(format!("{} step usage {:?} != attempt sum {:?}", s.agent, s.usage, sum));
            }
        }
        let sum: TokenUsage = self.steps.iter().map(|s| s.usage).sum();
        if sum != self.total_usage {
            return Err(format!("total usage {:?} != step sum {:?}", self.total_usage, sum));
        }
        let has_s2 = self.steps.iter().any(|s| s.agent.is_system2());
        if has_s2 != self.system2_triggered {
            return Err(format!(
                "system2_triggered={} but System 2 steps present={has_s2}",
                self.system2_triggered
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(tmp, path)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}
