//! LLM access: the [`LlmBackend`] trait, a chat-completion HTTP client, a
//! scripted backend for tests, and token accounting.

mod http;
mod scripted;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::TokenUsage;
use crate::trace::ReasoningTrace;

pub use http::{HttpChatBackend, RetryPolicy};
pub use scripted::{ScriptEntry, ScriptedBackend};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("exhausted: {0}")]
    Exhausted(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    InvalidResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(BackendError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be >= 1".into()));
        }
        Ok(())
    }

    /// System and user text joined, as matched by scripted backends.
    pub fn full_prompt(&self) -> String {
        format!("{}\n\n{}", self.system_text, self.user_text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
    pub model_id: String,
    pub latency_ms: u64,
    /// Set when `usage` came from [`estimate_tokens`] rather than the server.
    #[serde(default)]
    pub usage_estimated: bool,
}

/// Tokenizer-free estimate: `ceil(chars / 4)`, counting Unicode scalar values.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

pub fn estimate_usage(request: &ChatRequest, completion: &str) -> TokenUsage {
    TokenUsage::new(
        estimate_tokens(&request.system_text) + estimate_tokens(&request.user_text),
        estimate_tokens(completion),
    )
}

/// Component-wise sum of trace totals.
pub fn aggregate_usage<'a>(traces: impl IntoIterator<Item = &'a ReasoningTrace>) -> TokenUsage {
    traces.into_iter().map(|t| t.total_usage).sum()
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        (**self).complete(request)
    }
}

/// Backend driven by a closure from prompt to completion text. Usage is
/// estimated. Useful for simulations and tests that must work under any
/// call order or concurrency.
pub struct FnBackend<F> {
    respond: F,
    model_id: String,
}

impl<F> FnBackend<F>
where
    F: Fn(&ChatRequest) -> Result<String, BackendError> + Send + Sync,
{
    pub fn new(respond: F) -> Self {
        FnBackend {
            respond,
            model_id: "fn".to_string(),
        }
    }
}

impl<F> LlmBackend for FnBackend<F>
where
    F: Fn(&ChatRequest) -> Result<String, BackendError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        let text = (self.respond)(request)?;
        Ok(Completion {
            usage: estimate_usage(request, &text),
            text,
            model_id: self.model_id.clone(),
            latency_ms: 0,
            usage_estimated: true,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    Scripted,
}

/// Declarative backend description, as read from a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub script: Option<PathBuf>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_timeout_secs() -> u64 {
    60
}

impl BackendSpec {
    pub fn http(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        BackendSpec {
            kind: BackendKind::HttpChat,
            endpoint: Some(endpoint.into()),
            model: Some(model.into()),
            api_key_env: None,
            script: None,
            timeout_secs: default_timeout_secs(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn scripted(path: impl Into<PathBuf>) -> Self {
        BackendSpec {
            kind: BackendKind::Scripted,
            endpoint: None,
            model: None,
            api_key_env: None,
            script: Some(path.into()),
            timeout_secs: default_timeout_secs(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        match self.kind {
            BackendKind::HttpChat => {
                if self.endpoint.as_deref().unwrap_or("").is_empty() {
                    return Err(BackendError::Config("http backend requires an endpoint".into()));
                }
                if self.model.as_deref().unwrap_or("").is_empty() {
                    return Err(BackendError::Config("http backend requires a model".into()));
                }
            }
            BackendKind::Scripted => {
                if self.script.is_none() {
                    return Err(BackendError::Config("scripted backend requires a script path".into()));
                }
            }
        }
        if self.timeout_secs == 0 {
            return Err(BackendError::Config("timeout must be positive".into()));
        }
        self.retry.validate()
    }

    /// Instantiates the backend. The API key, if any, is read from the
    /// environment at this point.
    pub fn build(&self) -> Result<Arc<dyn LlmBackend>, BackendError> {
        self.validate()?;
        match self.kind {
            BackendKind::HttpChat => {
                let api_key = match &self.api_key_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        BackendError::Config(format!("environment variable {var} is not set"))
                    })?),
                    None => None,
                };
                let backend = HttpChatBackend::new(
                    self.endpoint.clone().unwrap_or_default(),
                    self.model.clone().unwrap_or_default(),
                    api_key,
                    Duration::from_secs(self.timeout_secs),
                    self.retry.clone(),
                )?;
                Ok(Arc::new(backend))
            }
            BackendKind::Scripted => {
                let path = self.script.as_ref().expect("validated");
                Ok(Arc::new(ScriptedBackend::from_file(path)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_is_ceil_quarter_chars() {
        // (text, hand-computed ceil(chars / 4))
        let cases: [(&str, u64); 10] = [
            ("", 0),
            ("a", 1),
            ("abcd", 1),
            ("abcde", 2),
            ("hello world", 3),
            ("12345678", 2),
            ("123456789", 3),
            ("The quick brown fox jumps", 7),
            ("héllo", 2),
            ("日本語テキスト", 2),
        ];
        for (text, want) in cases {
            assert_eq!(estimate_tokens(text), want, "{text:?}");
        }
    }

    #[test]
    fn spec_validation() {
        assert!(BackendSpec::http("http://x", "m").validate().is_ok());
        let mut s = BackendSpec::http("", "m");
        assert!(s.validate().is_err());
        s.endpoint = Some("http://x".into());
        s.model = None;
        assert!(s.validate().is_err());
        let mut s = BackendSpec::scripted("a.json");
        assert!(s.validate().is_ok());
        s.script = None;
        assert!(s.validate().is_err());
    }

    #[test]
    fn request_validation() {
        let mut r = ChatRequest {
            system_text: "s".into(),
            user_text: "u".into(),
            temperature: 0.0,
            max_tokens: 1,
            stop: None,
        };
        assert!(r.validate().is_ok());
        r.temperature = -0.1;
        assert!(r.validate().is_err());
        r.temperature = 0.0;
        r.max_tokens = 0;
        assert!(r.validate().is_err());
    }
}
