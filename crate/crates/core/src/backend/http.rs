//! Client for the common chat-completion HTTP protocol
//! (`POST <endpoint>/chat/completions`).

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{estimate_usage, BackendError, ChatRequest, Completion, LlmBackend};
use crate::model::TokenUsage;

/// Exponential backoff with seeded jitter.
///
/// Delay before retry `i` (0-based) is
/// `min(max_backoff_ms, base_backoff_ms * 2^i) * (1 + jitter * u_i)` where
/// `u_i` is drawn uniformly from `[0, 1)` by a ChaCha8 generator seeded with
/// `seed`. The schedule is therefore fixed for a given policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_backoff_ms: 500,
            max_backoff_ms: 8_000,
            jitter: 0.25,
            seed: 0,
        }
    }
}

impl RetryPolicy {
    pub fn no_retry() -> Self {
        RetryPolicy {
            max_attempts: 1,
            ..RetryPolicy::default()
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_attempts == 0 {
            return Err(BackendError::Config("retry.max_attempts must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.jitter) {
            return Err(BackendError::Config("retry.jitter must be within [0, 1]".into()));
        }
        Ok(())
    }

    /// Delays between attempts; `max_attempts - 1` entries.
    pub fn schedule(&self) -> Vec<Duration> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.max_attempts.saturating_sub(1))
            .map(|i| {
                let exp = self
                    .base_backoff_ms
                    .saturating_mul(1u64.checked_shl(i).unwrap_or(u64::MAX))
                    .min(self.max_backoff_ms);
                let u: f64 = rng.gen();
                Duration::from_secs_f64(exp as f64 * (1.0 + self.jitter * u) / 1000.0)
            })
            .collect()
    }
}

fn retryable(err: &BackendError) -> bool {
    match err {
        BackendError::Timeout | BackendError::Transport(_) => true,
        BackendError::Http { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    model: Option<String>,
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

pub struct HttpChatBackend {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    api_key: Option<String>,
    retry: RetryPolicy,
}

impl std::fmt::Debug for HttpChatBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpChatBackend")
            .field("url", &self.url)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl HttpChatBackend {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
        retry: RetryPolicy,
    ) -> Result<Self, BackendError> {
        retry.validate()?;
        let endpoint = endpoint.into();
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpChatBackend {
            client,
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            model: model.into(),
            api_key,
            retry,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn body(&self, request: &ChatRequest) -> serde_json::Value {
        let mut body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if let Some(stop) = &request.stop {
            body["stop"] = json!(stop);
        }
        body
    }

    fn attempt(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        let started = Instant::now();
        let mut req = self.client.post(&self.url).json(&self.body(request));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        if !status.is_success() {
            let mut body = text;
            body.truncate(500);
            return Err(BackendError::Http {
                status: status.as_u16(),
                body,
            });
        }
        let wire: WireResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
        let content = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::InvalidResponse("response has no choices".into()))?
            .message
            .content
            .unwrap_or_default();
        let (usage, usage_estimated) = match wire.usage {
            Some(u) => (TokenUsage::new(u.prompt_tokens, u.completion_tokens), false),
            None => (estimate_usage(request, &content), true),
        };
        Ok(Completion {
            text: content,
            usage,
            model_id: wire.model.unwrap_or_else(|| self.model.clone()),
            latency_ms: started.elapsed().as_millis() as u64,
            usage_estimated,
        })
    }
}

impl LlmBackend for HttpChatBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        let delays = self.retry.schedule();
        let mut attempt = 0usize;
        loop {
            match self.attempt(request) {
                Ok(c) => return Ok(c),
                Err(e) if retryable(&e) && attempt < delays.len() => {
                    log::warn!("chat completion attempt {} failed: {e}; retrying", attempt + 1);
                    std::thread::sleep(delays[attempt]);
                    attempt += 1;
                }
                Err(e) if retryable(&e) && attempt > 0 => {
                    return Err(BackendError::Exhausted(format!(
                        "{} attempts failed, last: {e}",
                        attempt + 1
                    )))
                }
                Err(e) => return Err(e),
            }
        }
    }
}
