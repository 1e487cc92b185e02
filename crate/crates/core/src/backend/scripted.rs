use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{estimate_usage, BackendError, ChatRequest, Completion, LlmBackend};

/// One canned completion.
///
/// `matcher` holds substrings that must all occur in the prompt (system and
/// user text); an empty matcher accepts any prompt. A `sticky` entry is
/// never consumed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(default, rename = "match", with = "one_or_many")]
    pub matcher: Vec<String>,
    pub completion: String,
    #[serde(default)]
    pub sticky: bool,
}

impl ScriptEntry {
    pub fn any(completion: impl Into<String>) -> Self {
        ScriptEntry {
            matcher: Vec::new(),
            completion: completion.into(),
            sticky: false,
        }
    }

    pub fn matching(matcher: impl Into<String>, completion: impl Into<String>) -> Self {
        ScriptEntry {
            matcher: vec![matcher.into()],
            completion: completion.into(),
            sticky: false,
        }
    }

    pub fn sticky(mut self) -> Self {
        self.sticky = true;
        self
    }

    fn accepts(&self, prompt: &str) -> bool {
        self.matcher.iter().all(|m| prompt.contains(m.as_str()))
    }
}

mod one_or_many {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
        Ok(match Option::<OneOrMany>::deserialize(d)? {
            None => Vec::new(),
            Some(OneOrMany::One(s)) if s.is_empty() => Vec::new(),
            Some(OneOrMany::One(s)) => vec![s],
            Some(OneOrMany::Many(v)) => v,
        })
    }

    pub fn serialize<S: Serializer>(v: &[String], s: S) -> Result<S::Ok, S::Error> {
        match v {
            [one] => s.serialize_str(one),
            many => s.collect_seq(many),
        }
    }
}

#[derive(Debug, Default)]
struct ScriptState {
    entries: Vec<(ScriptEntry, bool)>,
    prompts: Vec<ChatRequest>,
}

/// Deterministic backend replaying a script. Calls are serialized so that
/// consumption order is well defined.
#[derive(Debug)]
pub struct ScriptedBackend {
    state: Mutex<ScriptState>,
}

impl ScriptedBackend {
    pub fn new(script: Vec<ScriptEntry>) -> Result<Self, BackendError> {
        if script.is_empty() {
            return Err(BackendError::Config("script must not be empty".into()));
        }
        Ok(ScriptedBackend {
            state: Mutex::new(ScriptState {
                entries: script.into_iter().map(|e| (e, false)).collect(),
                prompts: Vec::new(),
            }),
        })
    }

    /// Matcher-free script answered in FIFO order.
    pub fn fifo<S: Into<String>>(completions: impl IntoIterator<Item = S>) -> Result<Self, BackendError> {
        Self::new(completions.into_iter().map(ScriptEntry::any).collect())
    }

    /// Reads a JSON array of `{"match": ..., "completion": ..., "sticky": ...}`.
    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        let script: Vec<ScriptEntry> = serde_json::from_str(&text)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Self::new(script)
    }

    /// Every request received so far, in call order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.state.lock().expect("script lock").prompts.clone()
    }

    pub fn call_count(&self) -> usize {
        self.state.lock().expect("script lock").prompts.len()
    }

    /// Non-sticky entries not yet consumed.
    pub fn remaining(&self) -> usize {
        self.state
            .lock()
            .expect("script lock")
            .entries
            .iter()
            .filter(|(e, used)| !e.sticky && !used)
            .count()
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        let prompt = request.full_prompt();
        let mut state = self.state.lock().expect("script lock");
        state.prompts.push(request.clone());
        let slot = state
            .entries
            .iter_mut()
            .find(|(e, used)| !*used && e.accepts(&prompt))
            .ok_or_else(|| BackendError::Exhausted("no script entry matches the prompt".into()))?;
        if !slot.0.sticky {
            slot.1 = true;
        }
        let text = slot.0.completion.clone();
        Ok(Completion {
            usage: estimate_usage(request, &text),
            text,
            model_id: "scripted".to_string(),
            latency_ms: 0,
            usage_estimated: true,
        })
    }
}
