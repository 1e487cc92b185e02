//! The textual protocol between the engine and the model: prompt templates,
//! the structured reply block, and one parser per agent.

pub mod block;
pub mod parse;
pub mod prompts;

use thiserror::Error;

pub use block::{StructuredBlock, Value};
pub use parse::*;
pub use prompts::{PromptSet, PromptTemplate, RenderContext};

/// A reply that does not satisfy the agent's block grammar or the payload
/// invariants. `reason` is fed back to the model verbatim on retry.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{reason}")]
pub struct ParseError {
    pub reason: String,
}

impl ParseError {
    pub fn new(reason: impl Into<String>) -> Self {
        ParseError {
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("placeholder `{0}` is not bound")]
    Unbound(String),
    #[error("placeholder `{placeholder}` is not known to the {agent} template")]
    UnknownPlaceholder { agent: String, placeholder: String },
    #[error("unterminated placeholder starting at byte {0}")]
    Unterminated(usize),
    #[error("prompt file {path}: {reason}")]
    File { path: String, reason: String },
}
