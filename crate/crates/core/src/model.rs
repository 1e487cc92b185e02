//! Domain types shared by the engine, the agent protocol and the harness.

use std::collections::HashSet;
use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("duplicate option label `{0}`")]
    DuplicateOption(String),
    #[error("option label must be non-empty")]
    EmptyOptionLabel,
    #[error("question text must be non-empty")]
    EmptyText,
    #[error("unknown difficulty `{0}`")]
    UnknownDifficulty(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    VeryEasy,
    Easy,
    Medium,
    Hard,
    VeryHard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 5] = [
        Difficulty::VeryEasy,
        Difficulty::Easy,
        Difficulty::Medium,
        Difficulty::Hard,
        Difficulty::VeryHard,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Difficulty::VeryEasy => "Very Easy",
            Difficulty::Easy => "Easy",
            Difficulty::Medium => "Medium",
            Difficulty::Hard => "Hard",
            Difficulty::VeryHard => "Very Hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Difficulty {
    type Err = ModelError;

    /// Accepts "Very Easy", "very_easy", "very-easy", "veryeasy" and so on.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "veryeasy" | "1" => Ok(Difficulty::VeryEasy),
            "easy" | "2" => Ok(Difficulty::Easy),
            "medium" | "3" => Ok(Difficulty::Medium),
            "hard" | "4" => Ok(Difficulty::Hard),
            "veryhard" | "5" => Ok(Difficulty::VeryHard),
            _ => Err(ModelError::UnknownDifficulty(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    Mcq,
    OpenQa,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqOption {
    pub label: String,
    pub text: String,
}

/// A task instance. `kind` is derived from `options`: a question is
/// multiple-choice exactly when it carries options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub options: Vec<McqOption>,
    /// Gold answer. One label for MCQ, one or more aliases for open QA.
    #[serde(default)]
    pub gold: Vec<String>,
    #[serde(default)]
    pub difficulty: Option<Difficulty>,
}

impl Question {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        options: Vec<McqOption>,
    ) -> Result<Self, ModelError> {
        let q = Question {
            id: id.into(),
            text: text.into(),
            options,
            gold: Vec::new(),
            difficulty: None,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn open(id: impl Into<String>, text: impl Into<String>) -> Result<Self, ModelError> {
        Self::new(id, text, Vec::new())
    }

    pub fn mcq<L, T>(
        id: impl Into<String>,
        text: impl Into<String>,
        options: impl IntoIterator<Item = (L, T)>,
    ) -> Result<Self, ModelError>
    where
        L: Into<String>,
        T: Into<String>,
    {
        let options = options
            .into_iter()
            .map(|(label, text)| McqOption {
                label: label.into(),
                text: text.into(),
            })
            .collect();
        Self::new(id, text, options)
    }

    pub fn with_gold(mut self, gold: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.gold = gold.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_difficulty(mut self, difficulty: Difficulty) -> Self {
        self.difficulty = Some(difficulty);
        self
    }

    pub fn kind(&self) -> QuestionKind {
        if self.options.is_empty() {
            QuestionKind::OpenQa
        } else {
            QuestionKind::Mcq
        }
    }

    pub fn option_labels(&self) -> impl Iterator<Item = &str> {
        self.options.iter().map(|o| o.label.as_str())
    }

    pub fn has_option(&self, label: &str) -> bool {
        self.options.iter().any(|o| o.label == label)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.text.trim().is_empty() {
            return Err(ModelError::EmptyText);
        }
        let mut seen = HashSet::new();
        for opt in &self.options {
            if opt.label.trim().is_empty() {
                return Err(ModelError::EmptyOptionLabel);
            }
            if !seen.insert(opt.label.as_str()) {
                return Err(ModelError::DuplicateOption(opt.label.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenUsage {
    pub const ZERO: TokenUsage = TokenUsage {
        prompt_tokens: 0,
        completion_tokens: 0,
    };

    pub fn new(prompt_tokens: u64, completion_tokens: u64) -> Self {
        TokenUsage {
            prompt_tokens,
            completion_tokens,
        }
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

impl Add for TokenUsage {
    type Output = TokenUsage;

    fn add(self, rhs: TokenUsage) -> TokenUsage {
        TokenUsage {
            prompt_tokens: self.prompt_tokens + rhs.prompt_tokens,
            completion_tokens: self.completion_tokens + rhs.completion_tokens,
        }
    }
}

impl AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: TokenUsage) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for TokenUsage {
    fn sum<I: Iterator<Item = TokenUsage>>(iter: I) -> TokenUsage {
        iter.fold(TokenUsage::ZERO, Add::add)
    }
}

/// One subquestion/subanswer pair of a quick answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubStep {
    pub index: u32,
    pub subquestion: String,
    pub subanswer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuickAnswer {
    pub steps: Vec<SubStep>,
    /// Resolution of the last step; an option label for MCQ.
    pub final_answer: String,
    #[serde(skip)]
    pub raw: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionDecision {
    Accept,
    Escalate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionVerdict {
    pub decision: ReflectionDecision,
    pub rationale: String,
    pub flagged_steps: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedSubquestion {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub subquestions: Vec<PlannedSubquestion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchDecision {
    pub subquestion_id: String,
    pub needs_retrieval: bool,
    pub queries: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedDoc {
    pub doc_id: String,
    pub text: String,
    pub score: f64,
    pub rank: u32,
    pub query: String,
}

/// A retrieved document as presented to downstream agents, labelled `R<n>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceDoc {
    pub label: String,
    pub subquestion_id: String,
    pub doc: RetrievedDoc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyInsight {
    pub id: String,
    pub subquestion_id: String,
    pub text: String,
    pub source_doc_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: String,
    pub option_label: Option<String>,
    pub statement: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Supported,
    Refuted,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisVerdict {
    pub hypothesis_id: String,
    pub status: VerdictStatus,
    /// Evidence ids: insight ids (`K<n>`) or, without a reading stage,
    /// retrieved document labels (`R<n>`).
    pub cited_insights: Vec<String>,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratedHypothesis {
    pub text: String,
    pub supporting_hypothesis_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub answer: String,
    pub chosen_option: Option<String>,
    pub ranking: Vec<String>,
    pub justification: String,
}
