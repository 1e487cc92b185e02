//! JSONL benchmark files.
//!
//! One question per line. Multiple-choice rows carry an `options` object
//! (label to text, in display order) and a single `answer` label; open rows
//! omit `options` and give one or more acceptable answers:
//!
//! ```text
//! {"id": "m1", "question": "...", "options": {"A": "...", "B": "..."}, "answer": "B", "difficulty": "Hard"}
//! {"id": "o1", "question": "...", "answer": ["Paris", "Paris, France"]}
//! ```
//!
//! `id` defaults to the 1-based line number; `difficulty` is optional.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Difficulty, McqOption, Question, QuestionKind};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("limit {limit} exceeds the {size} questions in the dataset")]
    LimitTooLarge { limit: usize, size: usize },
    #[error("dataset is empty")]
    Empty,
}

/// Where and how to load a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    /// Expected question kind; inferred from the first row when absent.
    #[serde(default)]
    pub kind: Option<QuestionKind>,
    #[serde(default)]
    pub limit: Option<usize>,
    #[serde(default)]
    pub shuffle_seed: Option<u64>,
}

impl DatasetSpec {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        DatasetSpec {
            path: path.into(),
            kind: None,
            limit: None,
            shuffle_seed: None,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    #[serde(default)]
    id: Option<serde_json::Value>,
    question: String,
    #[serde(default)]
    options: Option<serde_json::Map<String, serde_json::Value>>,
    #[serde(alias = "answers")]
    answer: OneOrMany,
    #[serde(default)]
    difficulty: Option<String>,
}

fn row_to_question(row: Row, line: usize) -> Result<Question, String> {
    let id = match row.id {
        None => line.to_string(),
        Some(serde_json::Value::String(s)) => s,
        Some(serde_json::Value::Number(n)) => n.to_string(),
        Some(other) => return Err(format!("id must be a string or number, got {other}")),
    };
    let gold = match row.answer {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    };
    if gold.is_empty() {
        return Err("answer list is empty".into());
    }
    let mut options = Vec::new();
    if let Some(map) = row.options {
        if map.is_empty() {
            return Err("options object is empty".into());
        }
        for (label, text) in map {
            let text = match text {
                serde_json::Value::String(s) => s,
                other => return Err(format!("option {label} must be a string, got {other}")),
            };
            options.push(McqOption { label, text });
        }
        if gold.len() != 1 {
            return Err("a multiple-choice row needs exactly one answer label".into());
        }
        if !options.iter().any(|o| o.label == gold[0]) {
            return Err(format!("answer `{}` is not one of the option labels", gold[0]));
        }
    }
    let mut q = Question::new(id, row.question, options).map_err(|e| e.to_string())?;
    q.gold = gold;
    if let Some(d) = row.difficulty {
        q.difficulty = Some(d.parse::<Difficulty>().map_err(|e| e.to_string())?);
    }
    Ok(q)
}

/// Parses JSONL text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_jsonl(text: &str, kind: Option<QuestionKind>) -> Result<Vec<Question>, DatasetError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    let mut expected = kind;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fail = |reason: String| DatasetError::Format { line, reason };
        let row: Row = serde_json::from_str(raw).map_err(|e| fail(e.to_string()))?;
        let q = row_to_question(row, line).map_err(fail)?;
        match expected {
            None => expected = Some(q.kind()),
            Some(k) if k != q.kind() => {
                return Err(fail(format!("expected a {k:?} row, found {:?}", q.kind())));
            }
            Some(_) => {}
        }
        if !ids.insert(q.id.clone()) {
            return Err(fail(format!("duplicate question id `{}`", q.id)));
        }
        out.push(q);
    }
    Ok(out)
}

/// Loads, optionally shuffles (deterministically), then truncates.
pub fn load_dataset(spec: &DatasetSpec) -> Result<Vec<Question>, DatasetError> {
    let text = std::fs::read_to_string(&spec.path).map_err(|source| DatasetError::Io {
        path: spec.path.clone(),
        source,
    })?;
    let mut questions = parse_jsonl(&text, spec.kind)?;
    if questions.is_empty() {
        return Err(DatasetError::Empty);
    }
    if let Some(seed) = spec.shuffle_seed {
        questions.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    if let Some(limit) = spec.limit {
        if limit > questions.len() {
            return Err(DatasetError::LimitTooLarge {
                limit,
                size: questions.len(),
            });
        }
        questions.truncate(limit);
    }
    Ok(questions)
}

pub fn load_path(path: &Path) -> Result<Vec<Question>, DatasetError> {
    load_dataset(&DatasetSpec::new(path))
}
