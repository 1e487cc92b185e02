//! Answer normalization and the open-QA overlap metrics.

use std::collections::HashMap;

use crate::model::{Question, QuestionKind};

fn is_article(token: &str) -> bool {
    matches!(token.trim_matches(|c: char| !c.is_alphanumeric()), "a" | "an" | "the")
}

/// Lowercase, drop the articles `a`/`an`/`the`, replace punctuation with
/// spaces, and collapse whitespace.
///
/// Articles are whole whitespace-separated words (surrounding punctuation
/// ignored), so `"The end."` loses its article while `"A&B"` keeps its `a`.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let kept: Vec<&str> = lowered.split_whitespace().filter(|t| !is_article(t)).collect();
    let spaced: String = kept
        .join(" ")
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    spaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn exact_match(pred: &str, golds: &[String]) -> bool {
    let p = normalize_answer(pred);
    golds.iter().any(|g| normalize_answer(g) == p)
}

fn f1_single(pred: &str, gold: &str) -> f64 {
    let p = normalize_answer(pred);
    let g = normalize_answer(gold);
    let pt: Vec<&str> = p.split_whitespace().collect();
    let gt: Vec<&str> = g.split_whitespace().collect();
    match (pt.is_empty(), gt.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &gt {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &pt {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pt.len() as f64;
    let recall = overlap as f64 / gt.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Best token-bag F1 over the gold aliases; 0 when there are none.
pub fn f1(pred: &str, golds: &[String]) -> f64 {
    golds.iter().map(|g| f1_single(pred, g)).fold(0.0, f64::max)
}

/// How a prediction is scored for a question of a given kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score {
    Mcq { correct: bool },
    Open { em: bool, f1: f64 },
}

impl Score {
    /// The headline correctness used for accuracy and stratification: the
    /// label match for MCQ, exact match for open questions.
    pub fn correct(&self) -> bool {
        match *self {
            Score::Mcq { correct } => correct,
            Score::Open { em, .. } => em,
        }
    }
}

pub fn score(question: &Question, prediction: &str) -> Score {
    match question.kind() {
        QuestionKind::Mcq => Score::Mcq {
            correct: question.gold.iter().any(|g| g.trim() == prediction.trim()),
        },
        QuestionKind::OpenQa => Score::Open {
            em: exact_match(prediction, &question.gold),
            f1: f1(prediction, &question.gold),
        },
    }
}
