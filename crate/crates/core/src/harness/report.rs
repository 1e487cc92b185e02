//! Per-question results and the aggregate tables built from them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::harness::metrics::Score;
use crate::model::{Difficulty, QuestionKind, TokenUsage};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("question `{0}` has no difficulty label; the stratified report needs one on every question")]
    MissingDifficulty(String),
    #[error("csv export: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One row of `results.jsonl`.
///
/// Multiple-choice rows set `correct`; open rows set `em` and `f1`. Errored
/// questions are scored as wrong and carry the reason in `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub question_id: String,
    pub kind: QuestionKind,
    pub predicted: String,
    pub gold: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    pub system2_triggered: bool,
    #[serde(default)]
    pub difficulty: Option<Difficulty>,
    pub usage: TokenUsage,
    pub backend_calls: usize,
    #[serde(default)]
    pub trace_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl QuestionResult {
    pub fn set_score(&mut self, score: Score) {
        match score {
            Score::Mcq { correct } => {
                self.correct = Some(correct);
                self.em = None;
                self.f1 = None;
            }
            Score::Open { em, f1 } => {
                self.correct = None;
                self.em = Some(em);
                self.f1 = Some(f1);
            }
        }
    }

    /// Label match for MCQ, exact match for open questions.
    pub fn is_correct(&self) -> bool {
        self.correct.or(self.em).unwrap_or(false)
    }

    pub fn is_errored(&self) -> bool {
        self.error.is_some()
    }
}

/// Figures derived from the per-question rows. Rates are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub questions: usize,
    pub errored: usize,
    /// Share of correct answers; exact match for open questions.
    pub accuracy: f64,
    /// Mean exact match, open questions only.
    pub em: Option<f64>,
    /// Mean token F1, open questions only.
    pub f1: Option<f64>,
    pub trigger_rate: f64,
    pub usage: TokenUsage,
    pub mean_tokens: f64,
    pub mean_completion_tokens: f64,
}

fn pct(num: f64, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num / den as f64
    }
}

impl Aggregates {
    pub fn compute(results: &[QuestionResult]) -> Self {
        let n = results.len();
        let open: Vec<&QuestionResult> = results.iter().filter(|r| r.kind == QuestionKind::OpenQa).collect();
        let usage: TokenUsage = results.iter().map(|r| r.usage).sum();
        let (em, f1) = if open.is_empty() {
            (None, None)
        } else {
            let em = open.iter().filter(|r| r.em == Some(true)).count() as f64;
            let f1: f64 = open.iter().map(|r| r.f1.unwrap_or(0.0)).sum();
            (Some(pct(em, open.len())), Some(pct(f1, open.len())))
        };
        let mean = |x: u64| if n == 0 { 0.0 } else { x as f64 / n as f64 };
        Aggregates {
            questions: n,
            errored: results.iter().filter(|r| r.is_errored()).count(),
            accuracy: pct(results.iter().filter(|r| r.is_correct()).count() as f64, n),
            em,
            f1,
            trigger_rate: pct(results.iter().filter(|r| r.system2_triggered).count() as f64, n),
            usage,
            mean_tokens: mean(usage.total()),
            mean_completion_tokens: mean(usage.completion_tokens),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnsweringSystem {
    #[serde(rename = "System 1")]
    System1,
    #[serde(rename = "System 2")]
    System2,
}

impl AnsweringSystem {
    pub fn label(self) -> &'static str {
        match self {
            AnsweringSystem::System1 => "System 1",
            AnsweringSystem::System2 => "System 2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRow {
    pub difficulty: Difficulty,
    pub system: AnsweringSystem,
    pub correct: usize,
    pub incorrect: usize,
    /// Rounded to two decimals.
    pub accuracy: f64,
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Correct/incorrect counts per (difficulty, answering system), ordered by
/// difficulty then system. Errored questions are left out; empty strata
/// produce no row.
pub fn stratified_trigger_report(results: &[QuestionResult]) -> Result<Vec<StratumRow>, ReportError> {
    let mut counts = std::collections::BTreeMap::<(Difficulty, AnsweringSystem), (usize, usize)>::new();
    for r in results.iter().filter(|r| !r.is_errored()) {
        let d = r
            .difficulty
            .ok_or_else(|| ReportError::MissingDifficulty(r.question_id.clone()))?;
        let system = if r.system2_triggered {
            AnsweringSystem::System2
        } else {
            AnsweringSystem::System1
        };
        let c = counts.entry((d, system)).or_default();
        if r.is_correct() {
            c.0 += 1;
        } else {
            c.1 += 1;
        }
    }
    Ok(counts
        .into_iter()
        .filter(|(_, (c, i))| c + i > 0)
        .map(|((difficulty, system), (correct, incorrect))| StratumRow {
            difficulty,
            system,
            correct,
            incorrect,
            accuracy: round2(pct(correct as f64, correct + incorrect)),
        })
        .collect())
}

/// The outcome of one benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub dataset: String,
    pub config: PipelineConfig,
    pub aggregates: Aggregates,
    /// Present when every answered question carries a difficulty label.
    #[serde(default)]
    pub stratified: Option<Vec<StratumRow>>,
    /// Whether the aggregates were reproduced from the rows when the report
    /// was built.
    pub self_consistent: bool,
    /// Sorted by question id.
    pub results: Vec<QuestionResult>,
}

impl Report {
    pub fn new(
        name: impl Into<String>,
        dataset: impl Into<String>,
        config: PipelineConfig,
        mut results: Vec<QuestionResult>,
    ) -> Self {
        results.sort_by(|a, b| a.question_id.cmp(&b.question_id));
        let aggregates = Aggregates::compute(&results);
        let labelled = results.iter().filter(|r| !r.is_errored()).all(|r| r.difficulty.is_some());
        let stratified = if labelled && !results.is_empty() {
            stratified_trigger_report(&results).ok()
        } else {
            None
        };
        let mut report = Report {
            name: name.into(),
            dataset: dataset.into(),
            config,
            aggregates,
            stratified,
            self_consistent: false,
            results,
        };
        report.self_consistent = report.check_consistency().is_ok();
        report
    }

    /// Recomputes the aggregates from the rows and compares them exactly.
    pub fn check_consistency(&self) -> Result<(), String> {
        let again = Aggregates::compute(&self.results);
        if again != self.aggregates {
            return Err(format!("stored {:?} != recomputed {:?}", self.aggregates, again));
        }
        Ok(())
    }

    pub fn errored(&self) -> impl Iterator<Item = &QuestionResult> {
        self.results.iter().filter(|r| r.is_errored())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_results_csv(&self, path: &Path) -> Result<(), ReportError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "question_id",
            "predicted",
            "gold",
            "correct",
            "em",
            "f1",
            "system2_triggered",
            "difficulty",
            "prompt_tokens",
            "completion_tokens",
            "error",
        ])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.results {
            w.write_record([
                r.question_id.clone(),
                r.predicted.clone(),
                r.gold.join(" | "),
                opt(r.correct.map(|b| b.to_string())),
                opt(r.em.map(|b| b.to_string())),
                opt(r.f1.map(|f| format!("{f:.4}"))),
                r.system2_triggered.to_string(),
                opt(r.difficulty.map(|d| d.label().to_string())),
                r.usage.prompt_tokens.to_string(),
                r.usage.completion_tokens.to_string(),
                opt(r.error.clone()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_stratified_csv(rows: &[StratumRow], path: &Path) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["difficulty", "system", "correct", "incorrect", "accuracy"])?;
    for r in rows {
        w.write_record([
            r.difficulty.label().to_string(),
            r.system.label().to_string(),
            r.correct.to_string(),
            r.incorrect.to_string(),
            format!("{:.2}", r.accuracy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenPoint {
    pub method: String,
    pub mean_completion_tokens: f64,
    pub accuracy: f64,
}

/// One point per non-empty report: generated tokens per question against
/// accuracy (exact match for open questions).
pub fn accuracy_vs_tokens(reports: &[Report]) -> Vec<TokenPoint> {
    reports
        .iter()
        .filter(|r| {
            if r.aggregates.questions == 0 {
                log::warn!("report `{}` has no questions; left out of the token plot", r.name);
                false
            } else {
                true
            }
        })
        .map(|r| TokenPoint {
            method: r.name.clone(),
            mean_completion_tokens: r.aggregates.mean_completion_tokens,
            accuracy: r.aggregates.accuracy,
        })
        .collect()
}

pub fn write_token_csv(points: &[TokenPoint], path: &Path) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "mean_completion_tokens", "accuracy"])?;
    for p in points {
        w.write_record([
            p.method.clone(),
            format!("{:.2}", p.mean_completion_tokens),
            format!("{:.2}", p.accuracy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Unweighted mean of the headline accuracy across reports (for example one
/// per dataset).
pub fn unweighted_average(reports: &[Report]) -> Option<f64> {
    if reports.is_empty() {
        return None;
    }
    Some(reports.iter().map(|r| r.aggregates.accuracy).sum::<f64>() / reports.len() as f64)
}
