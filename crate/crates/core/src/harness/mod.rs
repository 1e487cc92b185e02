//! Benchmark datasets, scoring, runs, ablations and reports.

pub mod ablation;
pub mod dataset;
pub mod metrics;
pub mod report;
pub mod runner;

pub use ablation::{ablation_sweep, AblationOutcome, AblationRow};
pub use dataset::{load_dataset, parse_jsonl, DatasetError, DatasetSpec};
pub use metrics::{exact_match, f1, normalize_answer, score, Score};
pub use report::{
    accuracy_vs_tokens, stratified_trigger_report, unweighted_average, Aggregates, AnsweringSystem, QuestionResult,
    Report, ReportError, StratumRow, TokenPoint,
};
pub use runner::{load_report, load_traces, run_benchmark, trace_file_name, HarnessError, RunOptions};
