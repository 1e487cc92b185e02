//! One benchmark run per pipeline preset over the same questions.

use serde::{Deserialize, Serialize};

use crate::config::Preset;
use crate::engine::Engine;
use crate::harness::report::{accuracy_vs_tokens, write_token_csv, Report};
use crate::harness::runner::{run_benchmark, HarnessError, RunOptions};
use crate::model::Question;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub slug: String,
    pub accuracy: f64,
    pub em: Option<f64>,
    pub f1: Option<f64>,
    pub trigger_rate: f64,
    pub mean_completion_tokens: f64,
    pub errored: usize,
}

#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub rows: Vec<AblationRow>,
    pub reports: Vec<Report>,
}

/// Runs each preset (layered over the engine's numeric settings) into
/// `<out>/<slug>/`, then writes `ablation.csv`, `ablation.json` and
/// `accuracy_vs_tokens.csv` under `<out>`.
pub fn ablation_sweep(
    engine: &Engine,
    questions: &[Question],
    presets: &[Preset],
    opts: &RunOptions,
) -> Result<AblationOutcome, HarnessError> {
    // Validate everything before spending any calls.
    let engines = presets
        .iter()
        .map(|p| engine.reconfigured(p.apply(engine.config())))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (preset, e) in presets.iter().zip(&engines) {
        let run = RunOptions {
            out_dir: opts.out_dir.join(preset.slug),
            name: preset.name.to_string(),
            ..opts.clone()
        };
        let report = run_benchmark(e, questions, &run)?;
        let a = &report.aggregates;
        log::info!("{}: accuracy {:.2}", preset.name, a.accuracy);
        rows.push(AblationRow {
            name: preset.name.to_string(),
            slug: preset.slug.to_string(),
            accuracy: a.accuracy,
            em: a.em,
            f1: a.f1,
            trigger_rate: a.trigger_rate,
            mean_completion_tokens: a.mean_completion_tokens,
            errored: a.errored,
        });
        reports.push(report);
    }

    let out = &opts.out_dir;
    let csv_path = out.join("ablation.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(crate::harness::report::ReportError::from)?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
    let table = (|| -> Result<(), csv::Error> {
        w.write_record(["name", "slug", "accuracy", "em", "f1", "trigger_rate", "mean_completion_tokens", "errored"])?;
        for r in &rows {
            w.write_record([
                r.name.clone(),
                r.slug.clone(),
                format!("{:.2}", r.accuracy),
                fmt(r.em),
                fmt(r.f1),
                format!("{:.2}", r.trigger_rate),
                format!("{:.2}", r.mean_completion_tokens),
                r.errored.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })();
    table.map_err(crate::harness::report::ReportError::from)?;
    let json_path = out.join("ablation.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&rows).expect("rows serialize")).map_err(|source| {
        HarnessError::Io {
            path: json_path.clone(),
            source,
        }
    })?;
    write_token_csv(&accuracy_vs_tokens(&reports), &out.join("accuracy_vs_tokens.csv"))?;
    Ok(AblationOutcome { rows, reports })
}
