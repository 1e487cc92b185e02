//! Run configuration: a TOML file with one section per module, overridden by
//! command-line flags. Precedence is flag > file > built-in default.
//!
//! ```toml
//! log_level = "info"
//!
//! [backend]
//! kind = "http_chat"
//! endpoint = "http://localhost:8000/v1"
//! model = "llama-3.3-70b"
//! api_key_env = "OPENAI_API_KEY"
//!
//! [agents.decision]        # optional per-agent backend
//! kind = "http_chat"
//! endpoint = "http://localhost:8001/v1"
//! model = "larger-model"
//!
//! [pipeline]
//! preset = "s1-s2"
//! k_retrieval = 5
//!
//! [retrieval]
//! index = "index.json"
//!
//! [dataset]
//! path = "medqa.jsonl"
//! limit = 200
//! shuffle_seed = 7
//!
//! [run]
//! out = "runs/medqa"
//! parallelism = 4
//!
//! [prompts]
//! dir = "prompts"
//! ```
//!
//! Relative paths in the file are resolved against the file's directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use twofold_core::harness::DatasetSpec;
use twofold_core::{preset, Agent, BackendKind, BackendSpec, Execution, PipelineConfig, QuestionKind, Stage};

/// A problem with flags or the config file. Always exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub log_level: Option<String>,
    pub backend: Option<BackendSpec>,
    #[serde(default)]
    pub agents: BTreeMap<String, BackendSpec>,
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub retrieval: RetrievalSection,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub prompts: PromptSection,
}

/// Every field optional so that unset keys fall through to the defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub preset: Option<String>,
    pub stages: Option<Vec<String>>,
    pub system1_enabled: Option<bool>,
    pub reflection_enabled: Option<bool>,
    pub force_system2: Option<bool>,
    pub k_retrieval: Option<usize>,
    pub max_subquestions: Option<usize>,
    pub max_hypotheses: Option<usize>,
    pub max_parse_retries: Option<u32>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub max_injected_chars: Option<usize>,
    pub max_doc_chars: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalSection {
    pub index: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: Option<PathBuf>,
    pub kind: Option<QuestionKind>,
    pub limit: Option<usize>,
    pub shuffle_seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub out: Option<PathBuf>,
    pub name: Option<String>,
    pub parallelism: Option<usize>,
    pub execution: Option<Execution>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSection {
    pub dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| usage(format!("config file: {e}")))
    }

    /// Reads `path`, resolving relative paths inside it against its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.rebase(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        for spec in self.backend.iter_mut().chain(self.agents.values_mut()) {
            fix(&mut spec.script);
        }
        fix(&mut self.retrieval.index);
        fix(&mut self.dataset.path);
        fix(&mut self.run.out);
        fix(&mut self.prompts.dir);
    }
}

/// Values given on the command line. `None` and `false` mean "not given".
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub preset: Option<String>,
    pub force_system2: bool,
    pub index: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub dataset: Option<PathBuf>,
    pub limit: Option<usize>,
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub sequential: bool,
    pub out: Option<PathBuf>,
    pub name: Option<String>,
    pub prompts: Option<PathBuf>,
    pub k_retrieval: Option<usize>,
    pub log_level: Option<String>,
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub backend: Option<BackendSpec>,
    pub agent_backends: Vec<(Agent, BackendSpec)>,
    pub pipeline: PipelineConfig,
    pub index: Option<PathBuf>,
    pub dataset: Option<DatasetSpec>,
    pub out: Option<PathBuf>,
    pub name: String,
    pub parallelism: usize,
    pub execution: Execution,
    pub prompts: Option<PathBuf>,
    pub log_level: String,
}

fn pipeline_from(section: &PipelineSection) -> anyhow::Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(stages) = &section.stages {
        let parsed = stages.iter().map(|s| s.parse::<Stage>()).collect::<Result<Vec<_>, _>>()?;
        cfg = cfg.with_stages(parsed);
    }
    macro_rules! take {
        ($($field:ident),*) => {$(
            if let Some(v) = section.$field {
                cfg.$field = v;
            }
        )*};
    }
    take!(
        system1_enabled,
        reflection_enabled,
        force_system2,
        k_retrieval,
        max_subquestions,
        max_hypotheses,
        max_parse_retries,
        temperature,
        max_tokens,
        max_injected_chars,
        max_doc_chars
    );
    Ok(cfg)
}

impl RunConfig {
    pub fn resolve(file: FileConfig, flags: &Overrides) -> anyhow::Result<Self> {
        let mut pipeline = pipeline_from(&file.pipeline)?;
        let preset_name = flags.preset.clone().or(file.pipeline.preset.clone());
        if let Some(name) = &preset_name {
            // A preset fixes stages and gating; numeric settings stay as configured.
            pipeline = preset(name)?.apply(&pipeline);
        }
        if flags.force_system2 {
            pipeline.force_system2 = true;
        }
        if let Some(k) = flags.k_retrieval {
            pipeline.k_retrieval = k;
        }

        let backend = match (&flags.script, file.backend) {
            (Some(script), _) => Some(BackendSpec::scripted(script)),
            (None, Some(mut spec)) => {
                if flags.endpoint.is_some() || flags.model.is_some() {
                    spec.kind = BackendKind::HttpChat;
                }
                spec.endpoint = flags.endpoint.clone().or(spec.endpoint);
                spec.model = flags.model.clone().or(spec.model);
                Some(spec)
            }
            (None, None) => match (&flags.endpoint, &flags.model) {
                (Some(e), Some(m)) => Some(BackendSpec::http(e, m)),
                (None, None) => None,
                _ => return Err(usage("--endpoint and --model must be given together")),
            },
        };
        let agent_backends = file
            .agents
            .into_iter()
            .map(|(k, spec)| Ok((k.parse::<Agent>()?, spec)))
            .collect::<anyhow::Result<Vec<_>>>()?;

        let dataset = flags.dataset.clone().or(file.dataset.path).map(|path| DatasetSpec {
            path,
            kind: file.dataset.kind,
            limit: flags.limit.or(file.dataset.limit),
            shuffle_seed: flags.seed.or(file.dataset.shuffle_seed),
        });

        let name = flags
            .name
            .clone()
            .or(file.run.name)
            .or_else(|| preset_name.as_ref().map(|p| p.to_ascii_lowercase()))
            .unwrap_or_else(|| "run".to_string());
        let execution = if flags.sequential {
            Execution::Sequential
        } else {
            file.run.execution.unwrap_or_default()
        };
        Ok(RunConfig {
            backend,
            agent_backends,
            pipeline,
            index: flags.index.clone().or(file.retrieval.index),
            dataset,
            out: flags.out.clone().or(file.run.out),
            name,
            parallelism: flags.parallelism.or(file.run.parallelism).unwrap_or(1),
            execution,
            prompts: flags.prompts.clone().or(file.prompts.dir),
            log_level: flags
                .log_level
                .clone()
                .or(file.log_level)
                .unwrap_or_else(|| "warn".to_string()),
        })
    }

    pub fn load(config: Option<&Path>, flags: &Overrides) -> anyhow::Result<Self> {
        let file = match config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Self::resolve(file, flags)
    }
}
