//! Pipeline configuration, stage ordering and the ablation presets.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("stage {stage} requires stage {requires}")]
    MissingDependency { stage: Stage, requires: Stage },
    #[error("a non-empty stage set must include Decision")]
    MissingDecision,
    #[error("reflection requires system 1 to be enabled")]
    ReflectionWithoutSystem1,
    #[error("system 2 would run but no stages are configured")]
    EmptySystem2,
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("temperature must be a finite value >= 0")]
    BadTemperature,
    #[error("search stage is enabled but no retriever is available")]
    MissingRetriever,
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("unknown stage `{0}`")]
    UnknownStage(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("{0}")]
    Invalid(String),
}

/// The six deliberative stages, declared in canonical execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Planning,
    Search,
    Reading,
    Hypothesis,
    Integration,
    Decision,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Planning,
        Stage::Search,
        Stage::Reading,
        Stage::Hypothesis,
        Stage::Integration,
        Stage::Decision,
    ];

    pub fn name(self) -> &'static str {
        Agent::from(self).name()
    }

    fn requires(self) -> Option<Stage> {
        match self {
            Stage::Search => Some(Stage::Planning),
            Stage::Reading => Some(Stage::Search),
            Stage::Integration => Some(Stage::Hypothesis),
            _ => None,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.parse::<Agent>() {
            Ok(agent) => agent
                .stage()
                .ok_or_else(|| ConfigError::UnknownStage(s.to_string())),
            Err(_) => Err(ConfigError::UnknownStage(s.to_string())),
        }
    }
}

/// Every agent that can appear in a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Agent {
    Quick,
    Reflection,
    Planning,
    Search,
    Reading,
    Hypothesis,
    Integration,
    Decision,
}

impl Agent {
    pub const ALL: [Agent; 8] = [
        Agent::Quick,
        Agent::Reflection,
        Agent::Planning,
        Agent::Search,
        Agent::Reading,
        Agent::Hypothesis,
        Agent::Integration,
        Agent::Decision,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Agent::Quick => "Quick",
            Agent::Reflection => "Reflection",
            Agent::Planning => "Planning",
            Agent::Search => "Search",
            Agent::Reading => "Reading",
            Agent::Hypothesis => "Hypothesis",
            Agent::Integration => "Integration",
            Agent::Decision => "Decision",
        }
    }

    /// Lowercase identifier used for prompt file names.
    pub fn slug(self) -> &'static str {
        match self {
            Agent::Quick => "quick",
            Agent::Reflection => "reflection",
            Agent::Planning => "planning",
            Agent::Search => "search",
            Agent::Reading => "reading",
            Agent::Hypothesis => "hypothesis",
            Agent::Integration => "integration",
            Agent::Decision => "decision",
        }
    }

    pub fn stage(self) -> Option<Stage> {
        match self {
            Agent::Quick | Agent::Reflection => None,
            Agent::Planning => Some(Stage::Planning),
            Agent::Search => Some(Stage::Search),
            Agent::Reading => Some(Stage::Reading),
            Agent::Hypothesis => Some(Stage::Hypothesis),
            Agent::Integration => Some(Stage::Integration),
            Agent::Decision => Some(Stage::Decision),
        }
    }

    pub fn is_system2(self) -> bool {
        self.stage().is_some()
    }
}

impl From<Stage> for Agent {
    fn from(stage: Stage) -> Agent {
        match stage {
            Stage::Planning => Agent::Planning,
            Stage::Search => Agent::Search,
            Stage::Reading => Agent::Reading,
            Stage::Hypothesis => Agent::Hypothesis,
            Stage::Integration => Agent::Integration,
            Stage::Decision => Agent::Decision,
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Agent {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        Agent::ALL
            .into_iter()
            .find(|a| a.slug() == key)
            .ok_or_else(|| ConfigError::UnknownAgent(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub stages: BTreeSet<Stage>,
    pub system1_enabled: bool,
    pub reflection_enabled: bool,
    pub force_system2: bool,
    pub k_retrieval: usize,
    pub max_subquestions: usize,
    pub max_hypotheses: usize,
    pub max_parse_retries: u32,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Cap on subanswer length when re-injected into later prompts.
    pub max_injected_chars: usize,
    /// Cap on document text length when injected into prompts.
    pub max_doc_chars: usize,
}

impl Default for PipelineConfig {
    /// The complete pipeline: quick answer, reflection gate and all six stages.
    fn default() -> Self {
        PipelineConfig {
            stages: Stage::ALL.into_iter().collect(),
            system1_enabled: true,
            reflection_enabled: true,
            force_system2: false,
            k_retrieval: 5,
            max_subquestions: 5,
            max_hypotheses: 4,
            max_parse_retries: 2,
            temperature: 0.0,
            max_tokens: 1024,
            max_injected_chars: 600,
            max_doc_chars: 1500,
        }
    }
}

impl PipelineConfig {
    pub fn with_stages(mut self, stages: impl IntoIterator<Item = Stage>) -> Self {
        self.stages = stages.into_iter().collect();
        self
    }

    pub fn has(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.stages.is_empty() && !self.has(Stage::Decision) {
            return Err(ConfigError::MissingDecision);
        }
        for &stage in &self.stages {
            if let Some(dep) = stage.requires() {
                if !self.has(dep) {
                    return Err(ConfigError::MissingDependency {
                        stage,
                        requires: dep,
                    });
                }
            }
        }
        if self.reflection_enabled && !self.system1_enabled {
            return Err(ConfigError::ReflectionWithoutSystem1);
        }
        if self.stages.is_empty() && (self.force_system2 || !self.system1_enabled) {
            return Err(ConfigError::EmptySystem2);
        }
        for (name, v) in [
            ("k_retrieval", self.k_retrieval),
            ("max_subquestions", self.max_subquestions),
            ("max_hypotheses", self.max_hypotheses),
            ("max_tokens", self.max_tokens as usize),
            ("max_injected_chars", self.max_injected_chars),
            ("max_doc_chars", self.max_doc_chars),
        ] {
            if v == 0 {
                return Err(ConfigError::NotPositive(name));
            }
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ConfigError::BadTemperature);
        }
        Ok(())
    }

    /// Whether System 2 runs regardless of what the reflection gate says.
    pub fn system2_unconditional(&self) -> bool {
        self.force_system2 || !self.system1_enabled
    }
}

/// Active stages in canonical order.
pub fn stage_sequence(config: &PipelineConfig) -> Result<Vec<Stage>, ConfigError> {
    config.validate()?;
    // BTreeSet iteration follows the declaration order of `Stage`.
    Ok(config.stages.iter().copied().collect())
}

/// A named configuration corresponding to one row of the component-removal study.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub slug: &'static str,
    pub config: PipelineConfig,
}

impl Preset {
    /// The preset's gating and stage selection on top of `base`'s numeric
    /// settings (retrieval depth, limits, sampling).
    pub fn apply(&self, base: &PipelineConfig) -> PipelineConfig {
        PipelineConfig {
            stages: self.config.stages.clone(),
            system1_enabled: self.config.system1_enabled,
            reflection_enabled: self.config.reflection_enabled,
            force_system2: self.config.force_system2,
            ..base.clone()
        }
    }
}

fn system2_only(stages: &[Stage]) -> PipelineConfig {
    PipelineConfig {
        system1_enabled: false,
        reflection_enabled: false,
        force_system2: true,
        ..PipelineConfig::default()
    }
    .with_stages(stages.iter().copied())
}

/// The nine ablation rows, in table order.
pub fn ablation_presets() -> Vec<Preset> {
    use Stage::*;
    vec![
        Preset {
            name: "System 1 + System 2",
            slug: "s1-s2",
            config: PipelineConfig::default(),
        },
        Preset {
            name: "System 1",
            slug: "s1",
            config: PipelineConfig {
                reflection_enabled: false,
                ..PipelineConfig::default()
            }
            .with_stages([]),
        },
        Preset {
            name: "System 2 (Full)",
            slug: "s2-full",
            config: system2_only(&Stage::ALL),
        },
        Preset {
            name: "System 2 (Planning + Search + Hypothesis + Integration + Decision)",
            slug: "s2-no-reading",
            config: system2_only(&[Planning, Search, Hypothesis, Integration, Decision]),
        },
        Preset {
            name: "System 2 (Planning + Search + Reading + Hypothesis + Decision)",
            slug: "s2-no-integration",
            config: system2_only(&[Planning, Search, Reading, Hypothesis, Decision]),
        },
        Preset {
            name: "System 2 (Planning + Search + Hypothesis + Decision)",
            slug: "s2-no-reading-integration",
            config: system2_only(&[Planning, Search, Hypothesis, Decision]),
        },
        Preset {
            name: "System 2 (Planning + Search + Reading + Decision)",
            slug: "s2-no-hypothesis",
            config: system2_only(&[Planning, Search, Reading, Decision]),
        },
        Preset {
            name: "System 2 (Planning + Search + Decision)",
            slug: "s2-plan-search",
            config: system2_only(&[Planning, Search, Decision]),
        },
        Preset {
            name: "System 2 (Hypothesis + Decision)",
            slug: "s2-hypothesis",
            config: system2_only(&[Hypothesis, Decision]),
        },
    ]
}

/// Looks a preset up by display name or slug (case-insensitive).
pub fn preset(name: &str) -> Result<Preset, ConfigError> {
    let key = name.trim();
    ablation_presets()
        .into_iter()
        .find(|p| p.slug.eq_ignore_ascii_case(key) || p.name.eq_ignore_ascii_case(key))
        .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))
}
