//! Fully resolved per-command options. These are what `config.resolved`
//! holds and what `--config` reads back.

use std::path::{Path, PathBuf};

use ctxdrop::context::ContextConfig;
use ctxdrop::corpus::{SplitName, SplitRatio};
use ctxdrop::evaluation::ReportLayout;
use ctxdrop::training::{ExperimentConfig, Method};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CliError};

/// Relative input paths fall back to this directory when they do not exist
/// under the working directory; `--data` defaults to `corpus.jsonl` in it.
pub const DATA_DIR_ENV: &str = "CTXDROP_DATA_DIR";

pub const CONFIG_FILE: &str = "config.resolved";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile<T> {
    command: String,
    options: T,
}

pub fn render_config<T: Serialize>(command: &str, options: &T) -> Result<String, CliError> {
    toml::to_string(&ConfigFile {
        command: command.to_string(),
        options,
    })
    .map_err(|e| crate::error::runtime(format!("serialising config: {e}")))
}

pub fn load_config<T: DeserializeOwned>(path: &Path, command: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let file: ConfigFile<T> = toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    if file.command != command {
        return Err(invalid(format!(
            "{} was written by '{}', not '{command}'",
            path.display(),
            file.command
        )));
    }
    Ok(file.options)
}

/// Resolves an input path against the working directory, then the data
/// directory, and makes it absolute.
pub fn resolve_input(p: &Path) -> PathBuf {
    let chosen = if p.is_absolute() || p.exists() {
        p.to_path_buf()
    } else {
        match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) => Path::new(&dir).join(p),
            None => p.to_path_buf(),
        }
    };
    std::path::absolute(&chosen).unwrap_or(chosen)
}

pub fn resolve_data(data: Option<PathBuf>) -> Result<PathBuf, CliError> {
    match data {
        Some(p) => Ok(resolve_input(&p)),
        None => match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) => Ok(resolve_input(&Path::new(&dir).join("corpus.jsonl"))),
            None => Err(invalid(format!("--data is required (or set {DATA_DIR_ENV})"))),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestOptions {
    pub data: Option<PathBuf>,
    /// When positive, generate this many synthetic meetings instead of
    /// reading `data`.
    pub synthetic_meetings: usize,
    pub sentences_per_meeting: usize,
    pub positive_rate: f64,
    pub annotators: usize,
    pub annotator_noise: f64,
    pub seed: u64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            data: None,
            synthetic_meetings: 0,
            sentences_per_meeting: 20,
            positive_rate: 0.25,
            annotators: 0,
            annotator_noise: 0.1,
            seed: 0,
        }
    }
}

/// How a corpus is partitioned: a manifest when given, otherwise the
/// seeded rule.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitOptions {
    pub manifest: Option<PathBuf>,
    pub seed: u64,
    pub ratio: SplitRatio,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsOptions {
    pub data: Option<PathBuf>,
    /// Per-split rows are added when true.
    pub by_split: bool,
    pub split: SplitOptions,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitCommandOptions {
    pub data: Option<PathBuf>,
    pub split: SplitOptions,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CandidatesOptions {
    pub data: Option<PathBuf>,
    /// Both unset means the built-in lexicons.
    pub temporal_lexicon: Option<PathBuf>,
    pub verb_lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextOptions {
    pub data: Option<PathBuf>,
    pub context: ContextConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub data: Option<PathBuf>,
    /// Classifier checkpoint whose backbone starts every seed.
    pub init: Option<PathBuf>,
    pub jobs: usize,
    pub split: SplitOptions,
    pub experiment: ExperimentConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            data: None,
            init: None,
            jobs: 1,
            split: SplitOptions::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateOptions {
    /// Score an existing prediction dump instead of running a model.
    pub predictions: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub data: Option<PathBuf>,
    /// Restrict to one split; all meetings when unset.
    pub subset: Option<SplitName>,
    pub split: SplitOptions,
    pub method: Method,
    pub context: ContextConfig,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        EvaluateOptions {
            predictions: None,
            checkpoint: None,
            data: None,
            subset: None,
            split: SplitOptions::default(),
            method: Method::ContextDropDynamic,
            context: ContextConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleOptions {
    pub manifest: Option<PathBuf>,
    pub encoder_from: Option<PathBuf>,
    pub pooler_from: Option<PathBuf>,
    pub head_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportOptions {
    pub inputs: Vec<PathBuf>,
    /// `key1|key2` per input, overriding the keys derived from results.
    pub labels: Vec<String>,
    pub layout: ReportLayout,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            inputs: Vec::new(),
            labels: Vec::new(),
            layout: ReportLayout::Table3,
        }
    }
}
