//! Flat key-value run configuration shared by the pipeline commands.
//!
//! The file format is one `key = value` per line with `#` comments.
//! Unknown keys are rejected so typos fail loudly. The full schema with
//! defaults is in the repository README and `config.example.conf`.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ingest::Feature;
use crate::nn::Loss;
use crate::preprocess::{ImputationMethod, SplitSpec};
use crate::training::TrainConfig;
use crate::windowing::WindowSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {msg}")]
    BadValue { key: String, msg: String },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Per-station or single combined one-hot model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    PerStation,
    Combined,
}

impl RunMode {
    pub fn key(self) -> &'static str {
        match self {
            RunMode::PerStation => "per-station",
            RunMode::Combined => "combined",
        }
    }
}

/// Everything a pipeline run needs: paths, station selection, feature
/// set, window geometry, preprocessing and training settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw_dir: PathBuf,
    pub work_dir: PathBuf,
    pub model_dir: PathBuf,
    /// Directory of editable knowledge-base files; `None` uses the tables
    /// bundled into the binary.
    pub kb_dir: Option<PathBuf>,
    /// Stations to process; empty means every station found.
    pub stations: Vec<String>,
    pub mode: RunMode,
    pub impute: ImputationMethod,
    pub features: Vec<Feature>,
    pub window: WindowSpec,
    pub split: SplitSpec,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            raw_dir: "data/raw".into(),
            work_dir: "data/work".into(),
            model_dir: "data/models".into(),
            kb_dir: None,
            stations: Vec::new(),
            mode: RunMode::PerStation,
            impute: ImputationMethod::LinearInterpolation,
            features: vec![
                Feature::Rainfall,
                Feature::Sunshine,
                Feature::Humidity,
                Feature::Temperature,
            ],
            window: WindowSpec::default(),
            split: SplitSpec::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses the flat key-value text into a config, starting from
    /// defaults. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        for (i, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
                line: i + 1,
                text: line.to_string(),
            })?;
            cfg.apply(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        RunConfig::parse(&text)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: String| ConfigError::BadValue {
            key: key.to_string(),
            msg,
        };
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e| ConfigError::BadValue {
                key: key.to_string(),
                msg: format!("{e}"),
            })
        }
        match key {
            "raw_dir" => self.raw_dir = value.into(),
            "work_dir" => self.work_dir = value.into(),
            "model_dir" => self.model_dir = value.into(),
            "kb_dir" => self.kb_dir = Some(value.into()),
            "stations" => {
                self.stations = if value.is_empty() || value == "all" {
                    Vec::new()
                } else {
                    value.split(',').map(|s| s.trim().to_string()).collect()
                }
            }
            "mode" => {
                self.mode = match value {
                    "per-station" => RunMode::PerStation,
                    "combined" => RunMode::Combined,
                    other => return Err(bad(key, format!("expected per-station|combined, got {other:?}"))),
                }
            }
            "impute" => self.impute = value.parse().map_err(|e| bad(key, format!("{e}")))?,
            "features" => {
                let mut features = Vec::new();
                for name in value.split(',') {
                    let name = name.trim();
                    let f = Feature::from_name(name)
                        .ok_or_else(|| bad(key, format!("unknown feature {name:?}")))?;
                    if !features.contains(&f) {
                        features.push(f);
                    }
                }
                if features.is_empty() {
                    return Err(bad(key, "need at least one feature".into()));
                }
                self.features = features;
            }
            "input_width" => self.window.input_width = num(key, value)?,
            "label_width" => self.window.label_width = num(key, value)?,
            "shift" => self.window.shift = num(key, value)?,
            "batch_size" => self.train.batch_size = num(key, value)?,
            "learning_rate" => self.train.learning_rate = num(key, value)?,
            "epochs" => self.train.epochs = num(key, value)?,
            "patience" => self.train.patience = num(key, value)?,
            "l1" => self.train.l1 = num(key, value)?,
            "l2" => self.train.l2 = num(key, value)?,
            "loss" => self.train.loss = value.parse().map_err(|e: String| bad(key, e))?,
            "seed" => self.train.seed = num(key, value)?,
            "shuffle" => self.train.shuffle = num(key, value)?,
            "train_fraction" => self.split.train_fraction = num(key, value)?,
            "val_fraction" => self.split.val_fraction = num(key, value)?,
            "test_fraction" => self.split.test_fraction = num(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.window
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.split
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.train
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.train.l1 < 0.0 || self.train.l2 < 0.0 {
            return Err(ConfigError::Invalid("l1 and l2 must be non-negative".into()));
        }
        Ok(())
    }
}
