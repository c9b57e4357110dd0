use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{PipelineError, Result};
use crate::data::SplitSpec;
use crate::gp::FitConfig;
use crate::lime::{LimeConfig, RankBy, SelectionStrategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub rows: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { rows: 300, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingConfig {
    pub window: usize,
    pub order: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self { window: 11, order: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub deduplicate: bool,
    /// `None` disables smoothing.
    pub smoothing: Option<SmoothingConfig>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            deduplicate: true,
            smoothing: Some(SmoothingConfig::default()),
        }
    }
}

/// Everything a run needs. Every field has a default and a fully
/// defaulted config runs the bundled synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Input CSV; `None` generates the bundled synthetic drilling dataset.
    pub input: Option<PathBuf>,
    /// Schema JSON; `None` uses the built-in 18-feature drilling schema.
    pub schema: Option<PathBuf>,
    pub synthetic: SyntheticConfig,
    pub preprocess: PreprocessConfig,
    pub split: SplitSpec,
    pub gp: FitConfig,
    pub lime: LimeConfig,
    pub selection: SelectionStrategy,
    pub rank_by: RankBy,
    pub output_dir: PathBuf,
    /// When set, replaces the split, fit, LIME and bootstrap seeds.
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            schema: None,
            synthetic: SyntheticConfig::default(),
            preprocess: PreprocessConfig::default(),
            split: SplitSpec::default(),
            gp: FitConfig::default(),
            lime: LimeConfig::default(),
            selection: SelectionStrategy::default(),
            rank_by: RankBy::default(),
            output_dir: PathBuf::from("gplime-out"),
            seed: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies `key=value` overrides, where `key` is a dotted path into the
    /// JSON form of the config and `value` is parsed as JSON, falling back
    /// to a plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = serde_json::to_value(self)?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("override {item:?} is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, key.trim(), value)?;
        }
        serde_json::from_value(doc).map_err(|e| PipelineError::Config(format!("after overrides: {e}")))
    }

    /// The config with the global seed pushed into every stage.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        if let Some(seed) = self.seed {
            cfg.split.seed = seed;
            cfg.gp.seed = seed;
            cfg.lime.seed = seed;
            cfg.selection = cfg.selection.with_seed(seed);
        }
        cfg
    }
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(PipelineError::Config(format!("bad override key {key:?}")));
    }
    let mut node = doc;
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| PipelineError::Config(format!("{:?} is not a section", parts[..i].join("."))))?;
        if !obj.contains_key(*part) {
            return Err(PipelineError::Config(format!("unknown config key {key:?}")));
        }
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.get_mut(*part).expect("checked above");
    }
    unreachable!()
}
