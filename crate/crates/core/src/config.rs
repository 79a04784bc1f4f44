//! Engine configuration, read from a TOML file with environment overrides
//! for the config location and the model API key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::FrameworkProfile;
use crate::stats::ZeroMethod;
use crate::targeting::ParityMapping;

pub const CONFIG_ENV: &str = "FACIHUB_CONFIG";
pub const LLM_KEY_ENV: &str = "FACIHUB_LLM_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    /// OpenAI-compatible chat completions URL. Unset selects the
    /// deterministic stub clients.
    pub endpoint: Option<String>,
    pub model_name: String,
    pub coder_model_name: String,
    pub temperature: f64,
    pub coder_temperature: f64,
    pub timeout_secs: u64,
    pub parallelism: usize,
    /// Filled from `FACIHUB_LLM_KEY`; never read from the file.
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            model_name: "kimi-k2-turbo-preview".into(),
            coder_model_name: "gpt-5.2".into(),
            temperature: 0.6,
            coder_temperature: 0.7,
            timeout_secs: 60,
            parallelism: 4,
            api_key: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Actor id the agent posts under.
    pub id: String,
    pub framework: FrameworkProfile,
    /// Directory of prompt template overrides.
    pub prompts_dir: Option<PathBuf>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self { id: "pca".into(), framework: FrameworkProfile::default(), prompts_dir: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetingConfig {
    pub window_hours: i64,
    pub fraction: f64,
    pub s: usize,
    pub parity_mapping: ParityMapping,
}

impl Default for TargetingConfig {
    fn default() -> Self {
        Self { window_hours: 48, fraction: 0.05, s: 1, parity_mapping: ParityMapping::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub permutation_n: usize,
    pub permutation_seed: u64,
    pub alpha: f64,
    pub zero_method: ZeroMethod,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { permutation_n: 2000, permutation_seed: 20_251_201, alpha: 0.05, zero_method: ZeroMethod::Wilcox }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StorageConfig {
    pub data_dir: PathBuf,
    /// Events between automatic snapshots.
    pub snapshot_every: usize,
}

impl Default for StorageConfig {
    fn default() -> Self {
        Self { data_dir: PathBuf::from("facihub-data"), snapshot_every: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    /// Shared bearer token for `/api` routes. Unset disables the check.
    pub api_token: Option<String>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { bind: "127.0.0.1:8080".into(), api_token: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub llm: LlmConfig,
    pub agent: AgentConfig,
    pub targeting: TargetingConfig,
    pub stats: StatsConfig,
    pub storage: StorageConfig,
    pub server: ServerConfig,
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    /// Resolves the config from an explicit path, else `FACIHUB_CONFIG`,
    /// else defaults, then applies `FACIHUB_LLM_KEY`.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        let from_env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let mut cfg = match explicit.map(Path::to_path_buf).or(from_env) {
            Some(path) => Self::load(&path)?,
            None => Self::default(),
        };
        cfg.llm.api_key = std::env::var(LLM_KEY_ENV).ok().filter(|k| !k.is_empty());
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.targeting;
        if !(t.fraction > 0.0 && t.fraction <= 1.0) {
            return Err(ConfigError::Invalid(format!("targeting.fraction must be in (0, 1], got {}", t.fraction)));
        }
        if t.window_hours <= 0 {
            return Err(ConfigError::Invalid(format!(
                "targeting.window_hours must be positive, got {}",
                t.window_hours
            )));
        }
        if t.s == 0 {
            return Err(ConfigError::Invalid("targeting.s must be at least 1".into()));
        }
        if self.stats.permutation_n == 0 {
            return Err(ConfigError::Invalid("stats.permutation_n must be at least 1".into()));
        }
        if !(self.stats.alpha > 0.0 && self.stats.alpha < 1.0) {
            return Err(ConfigError::Invalid(format!("stats.alpha must be in (0, 1), got {}", self.stats.alpha)));
        }
        if self.llm.parallelism == 0 {
            return Err(ConfigError::Invalid("llm.parallelism must be at least 1".into()));
        }
        if self.llm.timeout_secs == 0 {
            return Err(ConfigError::Invalid("llm.timeout_secs must be positive".into()));
        }
        if self.agent.id.trim().is_empty() {
            return Err(ConfigError::Invalid("agent.id must not be empty".into()));
        }
        if self.storage.snapshot_every == 0 {
            return Err(ConfigError::Invalid("storage.snapshot_every must be at least 1".into()));
        }
        Ok(())
    }
}
