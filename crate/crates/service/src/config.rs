//! Service settings, read from `EASG_*` environment variables.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    /// Chat-completion endpoint. No endpoint means LLM routes answer 503
    /// unless a transport is injected.
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    pub timeout: Duration,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            api_key: None,
            model: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            max_tokens: 256,
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(8),
            timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub data_dir: PathBuf,
    pub lease: Duration,
    /// Refinements collected per timestep.
    pub refinements_required: usize,
    /// Keep refinement annotators away from validation of the same timestep.
    pub distinct_validators: bool,
    pub llm: LlmConfig,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: data_dir.into(),
            lease: Duration::from_secs(30 * 60),
            refinements_required: 3,
            distinct_validators: false,
            llm: LlmConfig::default(),
        }
    }

    pub fn log_path(&self) -> PathBuf {
        self.data_dir.join("events.ndjson")
    }

    /// Reads the configuration from the process environment.
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Reads the configuration through `get`, which maps a variable name to
    /// its value.
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        fn parse<T: std::str::FromStr>(
            get: &impl Fn(&str) -> Option<String>,
            key: &'static str,
        ) -> Result<Option<T>, ConfigError> {
            match get(key) {
                None => Ok(None),
                Some(v) => v
                    .trim()
                    .parse()
                    .map(Some)
                    .map_err(|_| ConfigError::Invalid { key, value: v }),
            }
        }
        let mut c = Self::new(get("EASG_DATA_DIR").unwrap_or_else(|| "easg-data".into()));
        if let Some(b) = parse(&get, "EASG_BIND")? {
            c.bind = b;
        }
        if let Some(m) = parse::<u64>(&get, "EASG_LEASE_MINUTES")? {
            c.lease = Duration::from_secs(m * 60);
        }
        if let Some(d) = parse(&get, "EASG_DISTINCT_VALIDATORS")? {
            c.distinct_validators = d;
        }
        c.llm.endpoint = get("EASG_LLM_URL").filter(|s| !s.trim().is_empty());
        c.llm.api_key = get("EASG_LLM_KEY").filter(|s| !s.trim().is_empty());
        if let Some(m) = get("EASG_LLM_MODEL") {
            c.llm.model = m;
        }
        if let Some(t) = parse(&get, "EASG_LLM_TEMPERATURE")? {
            c.llm.temperature = t;
        }
        if let Some(t) = parse(&get, "EASG_LLM_MAX_TOKENS")? {
            c.llm.max_tokens = t;
        }
        if let Some(r) = parse(&get, "EASG_LLM_MAX_RETRIES")? {
            c.llm.max_retries = r;
        }
        if let Some(s) = parse::<u64>(&get, "EASG_LLM_TIMEOUT_SECS")? {
            c.llm.timeout = Duration::from_secs(s);
        }
        Ok(c)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("invalid value {value:?} for {key}")]
    Invalid { key: &'static str, value: String },
}
