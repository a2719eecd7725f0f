use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::ClientError;

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    4
}

fn default_parallelism() -> usize {
    4
}

fn default_backoff() -> u64 {
    500
}

/// Where and how to reach an OpenAI-compatible chat-completions endpoint.
///
/// The API token is never stored here, only the name of the environment
/// variable that holds it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// e.g. `https://api.example.com/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Ask for this many alternatives per generated token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs_top_n: Option<u32>,
    /// First retry delay; doubles on every further attempt.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: None,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            parallelism: default_parallelism(),
            logprobs_top_n: None,
            backoff_ms: default_backoff(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClientError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ClientError::Config(format!("{}: {e}", path.as_ref().display())))?;
        let cfg: EndpointConfig =
            serde_json::from_str(&text).map_err(|e| ClientError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        let bad = |m: &str| Err(ClientError::Config(m.to_string()));
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return bad("base_url must start with http:// or https://");
        }
        if self.model.is_empty() {
            return bad("model must not be empty");
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return bad("timeout_secs must be positive");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1");
        }
        if self.logprobs_top_n == Some(0) {
            return bad("logprobs_top_n must be positive when set");
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn endpoint_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    /// The bearer token, if the config names a variable. A named but unset
    /// variable is an error rather than an anonymous request.
    pub fn api_key(&self) -> Result<Option<String>, ClientError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| ClientError::MissingToken(var.clone())),
        }
    }
}
