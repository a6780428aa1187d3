//! Uniform completion interface over chat providers, plus rating extraction.

mod backend;
mod client;
mod clock;
pub mod http;
mod mock;
mod parse;
mod rate_limit;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    resolve_credential, BackendFactory, CompletionBackend, CredentialSource, EnvCredentials, ProviderRegistry,
    RawCompletion, TransportError,
};
pub use client::{Backoff, Gateway};
pub use clock::{Clock, SystemClock, VirtualClock};
pub use mock::{mock_complete, mock_ratings, MockBackend, MockConditionKey};
pub use parse::{parse_ratings, FailureKind, ParseFailure, ParsedRatings};
pub use rate_limit::RateLimiter;

fn default_rate_limit() -> u32 {
    60
}
fn default_max_retries() -> u32 {
    3
}
fn default_max_output_tokens() -> u32 {
    512
}
fn default_timeout() -> u64 {
    120
}

/// One configured chatbot. `name` labels it in conditions and reports; `kind`
/// picks the adapter (`gpt`, `claude`, `gemini`, `mock`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSpec {
    pub name: String,
    pub kind: String,
    #[serde(rename = "model", default)]
    pub model_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    #[serde(rename = "auth_env_var", default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default = "default_rate_limit")]
    pub rate_limit: u32,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default)]
    pub mock_seed: u64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl ProviderSpec {
    pub fn mock(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: "mock".into(),
            model_name: "mock".into(),
            endpoint_url: None,
            auth_env: None,
            rate_limit: 6000,
            max_retries: default_max_retries(),
            max_output_tokens: default_max_output_tokens(),
            mock_seed: 0,
            timeout_secs: default_timeout(),
        }
    }

    pub fn is_mock(&self) -> bool {
        self.kind == "mock"
    }

    /// Configured endpoint, or the vendor default for builtin kinds.
    pub fn endpoint(&self) -> String {
        if let Some(url) = &self.endpoint_url {
            return url.clone();
        }
        match self.kind.as_str() {
            "gpt" => "https://api.openai.com/v1/chat/completions".into(),
            "claude" => "https://api.anthropic.com/v1/messages".into(),
            "gemini" => "https://generativelanguage.googleapis.com/v1beta/models/{model}:generateContent".into(),
            _ => String::new(),
        }
    }

    /// Configured credential variable, or the vendor default for builtin kinds.
    pub fn auth_env_var(&self) -> String {
        if let Some(v) = &self.auth_env {
            return v.clone();
        }
        match self.kind.as_str() {
            "gpt" => "OPENAI_API_KEY".into(),
            "claude" => "ANTHROPIC_API_KEY".into(),
            "gemini" => "GEMINI_API_KEY".into(),
            other => format!("{}_API_KEY", other.to_ascii_uppercase()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderViolation {
    pub provider: String,
    pub message: String,
}

impl fmt::Display for ProviderViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "provider {}: {}", self.provider, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    #[serde(default)]
    pub providers: Vec<ProviderSpec>,
}

impl ProviderConfig {
    pub fn from_toml_str(text: &str, source_name: &str) -> Result<Self, GatewayError> {
        toml::from_str(text).map_err(|e| GatewayError::Config { provider: source_name.to_string(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path).map_err(|e| GatewayError::Config {
            provider: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn get(&self, name: &str) -> Option<&ProviderSpec> {
        self.providers.iter().find(|p| p.name == name)
    }

    /// Checks every spec against `registry`.
    pub fn validate(&self, registry: &ProviderRegistry) -> Vec<ProviderViolation> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let known: Vec<&str> = registry.kinds().collect();
        for p in &self.providers {
            let mut bad = |message: String| out.push(ProviderViolation { provider: p.name.clone(), message });
            if p.name.trim().is_empty() {
                bad("empty name".into());
            }
            if !seen.insert(p.name.as_str()) {
                bad("defined more than once".into());
            }
            if !known.contains(&p.kind.as_str()) {
                bad(format!("unknown kind {:?} (known: {})", p.kind, known.join(", ")));
            }
            if p.rate_limit == 0 {
                bad("rate_limit must be > 0".into());
            }
            if p.max_output_tokens == 0 {
                bad("max_output_tokens must be > 0".into());
            }
            if p.is_mock() {
                if p.endpoint_url.is_some() || p.auth_env.is_some() {
                    bad("mock takes no endpoint_url or auth_env_var".into());
                }
            } else {
                if p.model_name.trim().is_empty() {
                    bad("model is required".into());
                }
                if p.endpoint().is_empty() {
                    bad("endpoint_url is required".into());
                }
            }
        }
        out
    }
}

/// Per-call information the mock needs to stay a pure function of its keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestContext {
    pub master_seed: u64,
    pub respondent_key: String,
    pub condition_key: String,
    pub repeat_index: u32,
    pub item_count: usize,
    pub scale_min: i32,
    pub scale_max: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt_text: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub seed: Option<u64>,
    pub context: Option<RequestContext>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub raw_text: String,
    pub prompt_tokens: u64,
    pub output_tokens: u64,
    pub latency_ms: u64,
    pub provider_metadata: BTreeMap<String, String>,
    pub attempt_count: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("provider {provider}: credential variable {env_var} is not set")]
    MissingCredential { provider: String, env_var: String },
    #[error("provider {provider}: authentication failed: {message}")]
    Auth { provider: String, message: String },
    #[error("provider {provider}: context length exceeded: {message}")]
    ContextLength { provider: String, message: String },
    #[error("provider {provider}: request rejected after {attempts} attempt(s): {message}")]
    Rejected { provider: String, message: String, attempts: u32 },
    #[error("provider {provider}: gave up after {attempts} attempts: {last}")]
    RetriesExhausted { provider: String, attempts: u32, last: String },
    #[error("provider {provider}: {message}")]
    Config { provider: String, message: String },
}

impl GatewayError {
    /// Errors that make every further call to the same provider pointless.
    pub fn is_fatal(&self) -> bool {
        matches!(self, GatewayError::MissingCredential { .. } | GatewayError::Auth { .. } | GatewayError::Config { .. })
    }

    pub fn attempts(&self) -> u32 {
        match self {
            GatewayError::Rejected { attempts, .. } | GatewayError::RetriesExhausted { attempts, .. } => *attempts,
            GatewayError::Auth { .. } | GatewayError::ContextLength { .. } => 1,
            _ => 0,
        }
    }
}
