use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use super::http::{GenerateContentFormat, HttpBackend, HttpTransport, MessagesFormat, ChatCompletionsFormat, ReqwestTransport};
use super::mock::MockBackend;
use super::{CompletionRequest, GatewayError, ProviderSpec};

/// What a backend hands back before retry bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawCompletion {
    pub text: String,
    pub prompt_tokens: u64,
    pub output_tokens: u64,
    pub metadata: BTreeMap<String, String>,
    /// Set by backends that report their own latency; otherwise the gateway measures it.
    pub latency_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("throttled: {message}")]
    Throttled { message: String, retry_after: Option<Duration> },
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("service unavailable: {0}")]
    Unavailable(String),
    #[error("context length exceeded: {0}")]
    ContextLength(String),
    #[error("request rejected: {0}")]
    BadRequest(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

impl TransportError {
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            TransportError::Throttled { .. } | TransportError::Timeout(_) | TransportError::Unavailable(_)
        )
    }
}

/// One completion endpoint. Implementations must be callable from many threads.
pub trait CompletionBackend: Send + Sync {
    fn send(&self, request: &CompletionRequest) -> Result<RawCompletion, TransportError>;
}

/// Where API keys come from.
pub trait CredentialSource: Send + Sync {
    fn get(&self, var: &str) -> Option<String>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EnvCredentials;

impl CredentialSource for EnvCredentials {
    fn get(&self, var: &str) -> Option<String> {
        std::env::var(var).ok().filter(|v| !v.trim().is_empty())
    }
}

impl CredentialSource for BTreeMap<String, String> {
    fn get(&self, var: &str) -> Option<String> {
        BTreeMap::get(self, var).cloned()
    }
}

/// Builds a backend for one provider kind.
pub trait BackendFactory: Send + Sync {
    fn kind(&self) -> &str;
    fn needs_credentials(&self) -> bool {
        true
    }
    fn build(
        &self,
        spec: &ProviderSpec,
        credentials: &dyn CredentialSource,
    ) -> Result<Box<dyn CompletionBackend>, GatewayError>;
}

pub fn resolve_credential(spec: &ProviderSpec, credentials: &dyn CredentialSource) -> Result<String, GatewayError> {
    let var = spec.auth_env_var();
    credentials.get(&var).ok_or_else(|| GatewayError::MissingCredential { provider: spec.name.clone(), env_var: var })
}

struct HttpFactory<F> {
    kind: &'static str,
    make_format: F,
    transport: Arc<dyn HttpTransport>,
}

impl<F> BackendFactory for HttpFactory<F>
where
    F: Fn() -> Box<dyn super::http::WireFormat> + Send + Sync,
{
    fn kind(&self) -> &str {
        self.kind
    }

    fn build(
        &self,
        spec: &ProviderSpec,
        credentials: &dyn CredentialSource,
    ) -> Result<Box<dyn CompletionBackend>, GatewayError> {
        let key = resolve_credential(spec, credentials)?;
        Ok(Box::new(HttpBackend::new(spec.clone(), (self.make_format)(), self.transport.clone(), key)))
    }
}

struct MockFactory;

impl BackendFactory for MockFactory {
    fn kind(&self) -> &str {
        "mock"
    }

    fn needs_credentials(&self) -> bool {
        false
    }

    fn build(&self, spec: &ProviderSpec, _: &dyn CredentialSource) -> Result<Box<dyn CompletionBackend>, GatewayError> {
        Ok(Box::new(MockBackend::new(spec.mock_seed)))
    }
}

/// Provider kinds by name.
#[derive(Clone, Default)]
pub struct ProviderRegistry {
    factories: BTreeMap<String, Arc<dyn BackendFactory>>,
}

impl ProviderRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `gpt`, `claude`, `gemini` over HTTPS plus the offline `mock`.
    pub fn builtin() -> Self {
        Self::with_transport(Arc::new(ReqwestTransport::default()))
    }

    /// Builtin kinds with HTTP traffic routed through `transport`.
    pub fn with_transport(transport: Arc<dyn HttpTransport>) -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(HttpFactory {
            kind: "gpt",
            make_format: || Box::new(ChatCompletionsFormat) as Box<dyn super::http::WireFormat>,
            transport: transport.clone(),
        }));
        reg.register(Arc::new(HttpFactory {
            kind: "claude",
            make_format: || Box::new(MessagesFormat) as Box<dyn super::http::WireFormat>,
            transport: transport.clone(),
        }));
        reg.register(Arc::new(HttpFactory {
            kind: "gemini",
            make_format: || Box::new(GenerateContentFormat) as Box<dyn super::http::WireFormat>,
            transport,
        }));
        reg.register(Arc::new(MockFactory));
        reg
    }

    pub fn register(&mut self, factory: Arc<dyn BackendFactory>) {
        self.factories.insert(factory.kind().to_string(), factory);
    }

    pub fn get(&self, kind: &str) -> Option<&Arc<dyn BackendFactory>> {
        self.factories.get(kind)
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(
        &self,
        spec: &ProviderSpec,
        credentials: &dyn CredentialSource,
    ) -> Result<Box<dyn CompletionBackend>, GatewayError> {
        let factory = self.get(&spec.kind).ok_or_else(|| GatewayError::Config {
            provider: spec.name.clone(),
            message: format!(
                "unknown provider kind {:?} (known: {})",
                spec.kind,
                self.kinds().collect::<Vec<_>>().join(", ")
            ),
        })?;
        factory.build(spec, credentials)
    }
}
