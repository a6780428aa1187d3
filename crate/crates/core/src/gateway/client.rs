use std::sync::Arc;
use std::time::Duration;

use super::backend::{CompletionBackend, CredentialSource, ProviderRegistry, TransportError};
use super::rate_limit::RateLimiter;
use super::{Clock, CompletionRequest, CompletionResult, GatewayError, ProviderSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub initial: Duration,
    pub max: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Self { initial: Duration::from_secs(1), max: Duration::from_secs(60) }
    }
}

impl Backoff {
    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.saturating_sub(1)).unwrap_or(u32::MAX);
        self.initial.saturating_mul(factor).min(self.max)
    }
}

/// A provider backend wrapped with rate limiting and transient-error retry.
pub struct Gateway {
    spec: ProviderSpec,
    backend: Box<dyn CompletionBackend>,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
    backoff: Backoff,
}

impl Gateway {
    pub fn new(spec: ProviderSpec, backend: Box<dyn CompletionBackend>, clock: Arc<dyn Clock>) -> Self {
        Self { limiter: RateLimiter::per_minute(spec.rate_limit), spec, backend, clock, backoff: Backoff::default() }
    }

    pub fn from_registry(
        spec: &ProviderSpec,
        registry: &ProviderRegistry,
        credentials: &dyn CredentialSource,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, GatewayError> {
        let backend = registry.build(spec, credentials)?;
        Ok(Self::new(spec.clone(), backend, clock))
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn spec(&self) -> &ProviderSpec {
        &self.spec
    }

    /// Sends `request`, retrying throttles, timeouts and 5xx with exponential
    /// backoff up to `max_retries` times. Auth, malformed-request and
    /// context-length errors return immediately.
    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        let max_attempts = self.spec.max_retries + 1;
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.limiter.acquire(self.clock.as_ref());
            let started = self.clock.now();
            match self.backend.send(request) {
                Ok(raw) => {
                    let measured = (self.clock.now().saturating_sub(started)).as_millis() as u64;
                    return Ok(CompletionResult {
                        raw_text: raw.text,
                        prompt_tokens: raw.prompt_tokens,
                        output_tokens: raw.output_tokens,
                        latency_ms: raw.latency_ms.unwrap_or(measured),
                        provider_metadata: raw.metadata,
                        attempt_count: attempt,
                    });
                }
                Err(err) if err.is_transient() && attempt < max_attempts => {
                    let mut delay = self.backoff.delay(attempt);
                    if let TransportError::Throttled { retry_after: Some(hint), .. } = &err {
                        delay = delay.max(*hint);
                    }
                    log::warn!(
                        "provider={} attempt={attempt} error=\"{err}\" retry_in_ms={}",
                        self.spec.name,
                        delay.as_millis()
                    );
                    self.clock.sleep(delay);
                }
                Err(err) => return Err(self.classify(err, attempt)),
            }
        }
    }

    fn classify(&self, err: TransportError, attempts: u32) -> GatewayError {
        let provider = self.spec.name.clone();
        match err {
            TransportError::Auth(message) => GatewayError::Auth { provider, message },
            TransportError::ContextLength(message) => GatewayError::ContextLength { provider, message },
            TransportError::BadRequest(message) | TransportError::MalformedResponse(message) => {
                GatewayError::Rejected { provider, message, attempts }
            }
            transient => GatewayError::RetriesExhausted { provider, attempts, last: transient.to_string() },
        }
    }
}
