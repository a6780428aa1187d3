//! HTTP adapters for the three vendor wire formats.

use std::time::Duration;

use serde_json::{json, Value};

use super::backend::{CompletionBackend, RawCompletion, TransportError};
use super::{CompletionRequest, ProviderSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
    pub retry_after: Option<Duration>,
}

/// Sends one JSON POST. Network-level failures map onto transient errors.
pub trait HttpTransport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError>;
}

pub struct ReqwestTransport {
    client: std::sync::OnceLock<reqwest::blocking::Client>,
}

impl Default for ReqwestTransport {
    fn default() -> Self {
        Self { client: std::sync::OnceLock::new() }
    }
}

impl HttpTransport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError> {
        let client = self.client.get_or_init(reqwest::blocking::Client::new);
        let mut req = client
            .post(url)
            .timeout(timeout)
            .header("content-type", "application/json")
            .body(body.to_string());
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout(e.to_string())
            } else {
                TransportError::Unavailable(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|s| s.is_finite() && *s >= 0.0)
            .map(Duration::from_secs_f64);
        let body = resp.text().map_err(|e| TransportError::Unavailable(e.to_string()))?;
        Ok(HttpResponse { status, body, retry_after })
    }
}

/// Maps the uniform request onto one vendor's JSON shape and back.
pub trait WireFormat: Send + Sync {
    fn name(&self) -> &'static str;
    fn url(&self, spec: &ProviderSpec) -> String {
        spec.endpoint().replace("{model}", &spec.model_name)
    }
    fn headers(&self, api_key: &str) -> Vec<(String, String)>;
    fn request_body(&self, spec: &ProviderSpec, request: &CompletionRequest) -> Value;
    fn parse_response(&self, body: &str) -> Result<RawCompletion, TransportError>;
    fn is_context_length_error(&self, message: &str) -> bool;
}

fn parse_json(body: &str) -> Result<Value, TransportError> {
    serde_json::from_str(body).map_err(|e| TransportError::MalformedResponse(format!("invalid JSON: {e}")))
}

fn error_message(body: &str) -> String {
    let parsed: Option<Value> = serde_json::from_str(body).ok();
    parsed
        .as_ref()
        .and_then(|v| v.pointer("/error/message").and_then(Value::as_str))
        .map(str::to_string)
        .unwrap_or_else(|| body.chars().take(300).collect())
}

fn meta_str(v: &Value, pointer: &str) -> Option<String> {
    v.pointer(pointer).and_then(|x| match x {
        Value::String(s) => Some(s.clone()),
        Value::Null => None,
        other => Some(other.to_string()),
    })
}

fn collect_meta(v: &Value, fields: &[(&str, &str)]) -> std::collections::BTreeMap<String, String> {
    fields.iter().filter_map(|(name, ptr)| meta_str(v, ptr).map(|s| (name.to_string(), s))).collect()
}

/// `POST /v1/chat/completions` style.
pub struct ChatCompletionsFormat;

impl WireFormat for ChatCompletionsFormat {
    fn name(&self) -> &'static str {
        "chat-completions"
    }

    fn headers(&self, api_key: &str) -> Vec<(String, String)> {
        vec![("authorization".into(), format!("Bearer {api_key}"))]
    }

    fn request_body(&self, spec: &ProviderSpec, request: &CompletionRequest) -> Value {
        let mut body = json!({
            "model": spec.model_name,
            "messages": [{"role": "user", "content": request.prompt_text}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn parse_response(&self, body: &str) -> Result<RawCompletion, TransportError> {
        let v = parse_json(body)?;
        let text = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| TransportError::MalformedResponse("no choices[0].message.content".into()))?;
        Ok(RawCompletion {
            text: text.to_string(),
            prompt_tokens: v.pointer("/usage/prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
            output_tokens: v.pointer("/usage/completion_tokens").and_then(Value::as_u64).unwrap_or(0),
            metadata: collect_meta(
                &v,
                &[
                    ("id", "/id"),
                    ("model", "/model"),
                    ("finish_reason", "/choices/0/finish_reason"),
                    ("system_fingerprint", "/system_fingerprint"),
                ],
            ),
            latency_ms: None,
        })
    }

    fn is_context_length_error(&self, message: &str) -> bool {
        let m = message.to_ascii_lowercase();
        m.contains("context_length_exceeded") || m.contains("maximum context length")
    }
}

/// `POST /v1/messages` style.
pub struct MessagesFormat;

impl WireFormat for MessagesFormat {
    fn name(&self) -> &'static str {
        "messages"
    }

    fn headers(&self, api_key: &str) -> Vec<(String, String)> {
        vec![("x-api-key".into(), api_key.to_string()), ("anthropic-version".into(), "2023-06-01".into())]
    }

    fn request_body(&self, spec: &ProviderSpec, request: &CompletionRequest) -> Value {
        json!({
            "model": spec.model_name,
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": request.prompt_text}],
        })
    }

    fn parse_response(&self, body: &str) -> Result<RawCompletion, TransportError> {
        let v = parse_json(body)?;
        let blocks = v
            .get("content")
            .and_then(Value::as_array)
            .ok_or_else(|| TransportError::MalformedResponse("no content array".into()))?;
        let text: String = blocks
            .iter()
            .filter(|b| b.get("type").and_then(Value::as_str) == Some("text"))
            .filter_map(|b| b.get("text").and_then(Value::as_str))
            .collect();
        Ok(RawCompletion {
            text,
            prompt_tokens: v.pointer("/usage/input_tokens").and_then(Value::as_u64).unwrap_or(0),
            output_tokens: v.pointer("/usage/output_tokens").and_then(Value::as_u64).unwrap_or(0),
            metadata: collect_meta(&v, &[("id", "/id"), ("model", "/model"), ("stop_reason", "/stop_reason")]),
            latency_ms: None,
        })
    }

    fn is_context_length_error(&self, message: &str) -> bool {
        let m = message.to_ascii_lowercase();
        m.contains("prompt is too long") || m.contains("context window") || m.contains("context length")
    }
}

/// `POST .../models/{model}:generateContent` style.
pub struct GenerateContentFormat;

impl WireFormat for GenerateContentFormat {
    fn name(&self) -> &'static str {
        "generate-content"
    }

    fn headers(&self, api_key: &str) -> Vec<(String, String)> {
        vec![("x-goog-api-key".into(), api_key.to_string())]
    }

    fn request_body(&self, _spec: &ProviderSpec, request: &CompletionRequest) -> Value {
        let mut config = json!({
            "temperature": request.temperature,
            "maxOutputTokens": request.max_output_tokens,
        });
        if let Some(seed) = request.seed {
            // the API takes a 32-bit seed
            config["seed"] = json!(seed as u32 as i32);
        }
        json!({
            "contents": [{"role": "user", "parts": [{"text": request.prompt_text}]}],
            "generationConfig": config,
        })
    }

    fn parse_response(&self, body: &str) -> Result<RawCompletion, TransportError> {
        let v = parse_json(body)?;
        let parts = v
            .pointer("/candidates/0/content/parts")
            .and_then(Value::as_array)
            .ok_or_else(|| {
                let reason = meta_str(&v, "/promptFeedback/blockReason").unwrap_or_else(|| "no candidates".into());
                TransportError::MalformedResponse(reason)
            })?;
        let text: String = parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect();
        Ok(RawCompletion {
            text,
            prompt_tokens: v.pointer("/usageMetadata/promptTokenCount").and_then(Value::as_u64).unwrap_or(0),
            output_tokens: v.pointer("/usageMetadata/candidatesTokenCount").and_then(Value::as_u64).unwrap_or(0),
            metadata: collect_meta(
                &v,
                &[("finish_reason", "/candidates/0/finishReason"), ("model", "/modelVersion"), ("id", "/responseId")],
            ),
            latency_ms: None,
        })
    }

    fn is_context_length_error(&self, message: &str) -> bool {
        let m = message.to_ascii_lowercase();
        m.contains("exceeds the maximum number of tokens") || m.contains("context length")
    }
}

pub struct HttpBackend {
    spec: ProviderSpec,
    format: Box<dyn WireFormat>,
    transport: std::sync::Arc<dyn HttpTransport>,
    api_key: String,
}

impl HttpBackend {
    pub fn new(
        spec: ProviderSpec,
        format: Box<dyn WireFormat>,
        transport: std::sync::Arc<dyn HttpTransport>,
        api_key: String,
    ) -> Self {
        Self { spec, format, transport, api_key }
    }
}

/// Maps a non-2xx status onto the error taxonomy.
pub fn classify_status(status: u16, body: &str, retry_after: Option<Duration>, format: &dyn WireFormat) -> TransportError {
    let message = error_message(body);
    match status {
        401 | 403 => TransportError::Auth(message),
        429 => TransportError::Throttled { message, retry_after },
        408 => TransportError::Timeout(message),
        500..=599 => TransportError::Unavailable(format!("HTTP {status}: {message}")),
        _ if format.is_context_length_error(&message) => TransportError::ContextLength(message),
        _ => TransportError::BadRequest(format!("HTTP {status}: {message}")),
    }
}

impl CompletionBackend for HttpBackend {
    fn send(&self, request: &CompletionRequest) -> Result<RawCompletion, TransportError> {
        let body = self.format.request_body(&self.spec, request).to_string();
        let resp = self.transport.post_json(
            &self.format.url(&self.spec),
            &self.format.headers(&self.api_key),
            &body,
            Duration::from_secs(self.spec.timeout_secs),
        )?;
        if (200..300).contains(&resp.status) {
            let mut raw = self.format.parse_response(&resp.body)?;
            raw.metadata.insert("adapter".into(), self.format.name().into());
            Ok(raw)
        } else {
            Err(classify_status(resp.status, &resp.body, resp.retry_after, self.format.as_ref()))
        }
    }
}
