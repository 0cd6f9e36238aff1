//! Live chat-completion provider adapters.
//!
//! Providers are declared in config, not code: endpoint, credential env
//! var, auth style, wire shape and temperature range. OpenAI-compatible
//! endpoints share one wire shape; Anthropic- and Gemini-style request
//! bodies get their own. Every request is single-turn with no system
//! prompt, so each trial starts from a clean context.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{AgentError, InvokeOutcome, RequestMetadata};

/// Request/response body family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireShape {
    OpenaiChat,
    AnthropicMessages,
    GeminiGenerate,
}

/// How the credential travels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AuthScheme {
    /// `Authorization: Bearer <key>` (or another header named in config).
    #[default]
    Bearer,
    /// The bare key in the configured header, e.g. `x-api-key`.
    RawHeader,
    /// The key as a query parameter named by `auth_header`.
    QueryParam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub name: String,
    pub endpoint: String,
    pub wire: WireShape,
    /// Environment variable holding the API key.
    pub auth_env: String,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    #[serde(default)]
    pub auth_scheme: AuthScheme,
    pub temperature_range: (f64, f64),
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default)]
    pub extra_headers: Vec<(String, String)>,
    /// Required by Anthropic-style endpoints; optional elsewhere.
    #[serde(default)]
    pub max_tokens: Option<u32>,
    /// Concurrent in-flight requests the runner may use for this provider.
    #[serde(default = "default_max_parallel")]
    pub max_parallel: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_auth_header() -> String {
    "Authorization".to_string()
}

fn default_max_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    250
}

fn default_max_parallel() -> usize {
    2
}

fn default_timeout_secs() -> u64 {
    120
}

impl ProviderConfig {
    fn request_body(&self, model_id: &str, temperature: f64, prompt: &str) -> Value {
        match self.wire {
            WireShape::OpenaiChat => json!({
                "model": model_id,
                "temperature": temperature,
                "messages": [{"role": "user", "content": prompt}],
            }),
            WireShape::AnthropicMessages => json!({
                "model": model_id,
                "temperature": temperature,
                "max_tokens": self.max_tokens.unwrap_or(4096),
                "messages": [{"role": "user", "content": prompt}],
            }),
            WireShape::GeminiGenerate => json!({
                "contents": [{"parts": [{"text": prompt}]}],
                "generationConfig": {"temperature": temperature},
            }),
        }
    }

    fn extract_text(&self, body: &Value) -> Option<String> {
        let text = match self.wire {
            WireShape::OpenaiChat => body.get("choices")?.get(0)?.get("message")?.get("content")?,
            WireShape::AnthropicMessages => body.get("content")?.get(0)?.get("text")?,
            WireShape::GeminiGenerate => body
                .get("candidates")?
                .get(0)?
                .get("content")?
                .get("parts")?
                .get(0)?
                .get("text")?,
        };
        text.as_str().map(str::to_string)
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..=599).contains(&status)
}

/// Send one single-turn completion request with retry and backoff.
pub fn invoke_live(
    config: &ProviderConfig,
    model_id: &str,
    temperature: f64,
    prompt: &str,
) -> Result<InvokeOutcome, AgentError> {
    let key = std::env::var(&config.auth_env).map_err(|_| AgentError::MissingCredentials {
        provider: config.name.clone(),
        env_var: config.auth_env.clone(),
    })?;

    let body = config.request_body(model_id, temperature, prompt);
    let started = Instant::now();
    let mut last_status: Option<u16> = None;
    let mut last_transport: Option<String> = None;

    let attempts_allowed = config.max_retries.max(1);
    for attempt in 1..=attempts_allowed {
        if attempt > 1 {
            let backoff = config.backoff_ms.saturating_mul(1 << (attempt - 2).min(16));
            std::thread::sleep(Duration::from_millis(backoff));
        }

        let mut request = ureq::post(&config.endpoint)
            .config()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build();
        request = match config.auth_scheme {
            AuthScheme::Bearer => request.header(&config.auth_header, &format!("Bearer {key}")),
            AuthScheme::RawHeader => request.header(&config.auth_header, &key),
            AuthScheme::QueryParam => request.query(&config.auth_header, &key),
        };
        for (name, value) in &config.extra_headers {
            request = request.header(name, value);
        }

        match request.send_json(&body) {
            Ok(mut response) => {
                let payload: Value = response.body_mut().read_json().map_err(|e| {
                    AgentError::MalformedProviderResponse {
                        provider: config.name.clone(),
                        detail: e.to_string(),
                    }
                })?;
                let text = config.extract_text(&payload).ok_or_else(|| {
                    AgentError::MalformedProviderResponse {
                        provider: config.name.clone(),
                        detail: "missing completion text field".to_string(),
                    }
                })?;
                return Ok(InvokeOutcome {
                    raw_response: text,
                    metadata: RequestMetadata {
                        provider: config.name.clone(),
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempts: attempt,
                    },
                });
            }
            Err(ureq::Error::StatusCode(status)) => {
                if status == 401 || status == 403 {
                    return Err(AgentError::AuthFailed {
                        provider: config.name.clone(),
                        status,
                    });
                }
                last_status = Some(status);
                if !retryable(status) {
                    return Err(AgentError::ProviderHttp {
                        provider: config.name.clone(),
                        status,
                        attempts: attempt,
                    });
                }
            }
            Err(other) => {
                last_transport = Some(other.to_string());
            }
        }
    }

    match (last_status, last_transport) {
        (Some(status), _) => Err(AgentError::ProviderHttp {
            provider: config.name.clone(),
            status,
            attempts: attempts_allowed,
        }),
        (None, Some(detail)) => Err(AgentError::Transport {
            provider: config.name.clone(),
            detail,
            attempts: attempts_allowed,
        }),
        (None, None) => Err(AgentError::Transport {
            provider: config.name.clone(),
            detail: "no attempt completed".to_string(),
            attempts: attempts_allowed,
        }),
    }
}
