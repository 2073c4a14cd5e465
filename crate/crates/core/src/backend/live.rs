use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{BackendError, ChatRequest, ChatResponse, FinishReason, Provider, Reply, Usage};

pub const API_KEY_ENV: &str = "MOSAIC_API_KEY";
pub const DEFAULT_MAX_RETRIES: u32 = 3;
pub const DEFAULT_DEADLINE: Duration = Duration::from_secs(120);

#[derive(Debug, Clone)]
pub struct LiveOptions {
    /// Full chat-completions URL, e.g. `https://host/v1/chat/completions`.
    pub endpoint: String,
    pub api_key_env: String,
    pub max_retries: u32,
    /// Budget for one `complete` call, retries included.
    pub deadline: Duration,
    /// First backoff delay; doubles after each retry.
    pub backoff: Duration,
}

impl LiveOptions {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key_env: API_KEY_ENV.into(),
            max_retries: DEFAULT_MAX_RETRIES,
            deadline: DEFAULT_DEADLINE,
            backoff: Duration::from_millis(500),
        }
    }
}

/// Client for OpenAI-compatible `chat/completions` endpoints.
pub struct HttpProvider {
    options: LiveOptions,
    api_key: String,
    http: reqwest::blocking::Client,
}

impl HttpProvider {
    /// Reads the bearer token from the configured environment variable.
    pub fn new(options: LiveOptions) -> Result<Self, BackendError> {
        let api_key = std::env::var(&options.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| BackendError::CredentialMissing(options.api_key_env.clone()))?;
        let http = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { options, api_key, http })
    }

    fn attempt(&self, request: &ChatRequest, timeout: Duration) -> Result<ChatResponse, Attempt> {
        let body = json!({
            "model": request.model_id,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let response = self
            .http
            .post(&self.options.endpoint)
            .bearer_auth(&self.api_key)
            .timeout(timeout)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    Attempt::Transient(BackendError::Timeout)
                } else if e.is_connect() || e.is_request() {
                    Attempt::Transient(BackendError::Transport(e.to_string()))
                } else {
                    Attempt::Fatal(BackendError::Transport(e.to_string()))
                }
            })?;
        let status = response.status();
        let text = response.text().map_err(|e| {
            if e.is_timeout() {
                Attempt::Transient(BackendError::Timeout)
            } else {
                Attempt::Transient(BackendError::Transport(e.to_string()))
            }
        })?;
        if !status.is_success() {
            let err = BackendError::Http { status: status.as_u16(), body: truncate(&text, 512) };
            return Err(if status.as_u16() == 429 || status.is_server_error() {
                Attempt::Transient(err)
            } else {
                Attempt::Fatal(err)
            });
        }
        parse_completion(&text).map_err(Attempt::Fatal)
    }
}

enum Attempt {
    Transient(BackendError),
    Fatal(BackendError),
}

impl Provider for HttpProvider {
    fn send(&self, request: &ChatRequest) -> Result<Reply, BackendError> {
        let started = Instant::now();
        let mut retries = 0;
        let mut backoff = self.options.backoff;
        loop {
            let remaining = self.options.deadline.saturating_sub(started.elapsed());
            if remaining.is_zero() {
                return Err(BackendError::Timeout);
            }
            match self.attempt(request, remaining) {
                Ok(mut response) => {
                    response.latency_ms = started.elapsed().as_millis() as u64;
                    return Ok(Reply { response, retries });
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(e)) => {
                    if retries >= self.options.max_retries {
                        return Err(e);
                    }
                    tracing::warn!(tag = %request.tag, error = %e, retry = retries + 1, "transient backend failure");
                    retries += 1;
                    let remaining = self.options.deadline.saturating_sub(started.elapsed());
                    std::thread::sleep(backoff.min(remaining));
                    backoff *= 2;
                }
            }
        }
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
    #[serde(default)]
    total_tokens: u64,
}

fn parse_completion(text: &str) -> Result<ChatResponse, BackendError> {
    let body: CompletionBody = serde_json::from_str(text)
        .map_err(|e| BackendError::MalformedResponse(format!("{e}: {}", truncate(text, 256))))?;
    let choice = body
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| BackendError::MalformedResponse("response has no choices".into()))?;
    let finish_reason = match choice.finish_reason.as_deref() {
        Some("length") => FinishReason::Length,
        _ => FinishReason::Stop,
    };
    Ok(ChatResponse {
        content: choice.message.content.unwrap_or_default(),
        finish_reason,
        usage: body.usage.map(|u| Usage {
            prompt_tokens: u.prompt_tokens,
            completion_tokens: u.completion_tokens,
            total_tokens: u.total_tokens,
        }),
        latency_ms: 0,
    })
}

fn truncate(text: &str, max: usize) -> String {
    text.chars().take(max).collect()
}
