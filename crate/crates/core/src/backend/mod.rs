//! Chat-completion backends.
//!
//! Every agent talks to a model through [`ChatClient::complete`]. The client
//! validates the request, hands it to a [`Provider`] and appends the exchange
//! to a [`Transcript`] before returning. Two providers ship with the crate:
//!
//! - [`HttpProvider`]: OpenAI-compatible `chat/completions` over HTTP with
//!   bounded retries and a per-request deadline;
//! - [`ReplayProvider`]: answers from a [`ReplayStore`] keyed by
//!   [`canonical_digest`], so a recorded transcript replays a run exactly.
//!
//! [`FnProvider`] wraps a closure and is what tests and the runnable examples
//! use to script model behaviour.

mod digest;
mod live;
mod transcript;
mod types;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use digest::canonical_digest;
pub use live::{HttpProvider, LiveOptions, API_KEY_ENV, DEFAULT_DEADLINE, DEFAULT_MAX_RETRIES};
pub use transcript::{read_transcript, scripted_complete, ExchangeMeta, ReplayStore, Transcript, TranscriptEntry};
pub use types::{ChatRequest, ChatResponse, FinishReason, Message, ModelSettings, Role, Usage, DEFAULT_MAX_TOKENS};

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("backend request timed out")]
    Timeout,
    #[error("backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("no recorded response for request digest {digest} (tag `{tag}`)")]
    ReplayMiss { digest: String, tag: String },
    #[error("credential environment variable `{0}` is not set")]
    CredentialMissing(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed completion body: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("{path}:{line}: malformed transcript entry: {detail}")]
    TranscriptFormat { path: PathBuf, line: usize, detail: String },
    #[error("scripted provider failed: {0}")]
    Scripted(String),
    #[error("I/O error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl BackendError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

/// A provider's answer plus how many transient failures preceded it.
#[derive(Debug, Clone)]
pub struct Reply {
    pub response: ChatResponse,
    pub retries: u32,
}

pub trait Provider: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<Reply, BackendError>;
}

pub struct ReplayProvider {
    store: ReplayStore,
}

impl ReplayProvider {
    pub fn new(store: ReplayStore) -> Self {
        Self { store }
    }
}

impl Provider for ReplayProvider {
    fn send(&self, request: &ChatRequest) -> Result<Reply, BackendError> {
        scripted_complete(request, &self.store).map(|response| Reply { response, retries: 0 })
    }
}

type ScriptFn = dyn Fn(&ChatRequest) -> Result<String, BackendError> + Send + Sync;

/// Provider backed by a closure returning the response text.
pub struct FnProvider {
    script: Box<ScriptFn>,
}

impl FnProvider {
    pub fn new<F>(script: F) -> Self
    where
        F: Fn(&ChatRequest) -> Result<String, BackendError> + Send + Sync + 'static,
    {
        Self { script: Box::new(script) }
    }
}

impl Provider for FnProvider {
    fn send(&self, request: &ChatRequest) -> Result<Reply, BackendError> {
        (self.script)(request).map(|content| Reply { response: ChatResponse::stop(content), retries: 0 })
    }
}

/// Entry point for every model call: provider + transcript + model settings.
#[derive(Clone)]
pub struct ChatClient {
    provider: Arc<dyn Provider>,
    transcript: Arc<Transcript>,
    settings: ModelSettings,
}

impl ChatClient {
    pub fn new(provider: Arc<dyn Provider>, transcript: Arc<Transcript>, settings: ModelSettings) -> Self {
        Self { provider, transcript, settings }
    }

    /// Scripted client with an in-memory transcript.
    pub fn scripted<F>(script: F) -> Self
    where
        F: Fn(&ChatRequest) -> Result<String, BackendError> + Send + Sync + 'static,
    {
        Self::new(Arc::new(FnProvider::new(script)), Arc::new(Transcript::in_memory()), ModelSettings::default())
    }

    pub fn transcript(&self) -> &Arc<Transcript> {
        &self.transcript
    }

    pub fn settings(&self) -> &ModelSettings {
        &self.settings
    }

    /// Builds a request from this client's model settings.
    pub fn request(&self, tag: &str, messages: Vec<Message>) -> ChatRequest {
        self.settings.request(tag, messages)
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate().map_err(BackendError::InvalidRequest)?;
        let reply = self.provider.send(request)?;
        self.transcript.append(request, &reply.response, ExchangeMeta { retries: reply.retries })?;
        Ok(reply.response)
    }

    /// Shorthand for `complete(request(tag, messages))` returning the text.
    pub fn ask(&self, tag: &str, messages: Vec<Message>) -> Result<String, BackendError> {
        self.complete(&self.request(tag, messages)).map(|r| r.content)
    }
}

impl std::fmt::Debug for ChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChatClient").field("settings", &self.settings).field("transcript", &self.transcript).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    Live,
    Scripted,
}

/// The `[backend]` table of a pipeline config file.
///
/// The API key is never read from here; live mode takes it from the
/// environment variable named by `api_key_env`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub mode: BackendMode,
    #[serde(default = "default_model")]
    pub model_id: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_deadline_s")]
    pub deadline_s: u64,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Transcript file to replay from in scripted mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay: Option<PathBuf>,
}

fn default_model() -> String {
    ModelSettings::default().model_id
}
fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}
fn default_key_env() -> String {
    API_KEY_ENV.into()
}
fn default_retries() -> u32 {
    DEFAULT_MAX_RETRIES
}
fn default_deadline_s() -> u64 {
    DEFAULT_DEADLINE.as_secs()
}
fn default_backoff_ms() -> u64 {
    500
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            mode: BackendMode::Scripted,
            model_id: default_model(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            endpoint: None,
            api_key_env: default_key_env(),
            max_retries: DEFAULT_MAX_RETRIES,
            deadline_s: default_deadline_s(),
            backoff_ms: default_backoff_ms(),
            replay: None,
        }
    }
}

impl BackendConfig {
    pub fn model_settings(&self) -> ModelSettings {
        ModelSettings { model_id: self.model_id.clone(), temperature: self.temperature, max_tokens: self.max_tokens }
    }

    pub fn live_options(&self) -> Result<LiveOptions, BackendError> {
        let endpoint = self
            .endpoint
            .clone()
            .ok_or_else(|| BackendError::InvalidRequest("live backend requires `endpoint`".into()))?;
        Ok(LiveOptions {
            endpoint,
            api_key_env: self.api_key_env.clone(),
            max_retries: self.max_retries,
            deadline: Duration::from_secs(self.deadline_s),
            backoff: Duration::from_millis(self.backoff_ms),
        })
    }

    /// Builds a client for this configuration, logging into `transcript`.
    pub fn connect(&self, transcript: Arc<Transcript>) -> Result<ChatClient, BackendError> {
        let provider: Arc<dyn Provider> = match self.mode {
            BackendMode::Live => Arc::new(HttpProvider::new(self.live_options()?)?),
            BackendMode::Scripted => {
                let path = self.replay.as_ref().ok_or_else(|| {
                    BackendError::InvalidRequest("scripted backend requires a `replay` transcript".into())
                })?;
                Arc::new(ReplayProvider::new(ReplayStore::load(path)?))
            }
        };
        Ok(ChatClient::new(provider, transcript, self.model_settings()))
    }
}

/// One-shot completion under `config`.
pub fn complete(request: &ChatRequest, config: &BackendConfig, transcript: Arc<Transcript>) -> Result<ChatResponse, BackendError> {
    config.connect(transcript)?.complete(request)
}
