use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Names the requesting agent; excluded from the request digest.
    pub tag: String,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), String> {
        match self.messages.first() {
            None => return Err("request has no messages".into()),
            Some(m) if m.role == Role::Assistant => {
                return Err("first message must be a system or user message".into())
            }
            Some(_) => {}
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(format!("temperature {} must be finite and non-negative", self.temperature));
        }
        if self.max_tokens == 0 {
            return Err("max_tokens must be positive".into());
        }
        Ok(())
    }

    /// Concatenation of every message body, for prompt-content assertions.
    pub fn prompt_text(&self) -> String {
        self.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: FinishReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
    pub latency_ms: u64,
}

impl ChatResponse {
    pub fn stop(content: impl Into<String>) -> Self {
        Self { content: content.into(), finish_reason: FinishReason::Stop, usage: None, latency_ms: 0 }
    }
}

/// Model-level settings shared by every request an engine issues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSettings {
    pub model_id: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self { model_id: "scripted".into(), temperature: 0.0, max_tokens: DEFAULT_MAX_TOKENS }
    }
}

impl ModelSettings {
    pub fn request(&self, tag: &str, messages: Vec<Message>) -> ChatRequest {
        ChatRequest {
            model_id: self.model_id.clone(),
            messages,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            tag: tag.to_string(),
        }
    }
}
