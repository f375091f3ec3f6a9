//! Chat-completions backend for the mentor and the environment wiring that
//! picks between it and the offline scripted provider.

use std::sync::Arc;
use std::time::Duration;

use pharmasim_core::pharmacist::{
    LlmProvider, PromptBundle, ProviderError, ProviderErrorKind, ScriptedProvider, Speaker, DEFAULT_MODEL,
    DEFAULT_TEMPERATURE,
};
use serde::{Deserialize, Serialize};

pub const ENV_ENDPOINT: &str = "PHARMASIM_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "PHARMASIM_LLM_API_KEY";
pub const ENV_MODEL: &str = "PHARMASIM_LLM_MODEL";
pub const ENV_TEMPERATURE: &str = "PHARMASIM_LLM_TEMPERATURE";

pub const MAX_ATTEMPTS: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteSettings {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub timeout: Duration,
    /// Delay before the first retry; doubles for each further one.
    pub backoff: Duration,
}

impl RemoteSettings {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteSettings {
            endpoint: endpoint.into(),
            api_key: None,
            model: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            timeout: Duration::from_secs(60),
            backoff: Duration::from_secs(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProviderSettings {
    Scripted,
    Remote(RemoteSettings),
}

impl ProviderSettings {
    /// Reads the provider variables; without an endpoint the scripted
    /// provider is used.
    pub fn from_env() -> anyhow::Result<Self> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> anyhow::Result<Self> {
        let Some(endpoint) = get(ENV_ENDPOINT).filter(|s| !s.trim().is_empty()) else {
            return Ok(ProviderSettings::Scripted);
        };
        let mut settings = RemoteSettings::new(endpoint);
        settings.api_key = get(ENV_API_KEY).filter(|s| !s.is_empty());
        if let Some(model) = get(ENV_MODEL).filter(|s| !s.is_empty()) {
            settings.model = model;
        }
        if let Some(t) = get(ENV_TEMPERATURE).filter(|s| !s.is_empty()) {
            settings.temperature = t
                .parse()
                .map_err(|_| anyhow::anyhow!("{ENV_TEMPERATURE} is not a number: {t:?}"))?;
        }
        Ok(ProviderSettings::Remote(settings))
    }

    pub fn build(&self) -> anyhow::Result<Arc<dyn LlmProvider>> {
        Ok(match self {
            ProviderSettings::Scripted => Arc::new(ScriptedProvider::default()),
            ProviderSettings::Remote(s) => Arc::new(RemoteProvider::new(s.clone())?),
        })
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<ChatMessage<'a>>,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

pub struct RemoteProvider {
    settings: RemoteSettings,
    http: reqwest::blocking::Client,
}

impl RemoteProvider {
    pub fn new(settings: RemoteSettings) -> anyhow::Result<Self> {
        let http = reqwest::blocking::Client::builder().timeout(settings.timeout).build()?;
        Ok(RemoteProvider { settings, http })
    }

    fn request_body<'a>(&'a self, prompt: &'a PromptBundle) -> ChatRequest<'a> {
        let mut messages = vec![ChatMessage {
            role: "system",
            content: &prompt.system_prompt,
        }];
        messages.extend(prompt.context_turns.iter().map(|t| ChatMessage {
            role: match t.speaker {
                Speaker::Student => "user",
                Speaker::Pharmacist => "assistant",
            },
            content: &t.text,
        }));
        // The bundle's model wins only when the operator did not pick one.
        let model = if self.settings.model.is_empty() {
            &prompt.params.model
        } else {
            &self.settings.model
        };
        ChatRequest {
            model,
            temperature: self.settings.temperature,
            messages,
        }
    }

    fn attempt(&self, body: &ChatRequest<'_>) -> Result<String, ProviderError> {
        let mut req = self.http.post(&self.settings.endpoint).json(body);
        if let Some(key) = &self.settings.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            let kind = if e.is_timeout() {
                ProviderErrorKind::Timeout
            } else {
                ProviderErrorKind::Transport
            };
            ProviderError::new(kind, e.to_string())
        })?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(ProviderError::new(ProviderErrorKind::Status(status.as_u16()), text));
        }
        let parsed: ChatResponse = resp
            .json()
            .map_err(|e| ProviderError::new(ProviderErrorKind::InvalidResponse, e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .filter(|c| !c.trim().is_empty())
            .ok_or_else(|| ProviderError::new(ProviderErrorKind::InvalidResponse, "reply has no content"))
    }
}

impl LlmProvider for RemoteProvider {
    fn generate(&self, prompt: &PromptBundle) -> Result<String, ProviderError> {
        let body = self.request_body(prompt);
        let mut delay = self.settings.backoff;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(reply) => return Ok(reply),
                Err(e) if e.retryable && attempts < MAX_ATTEMPTS => {
                    tracing::warn!(error = %e, attempts, "provider call failed, retrying");
                    std::thread::sleep(delay);
                    delay *= 2;
                }
                Err(e) => return Err(e.with_attempts(attempts)),
            }
        }
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}
