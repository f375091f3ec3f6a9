//! Text-generation backends for the mentor.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{ChatTurn, Speaker};

pub const DEFAULT_MODEL: &str = "gpt-4o";
pub const DEFAULT_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub model: String,
    pub temperature: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            model: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

/// Everything a provider sees for one reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_prompt: String,
    /// Chronological suffix of the conversation history.
    pub context_turns: Vec<ChatTurn>,
    pub params: GenerationParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderErrorKind {
    Timeout,
    Transport,
    Status(u16),
    InvalidResponse,
    Scripted,
}

impl fmt::Display for ProviderErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderErrorKind::Timeout => f.write_str("timeout"),
            ProviderErrorKind::Transport => f.write_str("transport error"),
            ProviderErrorKind::Status(code) => write!(f, "HTTP {code}"),
            ProviderErrorKind::InvalidResponse => f.write_str("invalid response"),
            ProviderErrorKind::Scripted => f.write_str("scripted failure"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("provider {kind} after {attempts} attempt(s): {message}")]
pub struct ProviderError {
    pub kind: ProviderErrorKind,
    pub message: String,
    /// How many calls were made before giving up.
    pub attempts: u32,
    /// Whether a later retry might succeed.
    pub retryable: bool,
}

impl ProviderError {
    pub fn new(kind: ProviderErrorKind, message: impl Into<String>) -> Self {
        let retryable = match kind {
            ProviderErrorKind::Timeout | ProviderErrorKind::Transport => true,
            ProviderErrorKind::Status(code) => code == 429 || code >= 500,
            ProviderErrorKind::InvalidResponse | ProviderErrorKind::Scripted => false,
        };
        ProviderError {
            kind,
            message: message.into(),
            attempts: 1,
            retryable,
        }
    }

    pub fn with_attempts(mut self, attempts: u32) -> Self {
        self.attempts = attempts;
        self
    }
}

pub trait LlmProvider: Send + Sync {
    fn generate(&self, prompt: &PromptBundle) -> Result<String, ProviderError>;

    /// True when identical prompts always yield identical replies.
    fn is_deterministic(&self) -> bool;
}

enum Script {
    /// Replies in order, cycling.
    Sequence(Vec<String>),
    /// Reply chosen by a digest of the prompt contents.
    ContentAddressed(Vec<String>),
}

/// Deterministic offline provider for tests, replays and classroom demos.
///
/// Failures can be injected by call index. Every bundle received is kept so
/// tests can inspect exactly what the mentor was shown.
pub struct ScriptedProvider {
    script: Script,
    fail_on: BTreeSet<usize>,
    calls: Mutex<Vec<PromptBundle>>,
}

const DEFAULT_REPLIES: &[&str] = &[
    "Good question. What did the client tell you so far, and what is still unclear?",
    "Let's take this step by step. Which part of the checklist would you look at next?",
    "Interesting thought. What in the conversation supports that idea?",
    "You have collected quite a lot already. Which explanation seems most plausible to you right now? Why?",
    "Think about everyone involved in the baby's care. Is there someone you have not asked yet?",
    "Could several factors play a role at the same time? Which one would you rule out first?",
];

impl ScriptedProvider {
    pub fn sequence<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let replies: Vec<String> = replies.into_iter().map(Into::into).collect();
        assert!(!replies.is_empty(), "scripted provider needs at least one reply");
        Self::with_script(Script::Sequence(replies))
    }

    pub fn content_addressed<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let replies: Vec<String> = replies.into_iter().map(Into::into).collect();
        assert!(!replies.is_empty(), "scripted provider needs at least one reply");
        Self::with_script(Script::ContentAddressed(replies))
    }

    fn with_script(script: Script) -> Self {
        ScriptedProvider {
            script,
            fail_on: BTreeSet::new(),
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Makes the `index`-th call (zero-based) fail with a timeout.
    pub fn fail_on(mut self, index: usize) -> Self {
        self.fail_on.insert(index);
        self
    }

    pub fn calls(&self) -> Vec<PromptBundle> {
        self.calls.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }
}

impl Default for ScriptedProvider {
    /// Content-addressed over a small built-in pool, so replies depend only
    /// on what the mentor is shown and replays are exact across processes.
    fn default() -> Self {
        Self::content_addressed(DEFAULT_REPLIES.iter().copied())
    }
}

fn digest_index(prompt: &PromptBundle, len: usize) -> usize {
    let mut h = Sha256::new();
    h.update(prompt.system_prompt.as_bytes());
    for turn in &prompt.context_turns {
        h.update([match turn.speaker {
            Speaker::Student => 0u8,
            Speaker::Pharmacist => 1u8,
        }]);
        h.update(turn.text.as_bytes());
        h.update([0xff]);
    }
    let bytes = h.finalize();
    let word = u64::from_be_bytes(bytes[..8].try_into().expect("8 bytes"));
    (word % len as u64) as usize
}

impl LlmProvider for ScriptedProvider {
    fn generate(&self, prompt: &PromptBundle) -> Result<String, ProviderError> {
        let mut calls = self.calls.lock().unwrap();
        let index = calls.len();
        calls.push(prompt.clone());
        if self.fail_on.contains(&index) {
            return Err(ProviderError::new(ProviderErrorKind::Timeout, format!("injected failure on call {index}")));
        }
        Ok(match &self.script {
            Script::Sequence(replies) => replies[index % replies.len()].clone(),
            Script::ContentAddressed(replies) => replies[digest_index(prompt, replies.len())].clone(),
        })
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}
