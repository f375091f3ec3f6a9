//! Session events and their line-delimited JSON encoding.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Timestamp;
use crate::pharmacist::Condition;
use crate::scenario::{Likelihood, Phase};

/// Version tag written on every log line.
pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Module {
    ClientInquiry,
    Pedagogical,
    Diagnostic,
}

impl Module {
    pub fn as_str(self) -> &'static str {
        match self {
            Module::ClientInquiry => "client_inquiry",
            Module::Pedagogical => "pedagogical",
            Module::Diagnostic => "diagnostic",
        }
    }
}

impl fmt::Display for Module {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Module {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Module::ClientInquiry, Module::Pedagogical, Module::Diagnostic]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown module {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initiator {
    Student,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisEntry {
    /// A cause id or free text naming a cause.
    pub cause: String,
    pub likelihood: Likelihood,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisForm {
    pub entries: Vec<DiagnosisEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    SessionStarted {
        session_id: String,
        student_id: String,
        condition: Condition,
        /// Scenario id used for each phase.
        scenarios: BTreeMap<Phase, String>,
    },
    ClientQuestionAsked {
        persona: String,
        topic: String,
    },
    ClientAnswered {
        text: String,
    },
    ModuleSwitched {
        from: Module,
        to: Module,
        initiator: Initiator,
    },
    StudentMessage {
        text: String,
    },
    PharmacistMessage {
        text: String,
    },
    ResourceOpened {
        resource: String,
    },
    DiagnosisSubmitted {
        form: DiagnosisForm,
    },
    SolutionShown,
    PhaseAdvanced {
        /// `None` once the last phase is finished.
        to: Option<Phase>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub timestamp: Timestamp,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Serialize, Deserialize)]
struct LogLine {
    v: u32,
    #[serde(flatten)]
    event: SessionEvent,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("corrupt log at line {position}: {reason}")]
    CorruptLog { position: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One log line, without the trailing newline.
pub fn encode_event(event: &SessionEvent) -> String {
    serde_json::to_string(&LogLine {
        v: LOG_SCHEMA_VERSION,
        event: event.clone(),
    })
    .expect("events serialize")
}

pub fn write_events<W: Write>(mut out: W, events: &[SessionEvent]) -> std::io::Result<()> {
    for e in events {
        writeln!(out, "{}", encode_event(e))?;
    }
    out.flush()
}

pub fn encode_log(events: &[SessionEvent]) -> String {
    let mut s = String::new();
    for e in events {
        s.push_str(&encode_event(e));
        s.push('\n');
    }
    s
}

/// Reads a log, checking line syntax, schema version and timestamp order.
/// Positions are zero-based line indices; blank lines are skipped.
pub fn read_events<R: BufRead>(input: R) -> Result<Vec<SessionEvent>, LogError> {
    let mut events: Vec<SessionEvent> = Vec::new();
    for (position, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(&line).map_err(|e| LogError::CorruptLog {
            position,
            reason: e.to_string(),
        })?;
        if parsed.v != LOG_SCHEMA_VERSION {
            return Err(LogError::CorruptLog {
                position,
                reason: format!("unsupported log schema version {}", parsed.v),
            });
        }
        if let Some(prev) = events.last() {
            if parsed.event.timestamp < prev.timestamp {
                return Err(LogError::CorruptLog {
                    position,
                    reason: "timestamp earlier than the previous event".into(),
                });
            }
        }
        events.push(parsed.event);
    }
    Ok(events)
}
