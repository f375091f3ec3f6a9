//! Rule-based client character. Answers come straight from the scenario's
//! question-answer knowledge base; the client keeps no state of its own.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InquiryResult {
    pub answer_text: String,
    pub fulfilled_checklist_item: Option<String>,
    pub fulfilled_interpersonal_category: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("unknown persona {0:?}")]
    UnknownPersona(String),
    #[error("persona {persona:?} has no topic {topic:?}")]
    UnknownTopic { persona: String, topic: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InquiryOption {
    pub topic: String,
    pub prompt_label: String,
}

pub fn ask_client(scenario: &Scenario, persona: &str, topic: &str) -> Result<InquiryResult, ClientError> {
    let p = scenario
        .persona(persona)
        .ok_or_else(|| ClientError::UnknownPersona(persona.to_string()))?;
    let entry = p.entry(topic).ok_or_else(|| ClientError::UnknownTopic {
        persona: persona.to_string(),
        topic: topic.to_string(),
    })?;
    Ok(InquiryResult {
        answer_text: entry.answer.clone(),
        fulfilled_checklist_item: entry.checklist_item.clone(),
        fulfilled_interpersonal_category: entry.interpersonal_category.clone(),
    })
}

/// Dropdown contents for one persona, in scenario file order.
pub fn list_inquiry_options(scenario: &Scenario, persona: &str) -> Result<Vec<InquiryOption>, ClientError> {
    let p = scenario
        .persona(persona)
        .ok_or_else(|| ClientError::UnknownPersona(persona.to_string()))?;
    Ok(p.qa_entries
        .iter()
        .map(|e| InquiryOption {
            topic: e.topic.clone(),
            prompt_label: e.prompt_label.clone(),
        })
        .collect())
}
