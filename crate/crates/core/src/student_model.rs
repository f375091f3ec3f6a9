//! Rule-based trackers of the learner's trajectory.
//!
//! [`CoverageState`] follows data collection (checklist and interpersonal
//! categories reached through client inquiries). [`InterpretationState`]
//! follows data interpretation (which ground-truth causes the student has
//! named in chat). Both only ever grow.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::client::InquiryResult;
use crate::scenario::{CauseSpec, Scenario};

/// Reason attached to a denied diagnostic-module switch.
pub const PREMATURE_CLOSURE_GUARD: &str = "premature closure guard";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageState {
    pub covered_items: BTreeSet<String>,
    pub total_items: usize,
    pub covered_interpersonal: BTreeSet<String>,
}

impl CoverageState {
    pub fn new(total_items: usize) -> Self {
        CoverageState {
            covered_items: BTreeSet::new(),
            total_items,
            covered_interpersonal: BTreeSet::new(),
        }
    }

    pub fn for_scenario(scenario: &Scenario) -> Self {
        Self::new(scenario.checklist_items.len())
    }

    /// Folds one inquiry's fulfillment facts into the state. Repeated facts
    /// are no-ops.
    #[must_use]
    pub fn record_inquiry(mut self, result: &InquiryResult) -> Self {
        if let Some(item) = &result.fulfilled_checklist_item {
            self.covered_items.insert(item.clone());
        }
        if let Some(category) = &result.fulfilled_interpersonal_category {
            self.covered_interpersonal.insert(category.clone());
        }
        self
    }

    /// Labels of covered and still-open checklist items, in scenario order.
    pub fn split_labels<'a>(&self, scenario: &'a Scenario) -> (Vec<&'a str>, Vec<&'a str>) {
        let mut covered = Vec::new();
        let mut open = Vec::new();
        for item in &scenario.checklist_items {
            if self.covered_items.contains(&item.id) {
                covered.push(item.label.as_str());
            } else {
                open.push(item.label.as_str());
            }
        }
        (covered, open)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpretationState {
    pub mentioned_causes: BTreeSet<String>,
}

impl InterpretationState {
    #[must_use]
    pub fn record_mentions(mut self, causes: impl IntoIterator<Item = String>) -> Self {
        self.mentioned_causes.extend(causes);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum GateDecision {
    Allowed,
    Denied { reason: String },
}

impl GateDecision {
    pub fn is_allowed(&self) -> bool {
        matches!(self, GateDecision::Allowed)
    }
}

/// Lowercases, replaces punctuation with spaces and collapses whitespace.
pub fn normalize_text(text: &str) -> String {
    let replaced: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect();
    replaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Causes whose detection synonyms occur (as substrings, after
/// normalization of both sides) in the utterance.
pub fn detect_cause_mentions(utterance: &str, causes: &[CauseSpec]) -> BTreeSet<String> {
    let text = normalize_text(utterance);
    causes
        .iter()
        .filter(|cause| {
            cause.detection_synonyms.iter().any(|syn| {
                let syn = normalize_text(syn);
                !syn.is_empty() && text.contains(&syn)
            })
        })
        .map(|cause| cause.id.clone())
        .collect()
}

pub fn dc_complete(state: &CoverageState) -> bool {
    state.covered_items.len() == state.total_items
}

/// The diagnostic module opens once at least one cause has been mentioned.
pub fn diagnostic_gate(state: &InterpretationState) -> GateDecision {
    if state.mentioned_causes.is_empty() {
        GateDecision::Denied {
            reason: PREMATURE_CLOSURE_GUARD.to_string(),
        }
    } else {
        GateDecision::Allowed
    }
}
