//! The pedagogical mentor.
//!
//! A two-state machine: data collection (DC) until the student model reports
//! full checklist coverage, then data interpretation (DI) for the rest of
//! the session. Each reply is produced by an [`LlmProvider`] from a
//! condition- and state-specific system prompt plus the most recent turns of
//! the conversation.

mod prompt;
mod provider;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use prompt::{
    assemble_prompt, default_templates, render_template, ProgressSummary, PromptTemplateSet, TemplateError,
};
pub use provider::{
    GenerationParams, LlmProvider, PromptBundle, ProviderError, ProviderErrorKind, ScriptedProvider,
    DEFAULT_MODEL, DEFAULT_TEMPERATURE,
};

use crate::clock::{Clock, Timestamp};
use crate::scenario::Scenario;
use crate::student_model::{dc_complete, detect_cause_mentions, CoverageState, InterpretationState};

/// Turns of history handed to the provider with every call.
pub const DEFAULT_CONTEXT_TURNS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    StructuringHeavy,
    ProblematizingHeavy,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::StructuringHeavy, Condition::ProblematizingHeavy];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::StructuringHeavy => "structuring_heavy",
            Condition::ProblematizingHeavy => "problematizing_heavy",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == id)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_id(s).ok_or_else(|| format!("unknown condition {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DialoguePhase {
    #[serde(rename = "dc")]
    DataCollection,
    #[serde(rename = "di")]
    DataInterpretation,
}

impl DialoguePhase {
    pub const ALL: [DialoguePhase; 2] = [DialoguePhase::DataCollection, DialoguePhase::DataInterpretation];

    pub fn as_str(self) -> &'static str {
        match self {
            DialoguePhase::DataCollection => "dc",
            DialoguePhase::DataInterpretation => "di",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == id)
    }
}

impl fmt::Display for DialoguePhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Student,
    Pharmacist,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub speaker: Speaker,
    pub text: String,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PharmacistState {
    pub condition: Condition,
    pub phase: DialoguePhase,
    pub history: Vec<ChatTurn>,
    pub coverage: CoverageState,
    pub interpretation: InterpretationState,
}

impl PharmacistState {
    pub fn new(condition: Condition, coverage: CoverageState) -> Self {
        let mut s = PharmacistState {
            condition,
            phase: DialoguePhase::DataCollection,
            history: Vec::new(),
            coverage,
            interpretation: InterpretationState::default(),
        };
        s.sync_phase();
        s
    }

    /// Moves DC to DI once the checklist is complete. Never moves back.
    /// Returns whether a transition happened.
    pub fn sync_phase(&mut self) -> bool {
        if self.phase == DialoguePhase::DataCollection && dc_complete(&self.coverage) {
            self.phase = DialoguePhase::DataInterpretation;
            return true;
        }
        false
    }

    /// Replaces the coverage snapshot with a newer one from the student model.
    pub fn observe_coverage(&mut self, coverage: CoverageState) -> bool {
        self.coverage = coverage;
        self.sync_phase()
    }

    /// Appends a student turn and records any causes it mentions.
    pub fn push_student_turn(&mut self, text: &str, at: Timestamp, scenario: &Scenario) {
        let mentioned = detect_cause_mentions(text, &scenario.causes);
        self.interpretation = std::mem::take(&mut self.interpretation).record_mentions(mentioned);
        self.push_turn(Speaker::Student, text, at);
    }

    pub fn push_pharmacist_turn(&mut self, text: &str, at: Timestamp) {
        self.push_turn(Speaker::Pharmacist, text, at);
    }

    fn push_turn(&mut self, speaker: Speaker, text: &str, at: Timestamp) {
        debug_assert!(self.history.last().is_none_or(|t| t.timestamp <= at));
        self.history.push(ChatTurn {
            speaker,
            text: text.to_string(),
            timestamp: at,
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub context_turns: usize,
    pub params: GenerationParams,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            context_turns: DEFAULT_CONTEXT_TURNS,
            params: GenerationParams::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error("student message is empty")]
    EmptyMessage,
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Result of one successful exchange.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: PharmacistState,
    pub reply: String,
    pub student_at: Timestamp,
    pub reply_at: Timestamp,
    /// What the provider was given.
    pub prompt: PromptBundle,
}

#[derive(Debug, Clone)]
pub struct PharmacistAgent {
    pub templates: PromptTemplateSet,
    pub config: AgentConfig,
}

impl PharmacistAgent {
    pub fn new(templates: PromptTemplateSet, config: AgentConfig) -> Self {
        PharmacistAgent { templates, config }
    }

    pub fn with_defaults() -> Self {
        Self::new(PromptTemplateSet::builtin(), AgentConfig::default())
    }

    pub fn assemble(&self, state: &PharmacistState, scenario: &Scenario) -> Result<PromptBundle, TemplateError> {
        let progress = ProgressSummary::from_state(state, scenario);
        assemble_prompt(state, &self.templates, &progress, self.config.context_turns, &self.config.params)
    }

    /// One student message and one mentor reply.
    ///
    /// The input state is never modified; on error the caller keeps it as is.
    pub fn step(
        &self,
        state: &PharmacistState,
        scenario: &Scenario,
        message: &str,
        provider: &dyn LlmProvider,
        clock: &dyn Clock,
    ) -> Result<StepOutcome, StepError> {
        if message.trim().is_empty() {
            return Err(StepError::EmptyMessage);
        }
        let mut next = state.clone();
        let student_at = clock.now();
        next.push_student_turn(message, student_at, scenario);
        next.sync_phase();
        let prompt = self.assemble(&next, scenario)?;
        let reply = provider.generate(&prompt)?;
        let reply_at = clock.now();
        next.push_pharmacist_turn(&reply, reply_at);
        Ok(StepOutcome {
            state: next,
            reply,
            student_at,
            reply_at,
            prompt,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::ask_client;
    use crate::clock::SteppingClock;
    use crate::scenario::{Phase, ScenarioSet};
    use chrono::Duration;

    fn clock() -> SteppingClock {
        SteppingClock::new("2026-03-02T08:00:00Z".parse().unwrap(), Duration::seconds(3))
    }

    fn covered(scenario: &Scenario, n: usize) -> CoverageState {
        let mut c = CoverageState::for_scenario(scenario);
        for topic in scenario.personas[0].qa_entries.iter().take(n).map(|e| e.topic.clone()) {
            c = c.record_inquiry(&ask_client(scenario, "father", &topic).unwrap());
        }
        c
    }

    #[test]
    fn context_window_is_the_suffix() {
        let set = ScenarioSet::builtin();
        let a = set.get(Phase::A);
        let agent = PharmacistAgent::with_defaults();
        let provider = ScriptedProvider::sequence(["ok"]);
        let clock = clock();
        let mut state = PharmacistState::new(Condition::StructuringHeavy, covered(a, 0));

        // first call sees exactly the one student turn
        state = agent.step(&state, a, "hi", &provider, &clock).unwrap().state;
        assert_eq!(provider.calls()[0].context_turns.len(), 1);

        // history of 7 turns: the next call sees turns 3..=7
        for _ in 0..3 {
            state = agent.step(&state, a, "more", &provider, &clock).unwrap().state;
        }
        assert_eq!(state.history.len(), 8);
        let seven = PharmacistState {
            history: state.history[..7].to_vec(),
            ..state.clone()
        };
        let bundle = agent.assemble(&seven, a).unwrap();
        assert_eq!(bundle.context_turns, seven.history[2..7].to_vec());

        let two = PharmacistState {
            history: state.history[..2].to_vec(),
            ..state.clone()
        };
        assert_eq!(agent.assemble(&two, a).unwrap().context_turns.len(), 2);
    }

    #[test]
    fn open_items_rendered_into_prompt() {
        let set = ScenarioSet::builtin();
        let a = set.get(Phase::A);
        let agent = PharmacistAgent::with_defaults();
        let state = PharmacistState::new(Condition::StructuringHeavy, covered(a, 2));
        let bundle = agent.assemble(&state, a).unwrap();
        assert!(bundle
            .system_prompt
            .contains("Still open: Location, Duration, Allergies, Medical history, Medication"));
        assert!(bundle.system_prompt.contains("Already asked: Symptoms, Intensity"));
        assert!(bundle.system_prompt.contains("about 29% covered"));
    }

    #[test]
    fn transitions_before_prompt_when_checklist_complete() {
        let set = ScenarioSet::builtin();
        let a = set.get(Phase::A);
        let agent = PharmacistAgent::with_defaults();
        let provider = ScriptedProvider::sequence(["What else could cause this?"]);
        let mut state = PharmacistState::new(Condition::ProblematizingHeavy, covered(a, 6));
        assert_eq!(state.phase, DialoguePhase::DataCollection);
        // coverage reaches 7/7 between calls
        state.coverage = covered(a, 7);
        let out = agent.step(&state, a, "I asked everything.", &provider, &clock()).unwrap();
        assert_eq!(out.state.phase, DialoguePhase::DataInterpretation);
        let di = agent.templates.get(Condition::ProblematizingHeavy, DialoguePhase::DataInterpretation).unwrap();
        let progress = ProgressSummary::from_state(&out.state, a);
        assert_eq!(out.prompt.system_prompt, render_template(di, &progress));
        assert_eq!(out.reply, "What else could cause this?");
        assert_eq!(out.state.history.last().unwrap().text, "What else could cause this?");
        assert_eq!(out.state.history.last().unwrap().speaker, Speaker::Pharmacist);
    }

    #[test]
    fn provider_failure_leaves_state_untouched() {
        let set = ScenarioSet::builtin();
        let a = set.get(Phase::A);
        let agent = PharmacistAgent::with_defaults();
        let provider = ScriptedProvider::sequence(["x"]).fail_on(0);
        let state = PharmacistState::new(Condition::StructuringHeavy, covered(a, 3));
        let before = state.clone();
        let err = agent.step(&state, a, "is it the porridge?", &provider, &clock()).unwrap_err();
        assert!(matches!(err, StepError::Provider(ref e) if e.kind == ProviderErrorKind::Timeout));
        assert_eq!(state, before);
    }

    #[test]
    fn student_mentions_are_tracked_but_pharmacist_mentions_are_not() {
        let set = ScenarioSet::builtin();
        let a = set.get(Phase::A);
        let agent = PharmacistAgent::with_defaults();
        let provider = ScriptedProvider::sequence(["Could it be teething?"]);
        let clock = clock();
        let state = PharmacistState::new(Condition::StructuringHeavy, covered(a, 0));
        let out = agent.step(&state, a, "Hello!", &provider, &clock).unwrap();
        assert!(out.state.interpretation.mentioned_causes.is_empty());
        let out = agent.step(&out.state, a, "Maybe the new porridge.", &provider, &clock).unwrap();
        assert_eq!(out.state.interpretation.mentioned_causes.len(), 1);
    }

    #[test]
    fn empty_message_rejected() {
        let set = ScenarioSet::builtin();
        let a = set.get(Phase::A);
        let state = PharmacistState::new(Condition::StructuringHeavy, covered(a, 0));
        let err = PharmacistAgent::with_defaults()
            .step(&state, a, "   ", &ScriptedProvider::default(), &clock())
            .unwrap_err();
        assert!(matches!(err, StepError::EmptyMessage));
    }
}
