//! System-prompt templates and prompt assembly.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use super::provider::{GenerationParams, PromptBundle};
use super::{Condition, DialoguePhase, PharmacistState};
use crate::scenario::Scenario;

const DEFAULT_TEMPLATES: &str = include_str!("../../templates/default.toml");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("no template for condition {0} in state {1}")]
    MissingTemplate(Condition, DialoguePhase),
    #[error("unknown condition id {0:?} in template file")]
    UnknownCondition(String),
    #[error("unknown dialogue state {state:?} under condition {condition:?}")]
    UnknownState { condition: String, state: String },
    #[error("malformed template file: {0}")]
    Parse(String),
    #[error("cannot read template file {path}: {message}")]
    Io { path: String, message: String },
}

/// Template text per (condition, dialogue state).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplateSet {
    templates: BTreeMap<(Condition, DialoguePhase), String>,
}

impl PromptTemplateSet {
    /// Parses a TOML template file with one table per condition id and one
    /// `dc`/`di` string per table. Every condition and state must be present.
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let raw: BTreeMap<String, BTreeMap<String, String>> =
            toml::from_str(text).map_err(|e| TemplateError::Parse(e.to_string()))?;

        let mut templates = BTreeMap::new();
        for condition in Condition::ALL {
            for phase in DialoguePhase::ALL {
                let text = raw
                    .get(condition.as_str())
                    .and_then(|t| t.get(phase.as_str()))
                    .ok_or(TemplateError::MissingTemplate(condition, phase))?;
                templates.insert((condition, phase), text.trim().to_string());
            }
        }
        for (condition, table) in &raw {
            if Condition::from_id(condition).is_none() {
                return Err(TemplateError::UnknownCondition(condition.clone()));
            }
            if let Some(state) = table.keys().find(|k| DialoguePhase::from_id(k).is_none()) {
                return Err(TemplateError::UnknownState {
                    condition: condition.clone(),
                    state: state.clone(),
                });
            }
        }
        Ok(PromptTemplateSet { templates })
    }

    pub fn load_file(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path).map_err(|e| TemplateError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// The shipped templates for every condition.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_TEMPLATES).expect("bundled templates parse")
    }

    /// Keeps only the templates of one condition.
    pub fn restricted_to(mut self, condition: Condition) -> Self {
        self.templates.retain(|(c, _), _| *c == condition);
        self
    }

    pub fn get(&self, condition: Condition, phase: DialoguePhase) -> Result<&str, TemplateError> {
        self.templates
            .get(&(condition, phase))
            .map(String::as_str)
            .ok_or(TemplateError::MissingTemplate(condition, phase))
    }
}

/// Shipped templates for a single condition.
pub fn default_templates(condition: Condition) -> PromptTemplateSet {
    PromptTemplateSet::builtin().restricted_to(condition)
}

/// Learner progress rendered into the system prompt.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProgressSummary {
    pub covered_items: Vec<String>,
    pub open_items: Vec<String>,
    pub mentioned_causes: Vec<String>,
    pub coverage_pct: u32,
}

impl ProgressSummary {
    pub fn from_state(state: &PharmacistState, scenario: &Scenario) -> Self {
        let (covered, open) = state.coverage.split_labels(scenario);
        let mentioned = scenario
            .causes
            .iter()
            .filter(|c| state.interpretation.mentioned_causes.contains(&c.id))
            .map(|c| c.label.clone())
            .collect();
        let total = state.coverage.total_items.max(1) as f64;
        ProgressSummary {
            coverage_pct: (100.0 * covered.len() as f64 / total).round() as u32,
            covered_items: covered.into_iter().map(String::from).collect(),
            open_items: open.into_iter().map(String::from).collect(),
            mentioned_causes: mentioned,
        }
    }
}

fn render_list(items: &[String]) -> String {
    if items.is_empty() {
        "none".to_string()
    } else {
        items.join(", ")
    }
}

/// Substitutes the progress placeholders. Unknown placeholders are left
/// untouched.
pub fn render_template(template: &str, progress: &ProgressSummary) -> String {
    template
        .replace("{covered_items}", &render_list(&progress.covered_items))
        .replace("{open_items}", &render_list(&progress.open_items))
        .replace("{mentioned_causes}", &render_list(&progress.mentioned_causes))
        .replace("{coverage_pct}", &progress.coverage_pct.to_string())
}

/// Builds the provider input: the rendered template for the state's
/// condition and dialogue phase, plus the last `context_turns` turns.
pub fn assemble_prompt(
    state: &PharmacistState,
    templates: &PromptTemplateSet,
    progress: &ProgressSummary,
    context_turns: usize,
    params: &GenerationParams,
) -> Result<PromptBundle, TemplateError> {
    let template = templates.get(state.condition, state.phase)?;
    let start = state.history.len().saturating_sub(context_turns);
    Ok(PromptBundle {
        system_prompt: render_template(template, progress),
        context_turns: state.history[start..].to_vec(),
        params: params.clone(),
    })
}
