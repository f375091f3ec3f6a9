//! Scenario knowledge base: personas with their question-answer entries,
//! the data-collection checklist, ground-truth causes and the solution table.
//!
//! Scenarios are UTF-8 JSON documents (`schema_version: 1`). A loaded
//! [`Scenario`] has passed [`validate_scenario`] and is immutable afterwards,
//! so it can be shared freely between sessions.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

fn default_category_count() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub id: String,
    pub title: String,
    /// The persona who came to the pharmacy.
    pub primary_client: String,
    pub personas: Vec<Persona>,
    pub checklist_items: Vec<ChecklistItem>,
    pub causes: Vec<CauseSpec>,
    /// The "other person" whose inquiries count toward the interpersonal score.
    pub interpersonal_target: String,
    #[serde(default = "default_category_count")]
    pub interpersonal_category_count: usize,
    pub solution: SolutionTable,
    #[serde(default)]
    pub pedagogical_module_enabled: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub resources: Vec<Resource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Persona {
    pub id: String,
    pub display_name: String,
    pub qa_entries: Vec<QaEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaEntry {
    pub topic: String,
    /// Text shown in the inquiry dropdown.
    pub prompt_label: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checklist_item: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpersonal_category: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecklistItem {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    Unlikely,
    Possible,
    Likely,
    MostLikely,
}

impl Likelihood {
    pub fn as_str(self) -> &'static str {
        match self {
            Likelihood::Unlikely => "unlikely",
            Likelihood::Possible => "possible",
            Likelihood::Likely => "likely",
            Likelihood::MostLikely => "most_likely",
        }
    }
}

impl fmt::Display for Likelihood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CauseSpec {
    pub id: String,
    pub label: String,
    pub ground_truth_likelihood: Likelihood,
    pub rationale: String,
    /// Lowercase phrases whose presence in a student utterance counts as
    /// mentioning this cause.
    pub detection_synonyms: Vec<String>,
    pub most_likely: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionTable {
    pub rows: Vec<SolutionRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionRow {
    pub cause: String,
    pub supporting_factors: String,
    pub likelihood: Likelihood,
}

/// Static reference material (compendium, lecture notes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resource {
    pub id: String,
    pub title: String,
    pub text: String,
}

impl Scenario {
    pub fn persona(&self, id: &str) -> Option<&Persona> {
        self.personas.iter().find(|p| p.id == id)
    }

    pub fn cause(&self, id: &str) -> Option<&CauseSpec> {
        self.causes.iter().find(|c| c.id == id)
    }

    pub fn checklist_item(&self, id: &str) -> Option<&ChecklistItem> {
        self.checklist_items.iter().find(|c| c.id == id)
    }

    pub fn resource(&self, id: &str) -> Option<&Resource> {
        self.resources.iter().find(|r| r.id == id)
    }

    pub fn most_likely_cause(&self) -> Option<&CauseSpec> {
        self.causes.iter().find(|c| c.most_likely)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

impl Persona {
    pub fn entry(&self, topic: &str) -> Option<&QaEntry> {
        self.qa_entries.iter().find(|e| e.topic == topic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    UnsupportedSchemaVersion,
    EmptyField,
    DuplicatePersonaId,
    DuplicateTopic,
    DuplicateChecklistItem,
    DuplicateCauseId,
    DuplicateResourceId,
    EmptyChecklist,
    EmptyCauses,
    UnknownPrimaryClient,
    UnknownInterpersonalTarget,
    InterpersonalTargetIsPrimary,
    UnknownChecklistItem,
    UnreachableChecklistItem,
    InterpersonalCategoryOffTarget,
    InterpersonalCategoryShortfall,
    ZeroCategoryCount,
    EmptySynonyms,
    UnnormalizedSynonym,
    MostLikelyCount,
    LikelihoodMismatch,
    MissingSolutionRow,
    UnknownSolutionCause,
    DuplicateSolutionRow,
}

/// One violated invariant, located by a JSON-style path such as
/// `causes[2].detection_synonyms`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub path: String,
    pub kind: IssueKind,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed scenario document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario ({} issue(s)): {}", .0.len(), join_issues(.0))]
    Validation(Vec<ValidationIssue>),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn join_issues(issues: &[ValidationIssue]) -> String {
    issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ")
}

/// Parses and validates a scenario document.
pub fn load_scenario<R: Read>(source: R) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_reader(source)?;
    let issues = validate_scenario(&scenario);
    if issues.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Validation(issues))
    }
}

pub fn load_scenario_file(path: &Path) -> Result<Scenario, ScenarioError> {
    let file = std::fs::File::open(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_scenario(std::io::BufReader::new(file))
}

struct Issues(Vec<ValidationIssue>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, kind: IssueKind, message: impl Into<String>) {
        self.0.push(ValidationIssue {
            path: path.into(),
            kind,
            message: message.into(),
        });
    }

    fn non_empty(&mut self, path: impl Into<String>, value: &str) {
        if value.trim().is_empty() {
            self.push(path, IssueKind::EmptyField, "must not be empty");
        }
    }
}

/// Checks every scenario invariant. Returns an empty list iff the scenario
/// is valid.
pub fn validate_scenario(s: &Scenario) -> Vec<ValidationIssue> {
    let mut out = Issues(Vec::new());

    if s.schema_version != SCHEMA_VERSION {
        out.push(
            "schema_version",
            IssueKind::UnsupportedSchemaVersion,
            format!("expected {SCHEMA_VERSION}, found {}", s.schema_version),
        );
    }
    out.non_empty("id", &s.id);
    out.non_empty("title", &s.title);

    // checklist
    if s.checklist_items.is_empty() {
        out.push("checklist_items", IssueKind::EmptyChecklist, "at least one checklist item is required");
    }
    let mut item_ids = HashSet::new();
    for (i, item) in s.checklist_items.iter().enumerate() {
        out.non_empty(format!("checklist_items[{i}].id"), &item.id);
        out.non_empty(format!("checklist_items[{i}].label"), &item.label);
        if !item_ids.insert(item.id.as_str()) {
            out.push(
                format!("checklist_items[{i}].id"),
                IssueKind::DuplicateChecklistItem,
                format!("duplicate checklist item id {:?}", item.id),
            );
        }
    }

    // personas and their knowledge bases
    let mut persona_ids = HashSet::new();
    let mut reached_items = HashSet::new();
    let mut target_categories = BTreeSet::new();
    for (p, persona) in s.personas.iter().enumerate() {
        out.non_empty(format!("personas[{p}].id"), &persona.id);
        out.non_empty(format!("personas[{p}].display_name"), &persona.display_name);
        if !persona_ids.insert(persona.id.as_str()) {
            out.push(
                format!("personas[{p}].id"),
                IssueKind::DuplicatePersonaId,
                format!("duplicate persona id {:?}", persona.id),
            );
        }
        let mut topics = HashSet::new();
        for (e, entry) in persona.qa_entries.iter().enumerate() {
            let at = format!("personas[{p}].qa_entries[{e}]");
            out.non_empty(format!("{at}.topic"), &entry.topic);
            out.non_empty(format!("{at}.prompt_label"), &entry.prompt_label);
            out.non_empty(format!("{at}.answer"), &entry.answer);
            if !topics.insert(entry.topic.as_str()) {
                out.push(
                    format!("{at}.topic"),
                    IssueKind::DuplicateTopic,
                    format!("duplicate topic {:?} for persona {:?}", entry.topic, persona.id),
                );
            }
            if let Some(item) = &entry.checklist_item {
                if item_ids.contains(item.as_str()) {
                    reached_items.insert(item.as_str());
                } else {
                    out.push(
                        format!("{at}.checklist_item"),
                        IssueKind::UnknownChecklistItem,
                        format!("checklist item {item:?} is not declared"),
                    );
                }
            }
            if let Some(category) = &entry.interpersonal_category {
                if persona.id == s.interpersonal_target {
                    target_categories.insert(category.as_str());
                } else {
                    out.push(
                        format!("{at}.interpersonal_category"),
                        IssueKind::InterpersonalCategoryOffTarget,
                        format!(
                            "interpersonal categories belong to {:?}, not {:?}",
                            s.interpersonal_target, persona.id
                        ),
                    );
                }
            }
        }
    }
    for (i, item) in s.checklist_items.iter().enumerate() {
        if !reached_items.contains(item.id.as_str()) {
            out.push(
                format!("checklist_items[{i}]"),
                IssueKind::UnreachableChecklistItem,
                format!("no question fulfills checklist item {:?}", item.id),
            );
        }
    }

    if !persona_ids.contains(s.primary_client.as_str()) {
        out.push(
            "primary_client",
            IssueKind::UnknownPrimaryClient,
            format!("unknown persona {:?}", s.primary_client),
        );
    }
    if s.interpersonal_target == s.primary_client {
        out.push(
            "interpersonal_target",
            IssueKind::InterpersonalTargetIsPrimary,
            "must differ from the primary client",
        );
    } else if !persona_ids.contains(s.interpersonal_target.as_str()) {
        out.push(
            "interpersonal_target",
            IssueKind::UnknownInterpersonalTarget,
            format!("unknown persona {:?}", s.interpersonal_target),
        );
    }
    if s.interpersonal_category_count == 0 {
        out.push(
            "interpersonal_category_count",
            IssueKind::ZeroCategoryCount,
            "must be positive",
        );
    } else if target_categories.len() < s.interpersonal_category_count {
        out.push(
            "interpersonal_category_count",
            IssueKind::InterpersonalCategoryShortfall,
            format!(
                "{} categories required but only {} declared on {:?}",
                s.interpersonal_category_count,
                target_categories.len(),
                s.interpersonal_target
            ),
        );
    }

    // causes
    if s.causes.is_empty() {
        out.push("causes", IssueKind::EmptyCauses, "at least one cause is required");
    }
    let mut cause_ids = HashSet::new();
    for (i, cause) in s.causes.iter().enumerate() {
        out.non_empty(format!("causes[{i}].id"), &cause.id);
        out.non_empty(format!("causes[{i}].label"), &cause.label);
        if !cause_ids.insert(cause.id.as_str()) {
            out.push(
                format!("causes[{i}].id"),
                IssueKind::DuplicateCauseId,
                format!("duplicate cause id {:?}", cause.id),
            );
        }
        if cause.detection_synonyms.is_empty() {
            out.push(
                format!("causes[{i}].detection_synonyms"),
                IssueKind::EmptySynonyms,
                "at least one detection synonym is required",
            );
        }
        for (j, syn) in cause.detection_synonyms.iter().enumerate() {
            if syn.is_empty() || syn.trim() != syn || syn.to_lowercase() != *syn {
                out.push(
                    format!("causes[{i}].detection_synonyms[{j}]"),
                    IssueKind::UnnormalizedSynonym,
                    format!("synonym {syn:?} must be non-empty, lowercase and trimmed"),
                );
            }
        }
        if cause.most_likely != (cause.ground_truth_likelihood == Likelihood::MostLikely) {
            out.push(
                format!("causes[{i}].most_likely"),
                IssueKind::LikelihoodMismatch,
                "most_likely flag disagrees with ground_truth_likelihood",
            );
        }
    }
    let most_likely = s.causes.iter().filter(|c| c.most_likely).count();
    if !s.causes.is_empty() && most_likely != 1 {
        out.push(
            "causes",
            IssueKind::MostLikelyCount,
            format!("exactly one cause must be most likely, found {most_likely}"),
        );
    }

    // solution table: one row per declared cause
    let mut solution_causes = HashSet::new();
    for (i, row) in s.solution.rows.iter().enumerate() {
        out.non_empty(format!("solution.rows[{i}].supporting_factors"), &row.supporting_factors);
        if !cause_ids.contains(row.cause.as_str()) {
            out.push(
                format!("solution.rows[{i}].cause"),
                IssueKind::UnknownSolutionCause,
                format!("cause {:?} is not declared", row.cause),
            );
        } else if !solution_causes.insert(row.cause.as_str()) {
            out.push(
                format!("solution.rows[{i}].cause"),
                IssueKind::DuplicateSolutionRow,
                format!("second row for cause {:?}", row.cause),
            );
        }
    }
    for (i, cause) in s.causes.iter().enumerate() {
        if !solution_causes.contains(cause.id.as_str()) {
            out.push(
                format!("causes[{i}]"),
                IssueKind::MissingSolutionRow,
                format!("no solution row for cause {:?}", cause.id),
            );
        }
    }

    let mut resource_ids = HashSet::new();
    for (i, r) in s.resources.iter().enumerate() {
        out.non_empty(format!("resources[{i}].id"), &r.id);
        out.non_empty(format!("resources[{i}].text"), &r.text);
        if !resource_ids.insert(r.id.as_str()) {
            out.push(
                format!("resources[{i}].id"),
                IssueKind::DuplicateResourceId,
                format!("duplicate resource id {:?}", r.id),
            );
        }
    }

    out.0
}

/// The four client scenarios of a session, in phase order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
    C1,
    C2,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::A, Phase::B, Phase::C1, Phase::C2];

    pub fn next(self) -> Option<Phase> {
        match self {
            Phase::A => Some(Phase::B),
            Phase::B => Some(Phase::C1),
            Phase::C1 => Some(Phase::C2),
            Phase::C2 => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::A => "A",
            Phase::B => "B",
            Phase::C1 => "C1",
            Phase::C2 => "C2",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Phase::A),
            "B" => Ok(Phase::B),
            "C1" => Ok(Phase::C1),
            "C2" => Ok(Phase::C2),
            other => Err(format!("unknown phase {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioSetError {
    #[error("no scenario for phase {0}")]
    MissingScenario(Phase),
    #[error("phase {phase}: {source}")]
    Scenario {
        phase: Phase,
        #[source]
        source: ScenarioError,
    },
}

/// One validated scenario per phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    scenarios: BTreeMap<Phase, Arc<Scenario>>,
}

impl ScenarioSet {
    pub fn new(scenarios: BTreeMap<Phase, Scenario>) -> Result<Self, ScenarioSetError> {
        for phase in Phase::ALL {
            if !scenarios.contains_key(&phase) {
                return Err(ScenarioSetError::MissingScenario(phase));
            }
        }
        Ok(ScenarioSet {
            scenarios: scenarios.into_iter().map(|(k, v)| (k, Arc::new(v))).collect(),
        })
    }

    /// Loads `A.json`, `B.json`, `C1.json` and `C2.json` from a directory.
    pub fn load_dir(dir: &Path) -> Result<Self, ScenarioSetError> {
        let mut map = BTreeMap::new();
        for phase in Phase::ALL {
            let path = dir.join(format!("{phase}.json"));
            if !path.exists() {
                return Err(ScenarioSetError::MissingScenario(phase));
            }
            let s = load_scenario_file(&path).map_err(|source| ScenarioSetError::Scenario { phase, source })?;
            map.insert(phase, s);
        }
        Self::new(map)
    }

    /// The fixture scenarios shipped with the crate.
    pub fn builtin() -> Self {
        let sources = [
            (Phase::A, include_str!("../fixtures/scenarios/A.json")),
            (Phase::B, include_str!("../fixtures/scenarios/B.json")),
            (Phase::C1, include_str!("../fixtures/scenarios/C1.json")),
            (Phase::C2, include_str!("../fixtures/scenarios/C2.json")),
        ];
        let map = sources
            .into_iter()
            .map(|(phase, text)| {
                let s = load_scenario(text.as_bytes()).unwrap_or_else(|e| panic!("bundled scenario {phase}: {e}"));
                (phase, s)
            })
            .collect();
        Self::new(map).expect("all phases bundled")
    }

    pub fn get(&self, phase: Phase) -> &Arc<Scenario> {
        &self.scenarios[&phase]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Phase, &Arc<Scenario>)> {
        self.scenarios.iter().map(|(p, s)| (*p, s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario_a() -> Scenario {
        ScenarioSet::builtin().get(Phase::A).as_ref().clone()
    }

    fn kinds(s: &Scenario) -> Vec<IssueKind> {
        validate_scenario(s).into_iter().map(|i| i.kind).collect()
    }

    #[test]
    fn fixture_a_is_valid() {
        assert!(validate_scenario(&scenario_a()).is_empty());
    }

    #[test]
    fn duplicate_persona_id() {
        let mut s = scenario_a();
        let mut twin = s.personas[0].clone();
        twin.qa_entries.retain(|e| e.checklist_item.is_none());
        s.personas.push(twin);
        let issues = validate_scenario(&s);
        assert_eq!(issues.len(), 1, "{issues:?}");
        assert_eq!(issues[0].kind, IssueKind::DuplicatePersonaId);
        assert_eq!(issues[0].path, "personas[2].id");
    }

    #[test]
    fn interpersonal_target_must_not_be_primary() {
        let mut s = scenario_a();
        s.interpersonal_target = s.primary_client.clone();
        let k = kinds(&s);
        assert!(k.contains(&IssueKind::InterpersonalTargetIsPrimary), "{k:?}");
    }

    #[test]
    fn empty_synonyms_located_by_path() {
        let mut s = scenario_a();
        s.causes[1].detection_synonyms.clear();
        let issues = validate_scenario(&s);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].path, "causes[1].detection_synonyms");
        assert_eq!(issues[0].kind, IssueKind::EmptySynonyms);
    }

    #[test]
    fn most_likely_must_be_unique() {
        let mut s = scenario_a();
        s.causes[0].most_likely = true;
        s.causes[0].ground_truth_likelihood = Likelihood::MostLikely;
        assert_eq!(kinds(&s), vec![IssueKind::MostLikelyCount]);
    }

    #[test]
    fn unknown_checklist_reference() {
        let mut s = scenario_a();
        s.personas[0].qa_entries[7].checklist_item = Some("nature".into());
        assert_eq!(kinds(&s), vec![IssueKind::UnknownChecklistItem]);
    }

    #[test]
    fn unnormalized_synonym() {
        let mut s = scenario_a();
        s.causes[0].detection_synonyms.push(" Teeth".into());
        assert_eq!(kinds(&s), vec![IssueKind::UnnormalizedSynonym]);
    }

    #[test]
    fn solution_rows_cover_causes() {
        let mut s = scenario_a();
        s.solution.rows.pop();
        assert_eq!(kinds(&s), vec![IssueKind::MissingSolutionRow]);
    }

    #[test]
    fn load_reports_validation_paths() {
        let mut s = scenario_a();
        s.causes[2].detection_synonyms.clear();
        let err = load_scenario(s.to_json().as_bytes()).unwrap_err();
        match err {
            ScenarioError::Validation(issues) => assert_eq!(issues[0].path, "causes[2].detection_synonyms"),
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(load_scenario(&b"{ not json"[..]), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn phase_order() {
        assert_eq!(Phase::A.next(), Some(Phase::B));
        assert_eq!(Phase::C2.next(), None);
        assert_eq!("C1".parse::<Phase>().unwrap(), Phase::C1);
    }

    #[test]
    fn missing_phase_in_directory() {
        let dir = tempfile::tempdir().unwrap();
        for phase in [Phase::A, Phase::B, Phase::C1] {
            std::fs::write(dir.path().join(format!("{phase}.json")), ScenarioSet::builtin().get(phase).to_json()).unwrap();
        }
        assert!(matches!(
            ScenarioSet::load_dir(dir.path()),
            Err(ScenarioSetError::MissingScenario(Phase::C2))
        ));
    }
}
