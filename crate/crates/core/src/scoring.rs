//! Diagnostic-strategy scores: checklist, interpersonal and interpretation.
//!
//! Every score is kept as an exact ratio and only turned into a percentage at
//! the end.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::ops::Range;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::scenario::{Phase, Scenario, ScenarioSet};
use crate::session::{DiagnosisForm, EventKind, SessionEvent};
use crate::student_model::{detect_cause_mentions, normalize_text};

pub type Score = Ratio<u64>;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("unknown grade mark {value:?} (line {line})")]
    UnknownGradeMark { line: usize, value: String },
    #[error("invalid grading record on line {line}: {reason}")]
    InvalidRecord { line: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("log does not start with session_started")]
    MissingStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradeMark {
    Full,
    Partial,
    None,
}

impl GradeMark {
    pub fn points(self) -> Score {
        match self {
            GradeMark::Full => Ratio::from_integer(1),
            GradeMark::Partial => Ratio::new(1, 2),
            GradeMark::None => Ratio::from_integer(0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GradeMark::Full => "full",
            GradeMark::Partial => "partial",
            GradeMark::None => "none",
        }
    }
}

impl FromStr for GradeMark {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "full" => Ok(GradeMark::Full),
            "partial" => Ok(GradeMark::Partial),
            "none" => Ok(GradeMark::None),
            other => Err(other.to_string()),
        }
    }
}

/// Grade marks for the entries of one diagnosis form, by entry index.
/// Entries without a mark count as `none`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GradedAssessment {
    pub marks: BTreeMap<usize, GradeMark>,
}

impl GradedAssessment {
    pub fn from_marks(marks: impl IntoIterator<Item = GradeMark>) -> Self {
        GradedAssessment {
            marks: marks.into_iter().enumerate().collect(),
        }
    }

    pub fn mark(&self, index: usize) -> GradeMark {
        self.marks.get(&index).copied().unwrap_or(GradeMark::None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterpretationPoints {
    pub identification: u64,
    pub assessment: Score,
    /// Number of ground-truth causes; each subscore is capped at this.
    pub max: u64,
}

impl InterpretationPoints {
    /// Identification and assessment summed over their combined maximum.
    pub fn ratio(&self) -> Score {
        if self.max == 0 {
            return Ratio::from_integer(0);
        }
        (self.assessment + self.identification) / (2 * self.max)
    }
}

fn ser_ratio<S: Serializer>(r: &Score, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(to_f64(*r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RawScores {
    pub checklist_fulfilled: u64,
    pub checklist_total: u64,
    pub interpersonal_fulfilled: u64,
    pub interpersonal_total: u64,
    pub identification_points: u64,
    #[serde(serialize_with = "ser_ratio")]
    pub assessment_points: Score,
    pub max_points: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategyScores {
    pub checklist_pct: f64,
    pub interpersonal_pct: f64,
    pub interpretation_pct: f64,
    pub raw: RawScores,
}

fn to_f64(r: Score) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn percent(r: Score) -> f64 {
    100.0 * *r.numer() as f64 / *r.denom() as f64
}

fn ratio(num: usize, den: usize) -> Score {
    if den == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(num as u64, den as u64)
    }
}

/// Distinct checklist items reached by the logged client questions.
pub fn checklist_items_fulfilled<'a>(
    events: impl IntoIterator<Item = &'a SessionEvent>,
    scenario: &Scenario,
) -> BTreeSet<String> {
    let mut items = BTreeSet::new();
    for e in events {
        if let EventKind::ClientQuestionAsked { persona, topic } = &e.kind {
            let item = scenario
                .persona(persona)
                .and_then(|p| p.entry(topic))
                .and_then(|entry| entry.checklist_item.as_ref());
            if let Some(item) = item {
                if scenario.checklist_item(item).is_some() {
                    items.insert(item.clone());
                }
            }
        }
    }
    items
}

pub fn score_checklist<'a>(events: impl IntoIterator<Item = &'a SessionEvent>, scenario: &Scenario) -> Score {
    ratio(
        checklist_items_fulfilled(events, scenario).len(),
        scenario.checklist_items.len(),
    )
}

/// Distinct categories reached by questions to the interpersonal target.
pub fn interpersonal_categories_fulfilled<'a>(
    events: impl IntoIterator<Item = &'a SessionEvent>,
    scenario: &Scenario,
) -> BTreeSet<String> {
    let mut categories = BTreeSet::new();
    for e in events {
        if let EventKind::ClientQuestionAsked { persona, topic } = &e.kind {
            if *persona != scenario.interpersonal_target {
                continue;
            }
            if let Some(c) = scenario
                .persona(persona)
                .and_then(|p| p.entry(topic))
                .and_then(|entry| entry.interpersonal_category.as_ref())
            {
                categories.insert(c.clone());
            }
        }
    }
    categories
}

pub fn score_interpersonal<'a>(events: impl IntoIterator<Item = &'a SessionEvent>, scenario: &Scenario) -> Score {
    let total = scenario.interpersonal_category_count;
    let got = interpersonal_categories_fulfilled(events, scenario).len().min(total);
    ratio(got, total)
}

/// Ground-truth causes a form entry refers to: an exact id or label, else
/// any cause whose synonyms occur in the entry text.
pub fn match_entry_causes(entry_cause: &str, scenario: &Scenario) -> BTreeSet<String> {
    let wanted = normalize_text(entry_cause);
    if let Some(c) = scenario
        .causes
        .iter()
        .find(|c| c.id == entry_cause.trim() || normalize_text(&c.label) == wanted)
    {
        return BTreeSet::from([c.id.clone()]);
    }
    detect_cause_mentions(entry_cause, &scenario.causes)
}

/// Each ground-truth cause earns one identification point if any entry
/// matches it, and the best grade among those entries as assessment.
pub fn score_interpretation(
    form: &DiagnosisForm,
    grading: &GradedAssessment,
    scenario: &Scenario,
) -> InterpretationPoints {
    let mut best: BTreeMap<String, Score> = BTreeMap::new();
    for (i, entry) in form.entries.iter().enumerate() {
        let points = grading.mark(i).points();
        for cause in match_entry_causes(&entry.cause, scenario) {
            let slot = best.entry(cause).or_insert(points);
            if points > *slot {
                *slot = points;
            }
        }
    }
    let max = scenario.causes.len() as u64;
    let identification = (best.len() as u64).min(max);
    let assessment = best.values().copied().sum::<Score>().min(Ratio::from_integer(max));
    InterpretationPoints {
        identification,
        assessment,
        max,
    }
}

pub fn score_all<'a>(
    events: impl IntoIterator<Item = &'a SessionEvent> + Clone,
    form: Option<&DiagnosisForm>,
    grading: &GradedAssessment,
    scenario: &Scenario,
) -> StrategyScores {
    let checklist = checklist_items_fulfilled(events.clone(), scenario).len() as u64;
    let interpersonal = (interpersonal_categories_fulfilled(events, scenario).len()
        .min(scenario.interpersonal_category_count)) as u64;
    let interpretation = match form {
        Some(f) => score_interpretation(f, grading, scenario),
        None => InterpretationPoints {
            identification: 0,
            assessment: Ratio::from_integer(0),
            max: scenario.causes.len() as u64,
        },
    };
    let raw = RawScores {
        checklist_fulfilled: checklist,
        checklist_total: scenario.checklist_items.len() as u64,
        interpersonal_fulfilled: interpersonal,
        interpersonal_total: scenario.interpersonal_category_count as u64,
        identification_points: interpretation.identification,
        assessment_points: interpretation.assessment,
        max_points: interpretation.max,
    };
    StrategyScores {
        checklist_pct: percent(ratio(checklist as usize, scenario.checklist_items.len())),
        interpersonal_pct: percent(ratio(interpersonal as usize, scenario.interpersonal_category_count)),
        interpretation_pct: percent(interpretation.ratio()),
        raw,
    }
}

/// Index ranges of the events belonging to each phase reached in the log.
/// A phase runs from the event after the previous `phase_advanced` up to
/// and including its own `phase_advanced`.
pub fn phase_ranges(events: &[SessionEvent]) -> BTreeMap<Phase, Range<usize>> {
    let mut out = BTreeMap::new();
    let mut phase = Some(Phase::A);
    let mut start = 0;
    for (i, e) in events.iter().enumerate() {
        if let EventKind::PhaseAdvanced { to } = &e.kind {
            if let Some(p) = phase {
                out.insert(p, start..i + 1);
            }
            phase = *to;
            start = i + 1;
        }
    }
    if let Some(p) = phase {
        out.insert(p, start..events.len());
    }
    out
}

/// The last diagnosis submitted within a slice of events.
pub fn submitted_form(events: &[SessionEvent]) -> Option<&DiagnosisForm> {
    events.iter().rev().find_map(|e| match &e.kind {
        EventKind::DiagnosisSubmitted { form } => Some(form),
        _ => None,
    })
}

/// Grade marks keyed by student and phase.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GradeBook {
    pub grades: BTreeMap<(String, Phase), GradedAssessment>,
}

impl GradeBook {
    pub fn get(&self, student_id: &str, phase: Phase) -> GradedAssessment {
        self.grades
            .get(&(student_id.to_string(), phase))
            .cloned()
            .unwrap_or_default()
    }
}

#[derive(Deserialize)]
struct GradeRecord {
    student_id: String,
    phase: String,
    entry_index: usize,
    grade: String,
}

/// Reads `student_id,phase,entry_index,grade` records.
pub fn read_grades<R: Read>(input: R) -> Result<GradeBook, ScoringError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut book = GradeBook::default();
    for (i, rec) in reader.deserialize::<GradeRecord>().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let phase: Phase = rec
            .phase
            .parse()
            .map_err(|e: String| ScoringError::InvalidRecord { line, reason: e })?;
        let mark: GradeMark = rec
            .grade
            .parse()
            .map_err(|value| ScoringError::UnknownGradeMark { line, value })?;
        book.grades
            .entry((rec.student_id, phase))
            .or_default()
            .marks
            .insert(rec.entry_index, mark);
    }
    Ok(book)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseScores {
    pub student_id: String,
    pub phase: Phase,
    pub scores: StrategyScores,
}

/// Scores every phase a session reached.
pub fn score_session(
    events: &[SessionEvent],
    scenarios: &ScenarioSet,
    grades: &GradeBook,
) -> Result<Vec<PhaseScores>, ScoringError> {
    let student_id = match events.first().map(|e| &e.kind) {
        Some(EventKind::SessionStarted { student_id, .. }) => student_id.clone(),
        _ => return Err(ScoringError::MissingStart),
    };
    Ok(phase_ranges(events)
        .into_iter()
        .map(|(phase, range)| {
            let slice = &events[range];
            let grading = grades.get(&student_id, phase);
            PhaseScores {
                student_id: student_id.clone(),
                phase,
                scores: score_all(slice, submitted_form(slice), &grading, scenarios.get(phase)),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Likelihood;
    use crate::session::DiagnosisEntry;

    fn ask(persona: &str, topic: &str) -> SessionEvent {
        SessionEvent {
            timestamp: "2026-03-02T08:00:00Z".parse().unwrap(),
            kind: EventKind::ClientQuestionAsked {
                persona: persona.into(),
                topic: topic.into(),
            },
        }
    }

    fn entry(cause: &str) -> DiagnosisEntry {
        DiagnosisEntry {
            cause: cause.into(),
            likelihood: Likelihood::Possible,
            rationale: String::new(),
        }
    }

    fn scenario_a() -> Scenario {
        (**ScenarioSet::builtin().get(Phase::A)).clone()
    }

    #[test]
    fn checklist_ratios() {
        let a = scenario_a();
        let all: Vec<_> = a.checklist_items.iter().map(|c| ask("father", &c.id)).collect();
        assert_eq!(score_checklist(&all, &a), Ratio::from_integer(1));
        let same = vec![ask("father", "symptoms"); 5];
        assert_eq!(score_checklist(&same, &a), Ratio::new(1, 7));
        // asking the mother about medication is interpersonal, not checklist
        assert_eq!(score_checklist(&[ask("mother", "medication")], &a), Ratio::from_integer(0));
    }

    #[test]
    fn configurable_checklist_size() {
        let mut a = scenario_a();
        a.checklist_items.truncate(6);
        for p in &mut a.personas {
            p.qa_entries
                .retain(|e| e.checklist_item.as_deref() != Some("medication") || p.id != "father");
        }
        let events = [ask("father", "symptoms"), ask("father", "intensity")];
        let r = score_checklist(&events, &a);
        assert_eq!(r, Ratio::new(1, 3));
        assert!((percent(r) - 33.333333333333336).abs() < 1e-12);
    }

    #[test]
    fn interpersonal_ratios() {
        let a = scenario_a();
        let all = [
            ask("mother", "medication"),
            ask("mother", "health"),
            ask("mother", "breastfeeding"),
        ];
        assert_eq!(score_interpersonal(&all, &a), Ratio::from_integer(1));
        assert_eq!(score_interpersonal(&all[..2], &a), Ratio::new(2, 3));
        assert_eq!(score_interpersonal(&[ask("father", "medication")], &a), Ratio::from_integer(0));
    }

    #[test]
    fn interpretation_rubric() {
        let a = scenario_a();
        let form = DiagnosisForm {
            entries: a.causes.iter().map(|c| entry(&c.id)).collect(),
        };
        let full = GradedAssessment::from_marks([GradeMark::Full; 4]);
        let pts = score_interpretation(&form, &full, &a);
        assert_eq!((pts.identification, pts.assessment), (4, Ratio::from_integer(4)));
        assert_eq!(percent(pts.ratio()), 100.0);

        let form = DiagnosisForm {
            entries: vec![entry("teething"), entry("The new porridge he eats")],
        };
        let g = GradedAssessment::from_marks([GradeMark::Full, GradeMark::Partial]);
        let pts = score_interpretation(&form, &g, &a);
        assert_eq!((pts.identification, pts.assessment), (2, Ratio::new(3, 2)));
        assert_eq!(percent(pts.ratio()), 43.75);

        let form = DiagnosisForm {
            entries: vec![entry("lunar cycle"), entry("bad luck")],
        };
        let pts = score_interpretation(&form, &GradedAssessment::from_marks([GradeMark::Full; 2]), &a);
        assert_eq!((pts.identification, pts.assessment), (0, Ratio::from_integer(0)));
    }

    #[test]
    fn repeated_cause_counts_once_with_best_grade() {
        let a = scenario_a();
        let form = DiagnosisForm {
            entries: vec![entry("teething"), entry("Teething"), entry("teeth coming")],
        };
        let g = GradedAssessment::from_marks([GradeMark::None, GradeMark::Partial, GradeMark::Full]);
        let pts = score_interpretation(&form, &g, &a);
        assert_eq!((pts.identification, pts.assessment), (1, Ratio::from_integer(1)));
    }

    #[test]
    fn empty_log_scores_zero() {
        let a = scenario_a();
        let s = score_all(&[], None, &GradedAssessment::default(), &a);
        assert_eq!((s.checklist_pct, s.interpersonal_pct, s.interpretation_pct), (0.0, 0.0, 0.0));
    }

    #[test]
    fn grade_file_parsing() {
        let csv = "student_id,phase,entry_index,grade\nstu1,A,0,full\nstu1,A,1,partial\nstu2,B,0,none\n";
        let book = read_grades(csv.as_bytes()).unwrap();
        assert_eq!(book.get("stu1", Phase::A).mark(1), GradeMark::Partial);
        assert_eq!(book.get("stu1", Phase::A).mark(7), GradeMark::None);
        assert_eq!(book.get("stu2", Phase::B).mark(0), GradeMark::None);

        let bad = "student_id,phase,entry_index,grade\nstu1,A,0,excellent\n";
        match read_grades(bad.as_bytes()) {
            Err(ScoringError::UnknownGradeMark { line, value }) => assert_eq!((line, value.as_str()), (2, "excellent")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn phase_slicing() {
        let adv = |to| SessionEvent {
            timestamp: "2026-03-02T08:00:00Z".parse().unwrap(),
            kind: EventKind::PhaseAdvanced { to },
        };
        let events = vec![ask("father", "symptoms"), adv(Some(Phase::B)), ask("father", "duration")];
        let r = phase_ranges(&events);
        assert_eq!(r[&Phase::A], 0..2);
        assert_eq!(r[&Phase::B], 2..3);
        assert!(!r.contains_key(&Phase::C1));
    }
}
