//! Coding rubrics, annotation ingestion and per-student label distributions.

mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use pharmasim_stats::cohens_kappa;

use crate::discourse::{build_discussions, utterance_records, DiscourseError};
use crate::pharmacist::{Condition, Speaker};
use crate::session::{EventKind, SessionEvent};

pub use report::{group_report, long_format, LongRow, MetricReport, MetricRow, ReportError, StudentScores};

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("annotation for {transcript_id}/{utterance_id} refers to no known utterance")]
    DanglingAnnotation {
        transcript_id: String,
        utterance_id: String,
    },
    #[error("{transcript_id}/{utterance_id} is a {actual:?} utterance but carries {expected:?} labels")]
    SpeakerMismatch {
        transcript_id: String,
        utterance_id: String,
        expected: Speaker,
        actual: Speaker,
    },
    #[error("invalid annotation on line {line}: {reason}")]
    InvalidRecord { line: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("transcript has no session_started event")]
    MissingStart,
    #[error(transparent)]
    Discourse(#[from] DiscourseError),
}

macro_rules! label_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident = $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == s)
                    .ok_or_else(|| format!("unknown {} {s:?}", stringify!($name).to_lowercase()))
            }
        }
    };
}

label_enum!(Mechanism {
    Decomposing = "decomposing",
    Focusing = "focusing",
    Monitoring = "monitoring",
    ElicitArticulation = "elicit_articulation",
    ElicitDecision = "elicit_decision",
    SurfaceGaps = "surface_gaps",
    Affirmative = "affirmative",
    Mistake = "mistake",
});

label_enum!(
    /// Coarse grouping of mechanisms.
    Family {
        Structuring = "structuring",
        Problematizing = "problematizing",
        Affirmative = "affirmative",
        Mistake = "mistake",
    }
);

label_enum!(Strategy {
    Checklist = "checklist",
    Interpersonal = "interpersonal",
    PossibleCauses = "possible_causes",
});

label_enum!(Icap {
    Active = "active",
    Constructive = "constructive",
    Interactive = "interactive",
});

label_enum!(Correctness {
    Correct = "correct",
    Incorrect = "incorrect",
});

impl Mechanism {
    pub fn family(self) -> Family {
        match self {
            Mechanism::Decomposing | Mechanism::Focusing | Mechanism::Monitoring => Family::Structuring,
            Mechanism::ElicitArticulation | Mechanism::ElicitDecision | Mechanism::SurfaceGaps => {
                Family::Problematizing
            }
            Mechanism::Affirmative => Family::Affirmative,
            Mechanism::Mistake => Family::Mistake,
        }
    }

    /// Whether this is one of the six scaffolding mechanisms.
    pub fn is_scaffolding(self) -> bool {
        matches!(self.family(), Family::Structuring | Family::Problematizing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PharmacistLabel {
    pub mechanism: Mechanism,
    pub strategy: Option<Strategy>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentLabel {
    pub icap: Icap,
    pub correctness: Correctness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UtteranceLabel {
    Pharmacist(PharmacistLabel),
    Student(StudentLabel),
}

impl UtteranceLabel {
    pub fn speaker(&self) -> Speaker {
        match self {
            UtteranceLabel::Pharmacist(_) => Speaker::Pharmacist,
            UtteranceLabel::Student(_) => Speaker::Student,
        }
    }

    /// The category on `dimension`, if this label has one.
    pub fn category(&self, dimension: Dimension) -> Option<&'static str> {
        match (self, dimension) {
            (UtteranceLabel::Pharmacist(p), Dimension::Mechanism) => Some(p.mechanism.as_str()),
            (UtteranceLabel::Pharmacist(p), Dimension::Family) => Some(p.mechanism.family().as_str()),
            (UtteranceLabel::Pharmacist(p), Dimension::Strategy) => p.strategy.map(Strategy::as_str),
            (UtteranceLabel::Student(s), Dimension::Icap) => Some(s.icap.as_str()),
            (UtteranceLabel::Student(s), Dimension::Correctness) => Some(s.correctness.as_str()),
            _ => None,
        }
    }
}

label_enum!(
    /// A label dimension over which distributions are computed.
    Dimension {
        Family = "family",
        Mechanism = "mechanism",
        Strategy = "strategy",
        Icap = "icap",
        Correctness = "correctness",
    }
);

impl Dimension {
    pub fn categories(self) -> Vec<&'static str> {
        fn names<T: Copy>(all: &[T], f: fn(T) -> &'static str) -> Vec<&'static str> {
            all.iter().copied().map(f).collect()
        }
        match self {
            Dimension::Family => names(Family::ALL, Family::as_str),
            Dimension::Mechanism => names(Mechanism::ALL, Mechanism::as_str),
            Dimension::Strategy => names(Strategy::ALL, Strategy::as_str),
            Dimension::Icap => names(Icap::ALL, Icap::as_str),
            Dimension::Correctness => names(Correctness::ALL, Correctness::as_str),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Annotation {
    pub transcript_id: String,
    pub utterance_id: String,
    pub rater_id: String,
    pub label: UtteranceLabel,
}

#[derive(Deserialize)]
struct AnnotationRecord {
    transcript_id: String,
    utterance_id: String,
    rater_id: String,
    #[serde(default)]
    mechanism: String,
    #[serde(default)]
    strategy: String,
    #[serde(default)]
    icap: String,
    #[serde(default)]
    correctness: String,
}

/// Reads `transcript_id,utterance_id,rater_id,mechanism,strategy,icap,correctness`
/// records. A row carries either pharmacist fields or student fields.
pub fn read_annotations<R: Read>(input: R) -> Result<Vec<Annotation>, AnnotationError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<AnnotationRecord>().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let bad = |reason: String| AnnotationError::InvalidRecord { line, reason };
        let pharmacist = !rec.mechanism.is_empty() || !rec.strategy.is_empty();
        let student = !rec.icap.is_empty() || !rec.correctness.is_empty();
        let label = match (pharmacist, student) {
            (true, false) => {
                if rec.mechanism.is_empty() {
                    return Err(bad("strategy given without mechanism".into()));
                }
                UtteranceLabel::Pharmacist(PharmacistLabel {
                    mechanism: rec.mechanism.parse().map_err(bad)?,
                    strategy: if rec.strategy.is_empty() {
                        None
                    } else {
                        Some(rec.strategy.parse().map_err(bad)?)
                    },
                })
            }
            (false, true) => UtteranceLabel::Student(StudentLabel {
                icap: rec.icap.parse().map_err(bad)?,
                correctness: rec.correctness.parse().map_err(bad)?,
            }),
            (true, true) => return Err(bad("both pharmacist and student labels given".into())),
            (false, false) => return Err(bad("no label given".into())),
        };
        if rec.transcript_id.is_empty() || rec.utterance_id.is_empty() || rec.rater_id.is_empty() {
            return Err(bad("transcript_id, utterance_id and rater_id are required".into()));
        }
        out.push(Annotation {
            transcript_id: rec.transcript_id,
            utterance_id: rec.utterance_id,
            rater_id: rec.rater_id,
            label,
        });
    }
    Ok(out)
}

/// What annotations are checked against: the utterances of one session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub transcript_id: String,
    pub student_id: String,
    pub condition: Condition,
    pub utterances: BTreeMap<String, Speaker>,
}

impl Transcript {
    pub fn from_events(events: &[SessionEvent]) -> Result<Self, AnnotationError> {
        let Some(EventKind::SessionStarted {
            session_id,
            student_id,
            condition,
            ..
        }) = events.first().map(|e| &e.kind)
        else {
            return Err(AnnotationError::MissingStart);
        };
        let discussions = build_discussions(events)?;
        let utterances = utterance_records(session_id, &discussions)
            .into_iter()
            .map(|r| (r.utterance_id, r.speaker))
            .collect();
        Ok(Transcript {
            transcript_id: session_id.clone(),
            student_id: student_id.clone(),
            condition: *condition,
            utterances,
        })
    }
}

/// Keeps one annotation per utterance: the one by the first rater id in
/// lexicographic order, or by `rater` when given.
pub fn primary_annotations<'a>(annotations: &'a [Annotation], rater: Option<&str>) -> Vec<&'a Annotation> {
    let mut chosen: BTreeMap<(&str, &str), &Annotation> = BTreeMap::new();
    for a in annotations {
        if rater.is_some_and(|r| r != a.rater_id) {
            continue;
        }
        let key = (a.transcript_id.as_str(), a.utterance_id.as_str());
        match chosen.get(&key) {
            Some(prev) if prev.rater_id <= a.rater_id => {}
            _ => {
                chosen.insert(key, a);
            }
        }
    }
    chosen.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelDistribution {
    pub student_id: String,
    pub condition: Condition,
    pub dimension: Dimension,
    /// Labeled utterances on this dimension.
    pub total: usize,
    pub counts: BTreeMap<String, usize>,
    pub percentages: BTreeMap<String, f64>,
}

/// Per-student percentages over one dimension. Students without any
/// labeled utterance on the dimension get no distribution.
pub fn aggregate_labels(
    annotations: &[&Annotation],
    transcripts: &[Transcript],
    dimension: Dimension,
) -> Result<Vec<LabelDistribution>, AnnotationError> {
    let by_id: BTreeMap<&str, &Transcript> = transcripts.iter().map(|t| (t.transcript_id.as_str(), t)).collect();
    let mut counts: BTreeMap<(&str, Condition), BTreeMap<&'static str, usize>> = BTreeMap::new();
    for a in annotations {
        let dangling = || AnnotationError::DanglingAnnotation {
            transcript_id: a.transcript_id.clone(),
            utterance_id: a.utterance_id.clone(),
        };
        let t = by_id.get(a.transcript_id.as_str()).ok_or_else(dangling)?;
        let speaker = *t.utterances.get(&a.utterance_id).ok_or_else(dangling)?;
        if speaker != a.label.speaker() {
            return Err(AnnotationError::SpeakerMismatch {
                transcript_id: a.transcript_id.clone(),
                utterance_id: a.utterance_id.clone(),
                expected: a.label.speaker(),
                actual: speaker,
            });
        }
        if let Some(category) = a.label.category(dimension) {
            *counts
                .entry((t.student_id.as_str(), t.condition))
                .or_default()
                .entry(category)
                .or_default() += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|((student, condition), tally)| {
            let total: usize = tally.values().sum();
            let mut c = BTreeMap::new();
            let mut p = BTreeMap::new();
            for cat in dimension.categories() {
                let n = tally.get(cat).copied().unwrap_or(0);
                c.insert(cat.to_string(), n);
                p.insert(cat.to_string(), 100.0 * n as f64 / total as f64);
            }
            LabelDistribution {
                student_id: student.to_string(),
                condition,
                dimension,
                total,
                counts: c,
                percentages: p,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaterAgreement {
    pub rater_a: String,
    pub rater_b: String,
    pub dimension: Dimension,
    /// Utterances both raters labeled on the dimension.
    pub n: usize,
    pub kappa: Option<f64>,
}

/// Cohen's kappa for every pair of raters over their co-labeled utterances.
pub fn rater_agreement(annotations: &[Annotation], dimension: Dimension) -> Vec<RaterAgreement> {
    let mut by_rater: BTreeMap<&str, BTreeMap<(&str, &str), &'static str>> = BTreeMap::new();
    for a in annotations {
        if let Some(cat) = a.label.category(dimension) {
            by_rater
                .entry(a.rater_id.as_str())
                .or_default()
                .insert((a.transcript_id.as_str(), a.utterance_id.as_str()), cat);
        }
    }
    let raters: Vec<&str> = by_rater.keys().copied().collect();
    let mut out = Vec::new();
    for (i, ra) in raters.iter().enumerate() {
        for rb in &raters[i + 1..] {
            let (la, lb) = (&by_rater[ra], &by_rater[rb]);
            let shared: BTreeSet<_> = la.keys().filter(|k| lb.contains_key(*k)).collect();
            let xa: Vec<&str> = shared.iter().map(|k| la[*k]).collect();
            let xb: Vec<&str> = shared.iter().map(|k| lb[*k]).collect();
            out.push(RaterAgreement {
                rater_a: ra.to_string(),
                rater_b: rb.to_string(),
                dimension,
                n: shared.len(),
                kappa: cohens_kappa(&xa, &xb).ok(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transcript() -> Transcript {
        Transcript {
            transcript_id: "t1".into(),
            student_id: "s1".into(),
            condition: Condition::StructuringHeavy,
            utterances: (1..=6)
                .map(|i| (format!("u{i:04}"), if i == 6 { Speaker::Student } else { Speaker::Pharmacist }))
                .collect(),
        }
    }

    fn ann(utt: usize, rater: &str, label: UtteranceLabel) -> Annotation {
        Annotation {
            transcript_id: "t1".into(),
            utterance_id: format!("u{utt:04}"),
            rater_id: rater.into(),
            label,
        }
    }

    fn ph(m: Mechanism) -> UtteranceLabel {
        UtteranceLabel::Pharmacist(PharmacistLabel {
            mechanism: m,
            strategy: None,
        })
    }

    #[test]
    fn families_partition_mechanisms() {
        let scaffolding: Vec<_> = Mechanism::ALL.iter().filter(|m| m.is_scaffolding()).collect();
        assert_eq!(scaffolding.len(), 6);
        assert_eq!(
            Mechanism::ALL
                .iter()
                .filter(|m| m.family() == Family::Structuring)
                .count(),
            3
        );
    }

    #[test]
    fn family_distribution() {
        use Mechanism::*;
        let anns: Vec<_> = [Decomposing, Focusing, Monitoring, Focusing, SurfaceGaps]
            .into_iter()
            .enumerate()
            .map(|(i, m)| ann(i + 1, "r1", ph(m)))
            .collect();
        let refs: Vec<_> = anns.iter().collect();
        let d = aggregate_labels(&refs, &[transcript()], Dimension::Family).unwrap();
        assert_eq!(d.len(), 1);
        let p = &d[0].percentages;
        assert_eq!(
            (p["structuring"], p["problematizing"], p["affirmative"], p["mistake"]),
            (80.0, 20.0, 0.0, 0.0)
        );
        // no student labels, so no icap distribution
        assert!(aggregate_labels(&refs, &[transcript()], Dimension::Icap).unwrap().is_empty());
    }

    #[test]
    fn dangling_and_mismatched() {
        let a = [ann(9, "r1", ph(Mechanism::Focusing))];
        let refs: Vec<_> = a.iter().collect();
        assert!(matches!(
            aggregate_labels(&refs, &[transcript()], Dimension::Family),
            Err(AnnotationError::DanglingAnnotation { .. })
        ));
        let a = [ann(6, "r1", ph(Mechanism::Focusing))];
        let refs: Vec<_> = a.iter().collect();
        assert!(matches!(
            aggregate_labels(&refs, &[transcript()], Dimension::Family),
            Err(AnnotationError::SpeakerMismatch { .. })
        ));
    }

    #[test]
    fn csv_ingestion() {
        let csv = "transcript_id,utterance_id,rater_id,mechanism,strategy,icap,correctness\n\
                   t1,u0001,r1,focusing,checklist,,\n\
                   t1,u0006,r1,,,constructive,correct\n\
                   t1,u0002,r1,mistake,,,\n";
        let anns = read_annotations(csv.as_bytes()).unwrap();
        assert_eq!(anns.len(), 3);
        assert_eq!(anns[0].label.category(Dimension::Strategy), Some("checklist"));
        assert_eq!(anns[1].label.category(Dimension::Icap), Some("constructive"));
        assert_eq!(anns[2].label.category(Dimension::Strategy), None);

        let bad = "transcript_id,utterance_id,rater_id,mechanism,strategy,icap,correctness\nt1,u1,r1,focusing,,active,\n";
        assert!(matches!(
            read_annotations(bad.as_bytes()),
            Err(AnnotationError::InvalidRecord { line: 2, .. })
        ));
        let bad = "transcript_id,utterance_id,rater_id,mechanism,strategy,icap,correctness\nt1,u1,r1,praising,,,\n";
        assert!(read_annotations(bad.as_bytes()).is_err());
    }

    #[test]
    fn agreement_between_raters() {
        use Mechanism::*;
        let mut anns = Vec::new();
        for (i, (a, b)) in [(Focusing, Focusing), (Mistake, Mistake), (Focusing, Mistake), (Mistake, Focusing)]
            .into_iter()
            .enumerate()
        {
            anns.push(ann(i + 1, "r1", ph(a)));
            anns.push(ann(i + 1, "r2", ph(b)));
        }
        let k = rater_agreement(&anns, Dimension::Mechanism);
        assert_eq!(k.len(), 1);
        assert_eq!(k[0].n, 4);
        assert_eq!(k[0].kappa, Some(0.0));

        let primary = primary_annotations(&anns, None);
        assert_eq!(primary.len(), 4);
        assert!(primary.iter().all(|a| a.rater_id == "r1"));
        assert!(primary_annotations(&anns, Some("r2")).iter().all(|a| a.rater_id == "r2"));
    }
}
