//! Batch analysis over a directory of session logs.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::annotation::{
    aggregate_labels, group_report, long_format, primary_annotations, rater_agreement, read_annotations,
    AnnotationError, Annotation, Dimension, LabelDistribution, LongRow, MetricReport, RaterAgreement, ReportError,
    StudentScores, Transcript,
};
use crate::discourse::{build_discussions, indicator_rows, indicators_from, DiscourseError, IndicatorRow};
use crate::scenario::ScenarioSet;
use crate::scoring::{read_grades, score_session, GradeBook, ScoringError};
use crate::session::{read_events, EventKind, LogError, ReplayError, SessionEvent, SessionState};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{path}: {source}")]
    Log { path: PathBuf, source: LogError },
    #[error("{path}: {source}")]
    Replay { path: PathBuf, source: ReplayError },
    #[error("{path}: {source}")]
    Discourse { path: PathBuf, source: DiscourseError },
    #[error("{path}: {source}")]
    Scoring { path: PathBuf, source: ScoringError },
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AnalysisError + '_ {
    move |source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct LoadedLog {
    pub path: PathBuf,
    pub events: Vec<SessionEvent>,
}

impl LoadedLog {
    pub fn student_id(&self) -> &str {
        match self.events.first().map(|e| &e.kind) {
            Some(EventKind::SessionStarted { student_id, .. }) => student_id,
            _ => "",
        }
    }
}

/// Reads and validates every `*.jsonl` file in `dir`, sorted by name.
pub fn load_logs(dir: &Path, scenarios: &ScenarioSet) -> Result<Vec<LoadedLog>, AnalysisError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let file = fs::File::open(&path).map_err(io_err(&path))?;
            let events = read_events(BufReader::new(file)).map_err(|source| AnalysisError::Log {
                path: path.clone(),
                source,
            })?;
            SessionState::fold(&events, scenarios).map_err(|source| AnalysisError::Replay {
                path: path.clone(),
                source,
            })?;
            Ok(LoadedLog { path, events })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusAnalysis {
    pub distributions: Vec<LabelDistribution>,
    pub agreement: Vec<RaterAgreement>,
    pub scores: Vec<StudentScores>,
    pub indicators: Vec<IndicatorRow>,
    pub report: MetricReport,
}

impl CorpusAnalysis {
    pub fn long_rows(&self) -> Vec<LongRow> {
        long_format(&self.distributions, &self.scores)
    }
}

/// Scores, indicators, label distributions and the condition comparison
/// for a set of logs. `rater` picks whose labels are aggregated; by default
/// each utterance takes the first rater id in lexicographic order.
pub fn analyze(
    logs: &[LoadedLog],
    annotations: &[Annotation],
    grades: &GradeBook,
    scenarios: &ScenarioSet,
    rater: Option<&str>,
) -> Result<CorpusAnalysis, AnalysisError> {
    let mut transcripts = Vec::new();
    let mut scores = Vec::new();
    let mut indicators = Vec::new();
    for log in logs {
        let t = Transcript::from_events(&log.events)?;
        let discussions = build_discussions(&log.events).map_err(|source| AnalysisError::Discourse {
            path: log.path.clone(),
            source,
        })?;
        let ind = indicators_from(&log.events, &discussions);
        indicators.extend(indicator_rows(&t.student_id, &ind, &discussions));
        for p in score_session(&log.events, scenarios, grades).map_err(|source| AnalysisError::Scoring {
            path: log.path.clone(),
            source,
        })? {
            scores.push(StudentScores {
                student_id: p.student_id,
                condition: t.condition,
                phase: p.phase,
                scores: p.scores,
            });
        }
        transcripts.push(t);
    }

    let primary = primary_annotations(annotations, rater);
    let mut distributions = Vec::new();
    let mut agreement = Vec::new();
    for dim in Dimension::ALL {
        distributions.extend(aggregate_labels(&primary, &transcripts, *dim)?);
        agreement.extend(rater_agreement(annotations, *dim));
    }
    let report = group_report(&distributions, &scores)?;
    Ok(CorpusAnalysis {
        distributions,
        agreement,
        scores,
        indicators,
        report,
    })
}

/// Loads `logs_dir`, plus the optional annotation and grade files, and
/// runs [`analyze`].
pub fn analyze_paths(
    logs_dir: &Path,
    annotations: Option<&Path>,
    grades: Option<&Path>,
    scenarios: &ScenarioSet,
    rater: Option<&str>,
) -> Result<CorpusAnalysis, AnalysisError> {
    let logs = load_logs(logs_dir, scenarios)?;
    let annotations = match annotations {
        Some(p) => read_annotations(fs::File::open(p).map_err(io_err(p))?)?,
        None => Vec::new(),
    };
    let grades = match grades {
        Some(p) => read_grades(fs::File::open(p).map_err(io_err(p))?).map_err(|source| AnalysisError::Scoring {
            path: p.to_path_buf(),
            source,
        })?,
        None => GradeBook::default(),
    };
    analyze(&logs, &annotations, &grades, scenarios, rater)
}
