//! Group comparison between the two scaffolding conditions.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use pharmasim_stats::{bonferroni, cohens_d, mean, standard_error, welch_t_test};

use super::{Dimension, LabelDistribution};
use crate::pharmacist::Condition;
use crate::scenario::Phase;
use crate::scoring::StrategyScores;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReportError {
    #[error("no data for condition {0}")]
    MissingCondition(Condition),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudentScores {
    pub student_id: String,
    pub condition: Condition,
    pub phase: Phase,
    pub scores: StrategyScores,
}

const SCORE_MEASURES: [&str; 3] = ["checklist_pct", "interpersonal_pct", "interpretation_pct"];

fn score_value(s: &StrategyScores, measure: &str) -> f64 {
    match measure {
        "checklist_pct" => s.checklist_pct,
        "interpersonal_pct" => s.interpersonal_pct,
        _ => s.interpretation_pct,
    }
}

/// One compared measure; `_s` is structuring-heavy, `_p` problematizing-heavy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub group: String,
    pub measure: String,
    pub n_s: usize,
    pub mean_s: Option<f64>,
    pub se_s: Option<f64>,
    pub n_p: usize,
    pub mean_p: Option<f64>,
    pub se_p: Option<f64>,
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p: Option<f64>,
    pub p_adjusted: Option<f64>,
    pub cohens_d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

fn compare(group: &str, measure: &str, s: &[f64], p: &[f64]) -> MetricRow {
    let describe = |xs: &[f64]| {
        if xs.is_empty() {
            (None, None)
        } else {
            (Some(mean(xs)), Some(standard_error(xs)))
        }
    };
    let (mean_s, se_s) = describe(s);
    let (mean_p, se_p) = describe(p);
    let w = welch_t_test(s, p).ok();
    MetricRow {
        group: group.to_string(),
        measure: measure.to_string(),
        n_s: s.len(),
        mean_s,
        se_s,
        n_p: p.len(),
        mean_p,
        se_p,
        t: w.as_ref().map(|w| w.t),
        df: w.as_ref().map(|w| w.df),
        p: w.as_ref().map(|w| w.p),
        p_adjusted: None,
        cohens_d: cohens_d(s, p),
    }
}

/// Bonferroni over the rows of one family, with `m` comparisons.
fn adjust(rows: &mut [MetricRow], m: usize) {
    let ps: Vec<f64> = rows.iter().filter_map(|r| r.p).collect();
    if ps.is_empty() {
        return;
    }
    let adjusted = bonferroni(&ps, m.max(ps.len())).expect("p-values lie in [0, 1]");
    let mut it = adjusted.into_iter();
    for r in rows.iter_mut().filter(|r| r.p.is_some()) {
        r.p_adjusted = it.next();
    }
}

fn split<T>(items: &[T], condition: impl Fn(&T) -> Condition, value: impl Fn(&T) -> f64) -> (Vec<f64>, Vec<f64>) {
    let mut s = Vec::new();
    let mut p = Vec::new();
    for it in items {
        match condition(it) {
            Condition::StructuringHeavy => s.push(value(it)),
            Condition::ProblematizingHeavy => p.push(value(it)),
        }
    }
    (s, p)
}

/// Welch comparisons of every label category and every strategy score,
/// Bonferroni-adjusted within each label dimension and each phase.
pub fn group_report(distributions: &[LabelDistribution], scores: &[StudentScores]) -> Result<MetricReport, ReportError> {
    let seen: BTreeSet<Condition> = distributions
        .iter()
        .map(|d| d.condition)
        .chain(scores.iter().map(|s| s.condition))
        .collect();
    for c in Condition::ALL {
        if !seen.contains(&c) {
            return Err(ReportError::MissingCondition(c));
        }
    }

    let mut rows = Vec::new();
    for dim in Dimension::ALL {
        let ds: Vec<&LabelDistribution> = distributions.iter().filter(|d| d.dimension == *dim).collect();
        if ds.is_empty() {
            continue;
        }
        let categories = dim.categories();
        let mut family: Vec<MetricRow> = categories
            .iter()
            .map(|cat| {
                let (s, p) = split(&ds, |d| d.condition, |d| d.percentages[*cat]);
                compare(dim.as_str(), cat, &s, &p)
            })
            .collect();
        adjust(&mut family, categories.len());
        rows.extend(family);
    }

    let phases: BTreeSet<Phase> = scores.iter().map(|s| s.phase).collect();
    for phase in phases {
        let group = format!("scores_{phase}");
        let of_phase: Vec<&StudentScores> = scores.iter().filter(|s| s.phase == phase).collect();
        let mut family: Vec<MetricRow> = SCORE_MEASURES
            .iter()
            .map(|m| {
                let (s, p) = split(&of_phase, |x| x.condition, |x| score_value(&x.scores, m));
                compare(&group, m, &s, &p)
            })
            .collect();
        adjust(&mut family, SCORE_MEASURES.len());
        rows.extend(family);
    }
    Ok(MetricReport { rows })
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

impl MetricReport {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:<22} {:>4} {:>8} {:>7} {:>4} {:>8} {:>7} {:>8} {:>7} {:>8} {:>8} {:>7}",
            "group", "measure", "n_s", "mean_s", "se_s", "n_p", "mean_p", "se_p", "t", "df", "p", "p_adj", "d"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<14} {:<22} {:>4} {:>8} {:>7} {:>4} {:>8} {:>7} {:>8} {:>7} {:>8} {:>8} {:>7}",
                r.group,
                r.measure,
                r.n_s,
                cell(r.mean_s, 2),
                cell(r.se_s, 2),
                r.n_p,
                cell(r.mean_p, 2),
                cell(r.se_p, 2),
                cell(r.t, 3),
                cell(r.df, 2),
                cell(r.p, 4),
                cell(r.p_adjusted, 4),
                cell(r.cohens_d, 2),
            );
        }
        out
    }

    pub fn row(&self, group: &str, measure: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.group == group && r.measure == measure)
    }
}

/// One value per (student, phase, measure) for external model fitting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongRow {
    pub student_id: String,
    pub condition: Condition,
    pub phase: Phase,
    pub measure: String,
    pub value: f64,
}

/// Label distributions come from chat, which only exists in phase A.
pub fn long_format(distributions: &[LabelDistribution], scores: &[StudentScores]) -> Vec<LongRow> {
    let mut rows = Vec::new();
    for d in distributions {
        for (cat, v) in &d.percentages {
            rows.push(LongRow {
                student_id: d.student_id.clone(),
                condition: d.condition,
                phase: Phase::A,
                measure: format!("{}:{cat}", d.dimension),
                value: *v,
            });
        }
    }
    for s in scores {
        for m in SCORE_MEASURES {
            rows.push(LongRow {
                student_id: s.student_id.clone(),
                condition: s.condition,
                phase: s.phase,
                measure: m.to_string(),
                value: score_value(&s.scores, m),
            });
        }
    }
    rows
}
