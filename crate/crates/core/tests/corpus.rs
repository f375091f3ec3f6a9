mod common;

use std::fs;

use common::fixture;
use pharmasim_core::analysis::{analyze_paths, load_logs};
use pharmasim_core::annotation::{Dimension, Transcript};
use pharmasim_core::pharmacist::Speaker;
use pharmasim_core::scenario::ScenarioSet;
use serde_json::Value;

const TOL: f64 = 1e-9;

fn reference() -> Value {
    serde_json::from_str(&fs::read_to_string(fixture("corpus/reference.json")).unwrap()).unwrap()
}

fn close(got: Option<f64>, want: &Value, what: &str) {
    match (got, want.as_f64()) {
        (Some(g), Some(w)) => assert!((g - w).abs() <= TOL, "{what}: {g} vs {w}"),
        (None, None) => {}
        (g, _) => panic!("{what}: {g:?} vs {want}"),
    }
}

#[test]
fn corpus_has_expected_utterance_counts() {
    let set = ScenarioSet::builtin();
    let logs = load_logs(&fixture("corpus/logs"), &set).unwrap();
    assert_eq!(logs.len(), 10);
    let (mut ph, mut st) = (0, 0);
    for log in &logs {
        let t = Transcript::from_events(&log.events).unwrap();
        ph += t.utterances.values().filter(|s| **s == Speaker::Pharmacist).count();
        st += t.utterances.values().filter(|s| **s == Speaker::Student).count();
    }
    let r = reference();
    assert_eq!((ph, st), (328, 90));
    assert_eq!(ph as u64, r["utterances"]["pharmacist"].as_u64().unwrap());
    assert_eq!(st as u64, r["utterances"]["student"].as_u64().unwrap());
}

#[test]
fn analysis_matches_reference_tabulation() {
    let set = ScenarioSet::builtin();
    let a = analyze_paths(
        &fixture("corpus/logs"),
        Some(&fixture("corpus/annotations.csv")),
        Some(&fixture("corpus/grades.csv")),
        &set,
        None,
    )
    .unwrap();
    let r = reference();

    // label distributions
    let want = r["distributions"].as_object().unwrap();
    let mut seen = 0;
    for d in &a.distributions {
        let w = &want[&d.student_id][d.dimension.as_str()];
        for (cat, pct) in &d.percentages {
            close(Some(*pct), &w[cat], &format!("{} {} {cat}", d.student_id, d.dimension));
        }
        let total: f64 = d.percentages.values().sum();
        assert!((total - 100.0).abs() <= TOL);
        seen += 1;
    }
    let expected: usize = want.values().map(|v| v.as_object().unwrap().len()).sum();
    assert_eq!(seen, expected);

    // inter-rater agreement
    for k in &a.agreement {
        let w = &r["kappa_r1_r2"][k.dimension.as_str()];
        assert_eq!(k.n as u64, w["n"].as_u64().unwrap(), "{}", k.dimension);
        close(k.kappa, &w["kappa"], k.dimension.as_str());
    }
    assert_eq!(a.agreement.len(), Dimension::ALL.len());

    // strategy scores
    for s in &a.scores {
        let w = &r["scores"][&s.student_id][s.phase.as_str()];
        close(Some(s.scores.checklist_pct), &w["checklist_pct"], "checklist");
        close(Some(s.scores.interpersonal_pct), &w["interpersonal_pct"], "interpersonal");
        close(Some(s.scores.interpretation_pct), &w["interpretation_pct"], "interpretation");
    }
    assert_eq!(a.scores.len(), 40);

    // group comparison
    let rows = r["report"].as_array().unwrap();
    assert_eq!(a.report.rows.len(), rows.len());
    for w in rows {
        let (g, m) = (w["group"].as_str().unwrap(), w["measure"].as_str().unwrap());
        let row = a.report.row(g, m).unwrap_or_else(|| panic!("missing row {g}/{m}"));
        let what = format!("{g}/{m}");
        assert_eq!(row.n_s as u64, w["n_s"].as_u64().unwrap());
        assert_eq!(row.n_p as u64, w["n_p"].as_u64().unwrap());
        close(row.mean_s, &w["mean_s"], &format!("{what} mean_s"));
        close(row.mean_p, &w["mean_p"], &format!("{what} mean_p"));
        close(row.se_s, &w["se_s"], &format!("{what} se_s"));
        close(row.se_p, &w["se_p"], &format!("{what} se_p"));
        if w["t_infinite"].as_bool().unwrap() {
            assert!(row.t.unwrap().is_infinite());
        } else {
            close(row.t, &w["t"], &format!("{what} t"));
        }
        close(row.df, &w["df"], &format!("{what} df"));
        close(row.p, &w["p"], &format!("{what} p"));
        close(row.p_adjusted, &w["p_adjusted"], &format!("{what} p_adj"));
        close(row.cohens_d, &w["cohens_d"], &format!("{what} d"));
    }
    assert!(a.report.row("family", "structuring").unwrap().p_adjusted.unwrap() < 0.01);
}
