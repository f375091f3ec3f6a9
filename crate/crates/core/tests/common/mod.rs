#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use chrono::Duration;
use pharmasim_core::clock::{Clock, SteppingClock};
use pharmasim_core::pharmacist::{Condition, PharmacistAgent, ScriptedProvider};
use pharmasim_core::scenario::{Likelihood, ScenarioSet};
use pharmasim_core::session::{DiagnosisEntry, DiagnosisForm, Initiator, Module, Session};

pub fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(path)
}

pub fn entry(cause: &str, likelihood: Likelihood) -> DiagnosisEntry {
    DiagnosisEntry {
        cause: cause.to_string(),
        likelihood,
        rationale: format!("{cause} fits what the client said"),
    }
}

pub fn golden_clock() -> Arc<dyn Clock> {
    Arc::new(SteppingClock::new(
        "2026-03-02T09:00:00Z".parse().unwrap(),
        Duration::seconds(7),
    ))
}

/// The scripted session frozen in `fixtures/golden/session.jsonl`.
pub fn golden_session() -> Session {
    let agent = PharmacistAgent::with_defaults();
    let provider = ScriptedProvider::default();
    let mut s = Session::start(
        "golden-1",
        "student-007",
        Condition::StructuringHeavy,
        Arc::new(ScenarioSet::builtin()),
        golden_clock(),
    )
    .unwrap();
    use Likelihood::*;

    // phase A
    for (persona, topic) in [
        ("father", "symptoms"),
        ("father", "intensity"),
        ("father", "location"),
        ("mother", "medication"),
        ("father", "duration"),
        ("father", "symptoms"),
    ] {
        s.ask(persona, topic).unwrap();
    }
    s.switch_module(Module::Pedagogical, Initiator::Student).unwrap();
    s.chat("Hello. What should I ask next?", &agent, &provider).unwrap();
    s.chat("Could it be teething? He chews on everything.", &agent, &provider).unwrap();
    s.switch_module(Module::ClientInquiry, Initiator::Student).unwrap();
    for (persona, topic) in [
        ("father", "allergies"),
        ("father", "diet"),
        ("mother", "breastfeeding"),
        ("father", "medical_history"),
        ("father", "medication"),
    ] {
        s.ask(persona, topic).unwrap();
    }
    // checklist complete: the system has moved to the mentor
    s.chat("I think the porridge is the most likely cause!", &agent, &provider).unwrap();
    s.chat("Should I also consider a virus...", &agent, &provider).unwrap();
    s.open_resource("compendium").unwrap();
    s.switch_module(Module::Diagnostic, Initiator::Student).unwrap();
    s.submit_diagnosis(DiagnosisForm {
        entries: vec![
            entry("dietary_changes", MostLikely),
            entry("Teething", Possible),
            entry("lunar phase", Unlikely),
        ],
    })
    .unwrap();

    // phase B
    for (persona, topic) in [
        ("father", "symptoms"),
        ("mother", "health"),
        ("mother", "medication"),
        ("mother", "breastfeeding"),
        ("father", "age"),
    ] {
        s.ask(persona, topic).unwrap();
    }
    s.switch_module(Module::Diagnostic, Initiator::Student).unwrap();
    s.submit_diagnosis(DiagnosisForm {
        entries: vec![entry("maternal_medication", MostLikely), entry("viral infection", Unlikely)],
    })
    .unwrap();

    // phase C1
    for (persona, topic) in [("mother", "symptoms"), ("mother", "fever"), ("baby", "feeding")] {
        s.ask(persona, topic).unwrap();
    }
    s.switch_module(Module::Diagnostic, Initiator::Student).unwrap();
    s.submit_diagnosis(DiagnosisForm {
        entries: vec![entry("breast engorgement", Likely)],
    })
    .unwrap();

    // phase C2, left unfinished
    s.ask("mother", "symptoms").unwrap();
    s.ask("baby", "sleep").unwrap();
    s
}
