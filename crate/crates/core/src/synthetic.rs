//! Seeded random sessions for tests and benchmarks.

use std::sync::Arc;

use chrono::Duration;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clock::SteppingClock;
use crate::pharmacist::{Condition, LlmProvider, PharmacistAgent};
use crate::scenario::{Likelihood, Phase, ScenarioSet};
use crate::session::{DiagnosisEntry, DiagnosisForm, Initiator, Module, Session};

const CHAT_LINES: [&str; 10] = [
    "Hello. What should I ask next?",
    "I am not sure what to do.",
    "Could it be teething?",
    "Maybe the new porridge is the reason!",
    "Is a virus possible? He has no fever.",
    "What about the mother's medication?",
    "Could the breast be engorged...",
    "Maybe it is just bloating.",
    "Ok.",
    "Why is the duration important?",
];

/// Drives a session with `steps` random commands. Rejected commands (gate,
/// wrong module and so on) are skipped, so the result is always a valid log.
pub fn synthetic_session(
    seed: u64,
    steps: usize,
    scenarios: Arc<ScenarioSet>,
    agent: &PharmacistAgent,
    provider: &dyn LlmProvider,
) -> Session {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = "2026-03-02T08:00:00Z".parse().unwrap();
    let clock = Arc::new(SteppingClock::new(start, Duration::seconds(rng.gen_range(1..=20))));
    let condition = if seed.is_multiple_of(2) {
        Condition::StructuringHeavy
    } else {
        Condition::ProblematizingHeavy
    };
    let mut s = Session::start(
        format!("synthetic-{seed}"),
        format!("student-{seed:03}"),
        condition,
        scenarios,
        clock,
    )
    .expect("builtin scenario set is complete");

    for _ in 0..steps {
        if s.state().finished {
            break;
        }
        let scenario = s.scenario().clone();
        let roll: u32 = rng.gen_range(0..100);
        let _ = match (roll, s.state().active_module) {
            (0..=54, Module::ClientInquiry) => {
                let persona = scenario.personas.choose(&mut rng).unwrap();
                let entry = persona.qa_entries.choose(&mut rng).unwrap();
                s.ask(&persona.id, &entry.topic).map(drop)
            }
            (0..=54, Module::Pedagogical) => {
                let line = CHAT_LINES.choose(&mut rng).unwrap();
                s.chat(line, agent, provider).map(drop)
            }
            (55..=79, _) => {
                let to = *[Module::ClientInquiry, Module::Pedagogical, Module::Diagnostic]
                    .choose(&mut rng)
                    .unwrap();
                s.switch_module(to, Initiator::Student)
            }
            (80..=84, _) => match scenario.resources.choose(&mut rng) {
                Some(r) => s.open_resource(&r.id).map(drop),
                None => Ok(()),
            },
            // linger in the learning phase so that data collection often completes
            (85.., Module::Diagnostic) if s.state().phase != Phase::A || roll >= 97 => {
                let n = rng.gen_range(1..=3);
                let entries = (0..n)
                    .map(|_| DiagnosisEntry {
                        cause: scenario.causes.choose(&mut rng).unwrap().label.clone(),
                        likelihood: *[Likelihood::Unlikely, Likelihood::Possible, Likelihood::MostLikely]
                            .choose(&mut rng)
                            .unwrap(),
                        rationale: "seen in the answers".into(),
                    })
                    .collect();
                s.submit_diagnosis(DiagnosisForm { entries }).map(drop)
            }
            _ => Ok(()),
        };
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pharmacist::ScriptedProvider;
    use crate::session::encode_log;

    #[test]
    fn same_seed_same_log() {
        let set = Arc::new(ScenarioSet::builtin());
        let agent = PharmacistAgent::with_defaults();
        let a = synthetic_session(7, 200, set.clone(), &agent, &ScriptedProvider::default());
        let b = synthetic_session(7, 200, set, &agent, &ScriptedProvider::default());
        assert_eq!(encode_log(a.events()), encode_log(b.events()));
        assert!(a.events().len() > 50);
    }
}
