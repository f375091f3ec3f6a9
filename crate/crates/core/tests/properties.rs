use std::sync::Arc;

use proptest::prelude::*;

use pharmasim_core::client::ask_client;
use pharmasim_core::discourse::{build_discussions, segment, split_sentences};
use pharmasim_core::pharmacist::{ChatTurn, DialoguePhase, PharmacistAgent, ScriptedProvider, Speaker};
use pharmasim_core::scenario::{Phase, Scenario, ScenarioSet};
use pharmasim_core::scoring::{phase_ranges, score_checklist, score_interpersonal};
use pharmasim_core::session::{encode_log, regenerate, EventKind, Module, SessionEvent, SessionState};
use pharmasim_core::student_model::{detect_cause_mentions, dc_complete, CoverageState};
use pharmasim_core::synthetic::synthetic_session;

fn set() -> Arc<ScenarioSet> {
    Arc::new(ScenarioSet::builtin())
}

/// Checklist items reached, by a plain scan over every persona entry.
fn brute_force_checklist(events: &[SessionEvent], scenario: &Scenario) -> usize {
    let ids: Vec<&str> = scenario.checklist_items.iter().map(|c| c.id.as_str()).collect();
    let mut seen: Vec<String> = Vec::new();
    for e in events {
        if let EventKind::ClientQuestionAsked { persona, topic } = &e.kind {
            for p in &scenario.personas {
                for q in &p.qa_entries {
                    if &p.id == persona && &q.topic == topic {
                        if let Some(item) = &q.checklist_item {
                            if ids.contains(&item.as_str()) && !seen.contains(item) {
                                seen.push(item.clone());
                            }
                        }
                    }
                }
            }
        }
    }
    seen.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn replay_and_regeneration_are_exact(seed in 0u64..10_000, steps in 1usize..160) {
        let agent = PharmacistAgent::with_defaults();
        let s = synthetic_session(seed, steps, set(), &agent, &ScriptedProvider::default());
        let folded = SessionState::fold(s.events(), &set()).unwrap();
        prop_assert_eq!(&folded, s.state());
        let again = regenerate(s.events(), set(), &agent, &ScriptedProvider::default()).unwrap();
        prop_assert_eq!(encode_log(&again), encode_log(s.events()));
    }

    #[test]
    fn incremental_coverage_equals_batch(seed in 0u64..10_000, steps in 1usize..160) {
        let agent = PharmacistAgent::with_defaults();
        let s = synthetic_session(seed, steps, set(), &agent, &ScriptedProvider::default());
        let set = set();
        for (phase, range) in phase_ranges(s.events()) {
            let slice = &s.events()[range];
            let scenario = set.get(phase);
            let incremental = s.state().coverage[&phase].covered_items.len();
            prop_assert_eq!(incremental, brute_force_checklist(slice, scenario));
            let batch = score_checklist(slice, scenario);
            prop_assert_eq!(*batch.numer() * scenario.checklist_items.len() as u64, incremental as u64 * *batch.denom());
        }
    }

    #[test]
    fn coverage_and_dialogue_phase_are_monotone(seed in 0u64..10_000, steps in 1usize..160) {
        let agent = PharmacistAgent::with_defaults();
        let s = synthetic_session(seed, steps, set(), &agent, &ScriptedProvider::default());
        let set = set();
        let mut state = SessionState::start(&s.events()[0], &set).unwrap();
        let mut prev_cov = state.current_coverage().covered_items.clone();
        let mut prev_phase = state.phase;
        let mut seen_di = false;
        for e in &s.events()[1..] {
            let before_gate = state.pharmacist.interpretation.mentioned_causes.clone();
            let was_phase = state.phase;
            state.apply(e, &set).unwrap();
            if state.phase == prev_phase {
                prop_assert!(prev_cov.is_subset(&state.current_coverage().covered_items));
            }
            if let EventKind::ModuleSwitched { to: Module::Diagnostic, .. } = e.kind {
                if was_phase == Phase::A {
                    prop_assert!(!before_gate.is_empty(), "diagnosis opened without any mentioned cause");
                }
            }
            match state.pharmacist.phase {
                DialoguePhase::DataInterpretation => seen_di = true,
                DialoguePhase::DataCollection => prop_assert!(!seen_di, "went back from DI to DC"),
            }
            prev_cov = state.current_coverage().covered_items.clone();
            prev_phase = state.phase;
        }
    }

    #[test]
    fn provider_sees_the_last_five_turns(seed in 0u64..10_000) {
        let agent = PharmacistAgent::with_defaults();
        let provider = ScriptedProvider::default();
        let s = synthetic_session(seed, 250, set(), &agent, &provider);
        let history = &s.state().pharmacist.history;
        for (k, call) in provider.calls().iter().enumerate() {
            let upto = 2 * k + 1;
            let from = upto.saturating_sub(5);
            prop_assert!(call.context_turns.len() <= 5);
            prop_assert_eq!(&call.context_turns[..], &history[from..upto]);
        }
    }

    #[test]
    fn checklist_scores_ignore_order_and_duplicates(
        picks in proptest::collection::vec((0usize..2, 0usize..12), 0..30),
        shuffle_seed in any::<u64>(),
    ) {
        let set = set();
        let a = set.get(Phase::A);
        let events: Vec<SessionEvent> = picks
            .iter()
            .map(|(p, q)| {
                let persona = &a.personas[*p];
                let entry = &persona.qa_entries[q % persona.qa_entries.len()];
                SessionEvent {
                    timestamp: "2026-03-02T08:00:00Z".parse().unwrap(),
                    kind: EventKind::ClientQuestionAsked { persona: persona.id.clone(), topic: entry.topic.clone() },
                }
            })
            .collect();
        let mut permuted = events.clone();
        let mut x = shuffle_seed | 1;
        for i in (1..permuted.len()).rev() {
            x ^= x << 13; x ^= x >> 7; x ^= x << 17;
            permuted.swap(i, (x % (i as u64 + 1)) as usize);
        }
        let mut doubled = events.clone();
        doubled.extend(events.iter().cloned());
        for variant in [&permuted, &doubled] {
            prop_assert_eq!(score_checklist(variant, a), score_checklist(&events, a));
            prop_assert_eq!(score_interpersonal(variant, a), score_interpersonal(&events, a));
        }

        // the student model folds to the same coverage
        let mut cov = CoverageState::for_scenario(a);
        for e in &permuted {
            if let EventKind::ClientQuestionAsked { persona, topic } = &e.kind {
                cov = cov.record_inquiry(&ask_client(a, persona, topic).unwrap());
            }
        }
        prop_assert_eq!(cov.covered_items.len(), brute_force_checklist(&events, a));
        prop_assert_eq!(dc_complete(&cov), cov.covered_items.len() == a.checklist_items.len());
    }

    #[test]
    fn mention_detection_ignores_case_and_punctuation(cause in 0usize..4, upper in any::<bool>(), punct in "[,.;:!?-]{0,3}") {
        let set = set();
        let a = set.get(Phase::A);
        let syn = &a.causes[cause].detection_synonyms[0];
        let syn = if upper { syn.to_uppercase() } else { syn.clone() };
        let text = format!("Well{punct} maybe {syn}{punct}");
        prop_assert!(detect_cause_mentions(&text, &a.causes).contains(&a.causes[cause].id));
    }

    #[test]
    fn segmentation_is_idempotent(
        msgs in proptest::collection::vec((any::<bool>(), "[A-Za-z0-9 .!?,'\n]{0,60}"), 0..20)
    ) {
        let t0: chrono::DateTime<chrono::Utc> = "2026-03-02T08:00:00Z".parse().unwrap();
        let turns_in: Vec<ChatTurn> = msgs
            .iter()
            .enumerate()
            .map(|(i, (student, text))| ChatTurn {
                speaker: if *student { Speaker::Student } else { Speaker::Pharmacist },
                text: text.clone(),
                timestamp: t0 + chrono::Duration::seconds(i as i64),
            })
            .collect();
        let once = segment(&turns_in);
        let as_messages: Vec<ChatTurn> = once
            .iter()
            .flat_map(|t| t.utterances.iter())
            .map(|u| ChatTurn { speaker: u.speaker, text: u.text.clone(), timestamp: u.timestamp })
            .collect();
        prop_assert_eq!(segment(&as_messages), once.clone());
        for u in once.iter().flat_map(|t| t.utterances.iter()) {
            prop_assert_eq!(split_sentences(&u.text), vec![u.text.clone()]);
        }
        for w in once.windows(2) {
            prop_assert_ne!(w[0].speaker, w[1].speaker);
        }
    }

    #[test]
    fn discussions_partition_the_chat(seed in 0u64..10_000) {
        let agent = PharmacistAgent::with_defaults();
        let s = synthetic_session(seed, 200, set(), &agent, &ScriptedProvider::default());
        let ds = build_discussions(s.events()).unwrap();
        let chat: Vec<&SessionEvent> = s
            .events()
            .iter()
            .filter(|e| matches!(e.kind, EventKind::StudentMessage { .. } | EventKind::PharmacistMessage { .. }))
            .collect();
        let in_discussions: usize = ds.iter().map(|d| d.messages.len()).sum();
        prop_assert_eq!(in_discussions, chat.len());
        for w in ds.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }
        // turns never span a discussion boundary
        let total_turns: usize = ds.iter().map(|d| d.turns.len()).sum();
        let per_discussion: usize = ds.iter().map(|d| segment(&d.messages).len()).sum();
        prop_assert_eq!(total_turns, per_discussion);
        let utterances: usize = ds.iter().flat_map(|d| d.turns.iter()).map(|t| t.utterances.len()).sum();
        let direct: usize = chat
            .iter()
            .map(|e| match &e.kind {
                EventKind::StudentMessage { text } | EventKind::PharmacistMessage { text } => split_sentences(text).len(),
                _ => 0,
            })
            .sum();
        prop_assert_eq!(utterances, direct);
    }
}
