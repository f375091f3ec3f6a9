//! Session lifecycle: modules, phases, gating and the event log.
//!
//! State is a left fold over [`SessionEvent`]s. Commands validate, emit
//! events through the same [`SessionState::apply`] used by replay, and only
//! then append them, so a live session and a replayed one cannot diverge.

mod event;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

pub use event::{
    encode_event, encode_log, read_events, write_events, DiagnosisEntry, DiagnosisForm, EventKind, Initiator,
    LogError, Module, SessionEvent, LOG_SCHEMA_VERSION,
};

use crate::client::{ask_client, ClientError, InquiryResult};
use crate::clock::{Clock, Monotonic, ScriptedClock, Timestamp};
use crate::pharmacist::{Condition, DialoguePhase, LlmProvider, PharmacistAgent, PharmacistState, StepError};
use crate::scenario::{Phase, Resource, Scenario, ScenarioSet, ScenarioSetError, SolutionTable};
use crate::student_model::{dc_complete, diagnostic_gate, CoverageState, GateDecision};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("scenario set has no scenario for phase {0}")]
    MissingScenario(Phase),
    #[error("session is finished")]
    SessionFinished,
    #[error("command needs the {expected} module but {actual} is active")]
    WrongModule { expected: Module, actual: Module },
    #[error("already in the {0} module")]
    SameModule(Module),
    #[error("diagnosis blocked: {reason}")]
    GateDenied { reason: String },
    #[error("{module} module is not available in phase {phase}")]
    ModuleUnavailableInPhase { module: Module, phase: Phase },
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("unknown resource {0:?}")]
    UnknownResource(String),
    #[error("diagnosis form has no entries")]
    EmptyDiagnosis,
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("pharmacist step failed: {0}")]
    Step(String),
}

impl From<ScenarioSetError> for SessionError {
    fn from(e: ScenarioSetError) -> Self {
        match e {
            ScenarioSetError::MissingScenario(p) | ScenarioSetError::Scenario { phase: p, .. } => {
                SessionError::MissingScenario(p)
            }
        }
    }
}

impl From<StepError> for SessionError {
    fn from(e: StepError) -> Self {
        SessionError::Step(e.to_string())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("corrupt log at event {position}: {reason}")]
    CorruptLog { position: usize, reason: String },
    #[error("regenerated session diverged at event {position}: {reason}")]
    Diverged { position: usize, reason: String },
}

/// Everything derivable from the events so far.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionState {
    pub session_id: String,
    pub student_id: String,
    pub condition: Condition,
    pub scenario_ids: BTreeMap<Phase, String>,
    pub phase: Phase,
    pub finished: bool,
    pub active_module: Module,
    /// Coverage per phase; phases not reached yet are absent.
    pub coverage: BTreeMap<Phase, CoverageState>,
    pub pharmacist: PharmacistState,
    pub auto_switch_fired: bool,
    pub event_count: usize,
    pub last_timestamp: Timestamp,
    #[serde(skip)]
    pending: Pending,
}

/// What the next event must be, for multi-event commands.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
enum Pending {
    #[default]
    Nothing,
    Answer,
    Reply,
    Solution,
    Advance,
}

fn invalid(msg: impl Into<String>) -> SessionError {
    SessionError::InvalidEvent(msg.into())
}

impl SessionState {
    /// Builds the initial state from a `SessionStarted` event.
    pub fn start(event: &SessionEvent, scenarios: &ScenarioSet) -> Result<Self, SessionError> {
        let EventKind::SessionStarted {
            session_id,
            student_id,
            condition,
            scenarios: ids,
        } = &event.kind
        else {
            return Err(invalid("log must begin with session_started"));
        };
        for phase in Phase::ALL {
            match ids.get(&phase) {
                None => return Err(SessionError::MissingScenario(phase)),
                Some(id) if *id != scenarios.get(phase).id => {
                    return Err(invalid(format!(
                        "phase {phase} was recorded with scenario {id:?} but {:?} is loaded",
                        scenarios.get(phase).id
                    )))
                }
                Some(_) => {}
            }
        }
        let a = scenarios.get(Phase::A);
        let coverage_a = CoverageState::for_scenario(a);
        Ok(SessionState {
            session_id: session_id.clone(),
            student_id: student_id.clone(),
            condition: *condition,
            scenario_ids: ids.clone(),
            phase: Phase::A,
            finished: false,
            active_module: Module::ClientInquiry,
            coverage: BTreeMap::from([(Phase::A, coverage_a.clone())]),
            pharmacist: PharmacistState::new(*condition, coverage_a),
            auto_switch_fired: false,
            event_count: 1,
            last_timestamp: event.timestamp,
            pending: Pending::Nothing,
        })
    }

    /// Replays a whole log.
    pub fn fold(events: &[SessionEvent], scenarios: &ScenarioSet) -> Result<Self, ReplayError> {
        let corrupt = |position: usize, e: SessionError| ReplayError::CorruptLog {
            position,
            reason: e.to_string(),
        };
        let first = events.first().ok_or_else(|| ReplayError::CorruptLog {
            position: 0,
            reason: "empty log".into(),
        })?;
        let mut state = SessionState::start(first, scenarios).map_err(|e| corrupt(0, e))?;
        for (i, e) in events.iter().enumerate().skip(1) {
            state.apply(e, scenarios).map_err(|err| corrupt(i, err))?;
        }
        Ok(state)
    }

    pub fn current_coverage(&self) -> &CoverageState {
        &self.coverage[&self.phase]
    }

    /// Whether a multi-event command is half-way through.
    pub fn is_settled(&self) -> bool {
        self.pending == Pending::Nothing
    }

    /// Checks whether the active module may change to `to`.
    pub fn check_switch(&self, to: Module, scenario: &Scenario) -> Result<(), SessionError> {
        if self.finished {
            return Err(SessionError::SessionFinished);
        }
        if to == self.active_module {
            return Err(SessionError::SameModule(to));
        }
        match to {
            Module::ClientInquiry => Ok(()),
            Module::Pedagogical => {
                if self.phase == Phase::A && scenario.pedagogical_module_enabled {
                    Ok(())
                } else {
                    Err(SessionError::ModuleUnavailableInPhase {
                        module: to,
                        phase: self.phase,
                    })
                }
            }
            Module::Diagnostic => {
                if self.phase == Phase::A && scenario.pedagogical_module_enabled {
                    if let GateDecision::Denied { reason } = diagnostic_gate(&self.pharmacist.interpretation) {
                        return Err(SessionError::GateDenied { reason });
                    }
                }
                Ok(())
            }
        }
    }

    fn require_module(&self, expected: Module) -> Result<(), SessionError> {
        if self.active_module != expected {
            return Err(SessionError::WrongModule {
                expected,
                actual: self.active_module,
            });
        }
        Ok(())
    }

    /// Applies one event after `SessionStarted`, validating it against the
    /// current state. On error the state is unchanged.
    pub fn apply(&mut self, event: &SessionEvent, scenarios: &ScenarioSet) -> Result<(), SessionError> {
        if self.finished {
            return Err(SessionError::SessionFinished);
        }
        if event.timestamp < self.last_timestamp {
            return Err(invalid("timestamp earlier than the previous event"));
        }
        let expected = self.pending;
        let got = match &event.kind {
            EventKind::ClientAnswered { .. } => Pending::Answer,
            EventKind::PharmacistMessage { .. } => Pending::Reply,
            EventKind::SolutionShown => Pending::Solution,
            EventKind::PhaseAdvanced { .. } => Pending::Advance,
            _ => Pending::Nothing,
        };
        if expected != got {
            return Err(invalid(match expected {
                Pending::Nothing => "event does not follow the command that produces it",
                Pending::Answer => "expected client_answered",
                Pending::Reply => "expected pharmacist_message",
                Pending::Solution => "expected solution_shown",
                Pending::Advance => "expected phase_advanced",
            }));
        }

        let scenario = scenarios.get(self.phase).clone();
        let mut next = self.clone();
        match &event.kind {
            EventKind::SessionStarted { .. } => return Err(invalid("duplicate session_started")),
            EventKind::ClientQuestionAsked { persona, topic } => {
                next.require_module(Module::ClientInquiry)?;
                let result = ask_client(&scenario, persona, topic)?;
                next.record_inquiry(&result);
                next.pending = Pending::Answer;
            }
            EventKind::ClientAnswered { .. } => next.pending = Pending::Nothing,
            EventKind::ModuleSwitched { from, to, initiator } => {
                if *from != next.active_module {
                    return Err(invalid(format!(
                        "switch from {from} but {} is active",
                        next.active_module
                    )));
                }
                next.check_switch(*to, &scenario)?;
                if *initiator == Initiator::System {
                    if *to != Module::Pedagogical || next.auto_switch_fired {
                        return Err(invalid("unexpected system-initiated switch"));
                    }
                    next.auto_switch_fired = true;
                }
                next.active_module = *to;
            }
            EventKind::StudentMessage { text } => {
                next.require_module(Module::Pedagogical)?;
                if text.trim().is_empty() {
                    return Err(invalid("empty student message"));
                }
                next.pharmacist.push_student_turn(text, event.timestamp, &scenario);
                next.pharmacist.sync_phase();
                next.pending = Pending::Reply;
            }
            EventKind::PharmacistMessage { text } => {
                next.pharmacist.push_pharmacist_turn(text, event.timestamp);
                next.pending = Pending::Nothing;
            }
            EventKind::ResourceOpened { resource } => {
                if scenario.resource(resource).is_none() {
                    return Err(SessionError::UnknownResource(resource.clone()));
                }
            }
            EventKind::DiagnosisSubmitted { form } => {
                next.require_module(Module::Diagnostic)?;
                if form.entries.is_empty() {
                    return Err(SessionError::EmptyDiagnosis);
                }
                next.pending = Pending::Solution;
            }
            EventKind::SolutionShown => next.pending = Pending::Advance,
            EventKind::PhaseAdvanced { to } => {
                if *to != next.phase.next() {
                    return Err(invalid(format!("phase {} cannot advance to {to:?}", next.phase)));
                }
                next.pending = Pending::Nothing;
                match to {
                    Some(p) => {
                        next.phase = *p;
                        next.active_module = Module::ClientInquiry;
                        next.coverage
                            .insert(*p, CoverageState::for_scenario(scenarios.get(*p)));
                    }
                    None => next.finished = true,
                }
            }
        }
        next.event_count += 1;
        next.last_timestamp = event.timestamp;
        *self = next;
        Ok(())
    }

    fn record_inquiry(&mut self, result: &InquiryResult) {
        let cov = self.coverage.remove(&self.phase).expect("current phase has coverage");
        let cov = cov.record_inquiry(result);
        if self.phase == Phase::A {
            self.pharmacist.observe_coverage(cov.clone());
        }
        self.coverage.insert(self.phase, cov);
    }

    /// The automatic hand-over to the mentor once data collection completes.
    fn wants_auto_switch(&self, scenario: &Scenario) -> bool {
        self.phase == Phase::A
            && !self.auto_switch_fired
            && self.active_module == Module::ClientInquiry
            && scenario.pedagogical_module_enabled
            && dc_complete(self.current_coverage())
    }
}

/// Progress snapshot for the interface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Progress {
    pub phase: Option<Phase>,
    pub finished: bool,
    pub active_module: Module,
    pub checklist_covered: Vec<String>,
    pub checklist_open: Vec<String>,
    pub interpersonal_covered: Vec<String>,
    pub mentioned_causes: Vec<String>,
    pub dialogue_phase: DialoguePhase,
    pub diagnosis_gate: GateDecision,
    pub pedagogical_available: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosisOutcome {
    pub solution: SolutionTable,
    pub next_phase: Option<Phase>,
}

pub struct Session {
    state: SessionState,
    events: Vec<SessionEvent>,
    scenarios: Arc<ScenarioSet>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("state", &self.state)
            .field("events", &self.events.len())
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn start(
        session_id: impl Into<String>,
        student_id: impl Into<String>,
        condition: Condition,
        scenarios: Arc<ScenarioSet>,
        clock: Arc<dyn Clock>,
    ) -> Result<Session, SessionError> {
        let event = SessionEvent {
            timestamp: clock.now(),
            kind: EventKind::SessionStarted {
                session_id: session_id.into(),
                student_id: student_id.into(),
                condition,
                scenarios: scenarios.iter().map(|(p, s)| (p, s.id.clone())).collect(),
            },
        };
        let state = SessionState::start(&event, &scenarios)?;
        Ok(Session {
            state,
            events: vec![event],
            scenarios,
            clock,
        })
    }

    /// Rebuilds a session from its log; new events continue on `clock`.
    pub fn replay(
        events: Vec<SessionEvent>,
        scenarios: Arc<ScenarioSet>,
        clock: Arc<dyn Clock>,
    ) -> Result<Session, ReplayError> {
        let state = SessionState::fold(&events, &scenarios)?;
        if !state.is_settled() {
            return Err(ReplayError::CorruptLog {
                position: events.len(),
                reason: "log ends in the middle of a command".into(),
            });
        }
        Ok(Session {
            state,
            events,
            scenarios,
            clock,
        })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn id(&self) -> &str {
        &self.state.session_id
    }

    pub fn scenarios(&self) -> &Arc<ScenarioSet> {
        &self.scenarios
    }

    /// Scenario of the current phase (of C2 once finished).
    pub fn scenario(&self) -> &Arc<Scenario> {
        self.scenarios.get(self.state.phase)
    }

    fn now(&self) -> Timestamp {
        Monotonic::new(self.clock.as_ref(), self.state.last_timestamp).now()
    }

    fn emit(&mut self, timestamp: Timestamp, kind: EventKind) -> Result<(), SessionError> {
        let event = SessionEvent { timestamp, kind };
        self.state.apply(&event, &self.scenarios)?;
        self.events.push(event);
        Ok(())
    }

    /// Applies a batch atomically: either all events are appended or none.
    fn emit_all(&mut self, batch: Vec<SessionEvent>) -> Result<(), SessionError> {
        let mut state = self.state.clone();
        for e in &batch {
            state.apply(e, &self.scenarios)?;
        }
        self.state = state;
        self.events.extend(batch);
        Ok(())
    }

    fn ensure_open(&self) -> Result<(), SessionError> {
        if self.state.finished {
            Err(SessionError::SessionFinished)
        } else {
            Ok(())
        }
    }

    pub fn ask(&mut self, persona: &str, topic: &str) -> Result<InquiryResult, SessionError> {
        self.ensure_open()?;
        self.state.require_module(Module::ClientInquiry)?;
        let scenario = self.scenario().clone();
        let result = ask_client(&scenario, persona, topic)?;
        let asked = SessionEvent {
            timestamp: self.now(),
            kind: EventKind::ClientQuestionAsked {
                persona: persona.to_string(),
                topic: topic.to_string(),
            },
        };
        let answered = SessionEvent {
            timestamp: Monotonic::new(self.clock.as_ref(), asked.timestamp).now(),
            kind: EventKind::ClientAnswered {
                text: result.answer_text.clone(),
            },
        };
        self.emit_all(vec![asked, answered])?;
        if self.state.wants_auto_switch(&scenario) {
            let at = self.now();
            self.emit(
                at,
                EventKind::ModuleSwitched {
                    from: Module::ClientInquiry,
                    to: Module::Pedagogical,
                    initiator: Initiator::System,
                },
            )?;
        }
        Ok(result)
    }

    pub fn switch_module(&mut self, to: Module, initiator: Initiator) -> Result<(), SessionError> {
        self.state.check_switch(to, self.scenario())?;
        let from = self.state.active_module;
        let at = self.now();
        self.emit(at, EventKind::ModuleSwitched { from, to, initiator })
    }

    /// Sends a student message to the mentor and records both turns.
    pub fn chat(
        &mut self,
        text: &str,
        agent: &PharmacistAgent,
        provider: &dyn LlmProvider,
    ) -> Result<String, SessionError> {
        self.ensure_open()?;
        self.state.require_module(Module::Pedagogical)?;
        let scenario = self.scenario().clone();
        let clock = Monotonic::new(self.clock.as_ref(), self.state.last_timestamp);
        let outcome = agent.step(&self.state.pharmacist, &scenario, text, provider, &clock)?;
        self.emit_all(vec![
            SessionEvent {
                timestamp: outcome.student_at,
                kind: EventKind::StudentMessage { text: text.to_string() },
            },
            SessionEvent {
                timestamp: outcome.reply_at,
                kind: EventKind::PharmacistMessage {
                    text: outcome.reply.clone(),
                },
            },
        ])?;
        debug_assert_eq!(self.state.pharmacist, outcome.state);
        Ok(outcome.reply)
    }

    pub fn open_resource(&mut self, id: &str) -> Result<Resource, SessionError> {
        self.ensure_open()?;
        let resource = self
            .scenario()
            .resource(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownResource(id.to_string()))?;
        let at = self.now();
        self.emit(at, EventKind::ResourceOpened { resource: id.to_string() })?;
        Ok(resource)
    }

    /// Records the diagnosis, reveals the solution and advances the phase.
    pub fn submit_diagnosis(&mut self, form: DiagnosisForm) -> Result<DiagnosisOutcome, SessionError> {
        self.ensure_open()?;
        self.state.require_module(Module::Diagnostic)?;
        if form.entries.is_empty() {
            return Err(SessionError::EmptyDiagnosis);
        }
        let solution = self.scenario().solution.clone();
        let next_phase = self.state.phase.next();
        let mut batch = Vec::with_capacity(3);
        let mut floor = self.state.last_timestamp;
        for kind in [
            EventKind::DiagnosisSubmitted { form },
            EventKind::SolutionShown,
            EventKind::PhaseAdvanced { to: next_phase },
        ] {
            floor = Monotonic::new(self.clock.as_ref(), floor).now();
            batch.push(SessionEvent { timestamp: floor, kind });
        }
        self.emit_all(batch)?;
        Ok(DiagnosisOutcome { solution, next_phase })
    }

    pub fn progress(&self) -> Progress {
        let s = &self.state;
        let scenario = self.scenario();
        let (covered, open) = s.current_coverage().split_labels(scenario);
        Progress {
            phase: (!s.finished).then_some(s.phase),
            finished: s.finished,
            active_module: s.active_module,
            checklist_covered: covered.into_iter().map(String::from).collect(),
            checklist_open: open.into_iter().map(String::from).collect(),
            interpersonal_covered: s.current_coverage().covered_interpersonal.iter().cloned().collect(),
            mentioned_causes: s.pharmacist.interpretation.mentioned_causes.iter().cloned().collect(),
            dialogue_phase: s.pharmacist.phase,
            diagnosis_gate: if s.phase == Phase::A && scenario.pedagogical_module_enabled {
                diagnostic_gate(&s.pharmacist.interpretation)
            } else {
                GateDecision::Allowed
            },
            pedagogical_available: !s.finished && s.phase == Phase::A && scenario.pedagogical_module_enabled,
        }
    }
}

/// Re-drives the commands recorded in a log against a fresh session whose
/// clock replays the recorded timestamps and whose mentor replies come from
/// `provider`. With the provider that produced the log, the result is
/// identical to the input.
pub fn regenerate(
    events: &[SessionEvent],
    scenarios: Arc<ScenarioSet>,
    agent: &PharmacistAgent,
    provider: &dyn LlmProvider,
) -> Result<Vec<SessionEvent>, ReplayError> {
    let clock: Arc<dyn Clock> = Arc::new(ScriptedClock::new(events.iter().map(|e| e.timestamp)));
    let diverged = |position: usize, reason: String| ReplayError::Diverged { position, reason };
    let Some(first) = events.first() else {
        return Ok(Vec::new());
    };
    let EventKind::SessionStarted {
        session_id,
        student_id,
        condition,
        ..
    } = &first.kind
    else {
        return Err(ReplayError::CorruptLog {
            position: 0,
            reason: "log must begin with session_started".into(),
        });
    };
    let mut session = Session::start(session_id.clone(), student_id.clone(), *condition, scenarios, clock)
        .map_err(|e| diverged(0, e.to_string()))?;
    for (i, e) in events.iter().enumerate().skip(1) {
        let r = match &e.kind {
            EventKind::ClientQuestionAsked { persona, topic } => session.ask(persona, topic).map(drop),
            EventKind::ModuleSwitched {
                to,
                initiator: Initiator::Student,
                ..
            } => session.switch_module(*to, Initiator::Student),
            EventKind::StudentMessage { text } => session.chat(text, agent, provider).map(drop),
            EventKind::ResourceOpened { resource } => session.open_resource(resource).map(drop),
            EventKind::DiagnosisSubmitted { form } => session.submit_diagnosis(form.clone()).map(drop),
            _ => Ok(()),
        };
        r.map_err(|err| diverged(i, err.to_string()))?;
    }
    Ok(session.events)
}
