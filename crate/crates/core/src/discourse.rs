//! Utterances, turns, discussions and the surface indicators computed from
//! a session's chat.

use serde::Serialize;
use thiserror::Error;

use crate::clock::Timestamp;
use crate::pharmacist::{ChatTurn, Speaker};
use crate::session::{EventKind, Initiator, Module, SessionEvent};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiscourseError {
    #[error("corrupt log at event {position}: {reason}")]
    CorruptLog { position: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
    pub index_in_turn: usize,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub utterances: Vec<Utterance>,
}

impl Turn {
    pub fn words(&self) -> usize {
        self.utterances.iter().map(|u| count_tokens(&u.text)).sum()
    }
}

/// Tokens are maximal non-whitespace runs with at least one alphanumeric.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .count()
}

/// Splits after `.`, `!` or `?` when followed by whitespace or the end of
/// the text. Fragments are trimmed; those without a token are dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = chars.peek().is_none_or(|(_, n)| n.is_whitespace());
            if at_boundary {
                let end = i + c.len_utf8();
                out.push(&text[start..end]);
                start = end;
            }
        }
    }
    out.push(&text[start..]);
    out.into_iter()
        .map(str::trim)
        .filter(|s| count_tokens(s) > 0)
        .map(String::from)
        .collect()
}

/// Splits messages into utterances and groups consecutive utterances of
/// one speaker into turns.
pub fn segment(messages: &[ChatTurn]) -> Vec<Turn> {
    let mut turns: Vec<Turn> = Vec::new();
    for m in messages {
        for text in split_sentences(&m.text) {
            match turns.last_mut() {
                Some(t) if t.speaker == m.speaker => {
                    let index_in_turn = t.utterances.len();
                    t.utterances.push(Utterance {
                        speaker: m.speaker,
                        text,
                        index_in_turn,
                        timestamp: m.timestamp,
                    });
                }
                _ => turns.push(Turn {
                    speaker: m.speaker,
                    utterances: vec![Utterance {
                        speaker: m.speaker,
                        text,
                        index_in_turn: 0,
                        timestamp: m.timestamp,
                    }],
                }),
            }
        }
    }
    turns
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discussion {
    pub start: Timestamp,
    pub end: Timestamp,
    pub opened_by: Initiator,
    pub messages: Vec<ChatTurn>,
    pub turns: Vec<Turn>,
    pub duration_s: f64,
}

impl Discussion {
    fn count(&self, speaker: Speaker, f: impl Fn(&Turn) -> usize) -> usize {
        self.turns.iter().filter(|t| t.speaker == speaker).map(f).sum()
    }

    pub fn utterances(&self, speaker: Speaker) -> usize {
        self.count(speaker, |t| t.utterances.len())
    }

    pub fn turns_by(&self, speaker: Speaker) -> usize {
        self.count(speaker, |_| 1)
    }

    pub fn words(&self, speaker: Speaker) -> usize {
        self.count(speaker, Turn::words)
    }
}

fn seconds(from: Timestamp, to: Timestamp) -> f64 {
    (to - from).to_std().map_or(0.0, |d| d.as_secs_f64())
}

fn check_order(events: &[SessionEvent]) -> Result<(), DiscourseError> {
    for (i, w) in events.windows(2).enumerate() {
        if w[1].timestamp < w[0].timestamp {
            return Err(DiscourseError::CorruptLog {
                position: i + 1,
                reason: "timestamp earlier than the previous event".into(),
            });
        }
    }
    Ok(())
}

/// One discussion per switch into the mentor module, closed by the next
/// switch out of it, a phase change, or the end of the log.
pub fn build_discussions(events: &[SessionEvent]) -> Result<Vec<Discussion>, DiscourseError> {
    check_order(events)?;
    let mut out = Vec::new();
    let mut open: Option<(Timestamp, Initiator, Vec<ChatTurn>)> = None;
    let close = |out: &mut Vec<Discussion>, (start, opened_by, messages): (Timestamp, Initiator, Vec<ChatTurn>), end| {
        let turns = segment(&messages);
        out.push(Discussion {
            start,
            end,
            opened_by,
            messages,
            turns,
            duration_s: seconds(start, end),
        });
    };
    for (position, e) in events.iter().enumerate() {
        match &e.kind {
            EventKind::ModuleSwitched { from, to, initiator } => {
                if *from == Module::Pedagogical {
                    if let Some(d) = open.take() {
                        close(&mut out, d, e.timestamp);
                    }
                }
                if *to == Module::Pedagogical {
                    open = Some((e.timestamp, *initiator, Vec::new()));
                }
            }
            EventKind::PhaseAdvanced { .. } => {
                if let Some(d) = open.take() {
                    close(&mut out, d, e.timestamp);
                }
            }
            EventKind::StudentMessage { text } | EventKind::PharmacistMessage { text } => {
                let speaker = if matches!(e.kind, EventKind::StudentMessage { .. }) {
                    Speaker::Student
                } else {
                    Speaker::Pharmacist
                };
                let Some((_, _, messages)) = open.as_mut() else {
                    return Err(DiscourseError::CorruptLog {
                        position,
                        reason: "chat message outside the pedagogical module".into(),
                    });
                };
                messages.push(ChatTurn {
                    speaker,
                    text: text.clone(),
                    timestamp: e.timestamp,
                });
            }
            _ => {}
        }
    }
    if let Some(d) = open.take() {
        let end = events.last().map(|e| e.timestamp).unwrap_or(d.0);
        close(&mut out, d, end);
    }
    Ok(out)
}

/// Per-minute rates over one scope; `None` when the span is under a second.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Density {
    pub span_s: f64,
    pub utterances_per_min: Option<f64>,
    pub student_utterances_per_min: Option<f64>,
    pub pharmacist_utterances_per_min: Option<f64>,
    pub turns_per_min: Option<f64>,
}

impl Density {
    fn new(span_s: f64, student_utt: usize, pharmacist_utt: usize, turns: usize) -> Self {
        let rate = |n: usize| (span_s >= 1.0).then(|| n as f64 / (span_s / 60.0));
        Density {
            span_s,
            utterances_per_min: rate(student_utt + pharmacist_utt),
            student_utterances_per_min: rate(student_utt),
            pharmacist_utterances_per_min: rate(pharmacist_utt),
            turns_per_min: rate(turns),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DiscussionMeans {
    pub duration_s: Option<f64>,
    pub student_utterances: Option<f64>,
    pub pharmacist_utterances: Option<f64>,
    pub student_words: Option<f64>,
    pub pharmacist_words: Option<f64>,
    pub student_turns: Option<f64>,
    pub pharmacist_turns: Option<f64>,
    pub turns: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Verbosity {
    pub student_words_per_turn: Option<f64>,
    pub pharmacist_words_per_turn: Option<f64>,
    pub student_words_per_utterance: Option<f64>,
    pub pharmacist_words_per_utterance: Option<f64>,
}

/// Student-to-pharmacist ratios.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Participation {
    pub utterance_ratio: Option<f64>,
    pub turn_ratio: Option<f64>,
    /// Means of the per-discussion ratios, over discussions where defined.
    pub mean_discussion_utterance_ratio: Option<f64>,
    pub mean_discussion_turn_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SurfaceIndicators {
    pub switches_to_pharmacist: usize,
    pub switches_to_client: usize,
    pub voluntary_ratio_c2p: Option<f64>,
    pub voluntary_ratio_p2c: Option<f64>,
    pub discussions: usize,
    pub student_utterances: usize,
    pub pharmacist_utterances: usize,
    pub student_turns: usize,
    pub pharmacist_turns: usize,
    pub student_words: usize,
    pub pharmacist_words: usize,
    pub per_discussion: DiscussionMeans,
    pub verbosity: Verbosity,
    pub participation: Participation,
    pub density_pharmacist_spans: Density,
    pub density_session: Density,
}

fn div(a: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| a / b)
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    div(sum, n as f64)
}

pub fn compute_indicators(events: &[SessionEvent]) -> Result<SurfaceIndicators, DiscourseError> {
    let discussions = build_discussions(events)?;
    Ok(indicators_from(events, &discussions))
}

/// Indicators for a log whose discussions are already built.
pub fn indicators_from(events: &[SessionEvent], discussions: &[Discussion]) -> SurfaceIndicators {
    let (mut c2p, mut c2p_vol, mut p2c, mut p2c_vol, mut to_ped, mut to_client) = (0, 0, 0, 0, 0, 0);
    for e in events {
        if let EventKind::ModuleSwitched { from, to, initiator } = e.kind {
            let voluntary = usize::from(initiator == Initiator::Student);
            if to == Module::Pedagogical {
                to_ped += 1;
            }
            if to == Module::ClientInquiry {
                to_client += 1;
            }
            match (from, to) {
                (Module::ClientInquiry, Module::Pedagogical) => {
                    c2p += 1;
                    c2p_vol += voluntary;
                }
                (Module::Pedagogical, Module::ClientInquiry) => {
                    p2c += 1;
                    p2c_vol += voluntary;
                }
                _ => {}
            }
        }
    }

    let sum = |f: &dyn Fn(&Discussion) -> usize| discussions.iter().map(f).sum::<usize>();
    let su = sum(&|d| d.utterances(Speaker::Student));
    let pu = sum(&|d| d.utterances(Speaker::Pharmacist));
    let st = sum(&|d| d.turns_by(Speaker::Student));
    let pt = sum(&|d| d.turns_by(Speaker::Pharmacist));
    let sw = sum(&|d| d.words(Speaker::Student));
    let pw = sum(&|d| d.words(Speaker::Pharmacist));

    let per = |f: &dyn Fn(&Discussion) -> f64| mean(discussions.iter().map(f));
    let per_discussion = DiscussionMeans {
        duration_s: per(&|d| d.duration_s),
        student_utterances: per(&|d| d.utterances(Speaker::Student) as f64),
        pharmacist_utterances: per(&|d| d.utterances(Speaker::Pharmacist) as f64),
        student_words: per(&|d| d.words(Speaker::Student) as f64),
        pharmacist_words: per(&|d| d.words(Speaker::Pharmacist) as f64),
        student_turns: per(&|d| d.turns_by(Speaker::Student) as f64),
        pharmacist_turns: per(&|d| d.turns_by(Speaker::Pharmacist) as f64),
        turns: per(&|d| d.turns.len() as f64),
    };

    let span_session = match (events.first(), events.last()) {
        (Some(a), Some(b)) => seconds(a.timestamp, b.timestamp),
        _ => 0.0,
    };
    let span_ped: f64 = discussions.iter().map(|d| d.duration_s).sum();

    SurfaceIndicators {
        switches_to_pharmacist: to_ped,
        switches_to_client: to_client,
        voluntary_ratio_c2p: div(c2p_vol as f64, c2p as f64),
        voluntary_ratio_p2c: div(p2c_vol as f64, p2c as f64),
        discussions: discussions.len(),
        student_utterances: su,
        pharmacist_utterances: pu,
        student_turns: st,
        pharmacist_turns: pt,
        student_words: sw,
        pharmacist_words: pw,
        per_discussion,
        verbosity: Verbosity {
            student_words_per_turn: div(sw as f64, st as f64),
            pharmacist_words_per_turn: div(pw as f64, pt as f64),
            student_words_per_utterance: div(sw as f64, su as f64),
            pharmacist_words_per_utterance: div(pw as f64, pu as f64),
        },
        participation: Participation {
            utterance_ratio: div(su as f64, pu as f64),
            turn_ratio: div(st as f64, pt as f64),
            mean_discussion_utterance_ratio: mean(discussions.iter().filter_map(|d| {
                div(d.utterances(Speaker::Student) as f64, d.utterances(Speaker::Pharmacist) as f64)
            })),
            mean_discussion_turn_ratio: mean(discussions.iter().filter_map(|d| {
                div(d.turns_by(Speaker::Student) as f64, d.turns_by(Speaker::Pharmacist) as f64)
            })),
        },
        density_pharmacist_spans: Density::new(span_ped, su, pu, st + pt),
        density_session: Density::new(span_session, su, pu, st + pt),
    }
}

impl SurfaceIndicators {
    /// Flat `(name, value)` view used for tabular export.
    pub fn named_values(&self) -> Vec<(&'static str, Option<f64>)> {
        let n = |v: usize| Some(v as f64);
        let d = &self.per_discussion;
        let v = &self.verbosity;
        let p = &self.participation;
        let (dp, ds) = (&self.density_pharmacist_spans, &self.density_session);
        vec![
            ("switches_to_pharmacist", n(self.switches_to_pharmacist)),
            ("switches_to_client", n(self.switches_to_client)),
            ("voluntary_ratio_c2p", self.voluntary_ratio_c2p),
            ("voluntary_ratio_p2c", self.voluntary_ratio_p2c),
            ("discussions", n(self.discussions)),
            ("student_utterances", n(self.student_utterances)),
            ("pharmacist_utterances", n(self.pharmacist_utterances)),
            ("student_turns", n(self.student_turns)),
            ("pharmacist_turns", n(self.pharmacist_turns)),
            ("student_words", n(self.student_words)),
            ("pharmacist_words", n(self.pharmacist_words)),
            ("mean_discussion_duration_s", d.duration_s),
            ("mean_discussion_student_utterances", d.student_utterances),
            ("mean_discussion_pharmacist_utterances", d.pharmacist_utterances),
            ("mean_discussion_student_words", d.student_words),
            ("mean_discussion_pharmacist_words", d.pharmacist_words),
            ("mean_discussion_student_turns", d.student_turns),
            ("mean_discussion_pharmacist_turns", d.pharmacist_turns),
            ("mean_discussion_turns", d.turns),
            ("student_words_per_turn", v.student_words_per_turn),
            ("pharmacist_words_per_turn", v.pharmacist_words_per_turn),
            ("student_words_per_utterance", v.student_words_per_utterance),
            ("pharmacist_words_per_utterance", v.pharmacist_words_per_utterance),
            ("utterance_ratio", p.utterance_ratio),
            ("turn_ratio", p.turn_ratio),
            ("mean_discussion_utterance_ratio", p.mean_discussion_utterance_ratio),
            ("mean_discussion_turn_ratio", p.mean_discussion_turn_ratio),
            ("pharmacist_span_s", Some(dp.span_s)),
            ("pharmacist_span_utterances_per_min", dp.utterances_per_min),
            ("pharmacist_span_student_utterances_per_min", dp.student_utterances_per_min),
            ("pharmacist_span_pharmacist_utterances_per_min", dp.pharmacist_utterances_per_min),
            ("pharmacist_span_turns_per_min", dp.turns_per_min),
            ("session_span_s", Some(ds.span_s)),
            ("session_utterances_per_min", ds.utterances_per_min),
            ("session_student_utterances_per_min", ds.student_utterances_per_min),
            ("session_pharmacist_utterances_per_min", ds.pharmacist_utterances_per_min),
            ("session_turns_per_min", ds.turns_per_min),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorRow {
    pub student_id: String,
    pub scope: String,
    pub indicator: String,
    /// Empty when undefined.
    pub value: Option<f64>,
}

/// Session-scope rows followed by per-discussion rows.
pub fn indicator_rows(student_id: &str, ind: &SurfaceIndicators, discussions: &[Discussion]) -> Vec<IndicatorRow> {
    let row = |scope: &str, name: &str, value| IndicatorRow {
        student_id: student_id.to_string(),
        scope: scope.to_string(),
        indicator: name.to_string(),
        value,
    };
    let mut rows: Vec<IndicatorRow> = ind
        .named_values()
        .into_iter()
        .map(|(name, v)| row("session", name, v))
        .collect();
    for (i, d) in discussions.iter().enumerate() {
        let scope = format!("discussion_{}", i + 1);
        let n = |v: usize| Some(v as f64);
        let density = Density::new(
            d.duration_s,
            d.utterances(Speaker::Student),
            d.utterances(Speaker::Pharmacist),
            d.turns.len(),
        );
        for (name, v) in [
            ("duration_s", Some(d.duration_s)),
            ("student_utterances", n(d.utterances(Speaker::Student))),
            ("pharmacist_utterances", n(d.utterances(Speaker::Pharmacist))),
            ("student_turns", n(d.turns_by(Speaker::Student))),
            ("pharmacist_turns", n(d.turns_by(Speaker::Pharmacist))),
            ("student_words", n(d.words(Speaker::Student))),
            ("pharmacist_words", n(d.words(Speaker::Pharmacist))),
            (
                "utterance_ratio",
                div(d.utterances(Speaker::Student) as f64, d.utterances(Speaker::Pharmacist) as f64),
            ),
            (
                "turn_ratio",
                div(d.turns_by(Speaker::Student) as f64, d.turns_by(Speaker::Pharmacist) as f64),
            ),
            ("utterances_per_min", density.utterances_per_min),
            ("turns_per_min", density.turns_per_min),
        ] {
            rows.push(row(&scope, name, v));
        }
    }
    rows
}

/// One chat utterance addressed for annotation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtteranceRecord {
    pub transcript_id: String,
    pub utterance_id: String,
    pub discussion: usize,
    pub turn: usize,
    pub speaker: Speaker,
    pub timestamp: Timestamp,
    pub text: String,
}

pub fn utterance_id(ordinal: usize) -> String {
    format!("u{ordinal:04}")
}

/// Every utterance of a transcript, numbered from `u0001` in order.
pub fn utterance_records(transcript_id: &str, discussions: &[Discussion]) -> Vec<UtteranceRecord> {
    let mut out = Vec::new();
    let mut turn_no = 0;
    for (di, d) in discussions.iter().enumerate() {
        for t in &d.turns {
            turn_no += 1;
            for u in &t.utterances {
                out.push(UtteranceRecord {
                    transcript_id: transcript_id.to_string(),
                    utterance_id: utterance_id(out.len() + 1),
                    discussion: di + 1,
                    turn: turn_no,
                    speaker: u.speaker,
                    timestamp: u.timestamp,
                    text: u.text.clone(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Duration;

    fn t0() -> Timestamp {
        "2026-03-02T08:00:00Z".parse().unwrap()
    }

    fn msg(speaker: Speaker, text: &str, s: i64) -> ChatTurn {
        ChatTurn {
            speaker,
            text: text.into(),
            timestamp: t0() + Duration::seconds(s),
        }
    }

    fn ev(s: i64, kind: EventKind) -> SessionEvent {
        SessionEvent {
            timestamp: t0() + Duration::seconds(s),
            kind,
        }
    }

    fn switch(s: i64, from: Module, to: Module, initiator: Initiator) -> SessionEvent {
        ev(s, EventKind::ModuleSwitched { from, to, initiator })
    }

    #[test]
    fn sentences() {
        assert_eq!(split_sentences("Hello. How old is the baby?"), vec!["Hello.", "How old is the baby?"]);
        assert!(split_sentences("...").is_empty());
        assert_eq!(split_sentences("Dose is 2.5 ml. Ok!"), vec!["Dose is 2.5 ml.", "Ok!"]);
        assert_eq!(split_sentences("Really?! Yes"), vec!["Really?!", "Yes"]);
        assert_eq!(split_sentences("Hi. . there"), vec!["Hi.", "there"]);
        assert_eq!(count_tokens("Well - it's 2 days ... ok"), 5);
    }

    #[test]
    fn turns_follow_speaker_runs() {
        let turns = segment(&[msg(Speaker::Student, "Hello. How old is the baby?", 0)]);
        assert_eq!(turns.len(), 1);
        assert_eq!(turns[0].utterances.len(), 2);
        assert_eq!(turns[0].utterances[1].index_in_turn, 1);

        let turns = segment(&[
            msg(Speaker::Student, "One.", 0),
            msg(Speaker::Student, "Two.", 1),
            msg(Speaker::Pharmacist, "Three.", 2),
        ]);
        assert_eq!(turns.len(), 2);
        assert_eq!(turns[0].utterances.len(), 2);

        assert!(segment(&[msg(Speaker::Student, "...", 0)]).is_empty());
    }

    #[test]
    fn discussions_and_ratios() {
        use Module::*;
        let events = vec![
            switch(0, ClientInquiry, Pedagogical, Initiator::System),
            ev(10, EventKind::StudentMessage { text: "Is it the diet?".into() }),
            ev(20, EventKind::PharmacistMessage { text: "Good. Why?".into() }),
            switch(60, Pedagogical, ClientInquiry, Initiator::Student),
            switch(70, ClientInquiry, Pedagogical, Initiator::Student),
            switch(100, Pedagogical, ClientInquiry, Initiator::Student),
            switch(110, ClientInquiry, Pedagogical, Initiator::Student),
            switch(130, Pedagogical, Diagnostic, Initiator::Student),
            switch(140, Diagnostic, Pedagogical, Initiator::Student),
            ev(180, EventKind::PhaseAdvanced { to: Some(crate::scenario::Phase::B) }),
        ];
        let ds = build_discussions(&events).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds[0].duration_s, 60.0);
        assert_eq!(ds[3].duration_s, 40.0);
        let ind = compute_indicators(&events).unwrap();
        assert_eq!(ind.switches_to_pharmacist, 4);
        assert_eq!(ind.voluntary_ratio_c2p, Some(2.0 / 3.0));
        assert_eq!(ind.voluntary_ratio_p2c, Some(1.0));
        assert_eq!(ind.pharmacist_utterances, 2);
        assert_eq!(ind.participation.utterance_ratio, Some(0.5));
        assert_eq!(ind.density_pharmacist_spans.span_s, 150.0);
        assert_eq!(ind.density_session.span_s, 180.0);
        assert_eq!(ind.density_session.utterances_per_min, Some(1.0));
    }

    #[test]
    fn open_discussion_closes_at_log_end() {
        let events = vec![
            switch(0, Module::ClientInquiry, Module::Pedagogical, Initiator::Student),
            ev(30, EventKind::StudentMessage { text: "Hi".into() }),
        ];
        let ds = build_discussions(&events).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].duration_s, 30.0);
        assert!(build_discussions(&[]).unwrap().is_empty());
    }

    #[test]
    fn density_example() {
        let mut events = vec![switch(0, Module::ClientInquiry, Module::Pedagogical, Initiator::Student)];
        for i in 0..12 {
            events.push(ev(i * 10, EventKind::StudentMessage { text: "Ok".into() }));
            events.push(ev(i * 10 + 5, EventKind::PharmacistMessage { text: "Fine.".into() }));
        }
        events.push(switch(360, Module::Pedagogical, Module::ClientInquiry, Initiator::Student));
        let ind = compute_indicators(&events).unwrap();
        assert_eq!(ind.density_pharmacist_spans.pharmacist_utterances_per_min, Some(2.0));
    }

    #[test]
    fn short_spans_are_undefined() {
        let events = vec![
            switch(0, Module::ClientInquiry, Module::Pedagogical, Initiator::Student),
            ev(0, EventKind::StudentMessage { text: "Hi".into() }),
        ];
        let ind = compute_indicators(&events).unwrap();
        assert_eq!(ind.density_session.utterances_per_min, None);
        assert_eq!(ind.per_discussion.duration_s, Some(0.0));
    }

    #[test]
    fn chat_outside_discussion_is_corrupt() {
        let events = vec![ev(0, EventKind::StudentMessage { text: "Hi".into() })];
        assert!(matches!(
            build_discussions(&events),
            Err(DiscourseError::CorruptLog { position: 0, .. })
        ));
        let events = vec![ev(5, EventKind::SolutionShown), ev(4, EventKind::SolutionShown)];
        assert!(build_discussions(&events).is_err());
    }

    #[test]
    fn utterance_ids_are_sequential() {
        let events = vec![
            switch(0, Module::ClientInquiry, Module::Pedagogical, Initiator::Student),
            ev(1, EventKind::StudentMessage { text: "A. B.".into() }),
            ev(2, EventKind::PharmacistMessage { text: "C?".into() }),
        ];
        let recs = utterance_records("s1", &build_discussions(&events).unwrap());
        let ids: Vec<_> = recs.iter().map(|r| (r.utterance_id.as_str(), r.turn)).collect();
        assert_eq!(ids, vec![("u0001", 1), ("u0002", 1), ("u0003", 2)]);
    }
}
