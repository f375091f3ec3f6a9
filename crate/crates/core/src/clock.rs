//! Injectable time sources.

use std::collections::VecDeque;
use std::sync::Mutex;

use chrono::{DateTime, Duration, Utc};

pub type Timestamp = DateTime<Utc>;

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Utc::now()
    }
}

/// Starts at a fixed instant and advances by a fixed step on every read.
#[derive(Debug)]
pub struct SteppingClock {
    next: Mutex<Timestamp>,
    step: Duration,
}

impl SteppingClock {
    pub fn new(start: Timestamp, step: Duration) -> Self {
        SteppingClock {
            next: Mutex::new(start),
            step,
        }
    }

    /// Moves the clock forward without reading it.
    pub fn advance(&self, by: Duration) {
        *self.next.lock().unwrap() += by;
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> Timestamp {
        let mut next = self.next.lock().unwrap();
        let t = *next;
        *next += self.step;
        t
    }
}

/// Replays a recorded sequence of instants; once exhausted it keeps
/// returning the last one.
#[derive(Debug)]
pub struct ScriptedClock {
    queue: Mutex<VecDeque<Timestamp>>,
    last: Mutex<Option<Timestamp>>,
}

impl ScriptedClock {
    pub fn new(instants: impl IntoIterator<Item = Timestamp>) -> Self {
        ScriptedClock {
            queue: Mutex::new(instants.into_iter().collect()),
            last: Mutex::new(None),
        }
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }
}

impl Clock for ScriptedClock {
    fn now(&self) -> Timestamp {
        let mut last = self.last.lock().unwrap();
        let t = self
            .queue
            .lock()
            .unwrap()
            .pop_front()
            .or(*last)
            .unwrap_or(DateTime::UNIX_EPOCH);
        *last = Some(t);
        t
    }
}

/// Clamps another clock so readings never go below `floor`.
pub(crate) struct Monotonic<'a> {
    inner: &'a dyn Clock,
    floor: Mutex<Timestamp>,
}

impl<'a> Monotonic<'a> {
    pub(crate) fn new(inner: &'a dyn Clock, floor: Timestamp) -> Self {
        Monotonic {
            inner,
            floor: Mutex::new(floor),
        }
    }
}

impl Clock for Monotonic<'_> {
    fn now(&self) -> Timestamp {
        let mut floor = self.floor.lock().unwrap();
        let t = self.inner.now().max(*floor);
        *floor = t;
        t
    }
}
