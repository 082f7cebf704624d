//! Discrete-event scheduler driven by an integer-millisecond virtual clock.
//!
//! Events fire in `(time, seq)` order, where `seq` is handed out at scheduling
//! time. An event scheduled by a handler for the current instant therefore runs
//! after everything already queued for that instant.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use thiserror::Error;

/// Virtual time in milliseconds.
pub type Millis = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn seq(&self) -> u64 {
        self.0
    }
}

/// An event that has fired.
#[derive(Debug, Clone, PartialEq)]
pub struct Fired<P> {
    pub time: Millis,
    pub seq: u64,
    pub payload: P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("cannot schedule at {at} ms: clock is already at {now} ms")]
pub struct ScheduleInPast {
    pub at: Millis,
    pub now: Millis,
}

#[derive(Debug)]
struct Entry<P> {
    time: Millis,
    seq: u64,
    payload: P,
}

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl<P> Eq for Entry<P> {}

impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Entry<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

#[derive(Debug)]
pub struct Engine<P> {
    now: Millis,
    next_seq: u64,
    queue: BinaryHeap<Reverse<Entry<P>>>,
    cancelled: HashSet<u64>,
}

impl<P> Default for Engine<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Engine<P> {
    pub fn new() -> Self {
        Self {
            now: 0,
            next_seq: 0,
            queue: BinaryHeap::new(),
            cancelled: HashSet::new(),
        }
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    /// Number of scheduled events that have neither fired nor been cancelled.
    pub fn pending(&self) -> usize {
        self.queue.len() - self.cancelled.len()
    }

    pub fn is_idle(&self) -> bool {
        self.pending() == 0
    }

    pub fn schedule(&mut self, payload: P, at: Millis) -> Result<EventHandle, ScheduleInPast> {
        if at < self.now {
            return Err(ScheduleInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Entry {
            time: at,
            seq,
            payload,
        }));
        Ok(EventHandle(seq))
    }

    pub fn schedule_in(&mut self, payload: P, delay: Millis) -> EventHandle {
        let at = self.now + delay;
        self.schedule(payload, at)
            .expect("relative schedule is never in the past")
    }

    /// Returns `true` iff the event had not fired yet. A cancelled event never
    /// fires. Linear in the number of queued events.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        let live = self.queue.iter().any(|Reverse(e)| e.seq == handle.0);
        live && self.cancelled.insert(handle.0)
    }

    fn discard_cancelled(&mut self) {
        while let Some(Reverse(e)) = self.queue.peek() {
            if !self.cancelled.remove(&e.seq) {
                break;
            }
            self.queue.pop();
        }
    }

    /// Time of the next live event, if any.
    pub fn peek_time(&mut self) -> Option<Millis> {
        self.discard_cancelled();
        self.queue.peek().map(|Reverse(e)| e.time)
    }

    /// Fires the next event if it is due at or before `t_end`, advancing the clock to it.
    pub fn pop_until(&mut self, t_end: Millis) -> Option<Fired<P>> {
        if self.peek_time()? > t_end {
            return None;
        }
        let Reverse(Entry { time, seq, payload }) = self.queue.pop().expect("peeked");
        self.now = time;
        Some(Fired { time, seq, payload })
    }

    /// Fires every event due at or before `t_end` and leaves the clock at
    /// `t_end`. Returns the fired events in firing order. A `t_end` in the past
    /// fires nothing and leaves the clock alone.
    pub fn run_until(&mut self, t_end: Millis) -> Vec<Fired<P>> {
        let mut fired = Vec::new();
        self.run_until_with(t_end, |_, ev| fired.push(ev));
        fired
    }

    /// Like [`Engine::run_until`], handing each event to `handler`, which may
    /// schedule or cancel further events.
    pub fn run_until_with(&mut self, t_end: Millis, mut handler: impl FnMut(&mut Self, Fired<P>)) {
        if t_end < self.now {
            return;
        }
        while let Some(ev) = self.pop_until(t_end) {
            handler(self, ev);
        }
        self.now = t_end;
    }
}
