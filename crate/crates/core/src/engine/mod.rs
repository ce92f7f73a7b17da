//! Deterministic discrete-event kernel and seeded random streams.
//!
//! Events are dispatched in `(time, sequence)` order, where `sequence` is
//! the insertion counter. A run is single-threaded; independent runs can
//! execute in parallel.

mod rng;

pub use rng::{Purpose, RngStream, SamplerError, StreamKey};

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    PacketGenerated,
    UplinkDone,
    ServiceStart,
    ServiceDone,
    DownlinkDone,
    MobilityUpdate,
    SimEnd,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone)]
pub struct Event<P> {
    pub time: f64,
    pub sequence: u64,
    pub kind: EventKind,
    pub payload: P,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("cannot schedule {kind} at t={time} s: clock is already at {clock} s")]
    PastEvent {
        kind: EventKind,
        time: f64,
        clock: f64,
    },
    #[error("event time must be finite, got {time} for {kind}")]
    NonFiniteTime { kind: EventKind, time: f64 },
    #[error("horizon {t_end} s lies before the clock ({clock} s)")]
    HorizonInPast { t_end: f64, clock: f64 },
    #[error("handler failed on {kind} at t={time} s: {source}")]
    Handler {
        kind: EventKind,
        time: f64,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

/// Reacts to dispatched events and may schedule follow-ups.
pub trait Handler<P> {
    fn handle(
        &mut self,
        event: Event<P>,
        scheduler: &mut Scheduler<P>,
    ) -> Result<(), Box<dyn std::error::Error + Send + Sync>>;
}

struct Entry<P>(Event<P>);

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<P> Eq for Entry<P> {}

impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Entry<P> {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .time
            .total_cmp(&self.0.time)
            .then_with(|| other.0.sequence.cmp(&self.0.sequence))
    }
}

pub struct Scheduler<P> {
    clock: f64,
    next_sequence: u64,
    queue: BinaryHeap<Entry<P>>,
    dispatched: u64,
    digest: u64,
}

impl<P> Default for Scheduler<P> {
    fn default() -> Self {
        Self::new()
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

impl<P> Scheduler<P> {
    pub fn new() -> Self {
        Self {
            clock: 0.0,
            next_sequence: 0,
            queue: BinaryHeap::new(),
            dispatched: 0,
            digest: FNV_OFFSET,
        }
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn schedule(&mut self, time: f64, kind: EventKind, payload: P) -> Result<u64, EngineError> {
        if !time.is_finite() {
            return Err(EngineError::NonFiniteTime { kind, time });
        }
        if time < self.clock {
            return Err(EngineError::PastEvent {
                kind,
                time,
                clock: self.clock,
            });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(Entry(Event {
            time,
            sequence,
            kind,
            payload,
        }));
        Ok(sequence)
    }

    /// Dispatches every event with `time <= t_end`, then sets the clock to
    /// `t_end`. Returns the number of events dispatched by this call.
    pub fn run_until<H: Handler<P>>(
        &mut self,
        t_end: f64,
        handler: &mut H,
    ) -> Result<u64, EngineError> {
        if t_end < self.clock || t_end.is_nan() {
            return Err(EngineError::HorizonInPast {
                t_end,
                clock: self.clock,
            });
        }
        let mut count = 0;
        while self.queue.peek().is_some_and(|e| e.0.time <= t_end) {
            let Entry(event) = self.queue.pop().expect("peeked");
            self.clock = event.time;
            self.dispatched += 1;
            self.fold_digest(&event);
            count += 1;
            let (kind, time) = (event.kind, event.time);
            handler
                .handle(event, self)
                .map_err(|source| EngineError::Handler { kind, time, source })?;
        }
        self.clock = t_end;
        Ok(count)
    }

    /// Total events ever scheduled.
    pub fn scheduled(&self) -> u64 {
        self.next_sequence
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Events still waiting (beyond the last horizon).
    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Iterates over waiting events in no particular order.
    pub fn pending_events(&self) -> impl Iterator<Item = &Event<P>> {
        self.queue.iter().map(|e| &e.0)
    }

    /// FNV-1a digest over `(time, sequence, kind)` of every dispatched event.
    pub fn digest(&self) -> u64 {
        self.digest
    }

    fn fold_digest(&mut self, event: &Event<P>) {
        let mut h = self.digest;
        let bytes = event
            .time
            .to_bits()
            .to_le_bytes()
            .into_iter()
            .chain(event.sequence.to_le_bytes())
            .chain([event.kind as u8]);
        for b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        self.digest = h;
    }
}
