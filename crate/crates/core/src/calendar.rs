//! Event calendar with a strict total order on `(time, kind, insertion)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Event classes. At equal timestamps abandonment is processed before service
/// completion, which is processed before an arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Abandonment = 0,
    Completion = 1,
    Arrival = 2,
}

/// Sort key of an event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventKey {
    pub time: f64,
    pub kind: EventKind,
}

impl EventKey {
    pub fn new(time: f64, kind: EventKind) -> Self {
        EventKey { time, kind }
    }

    /// `true` if `self` is processed strictly before `other`.
    pub fn precedes(&self, other: &EventKey) -> bool {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            == Ordering::Less
    }
}

struct Entry<P> {
    key: EventKey,
    seq: u64,
    payload: P,
}

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
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .time
            .total_cmp(&self.key.time)
            .then(other.key.kind.cmp(&self.key.kind))
            .then(other.seq.cmp(&self.seq))
    }
}

pub struct Calendar<P> {
    heap: BinaryHeap<Entry<P>>,
    seq: u64,
}

impl<P> Default for Calendar<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Calendar<P> {
    pub fn new() -> Self {
        Calendar {
            heap: BinaryHeap::new(),
            seq: 0,
        }
    }

    pub fn schedule(&mut self, time: f64, kind: EventKind, payload: P) {
        debug_assert!(!time.is_nan(), "NaN event time");
        self.heap.push(Entry {
            key: EventKey { time, kind },
            seq: self.seq,
            payload,
        });
        self.seq += 1;
    }

    pub fn peek(&self) -> Option<EventKey> {
        self.heap.peek().map(|e| e.key)
    }

    pub fn pop(&mut self) -> Option<(EventKey, P)> {
        self.heap.pop().map(|e| (e.key, e.payload))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
