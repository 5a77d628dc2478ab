//! Deterministic discrete-event queue.
//!
//! Events at equal timestamps are delivered in insertion order, so a run is
//! a pure function of the scenario and the seed.

use super::TimerKind;
use crate::mac::Frame;
use crate::NodeId;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Simulator event.
#[derive(Debug, Clone)]
pub enum Event {
    /// A node's transmitter switches on.
    TxBegin { node: NodeId, frame: Frame },
    /// A node's transmission leaves the air; deliveries are evaluated here.
    TxEnd { node: NodeId },
    /// A node-level timer expires.
    Timer { node: NodeId, kind: TimerKind },
    /// The next application packet of a traffic source is due.
    Traffic { node: NodeId },
    /// Periodic bookkeeping: stop-rule evaluation and schedule audits.
    Tick,
}

#[derive(Debug)]
struct Entry {
    at: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: the binary heap is a max-heap and we want the earliest
        // (time, insertion) pair first.
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Priority queue over [`Event`]s ordered by `(time, insertion order)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Entry>,
    seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, at: u64, event: Event) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(Entry { at, seq, event });
    }

    pub fn pop(&mut self) -> Option<(u64, Event)> {
        self.heap.pop().map(|e| (e.at, e.event))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_by_time_then_insertion() {
        let mut q = EventQueue::new();
        q.push(30, Event::Tick);
        q.push(
            10,
            Event::Timer {
                node: 1,
                kind: TimerKind::SlotStart { gen: 0 },
            },
        );
        q.push(10, Event::Traffic { node: 2 });
        q.push(20, Event::TxEnd { node: 3 });

        let (t, e) = q.pop().unwrap();
        assert_eq!(t, 10);
        assert!(matches!(e, Event::Timer { node: 1, .. }));
        let (t, e) = q.pop().unwrap();
        assert_eq!(t, 10);
        assert!(matches!(e, Event::Traffic { node: 2 }));
        let (t, _) = q.pop().unwrap();
        assert_eq!(t, 20);
        let (t, _) = q.pop().unwrap();
        assert_eq!(t, 30);
        assert!(q.is_empty());
    }
}
