use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::Cycle;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Interrupt(u8),
    /// Deferred second half of the handler for a vector.
    IsrTail(u8),
    /// Background workload `id` runs one tick.
    WorkloadTick(u16),
    AttackerStep,
}

impl EventKind {
    /// Tiebreak among equal timestamps: interrupts first, attacker last.
    fn rank(self) -> u8 {
        match self {
            EventKind::Interrupt(_) | EventKind::IsrTail(_) => 0,
            EventKind::WorkloadTick(_) => 1,
            EventKind::AttackerStep => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub time: Cycle,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Queued {
    time: Cycle,
    rank: u8,
    seq: u64,
    kind: EventKind,
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.rank, self.seq).cmp(&(other.time, other.rank, other.seq))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Time-ordered event queue, FIFO among events of equal time and kind.
#[derive(Debug, Clone, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Queued>>,
    seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: Cycle, kind: EventKind) {
        let q = Queued { time, rank: kind.rank(), seq: self.seq, kind };
        self.seq += 1;
        self.heap.push(Reverse(q));
    }

    pub fn push_interrupts(&mut self, vector: u8, times: impl IntoIterator<Item = Cycle>) {
        for t in times {
            self.push(t, EventKind::Interrupt(vector));
        }
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(q)| Event { time: q.time, kind: q.kind })
    }

    pub fn peek_time(&self) -> Option<Cycle> {
        self.heap.peek().map(|Reverse(q)| q.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
