use std::collections::VecDeque;
use std::sync::Arc;

use crate::dispatch::{CellId, H2Delta};
use crate::model::{MatchResult, QueryId, SpatioTextualObject, StsQuery, TermId};

/// Everything that travels between dispatchers, workers and the merger.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Object { epoch: u32, object: Arc<SpatioTextualObject>, cell: CellId, live_terms: Arc<[TermId]> },
    QueryInsert { epoch: u32, query: Arc<StsQuery>, postings: Vec<(CellId, TermId)> },
    QueryDelete { epoch: u32, id: QueryId, query: Arc<StsQuery>, postings: Vec<(CellId, TermId)> },
    Match(MatchResult),
    H2Delta { epoch: u32, delta: Arc<H2Delta> },
    /// Export the listed cells, or only `terms` of a single cell when given.
    MigratePrepare { epoch: u32, cells: Vec<CellId>, terms: Option<Vec<TermId>> },
    MigratePayload { epoch: u32, bytes: Arc<[u8]> },
    MigrateCommit { epoch: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub seq: u64,
    /// Stream position of the tuple that caused the message.
    pub tuple: u64,
    /// Simulated time the message becomes deliverable.
    pub ready: f64,
    pub msg: Message,
}

/// FIFO channel with per-channel sequence numbers.
#[derive(Debug, Clone, Default)]
pub struct Channel {
    next: u64,
    queue: VecDeque<Envelope>,
}

impl Channel {
    pub fn send(&mut self, tuple: u64, ready: f64, msg: Message) {
        self.queue.push_back(Envelope { seq: self.next, tuple, ready, msg });
        self.next += 1;
    }

    pub fn recv(&mut self) -> Option<Envelope> {
        self.queue.pop_front()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Messages sent so far.
    pub fn sent(&self) -> u64 {
        self.next
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_is_fifo_with_sequence_numbers() {
        let mut c = Channel::default();
        for i in 0..3 {
            c.send(i, i as f64, Message::MigrateCommit { epoch: 0 });
        }
        let got: Vec<(u64, u64)> = std::iter::from_fn(|| c.recv()).map(|e| (e.seq, e.tuple)).collect();
        assert_eq!(got, vec![(0, 0), (1, 1), (2, 2)]);
        assert!(c.is_empty());
        assert_eq!(c.sent(), 3);
    }
}
