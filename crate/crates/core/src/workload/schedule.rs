use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{SpatioTextualObject, StreamElement, StsQuery};

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSchedule {
    /// Objects per query operation.
    pub ratio: f64,
    /// Mean query lifetime, counted in later query insertions.
    pub mu: f64,
    pub seed: u64,
}

impl Default for StreamSchedule {
    fn default() -> Self {
        StreamSchedule { ratio: 5.0, mu: 1000.0, seed: 0 }
    }
}

/// Interleaves objects with query insertions and deletions.
///
/// Each insertion draws a lifetime `max(1, round(N(mu, (0.2 mu)^2)))`; its
/// deletion is emitted right after that many further insertions, and any
/// still pending at the end are flushed. An accumulator emits `ratio`
/// objects per query operation; surplus objects are left unused.
pub fn schedule_stream(
    objects: &[SpatioTextualObject],
    queries: &[StsQuery],
    sched: &StreamSchedule,
) -> Result<Vec<StreamElement>> {
    if !(sched.ratio > 0.0) || !(sched.mu > 0.0) {
        return Err(Error::invalid("ratio and mu must be positive"));
    }
    let life = Normal::new(sched.mu, 0.2 * sched.mu).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(sched.seed);

    let mut ops: Vec<StreamElement> = Vec::with_capacity(queries.len() * 2);
    let mut due: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    for (i, q) in queries.iter().enumerate() {
        let n = i as u64 + 1;
        ops.push(StreamElement::Insert(q.clone()));
        let l = life.sample(&mut rng).round().max(1.0) as u64;
        due.push(Reverse((n + l, i)));
        while let Some(Reverse((d, j))) = due.peek().copied() {
            if d > n {
                break;
            }
            due.pop();
            ops.push(StreamElement::Delete(queries[j].clone()));
        }
    }
    while let Some(Reverse((_, j))) = due.pop() {
        ops.push(StreamElement::Delete(queries[j].clone()));
    }

    let mut out = Vec::with_capacity(ops.len() + (ops.len() as f64 * sched.ratio) as usize);
    let mut objs = objects.iter();
    let mut acc = 0.0;
    for op in ops {
        acc += sched.ratio;
        while acc >= 1.0 {
            let Some(o) = objs.next() else { break };
            out.push(StreamElement::Object(o.clone()));
            acc -= 1.0;
        }
        out.push(op);
    }
    for (ts, e) in out.iter_mut().enumerate() {
        if let StreamElement::Object(o) = e {
            o.timestamp = ts as u64;
        }
    }
    Ok(out)
}

/// Live query count after every query operation.
pub fn live_counts(trace: &[StreamElement]) -> Vec<i64> {
    let mut live = 0i64;
    let mut out = Vec::new();
    for e in trace {
        match e {
            StreamElement::Insert(_) => live += 1,
            StreamElement::Delete(_) => live -= 1,
            StreamElement::Object(_) => continue,
        }
        out.push(live);
    }
    out
}
