//! Synthetic workloads: objects, query profiles and stream scheduling.

mod objects;
mod queries;
mod schedule;

pub use objects::{synthesize_objects, term_name, ObjectGen};
pub use queries::{synthesize_queries, KeywordSampler, ProfileKind, QueryGen, QueryProfile, RegionLayout};
pub use schedule::{live_counts, schedule_stream, StreamSchedule};

use crate::model::{SpatioTextualObject, TermStats};

/// Term frequencies over an object corpus.
pub fn corpus_stats(objects: &[SpatioTextualObject]) -> TermStats {
    let mut s = TermStats::new();
    for o in objects {
        s.observe(&o.terms);
    }
    s
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Rect, StreamElement, TermDict};

/// Everything needed to synthesize a trace from one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub objects: ObjectGen,
    pub queries: QueryGen,
    /// `q1`, `q2` or `q3`.
    pub profile: String,
    pub schedule: StreamSchedule,
    pub seed: u64,
}

impl Scenario {
    /// `objects` objects and `queries` insertions of the given profile, 5 objects per query operation.
    pub fn new(objects: usize, queries: usize, profile: &str, seed: u64) -> Self {
        Scenario {
            objects: ObjectGen { count: objects, ..Default::default() },
            queries: QueryGen { count: queries, first_id: 1 << 40, ..Default::default() },
            profile: profile.to_string(),
            schedule: StreamSchedule { ratio: 5.0, mu: (queries as f64 / 4.0).max(1.0), seed: seed ^ 0x5EED },
            seed,
        }
    }

    pub fn layout(&self) -> RegionLayout {
        let e = self.objects.extent;
        RegionLayout::mixed(Rect::new(0.0, 0.0, e, e), self.seed ^ 0x1A70)
    }

    pub fn query_profile(&self) -> Result<QueryProfile> {
        match self.profile.to_ascii_lowercase().as_str() {
            "q1" => Ok(QueryProfile::Q1),
            "q2" => Ok(QueryProfile::Q2),
            "q3" => Ok(QueryProfile::Q3(self.layout())),
            p => Err(Error::invalid(format!("unknown query profile {p:?}"))),
        }
    }

    pub fn generate(&self) -> Result<(TermDict, Vec<StreamElement>)> {
        let mut dict = TermDict::new();
        let objects = synthesize_objects(&self.objects, &mut dict, self.seed)?;
        let stats = corpus_stats(&objects);
        let locs: Vec<_> = objects.iter().map(|o| o.loc).collect();
        let queries = synthesize_queries(&stats, &locs, &self.query_profile()?, &self.queries, self.seed ^ 0xC0FFEE)?;
        let trace = schedule_stream(&objects, &queries, &self.schedule)?;
        Ok((dict, trace))
    }

    /// Like [`Scenario::generate`] with the Q3 layout, but the queries come in
    /// `intervals` equal batches and `fraction` of the regions swap profile
    /// between batches. Also returns the trace position where each later batch starts.
    pub fn generate_flipping(&self, intervals: usize, fraction: f64) -> Result<(TermDict, Vec<StreamElement>, Vec<usize>)> {
        if intervals == 0 {
            return Err(Error::invalid("need at least one interval"));
        }
        let mut dict = TermDict::new();
        let objects = synthesize_objects(&self.objects, &mut dict, self.seed)?;
        let stats = corpus_stats(&objects);
        let locs: Vec<_> = objects.iter().map(|o| o.loc).collect();
        let mut layout = self.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0xF11B);
        let per = self.queries.count.div_ceil(intervals);
        let mut queries = Vec::with_capacity(self.queries.count);
        let mut starts = Vec::new();
        for i in 0..intervals {
            if i > 0 {
                layout.flip(fraction, &mut rng);
                starts.push(queries.len() as u64 + self.queries.first_id);
            }
            let n = per.min(self.queries.count - queries.len());
            let gen = QueryGen { count: n, first_id: self.queries.first_id + queries.len() as u64, ..self.queries.clone() };
            let batch = synthesize_queries(&stats, &locs, &QueryProfile::Q3(layout.clone()), &gen, self.seed ^ (i as u64 + 1))?;
            queries.extend(batch);
        }
        let trace = schedule_stream(&objects, &queries, &self.schedule)?;
        let positions = starts
            .iter()
            .map(|&id| trace.iter().position(|e| matches!(e, StreamElement::Insert(q) if q.id.0 == id)).unwrap_or(trace.len()))
            .collect();
        Ok((dict, trace, positions))
    }
}
