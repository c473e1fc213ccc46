use std::collections::HashMap;

use crate::model::{
    index_terms, CellRange, CellSpan, GeoPoint, Rect, SpaceFrame, SpatioTextualObject, StreamElement, StsQuery, TermSet,
    TermStats, MAX_LEVEL,
};

#[derive(Debug, Clone)]
pub struct SampleObject {
    pub cx: u32,
    pub cy: u32,
    pub terms: TermSet,
}

#[derive(Debug, Clone)]
pub struct SampleQuery {
    pub span: CellSpan,
    /// Every term of the expression.
    pub terms: TermSet,
    pub index: TermSet,
    pub inserted: bool,
    pub deleted: bool,
}

/// Objects and queries snapped to the split lattice, ready for load estimation.
#[derive(Debug, Clone)]
pub struct WorkloadSample {
    pub frame: SpaceFrame,
    pub level: u32,
    pub objects: Vec<SampleObject>,
    pub queries: Vec<SampleQuery>,
    pub stats: TermStats,
}

/// Bounding box of a set of object locations.
pub fn frame_of<'a>(points: impl IntoIterator<Item = &'a GeoPoint>) -> SpaceFrame {
    let mut it = points.into_iter();
    let Some(first) = it.next() else {
        return SpaceFrame::new(Rect::new(0.0, 0.0, 1.0, 1.0));
    };
    let mut r = Rect { min: *first, max: *first };
    for p in it {
        r.expand_to(p);
    }
    SpaceFrame::new(r)
}

impl WorkloadSample {
    pub fn new(
        objects: &[SpatioTextualObject],
        queries: &[StsQuery],
        stats: &TermStats,
        frame: SpaceFrame,
        level: u32,
    ) -> Self {
        let mut s = Self::empty(stats, frame, level);
        for o in objects {
            s.push_object(o);
        }
        for q in queries {
            s.push_query(q, true, false);
        }
        s
    }

    /// Builds a sample from a stream prefix. A query deleted inside the prefix
    /// counts as both an insertion and a deletion.
    pub fn from_elements(elements: &[StreamElement], stats: &TermStats, frame: SpaceFrame, level: u32) -> Self {
        let mut s = Self::empty(stats, frame, level);
        let mut live: HashMap<u64, usize> = HashMap::new();
        for e in elements {
            match e {
                StreamElement::Object(o) => s.push_object(o),
                StreamElement::Insert(q) => {
                    live.insert(q.id.0, s.queries.len());
                    s.push_query(q, true, false);
                }
                StreamElement::Delete(q) => match live.remove(&q.id.0) {
                    Some(i) => s.queries[i].deleted = true,
                    None => s.push_query(q, false, true),
                },
            }
        }
        s
    }

    fn empty(stats: &TermStats, frame: SpaceFrame, level: u32) -> Self {
        WorkloadSample {
            frame,
            level: level.min(MAX_LEVEL),
            objects: Vec::new(),
            queries: Vec::new(),
            stats: stats.clone(),
        }
    }

    fn push_object(&mut self, o: &SpatioTextualObject) {
        let (cx, cy) = self.frame.cell_of(&o.loc, self.level);
        self.objects.push(SampleObject { cx, cy, terms: o.terms.clone() });
    }

    fn push_query(&mut self, q: &StsQuery, inserted: bool, deleted: bool) {
        self.queries.push(SampleQuery {
            span: self.frame.cells_of_rect(&q.region, self.level),
            terms: q.expr.terms(),
            index: index_terms(q, &self.stats),
            inserted,
            deleted,
        });
    }

    pub fn full_range(&self) -> CellRange {
        CellRange::full(self.level)
    }

    pub fn all_objects(&self) -> Vec<u32> {
        (0..self.objects.len() as u32).collect()
    }

    pub fn all_queries(&self) -> Vec<u32> {
        (0..self.queries.len() as u32).collect()
    }
}
