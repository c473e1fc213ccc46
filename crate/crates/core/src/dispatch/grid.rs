use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::model::{
    index_terms, CellSpan, GeoPoint, QueryId, SpaceFrame, SpatioTextualObject, StsQuery, TermId, TermStats, WorkerId,
};
use crate::partition::{term_bucket, KdtNode, KdtTree, TERM_BUCKETS};

/// Row-major cell index on the routing grid.
pub type CellId = u32;

/// Term placement inside a text-partitioned cell. Terms not listed fall back to a hash bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct TextRoute {
    pub terms: HashMap<TermId, WorkerId>,
    pub buckets: [WorkerId; TERM_BUCKETS],
}

impl TextRoute {
    pub fn worker_of(&self, t: TermId) -> WorkerId {
        self.terms.get(&t).copied().unwrap_or(self.buckets[term_bucket(t)])
    }

    pub fn workers(&self) -> impl Iterator<Item = WorkerId> + '_ {
        self.terms.values().copied().chain(self.buckets.iter().copied())
    }

    fn single_worker(&self) -> Option<WorkerId> {
        let mut it = self.workers();
        let first = it.next()?;
        it.all(|w| w == first).then_some(first)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellRoute {
    /// Everything in the cell goes to one worker.
    Space(WorkerId),
    Text(Arc<TextRoute>),
}

impl CellRoute {
    /// The `H1` lookup.
    pub fn worker_of(&self, t: TermId) -> WorkerId {
        match self {
            CellRoute::Space(w) => *w,
            CellRoute::Text(r) => r.worker_of(t),
        }
    }

    pub fn involves(&self, w: WorkerId) -> bool {
        match self {
            CellRoute::Space(x) => *x == w,
            CellRoute::Text(r) => r.workers().any(|x| x == w),
        }
    }

    pub fn is_text(&self) -> bool {
        matches!(self, CellRoute::Text(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoutingDecision {
    pub destinations: Vec<WorkerId>,
    pub discarded: bool,
}

/// Where an object lands, plus the live terms it carried at routing time.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectRouting {
    pub cell: CellId,
    pub live_terms: Vec<TermId>,
    pub decision: RoutingDecision,
}

/// Postings of one query grouped by receiving worker.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryRouting {
    pub postings: Vec<(WorkerId, Vec<(CellId, TermId)>)>,
}

impl QueryRouting {
    pub fn decision(&self) -> RoutingDecision {
        RoutingDecision { destinations: self.postings.iter().map(|p| p.0).collect(), discarded: self.postings.is_empty() }
    }
}

/// A change to the live-term reference counts, replayed on other replicas.
#[derive(Debug, Clone, PartialEq)]
pub enum H2Delta {
    Insert { id: QueryId, postings: Vec<(CellId, TermId)> },
    Delete { id: QueryId, postings: Vec<(CellId, TermId)> },
}

/// Dispatcher routing grid.
///
/// `H1` is the per-cell term to worker map (a single worker for space cells).
/// `H2` is kept as per-cell reference counts of the index terms of live
/// queries; a term's `H2` worker is its `H1` worker.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTIndex {
    frame: SpaceFrame,
    level: u32,
    routes: Vec<CellRoute>,
    h2: Vec<HashMap<TermId, u32>>,
    live: HashSet<QueryId>,
    stats: Arc<TermStats>,
}

impl GridTIndex {
    /// Grid at the coarsest level aligned with every leaf, but no coarser than `min_level`.
    pub fn from_tree(tree: &KdtTree, stats: Arc<TermStats>, min_level: u32) -> Self {
        let level = tree.aligned_level().max(min_level);
        let tl = tree.level();
        let g = 1u32 << level;
        let mut leaf_routes: HashMap<*const KdtNode, CellRoute> = HashMap::new();
        let mut routes = Vec::with_capacity((g * g) as usize);
        for iy in 0..g {
            for ix in 0..g {
                let (lx, ly) = if level >= tl { (ix >> (level - tl), iy >> (level - tl)) } else { (ix << (tl - level), iy << (tl - level)) };
                let (leaf, _) = tree.locate(lx, ly);
                let r = leaf_routes.entry(leaf as *const KdtNode).or_insert_with(|| match leaf {
                    KdtNode::SpaceLeaf { worker } => CellRoute::Space(*worker),
                    KdtNode::TextLeaf { parts } => {
                        let mut terms = HashMap::new();
                        for p in parts {
                            for t in p.terms.iter() {
                                terms.insert(t, p.worker);
                            }
                        }
                        let mut buckets = [0; TERM_BUCKETS];
                        for (b, w) in buckets.iter_mut().enumerate() {
                            *w = parts[b % parts.len()].worker;
                        }
                        CellRoute::Text(Arc::new(TextRoute { terms, buckets }))
                    }
                    KdtNode::Internal { .. } => unreachable!("locate returns leaves"),
                });
                routes.push(r.clone());
            }
        }
        GridTIndex { frame: tree.frame, level, routes, h2: vec![HashMap::new(); (g * g) as usize], live: HashSet::new(), stats }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Cells per axis.
    pub fn granularity(&self) -> u32 {
        1 << self.level
    }

    pub fn frame(&self) -> &SpaceFrame {
        &self.frame
    }

    pub fn stats(&self) -> &Arc<TermStats> {
        &self.stats
    }

    pub fn cell_count(&self) -> usize {
        self.routes.len()
    }

    pub fn route(&self, c: CellId) -> &CellRoute {
        &self.routes[c as usize]
    }

    pub fn routes(&self) -> &[CellRoute] {
        &self.routes
    }

    pub fn cell_of(&self, p: &GeoPoint) -> CellId {
        let (x, y) = self.frame.cell_of(p, self.level);
        y * self.granularity() + x
    }

    pub fn span_of(&self, q: &StsQuery) -> CellSpan {
        self.frame.cells_of_rect(&q.region, self.level)
    }

    pub fn cells_of(&self, q: &StsQuery) -> Vec<CellId> {
        let g = self.granularity();
        self.span_of(q).cells().map(|(x, y)| y * g + x).collect()
    }

    pub fn h2_count(&self, c: CellId, t: TermId) -> u32 {
        self.h2[c as usize].get(&t).copied().unwrap_or(0)
    }

    pub fn is_live(&self, id: QueryId) -> bool {
        self.live.contains(&id)
    }

    pub fn live_count(&self) -> usize {
        self.live.len()
    }

    pub fn live_ids(&self) -> impl Iterator<Item = QueryId> + '_ {
        self.live.iter().copied()
    }

    /// Object routing: the cell's worker for space cells, else the `H1` owners of the object's live terms.
    pub fn route_object(&self, o: &SpatioTextualObject) -> ObjectRouting {
        let cell = self.cell_of(&o.loc);
        let h2 = &self.h2[cell as usize];
        let live_terms: Vec<TermId> = o.terms.iter().filter(|t| h2.get(t).is_some_and(|&n| n > 0)).collect();
        let decision = self.object_destinations(cell, &live_terms);
        ObjectRouting { cell, live_terms, decision }
    }

    /// Destinations under the current `H1` for an object already resolved to a cell and live terms.
    pub fn object_destinations(&self, cell: CellId, live_terms: &[TermId]) -> RoutingDecision {
        let mut dest: Vec<WorkerId> = match &self.routes[cell as usize] {
            CellRoute::Space(w) => vec![*w],
            CellRoute::Text(r) => live_terms.iter().map(|&t| r.worker_of(t)).collect(),
        };
        dest.sort_unstable();
        dest.dedup();
        RoutingDecision { discarded: dest.is_empty(), destinations: dest }
    }

    /// Every (cell, index term) a query is posted under.
    pub fn query_postings(&self, q: &StsQuery) -> Vec<(CellId, TermId)> {
        let terms = index_terms(q, &self.stats);
        let mut out = Vec::new();
        for c in self.cells_of(q) {
            for t in terms.iter() {
                out.push((c, t));
            }
        }
        out
    }

    /// Groups postings by their current `H1` owner.
    pub fn assign_postings(&self, postings: &[(CellId, TermId)]) -> QueryRouting {
        let mut by: HashMap<WorkerId, Vec<(CellId, TermId)>> = HashMap::new();
        for &(c, t) in postings {
            by.entry(self.routes[c as usize].worker_of(t)).or_default().push((c, t));
        }
        let mut postings: Vec<_> = by.into_iter().collect();
        postings.sort_by_key(|p| p.0);
        QueryRouting { postings }
    }

    pub fn route_query_insert(&mut self, q: &StsQuery) -> (QueryRouting, H2Delta) {
        let postings = self.query_postings(q);
        let delta = H2Delta::Insert { id: q.id, postings };
        self.apply_delta(&delta);
        let H2Delta::Insert { postings, .. } = &delta else { unreachable!() };
        (self.assign_postings(postings), delta)
    }

    /// Same destinations as the insertion. Deleting an id that is not live leaves `H2` untouched.
    pub fn route_query_delete(&mut self, q: &StsQuery) -> (QueryRouting, H2Delta) {
        let postings = self.query_postings(q);
        let delta = H2Delta::Delete { id: q.id, postings };
        self.apply_delta(&delta);
        let H2Delta::Delete { postings, .. } = &delta else { unreachable!() };
        (self.assign_postings(postings), delta)
    }

    pub fn apply_delta(&mut self, d: &H2Delta) {
        match d {
            H2Delta::Insert { id, postings } => {
                if !self.live.insert(*id) {
                    return;
                }
                for &(c, t) in postings {
                    *self.h2[c as usize].entry(t).or_insert(0) += 1;
                }
            }
            H2Delta::Delete { id, postings } => {
                if !self.live.remove(id) {
                    return;
                }
                for &(c, t) in postings {
                    let m = &mut self.h2[c as usize];
                    if let Some(n) = m.get_mut(&t) {
                        *n -= 1;
                        if *n == 0 {
                            m.remove(&t);
                        }
                    }
                }
            }
        }
    }

    /// Hands every term `from` serves in cell `c` over to `to`.
    pub fn reassign(&mut self, c: CellId, from: WorkerId, to: WorkerId) {
        let r = &mut self.routes[c as usize];
        match r {
            CellRoute::Space(w) if *w == from => *w = to,
            CellRoute::Space(_) => {}
            CellRoute::Text(tr) => {
                let tr = Arc::make_mut(tr);
                for w in tr.terms.values_mut().chain(tr.buckets.iter_mut()) {
                    if *w == from {
                        *w = to;
                    }
                }
                if let Some(w) = tr.single_worker() {
                    *r = CellRoute::Space(w);
                }
            }
        }
    }

    /// Moves the listed terms of cell `c` to `to`; the rest keeps its current owner.
    pub fn move_terms(&mut self, c: CellId, terms: &[TermId], to: WorkerId) {
        let r = &mut self.routes[c as usize];
        let tr = match r {
            CellRoute::Space(w) => {
                *r = CellRoute::Text(Arc::new(TextRoute { terms: HashMap::new(), buckets: [*w; TERM_BUCKETS] }));
                let CellRoute::Text(tr) = r else { unreachable!() };
                tr
            }
            CellRoute::Text(tr) => tr,
        };
        let tr = Arc::make_mut(tr);
        for &t in terms {
            tr.terms.insert(t, to);
        }
        if let Some(w) = tr.single_worker() {
            *r = CellRoute::Space(w);
        }
    }

    pub fn set_route(&mut self, c: CellId, route: CellRoute) {
        self.routes[c as usize] = route;
    }

    /// Cells in which `w` serves at least some terms.
    pub fn cells_of_worker(&self, w: WorkerId) -> Vec<CellId> {
        (0..self.routes.len() as CellId).filter(|&c| self.routes[c as usize].involves(w)).collect()
    }

    /// Index terms of live queries posted in cell `c`.
    pub fn live_terms_in(&self, c: CellId) -> impl Iterator<Item = TermId> + '_ {
        self.h2[c as usize].keys().copied()
    }
}
