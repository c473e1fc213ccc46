//! Worker-side grid inverted index with lazy deletion and cell migration.

mod payload;

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

pub use payload::{decode_query, encode_query, encoded_size, MigrationPayload, PayloadCell, PayloadQuery};

use crate::dispatch::CellId;
use crate::error::{Error, Result};
use crate::model::{
    index_terms, matches, MatchResult, ObjectId, QueryId, SpaceFrame, SpatioTextualObject, StsQuery, TermId, TermSet,
    TermStats,
};

/// Default grid level: 64×64 cells.
pub const DEFAULT_GI2_LEVEL: u32 = 6;

/// Per-cell load and migration cost for the current window.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStat {
    pub cell: CellId,
    /// Objects landed times the live query count averaged over those arrivals.
    pub load: f64,
    /// Encoded bytes of the live queries stored in the cell.
    pub size: u64,
    pub text_partitioned: bool,
}

/// What a cell share holds right now, for split and merge decisions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellProfile {
    pub cell: CellId,
    pub text_partitioned: bool,
    /// Objects landed in the window, with their terms that had a list in the cell.
    pub objects: Vec<(ObjectId, Vec<TermId>)>,
    /// Live queries with the terms they are posted under here.
    pub queries: Vec<(QueryId, Vec<TermId>, u64)>,
}

#[derive(Debug, Clone, Default)]
struct Cell {
    lists: HashMap<TermId, Vec<Arc<StsQuery>>>,
    /// Postings per query id, live or pending purge.
    posts: HashMap<QueryId, u32>,
    live: u64,
    size: u64,
    text: bool,
    n_objects: u64,
    q_sum: u64,
    seen: Vec<(ObjectId, Vec<TermId>)>,
}

#[derive(Debug, Clone)]
struct Entry {
    query: Arc<StsQuery>,
    size: u64,
    remaining: u32,
    cells: Vec<CellId>,
    deleted: bool,
}

/// GI²: a uniform grid whose cells hold inverted lists of queries keyed by index term.
#[derive(Debug, Clone)]
pub struct Gi2Index {
    frame: SpaceFrame,
    level: u32,
    stats: Arc<TermStats>,
    cells: HashMap<CellId, Cell>,
    entries: HashMap<QueryId, Entry>,
    deleted: HashSet<QueryId>,
    keep_profiles: bool,
    scanned: u64,
}

impl Gi2Index {
    pub fn new(frame: SpaceFrame, level: u32, stats: Arc<TermStats>) -> Self {
        Gi2Index {
            frame,
            level,
            stats,
            cells: HashMap::new(),
            entries: HashMap::new(),
            deleted: HashSet::new(),
            keep_profiles: false,
            scanned: 0,
        }
    }

    /// Also remember per-object term hits so `cell_profile` can report them.
    pub fn with_profiles(mut self) -> Self {
        self.keep_profiles = true;
        self
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn cell_of(&self, o: &SpatioTextualObject) -> CellId {
        let (x, y) = self.frame.cell_of(&o.loc, self.level);
        y * (1 << self.level) + x
    }

    pub fn own_cells(&mut self, cells: impl IntoIterator<Item = CellId>) {
        for c in cells {
            self.cells.entry(c).or_default();
        }
    }

    pub fn owns(&self, c: CellId) -> bool {
        self.cells.contains_key(&c)
    }

    pub fn owned_cells(&self) -> Vec<CellId> {
        let mut v: Vec<CellId> = self.cells.keys().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn set_text_partitioned(&mut self, c: CellId, text: bool) {
        if let Some(cell) = self.cells.get_mut(&c) {
            cell.text = text;
        }
    }

    /// Number of live queries stored.
    pub fn live_queries(&self) -> usize {
        self.entries.len() - self.deleted.len()
    }

    /// Objects landed in owned cells since the window started.
    pub fn window_objects(&self) -> u64 {
        self.cells.values().map(|c| c.n_objects).sum()
    }

    pub fn contains_live(&self, id: QueryId) -> bool {
        self.entries.get(&id).is_some_and(|e| !e.deleted)
    }

    pub fn pending_deletes(&self) -> usize {
        self.deleted.len()
    }

    /// Postings still physically present for `id`.
    pub fn postings_of(&self, id: QueryId) -> u32 {
        self.entries.get(&id).map_or(0, |e| e.remaining)
    }

    /// List entries visited by matching so far.
    pub fn scanned(&self) -> u64 {
        self.scanned
    }

    pub fn total_postings(&self) -> u64 {
        self.entries.values().map(|e| e.remaining as u64).sum()
    }

    /// Posts `q` in every cell its region overlaps under each of its index terms.
    pub fn insert_query(&mut self, q: &StsQuery) {
        let terms = index_terms(q, &self.stats);
        let g = 1u32 << self.level;
        let span = self.frame.cells_of_rect(&q.region, self.level);
        let postings: Vec<(CellId, TermId)> =
            span.cells().flat_map(|(x, y)| terms.iter().map(move |t| (y * g + x, t))).collect();
        self.insert_postings(q, &postings);
    }

    /// Posts `q` under exactly the given (cell, term) pairs. Repeated pairs are ignored.
    pub fn insert_postings(&mut self, q: &StsQuery, postings: &[(CellId, TermId)]) {
        if self.entries.get(&q.id).is_some_and(|e| e.deleted) {
            self.purge(q.id);
        }
        let size = encoded_size(q);
        let entry = self.entries.entry(q.id).or_insert_with(|| Entry {
            query: Arc::new(q.clone()),
            size,
            remaining: 0,
            cells: Vec::new(),
            deleted: false,
        });
        let arc = entry.query.clone();
        for &(c, t) in postings {
            let cell = self.cells.entry(c).or_default();
            let list = cell.lists.entry(t).or_default();
            if list.iter().any(|x| x.id == q.id) {
                continue;
            }
            list.push(arc.clone());
            let n = cell.posts.entry(q.id).or_insert(0);
            if *n == 0 {
                cell.live += 1;
                cell.size += size;
                entry.cells.push(c);
            }
            *n += 1;
            entry.remaining += 1;
        }
        if entry.remaining == 0 {
            self.entries.remove(&q.id);
        }
    }

    /// Marks `id` deleted; its postings are dropped when matching walks over them.
    pub fn delete_query(&mut self, id: QueryId) {
        let Some(e) = self.entries.get_mut(&id) else { return };
        if e.deleted {
            return;
        }
        e.deleted = true;
        self.deleted.insert(id);
        for c in &e.cells {
            let cell = self.cells.get_mut(c).expect("entry cells are owned");
            cell.live -= 1;
            cell.size -= e.size;
        }
    }

    /// Eagerly drops every posting of a deleted id.
    fn purge(&mut self, id: QueryId) {
        let Some(e) = self.entries.remove(&id) else { return };
        self.deleted.remove(&id);
        for c in &e.cells {
            let cell = self.cells.get_mut(c).expect("entry cells are owned");
            cell.posts.remove(&id);
            for list in cell.lists.values_mut() {
                list.retain(|q| q.id != id);
            }
        }
    }

    /// Drops one posting of `id` from cell `c`'s bookkeeping. The caller removes it from the list.
    fn unpost(entries: &mut HashMap<QueryId, Entry>, deleted: &mut HashSet<QueryId>, cell: &mut Cell, c: CellId, id: QueryId) {
        let e = entries.get_mut(&id).expect("posted queries have entries");
        let n = cell.posts.get_mut(&id).expect("posting counted");
        *n -= 1;
        if *n == 0 {
            cell.posts.remove(&id);
            e.cells.retain(|&x| x != c);
            if !e.deleted {
                cell.live -= 1;
                cell.size -= e.size;
            }
        }
        e.remaining -= 1;
        if e.remaining == 0 {
            entries.remove(&id);
            deleted.remove(&id);
        }
    }

    /// Matches `o` against the lists of its cell, purging deleted postings on the way.
    pub fn match_object(&mut self, o: &SpatioTextualObject) -> Vec<MatchResult> {
        let c = self.cell_of(o);
        let Some(cell) = self.cells.get_mut(&c) else { return Vec::new() };
        cell.n_objects += 1;
        cell.q_sum += cell.live;
        let mut hit_terms = Vec::new();
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for t in o.terms.iter() {
            let Some(mut list) = cell.lists.remove(&t) else { continue };
            hit_terms.push(t);
            if !self.deleted.is_empty() {
                let before = list.len();
                let mut gone = Vec::new();
                list.retain(|q| {
                    let keep = !self.deleted.contains(&q.id);
                    if !keep {
                        gone.push(q.id);
                    }
                    keep
                });
                debug_assert_eq!(before, list.len() + gone.len());
                for id in gone {
                    Self::unpost(&mut self.entries, &mut self.deleted, cell, c, id);
                }
            }
            self.scanned += list.len() as u64;
            for q in &list {
                if matches(o, q) && seen.insert(q.id) {
                    out.push(MatchResult::new(q.id, o.id));
                }
            }
            if !list.is_empty() {
                cell.lists.insert(t, list);
            }
        }
        if self.keep_profiles {
            cell.seen.push((o.id, hit_terms));
        }
        out
    }

    /// Stats for every owned cell over the current window.
    pub fn cell_stats(&self) -> Vec<CellStat> {
        let mut v: Vec<CellStat> = self
            .cells
            .iter()
            .map(|(&c, cell)| CellStat {
                cell: c,
                // n_o times the arrival-averaged live count
                load: if cell.n_objects == 0 { 0.0 } else { cell.n_objects as f64 * (cell.q_sum as f64 / cell.n_objects as f64) },
                size: cell.size,
                text_partitioned: cell.text,
            })
            .collect();
        v.sort_by_key(|s| s.cell);
        v
    }

    pub fn cell_profile(&self, c: CellId) -> Option<CellProfile> {
        let cell = self.cells.get(&c)?;
        let mut qs: HashMap<QueryId, (Vec<TermId>, u64)> = HashMap::new();
        for (&t, list) in &cell.lists {
            for q in list {
                if let Some(e) = self.entries.get(&q.id).filter(|e| !e.deleted) {
                    qs.entry(q.id).or_insert_with(|| (Vec::new(), e.size)).0.push(t);
                }
            }
        }
        let mut queries: Vec<(QueryId, Vec<TermId>, u64)> = qs
            .into_iter()
            .map(|(id, (mut ts, s))| {
                ts.sort_unstable();
                (id, ts, s)
            })
            .collect();
        queries.sort_by_key(|q| q.0);
        Some(CellProfile { cell: c, text_partitioned: cell.text, objects: cell.seen.clone(), queries })
    }

    /// Starts a new accounting window.
    pub fn reset_window(&mut self) {
        for cell in self.cells.values_mut() {
            cell.n_objects = 0;
            cell.q_sum = 0;
            cell.seen.clear();
        }
    }

    /// Removes whole cells and returns their content. The cells are no longer owned.
    pub fn export_cells(&mut self, cells: &[CellId]) -> Result<MigrationPayload> {
        if let Some(c) = cells.iter().find(|c| !self.cells.contains_key(c)) {
            return Err(Error::Migration(format!("cell {c} is not owned")));
        }
        let mut out = Vec::with_capacity(cells.len());
        for &c in cells {
            let terms: Vec<TermId> = self.cells[&c].lists.keys().copied().collect();
            let mut pc = self.take_terms(c, &terms);
            pc.text_partitioned = self.cells[&c].text;
            self.cells.remove(&c);
            out.push(pc);
        }
        Ok(MigrationPayload { cells: out })
    }

    /// Removes the lists of `terms` from cell `c`; the cell stays owned.
    pub fn export_terms(&mut self, c: CellId, terms: &[TermId]) -> Result<MigrationPayload> {
        if !self.cells.contains_key(&c) {
            return Err(Error::Migration(format!("cell {c} is not owned")));
        }
        let mut pc = self.take_terms(c, terms);
        pc.text_partitioned = true;
        Ok(MigrationPayload { cells: vec![pc] })
    }

    fn take_terms(&mut self, c: CellId, terms: &[TermId]) -> PayloadCell {
        let cell = self.cells.get_mut(&c).expect("checked by caller");
        let mut by_id: HashMap<QueryId, PayloadQuery> = HashMap::new();
        let mut sorted = terms.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        for t in sorted {
            let Some(list) = cell.lists.remove(&t) else { continue };
            for q in list {
                let deleted = self.entries[&q.id].deleted;
                by_id
                    .entry(q.id)
                    .or_insert_with(|| PayloadQuery { query: (*q).clone(), terms: Vec::new(), deleted })
                    .terms
                    .push(t);
                Self::unpost(&mut self.entries, &mut self.deleted, cell, c, q.id);
            }
        }
        let mut queries: Vec<PayloadQuery> = by_id.into_values().collect();
        queries.sort_by_key(|q| q.query.id);
        PayloadCell { cell: c, text_partitioned: false, queries }
    }

    /// Installs exported cells. Re-importing the same content is a no-op.
    pub fn import_cells(&mut self, p: &MigrationPayload) -> Result<()> {
        for pc in &p.cells {
            for pq in &pc.queries {
                if let Some(e) = self.entries.get(&pq.query.id) {
                    if *e.query != pq.query {
                        return Err(Error::Migration(format!("query {} differs from the stored copy", pq.query.id)));
                    }
                }
            }
        }
        for pc in &p.cells {
            let existed = self.cells.contains_key(&pc.cell);
            let cell = self.cells.entry(pc.cell).or_default();
            cell.text = if existed { cell.text || pc.text_partitioned } else { pc.text_partitioned };
            for pq in &pc.queries {
                let postings: Vec<(CellId, TermId)> = pq.terms.iter().map(|&t| (pc.cell, t)).collect();
                let was_deleted = self.entries.get(&pq.query.id).is_some_and(|e| e.deleted);
                if pq.deleted && !was_deleted && self.entries.contains_key(&pq.query.id) {
                    // live here, deleted at the source: the deletion wins
                    self.delete_query(pq.query.id);
                }
                if pq.deleted || was_deleted {
                    self.post_deleted(&pq.query, &postings);
                } else {
                    self.insert_postings(&pq.query, &postings);
                }
            }
        }
        Ok(())
    }

    /// Adds postings for a query that is already deleted, so they are purged lazily.
    fn post_deleted(&mut self, q: &StsQuery, postings: &[(CellId, TermId)]) {
        let size = encoded_size(q);
        let entry = self.entries.entry(q.id).or_insert_with(|| Entry {
            query: Arc::new(q.clone()),
            size,
            remaining: 0,
            cells: Vec::new(),
            deleted: true,
        });
        entry.deleted = true;
        self.deleted.insert(q.id);
        let arc = entry.query.clone();
        for &(c, t) in postings {
            let cell = self.cells.entry(c).or_default();
            let list = cell.lists.entry(t).or_default();
            if list.iter().any(|x| x.id == q.id) {
                continue;
            }
            list.push(arc.clone());
            let n = cell.posts.entry(q.id).or_insert(0);
            if *n == 0 {
                entry.cells.push(c);
            }
            *n += 1;
            entry.remaining += 1;
        }
        if entry.remaining == 0 {
            self.entries.remove(&q.id);
            self.deleted.remove(&q.id);
        }
    }

    /// Removes every posting of a live query and returns it, for moving it elsewhere.
    pub fn take_query(&mut self, id: QueryId) -> Option<StsQuery> {
        let e = self.entries.get(&id)?;
        if e.deleted {
            return None;
        }
        let q = (*e.query).clone();
        self.delete_query(id);
        self.purge(id);
        Some(q)
    }

    /// Ids of live queries.
    pub fn live_ids(&self) -> Vec<QueryId> {
        let mut v: Vec<QueryId> = self.entries.iter().filter(|(_, e)| !e.deleted).map(|(&id, _)| id).collect();
        v.sort_unstable();
        v
    }

    /// Terms with a non-empty list in cell `c`.
    pub fn cell_terms(&self, c: CellId) -> TermSet {
        TermSet::new(self.cells.get(&c).map(|cell| cell.lists.keys().copied().collect()).unwrap_or_default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BooleanExpr, GeoPoint, Rect};
    use proptest::prelude::*;

    fn frame() -> SpaceFrame {
        SpaceFrame::new(Rect::new(0.0, 0.0, 64.0, 64.0))
    }

    fn stats(freq: &[(u32, u64)]) -> Arc<TermStats> {
        Arc::new(TermStats::from_counts(freq.iter().map(|&(t, f)| (TermId(t), f))))
    }

    fn obj(id: u64, x: f64, y: f64, terms: &[u32]) -> SpatioTextualObject {
        SpatioTextualObject::new(id, GeoPoint::new(x, y), TermSet::new(terms.iter().map(|&t| TermId(t)).collect())).unwrap()
    }

    fn q(id: u64, clauses: &[&[u32]], r: Rect) -> StsQuery {
        let cl = clauses.iter().map(|c| TermSet::new(c.iter().map(|&t| TermId(t)).collect())).collect();
        StsQuery::new(id, BooleanExpr::new(cl).unwrap(), r).unwrap()
    }

    #[test]
    fn and_query_posts_under_rarest_term() {
        let mut ix = Gi2Index::new(frame(), 6, stats(&[(1, 100), (2, 3)]));
        ix.insert_query(&q(1, &[&[1], &[2]], Rect::new(0.2, 0.2, 0.8, 0.8)));
        assert_eq!(ix.total_postings(), 1);
        assert_eq!(ix.cell_terms(0).as_slice(), &[TermId(2)]);
        let mut ix = Gi2Index::new(frame(), 6, stats(&[(1, 100), (2, 3)]));
        ix.insert_query(&q(1, &[&[1], &[2]], Rect::new(0.5, 0.5, 1.5, 1.5)));
        assert_eq!(ix.total_postings(), 4);
        let mut ix = Gi2Index::new(frame(), 6, stats(&[(1, 100), (2, 3)]));
        ix.insert_query(&q(1, &[&[1, 2]], Rect::new(0.2, 0.2, 0.8, 0.8)));
        assert_eq!(ix.total_postings(), 2);
    }

    #[test]
    fn matching_checks_every_clause_and_dedups() {
        let mut ix = Gi2Index::new(frame(), 6, stats(&[(1, 1), (2, 1), (3, 1)]));
        let r = Rect::new(0.0, 0.0, 1.0, 1.0);
        ix.insert_postings(&q(1, &[&[1]], r), &[(0, TermId(1))]);
        ix.insert_postings(&q(2, &[&[2], &[3]], r), &[(0, TermId(2))]);
        let got = ix.match_object(&obj(9, 0.5, 0.5, &[1, 2]));
        assert_eq!(got, vec![MatchResult::new(QueryId(1), ObjectId(9))]);
        assert!(ix.match_object(&obj(10, 0.5, 0.5, &[7])).is_empty());
        ix.insert_postings(&q(3, &[&[1, 2]], r), &[(0, TermId(1)), (0, TermId(2))]);
        let got = ix.match_object(&obj(11, 0.5, 0.5, &[1, 2]));
        assert_eq!(got.iter().filter(|m| m.query_id == QueryId(3)).count(), 1);
    }

    #[test]
    fn lazy_delete_purges_on_traversal() {
        let mut ix = Gi2Index::new(frame(), 6, stats(&[(1, 1)]));
        ix.insert_query(&q(1, &[&[1]], Rect::new(0.5, 0.5, 1.5, 1.5)));
        assert_eq!(ix.postings_of(QueryId(1)), 4);
        ix.delete_query(QueryId(1));
        ix.delete_query(QueryId(77));
        assert_eq!(ix.postings_of(QueryId(1)), 4);
        assert!(ix.match_object(&obj(1, 0.7, 0.7, &[1])).is_empty());
        assert_eq!(ix.postings_of(QueryId(1)), 3);
        for (x, y) in [(1.2, 0.7), (0.7, 1.2), (1.2, 1.2)] {
            assert!(ix.match_object(&obj(2, x, y, &[1])).is_empty());
        }
        assert_eq!(ix.postings_of(QueryId(1)), 0);
        assert_eq!(ix.pending_deletes(), 0);
    }

    #[test]
    fn reinsert_after_delete_is_fresh() {
        let mut ix = Gi2Index::new(frame(), 6, stats(&[(1, 1)]));
        let qq = q(1, &[&[1]], Rect::new(0.5, 0.5, 1.5, 1.5));
        ix.insert_query(&qq);
        ix.delete_query(qq.id);
        ix.insert_query(&qq);
        assert_eq!(ix.match_object(&obj(1, 0.7, 0.7, &[1])).len(), 1);
        assert_eq!(ix.postings_of(qq.id), 4);
    }

    #[test]
    fn cell_stats_examples() {
        let mut ix = Gi2Index::new(frame(), 6, stats(&[(1, 1)]));
        ix.own_cells([0, 5]);
        let r = Rect::new(0.1, 0.1, 0.9, 0.9);
        ix.insert_query(&q(1, &[&[1]], r));
        ix.insert_query(&q(2, &[&[1]], r));
        ix.match_object(&obj(1, 0.5, 0.5, &[1]));
        ix.match_object(&obj(2, 0.5, 0.5, &[1]));
        ix.insert_query(&q(3, &[&[1]], r));
        ix.match_object(&obj(3, 0.5, 0.5, &[1]));
        ix.match_object(&obj(4, 0.5, 0.5, &[1]));
        let s = ix.cell_stats();
        // 4 objects, live counts 2,2,3,3
        assert_eq!(s[0].load, 10.0);
        assert!(s[0].size > 0);
        assert_eq!((s[1].load, s[1].size), (0.0, 0));
        ix.reset_window();
        assert_eq!(ix.cell_stats()[0].load, 0.0);
        assert!(ix.cell_stats()[0].size > 0);
    }

    #[test]
    fn export_import_round_trip() {
        let st = stats(&[(1, 1), (2, 1)]);
        let mut a = Gi2Index::new(frame(), 6, st.clone());
        a.own_cells([0, 1]);
        let r = Rect::new(0.1, 0.1, 1.9, 0.9);
        a.insert_query(&q(1, &[&[1]], r));
        a.insert_query(&q(2, &[&[2]], r));
        a.delete_query(QueryId(2));
        let before = a.cell_stats();
        let p = a.export_cells(&[0]).unwrap();
        assert!(!a.owns(0));
        assert!(a.export_cells(&[0]).is_err());
        let bytes = p.encode();
        let p2 = MigrationPayload::decode(&bytes).unwrap();
        assert_eq!(p, p2);
        let mut b = Gi2Index::new(frame(), 6, st);
        b.import_cells(&p2).unwrap();
        b.import_cells(&p2).unwrap();
        assert_eq!(b.cell_stats()[0].size, before[0].size);
        let got = b.match_object(&obj(5, 0.5, 0.5, &[1, 2]));
        assert_eq!(got, vec![MatchResult::new(QueryId(1), ObjectId(5))]);
        assert_eq!(b.postings_of(QueryId(2)), 0);
    }

    #[test]
    fn import_rejects_conflicting_query() {
        let st = stats(&[(1, 1)]);
        let mut a = Gi2Index::new(frame(), 6, st.clone());
        a.insert_query(&q(1, &[&[1]], Rect::new(0.1, 0.1, 0.9, 0.9)));
        let p = a.export_cells(&[0]).unwrap();
        let mut b = Gi2Index::new(frame(), 6, st);
        b.insert_query(&q(1, &[&[1]], Rect::new(0.1, 0.1, 0.5, 0.5)));
        assert!(b.import_cells(&p).is_err());
    }

    #[test]
    fn export_terms_keeps_the_rest() {
        let st = stats(&[(1, 1), (2, 1)]);
        let mut a = Gi2Index::new(frame(), 6, st.clone());
        let r = Rect::new(0.1, 0.1, 0.9, 0.9);
        a.insert_query(&q(1, &[&[1]], r));
        a.insert_query(&q(2, &[&[2]], r));
        let p = a.export_terms(0, &[TermId(2)]).unwrap();
        assert_eq!(a.live_queries(), 1);
        assert_eq!(a.cell_terms(0).as_slice(), &[TermId(1)]);
        let mut b = Gi2Index::new(frame(), 6, st);
        b.import_cells(&p).unwrap();
        assert_eq!(b.match_object(&obj(1, 0.5, 0.5, &[2])).len(), 1);
        assert_eq!(b.cell_stats()[0].text_partitioned, true);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn deleted_ids_never_match_and_postings_drain(
            qs in prop::collection::vec((0u32..6, 0u32..6, 0.5f64..20.0, 0.5f64..20.0, 0u32..4), 1..25),
            dels in prop::collection::vec(any::<prop::sample::Index>(), 1..10),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let st = stats(&[(0, 5), (1, 3), (2, 2), (3, 1)]);
            let mut ix = Gi2Index::new(frame(), 6, st);
            let queries: Vec<StsQuery> = qs
                .iter()
                .enumerate()
                .map(|(i, &(x, y, w, h, t))| {
                    let (x, y) = (x as f64 * 8.0, y as f64 * 8.0);
                    q(i as u64, &[&[t, (t + 1) % 4]], Rect::new(x, y, x + w, y + h))
                })
                .collect();
            for qq in &queries {
                ix.insert_query(qq);
            }
            let gone: HashSet<QueryId> = dels.iter().map(|i| queries[i.index(queries.len())].id).collect();
            for &id in &gone {
                ix.delete_query(id);
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for i in 0..10_000u64 {
                let o = obj(i, rng.random_range(0.0..64.0), rng.random_range(0.0..64.0), &[rng.random_range(0..4)]);
                for m in ix.match_object(&o) {
                    prop_assert!(!gone.contains(&m.query_id));
                }
            }
            // sweep every cell once with all terms
            let g = 64u32;
            for c in 0..g * g {
                let (x, y) = ((c % g) as f64 + 0.5, (c / g) as f64 + 0.5);
                ix.match_object(&obj(0, x, y, &[0, 1, 2, 3]));
            }
            for id in &gone {
                prop_assert_eq!(ix.postings_of(*id), 0);
            }
            prop_assert_eq!(ix.pending_deletes(), 0);
        }
    }
}
