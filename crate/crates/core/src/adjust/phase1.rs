use std::collections::{HashMap, HashSet};

use crate::dispatch::CellId;
use crate::model::{CostModel, ObjectId, QueryId, TermId};
use crate::partition::text_partition;
use crate::worker::CellProfile;

/// A cell-level change proposed before any bulk migration.
///
/// `before` and `after` are the estimated loads of the two workers together.
#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    /// Text-split the cell and move the listed terms to the underloaded worker.
    /// `moved` is the share of the cell's load that leaves.
    Split { cell: CellId, moved_terms: Vec<TermId>, moved: f64, before: f64, after: f64 },
    /// Move the overloaded worker's share of a text-partitioned cell next to the other share.
    Merge { cell: CellId, before: f64, after: f64 },
}

impl Directive {
    pub fn cell(&self) -> CellId {
        match self {
            Directive::Split { cell, .. } | Directive::Merge { cell, .. } => *cell,
        }
    }

    pub fn loads(&self) -> (f64, f64) {
        match self {
            Directive::Split { before, after, .. } | Directive::Merge { before, after, .. } => (*before, *after),
        }
    }
}

/// Objects seen in the window and live queries held by one worker.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WorkerTotals {
    pub objects: f64,
    pub queries: f64,
}

impl WorkerTotals {
    pub fn new(objects: f64, queries: f64) -> Self {
        WorkerTotals { objects, queries }
    }

    pub fn load(&self, c: &CostModel) -> f64 {
        share_load(self.objects, self.queries, c)
    }

    /// Totals after removing `(o, q)` and adding `(o2, q2)`.
    fn shift(self, remove: (usize, usize), add: (usize, usize)) -> Self {
        WorkerTotals {
            objects: (self.objects - remove.0 as f64 + add.0 as f64).max(0.0),
            queries: (self.queries - remove.1 as f64 + add.1 as f64).max(0.0),
        }
    }
}

/// Load of `n_o` objects against `n_q` queries in the worker load form.
pub fn share_load(n_o: f64, n_q: f64, c: &CostModel) -> f64 {
    c.c1 * n_o * n_q + c.c2 * n_o + c.c3 * n_q
}

/// Objects and queries of `p` that touch `group`.
fn group_counts(p: &CellProfile, group: &HashSet<TermId>) -> (usize, usize) {
    let o = p.objects.iter().filter(|(_, ts)| ts.iter().any(|t| group.contains(t))).count();
    let q = p.queries.iter().filter(|(_, ts, _)| ts.iter().any(|t| group.contains(t))).count();
    (o, q)
}

fn counts(p: &CellProfile) -> (usize, usize) {
    (p.objects.len(), p.queries.len())
}

/// Best two-way text split of a cell share.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    pub kept_terms: Vec<TermId>,
    pub moved_terms: Vec<TermId>,
    /// Objects and queries that stay, counting those that touch both groups.
    pub kept: (usize, usize),
    /// Objects and queries that the receiving worker sees.
    pub moved: (usize, usize),
}

pub fn evaluate_split(p: &CellProfile, c: &CostModel) -> Option<SplitCandidate> {
    let mut n_q: HashMap<TermId, usize> = HashMap::new();
    let mut bytes: HashMap<TermId, u64> = HashMap::new();
    for (_, ts, s) in &p.queries {
        for &t in ts {
            *n_q.entry(t).or_default() += 1;
            *bytes.entry(t).or_default() += s;
        }
    }
    if n_q.len() < 2 {
        return None;
    }
    let mut n_o: HashMap<TermId, usize> = HashMap::new();
    for (_, ts) in &p.objects {
        for &t in ts {
            *n_o.entry(t).or_default() += 1;
        }
    }
    let mut weights: Vec<(TermId, f64)> = n_q
        .iter()
        .map(|(&t, &q)| (t, share_load(n_o.get(&t).copied().unwrap_or(0) as f64, q as f64, c)))
        .collect();
    weights.sort_by_key(|w| w.0);
    let parts = text_partition(&weights, 2);
    if parts.iter().any(|(ts, _)| ts.is_empty()) {
        return None;
    }
    let groups: Vec<HashSet<TermId>> = parts.iter().map(|(ts, _)| ts.iter().collect()).collect();
    let size = |g: &HashSet<TermId>| -> u64 { g.iter().map(|t| bytes[t]).sum() };
    let (keep, moved) = if size(&groups[1]) <= size(&groups[0]) { (0, 1) } else { (1, 0) };
    let sorted = |g: &HashSet<TermId>| {
        let mut v: Vec<TermId> = g.iter().copied().collect();
        v.sort_unstable();
        v
    };
    Some(SplitCandidate {
        kept_terms: sorted(&groups[keep]),
        moved_terms: sorted(&groups[moved]),
        kept: group_counts(p, &groups[keep]),
        moved: group_counts(p, &groups[moved]),
    })
}

/// Distinct objects and queries of two shares of one cell put together.
pub fn evaluate_merge(a: &CellProfile, b: &CellProfile) -> (usize, usize) {
    let objs: HashSet<ObjectId> = a.objects.iter().chain(&b.objects).map(|o| o.0).collect();
    let qs: HashSet<QueryId> = a.queries.iter().chain(&b.queries).map(|q| q.0).collect();
    (objs.len(), qs.len())
}

/// Split and merge directives over the `p` most loaded cells of the overloaded worker.
///
/// `over` holds `(cell load, profile)` pairs of the overloaded worker and
/// `under` the profiles of the underloaded one; `tot_o` and `tot_l` are the
/// two workers' totals. A directive is kept only if it lowers the sum of the
/// two worker loads, and later candidates are judged against the totals the
/// kept ones leave behind.
pub fn phase1_adjust(
    over: &[(f64, CellProfile)],
    under: &[CellProfile],
    p: usize,
    c: &CostModel,
    mut tot_o: WorkerTotals,
    mut tot_l: WorkerTotals,
) -> Vec<Directive> {
    let mut ranked: Vec<&(f64, CellProfile)> = over.iter().filter(|x| x.0 > 0.0).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cell.cmp(&b.1.cell)));
    let peers: HashMap<CellId, &CellProfile> = under.iter().map(|u| (u.cell, u)).collect();
    let mut out = Vec::new();
    for (_, prof) in ranked.into_iter().take(p) {
        let before = tot_o.load(c) + tot_l.load(c);
        let (new_o, new_l, mut d) = if !prof.text_partitioned {
            let Some(s) = evaluate_split(prof, c) else { continue };
            let cell_load = share_load(prof.objects.len() as f64, prof.queries.len() as f64, c);
            let moved = if cell_load > 0.0 { share_load(s.moved.0 as f64, s.moved.1 as f64, c) / cell_load } else { 0.0 };
            let d = Directive::Split { cell: prof.cell, moved_terms: s.moved_terms, moved, before, after: before };
            (tot_o.shift(counts(prof), s.kept), tot_l.shift((0, 0), s.moved), d)
        } else if let Some(peer) = peers.get(&prof.cell) {
            let d = Directive::Merge { cell: prof.cell, before, after: before };
            (tot_o.shift(counts(prof), (0, 0)), tot_l.shift(counts(peer), evaluate_merge(prof, peer)), d)
        } else {
            continue;
        };
        let load = new_o.load(c) + new_l.load(c);
        if load < before {
            match &mut d {
                Directive::Split { after, .. } | Directive::Merge { after, .. } => *after = load,
            }
            out.push(d);
            (tot_o, tot_l) = (new_o, new_l);
        }
    }
    out
}
