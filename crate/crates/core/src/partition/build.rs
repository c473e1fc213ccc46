//! Tree construction: the hybrid algorithm and the baseline strategies.

use std::collections::{HashMap, VecDeque};

use super::alloc::{compute_number_partitions, merge_nodes_into_partitions, text_partition};
use super::load::{query_term_universe, sample_similarity, space_counts, term_loads, text_counts};
use super::sample::WorkloadSample;
use super::tree::{KdtNode, KdtTree, TermPart};
use super::{PartitionParams, Partitioning};
use crate::error::{Error, Result};
use crate::model::{worker_load, Axis, CellRange, CostModel, TermSet};

#[derive(Debug, Clone)]
pub(crate) struct Scope {
    pub range: CellRange,
    pub objs: Vec<u32>,
    pub qrys: Vec<u32>,
}

impl Scope {
    pub fn root(s: &WorkloadSample) -> Self {
        Scope { range: s.full_range(), objs: s.all_objects(), qrys: s.all_queries() }
    }

    pub fn split(&self, s: &WorkloadSample, axis: Axis, at: u32) -> (Scope, Scope) {
        let (lr, rr) = self.range.split(axis, at);
        let coord = |i: &u32| {
            let o = &s.objects[*i as usize];
            if axis == Axis::X {
                o.cx
            } else {
                o.cy
            }
        };
        let (lo, ro): (Vec<u32>, Vec<u32>) = self.objs.iter().partition(|i| coord(i) < at);
        let lq = self.qrys.iter().copied().filter(|&i| s.queries[i as usize].span.lo(axis) < at).collect();
        let rq = self.qrys.iter().copied().filter(|&i| s.queries[i as usize].span.hi(axis) >= at).collect();
        (Scope { range: lr, objs: lo, qrys: lq }, Scope { range: rr, objs: ro, qrys: rq })
    }
}

/// Cut position leaving roughly `k/p` of the objects on the left. `None` when
/// every object sits in one lattice column along `axis`.
pub(crate) fn quantile_cut(s: &WorkloadSample, sc: &Scope, axis: Axis, k: usize, p: usize) -> Option<u32> {
    if sc.objs.len() < 2 {
        return None;
    }
    let mut v: Vec<u32> = sc
        .objs
        .iter()
        .map(|&i| {
            let o = &s.objects[i as usize];
            if axis == Axis::X {
                o.cx
            } else {
                o.cy
            }
        })
        .collect();
    v.sort_unstable();
    let n = v.len();
    let idx = ((n * k) as f64 / p as f64).round() as usize;
    let mut at = v[idx.clamp(1, n - 1)];
    if at == v[0] {
        at = *v.iter().find(|&&x| x > v[0])?;
    }
    // the median's own column goes to whichever side lands closer to the target
    let target = (n * k) as f64 / p as f64;
    let below = |c: u32| v.partition_point(|&x| x < c);
    let next = at + 1;
    if next < sc.range.hi(axis) && below(next) < n {
        let gap = |c: u32| (below(c) as f64 - target).abs();
        if gap(next) < gap(at) {
            at = next;
        }
    }
    Some(at)
}

/// Median split along the axis whose halves have the smaller `min(sim)`.
pub(crate) fn split_node_space(s: &WorkloadSample, sc: &Scope) -> Option<(Axis, u32, Scope, Scope, f64)> {
    let mut best: Option<(Axis, u32, Scope, Scope, f64)> = None;
    for axis in [Axis::X, Axis::Y] {
        let Some(at) = quantile_cut(s, sc, axis, 1, 2) else { continue };
        let (l, r) = sc.split(s, axis, at);
        let alpha = sample_similarity(s, &l.objs, &l.qrys).min(sample_similarity(s, &r.objs, &r.qrys));
        if best.as_ref().is_none_or(|b| alpha < b.4) {
            best = Some((axis, at, l, r, alpha));
        }
    }
    best
}

fn space_load(s: &WorkloadSample, sc: &Scope, c: &CostModel) -> f64 {
    worker_load(&space_counts(s, &sc.objs, &sc.qrys), c)
}

#[derive(Debug, Clone)]
pub(crate) enum Plan {
    Leaf(Scope, f64),
    Split { axis: Axis, at: u32, left: Box<Plan>, right: Box<Plan> },
}

impl Plan {
    fn total(&self) -> f64 {
        match self {
            Plan::Leaf(_, l) => *l,
            Plan::Split { left, right, .. } => left.total() + right.total(),
        }
    }
}

/// `p` leaves by recursive quantile cuts, choosing at each level the axis with the lighter halves.
pub(crate) fn space_plan(s: &WorkloadSample, sc: &Scope, p: usize, c: &CostModel) -> Option<Plan> {
    if p <= 1 {
        return Some(Plan::Leaf(sc.clone(), space_load(s, sc, c)));
    }
    let k = p / 2;
    let mut cands = Vec::new();
    for axis in [Axis::X, Axis::Y] {
        if let Some(at) = quantile_cut(s, sc, axis, k, p) {
            let (l, r) = sc.split(s, axis, at);
            let est = space_load(s, &l, c) + space_load(s, &r, c);
            cands.push((est, axis, at, l, r));
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (_, axis, at, l, r) in cands {
        if let (Some(lp), Some(rp)) = (space_plan(s, &l, k, c), space_plan(s, &r, p - k, c)) {
            return Some(Plan::Split { axis, at, left: Box::new(lp), right: Box::new(rp) });
        }
    }
    None
}

/// `p` term subsets of `universe` with their loads. Needs at least `p` terms that carry load.
pub(crate) fn text_plan(
    s: &WorkloadSample,
    sc: &Scope,
    universe: &TermSet,
    p: usize,
    c: &CostModel,
) -> Option<Vec<(TermSet, f64)>> {
    let loads = term_loads(s, &sc.objs, &sc.qrys, universe, c);
    if loads.iter().filter(|(_, l)| *l > 0.0).count() < p {
        return None;
    }
    let parts = text_partition(&loads, p);
    Some(
        parts
            .into_iter()
            .map(|(ts, _)| {
                let l = worker_load(&text_counts(s, &sc.objs, &sc.qrys, &ts), c);
                (ts, l)
            })
            .collect(),
    )
}

#[derive(Debug, Clone)]
pub(crate) enum Proposal {
    Space(Plan),
    Text(Vec<(TermSet, f64)>),
}

impl Proposal {
    pub fn total(&self) -> f64 {
        match self {
            Proposal::Space(p) => p.total(),
            Proposal::Text(v) => v.iter().map(|x| x.1).sum(),
        }
    }

    #[cfg(test)]
    fn is_text(&self) -> bool {
        matches!(self, Proposal::Text(_))
    }
}

#[derive(Debug, Clone)]
enum BKind {
    Internal { axis: Axis, at: u32, left: usize, right: usize },
    Space { load: f64, text_only: bool },
    Text(Vec<(TermSet, f64)>),
}

#[derive(Debug, Clone)]
struct BNode {
    scope: Scope,
    kind: BKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct UnitRef {
    node: usize,
    part: Option<usize>,
}

/// Mutable tree under construction; nodes keep their sample subsets.
struct Builder<'a> {
    s: &'a WorkloadSample,
    c: &'a CostModel,
    nodes: Vec<BNode>,
}

impl<'a> Builder<'a> {
    fn new(s: &'a WorkloadSample, c: &'a CostModel) -> Self {
        let root = Scope::root(s);
        let load = space_load(s, &root, c);
        Builder { s, c, nodes: vec![BNode { scope: root, kind: BKind::Space { load, text_only: false } }] }
    }

    fn push(&mut self, scope: Scope, text_only: bool) -> usize {
        let load = space_load(self.s, &scope, self.c);
        self.nodes.push(BNode { scope, kind: BKind::Space { load, text_only } });
        self.nodes.len() - 1
    }

    fn split(&mut self, node: usize, axis: Axis, at: u32, l: Scope, r: Scope) -> (usize, usize) {
        let text_only = matches!(self.nodes[node].kind, BKind::Space { text_only: true, .. });
        let left = self.push(l, text_only);
        let right = self.push(r, text_only);
        self.nodes[node].kind = BKind::Internal { axis, at, left, right };
        (left, right)
    }

    fn set_text_only(&mut self, node: usize) {
        if let BKind::Space { text_only, .. } = &mut self.nodes[node].kind {
            *text_only = true;
        }
    }

    fn units(&self) -> Vec<(UnitRef, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            match &self.nodes[n].kind {
                BKind::Internal { left, right, .. } => {
                    stack.push(*right);
                    stack.push(*left);
                }
                BKind::Space { load, .. } => out.push((UnitRef { node: n, part: None }, *load)),
                BKind::Text(parts) => {
                    for (i, (_, l)) in parts.iter().enumerate() {
                        out.push((UnitRef { node: n, part: Some(i) }, *l));
                    }
                }
            }
        }
        out
    }

    /// What cutting a unit into `p` pieces would look like, without doing it.
    fn propose(&self, u: UnitRef, p: usize) -> Option<Proposal> {
        let n = &self.nodes[u.node];
        match (&n.kind, u.part) {
            (BKind::Text(parts), Some(i)) => text_plan(self.s, &n.scope, &parts[i].0, p, self.c).map(Proposal::Text),
            (BKind::Space { text_only, .. }, None) => {
                let universe = query_term_universe(self.s, &n.scope.qrys);
                let text = text_plan(self.s, &n.scope, &universe, p, self.c).map(Proposal::Text);
                if *text_only {
                    return text;
                }
                let space = space_plan(self.s, &n.scope, p, self.c).map(Proposal::Space);
                match (space, text) {
                    (Some(a), Some(b)) => Some(if b.total() < a.total() { b } else { a }),
                    (a, b) => a.or(b),
                }
            }
            _ => None,
        }
    }

    fn apply(&mut self, u: UnitRef, prop: Proposal) {
        match prop {
            Proposal::Text(new_parts) => match (&mut self.nodes[u.node].kind, u.part) {
                (BKind::Text(parts), Some(i)) => {
                    parts.splice(i..=i, new_parts);
                }
                (kind, _) => *kind = BKind::Text(new_parts),
            },
            Proposal::Space(plan) => self.apply_plan(u.node, plan),
        }
    }

    fn apply_plan(&mut self, node: usize, plan: Plan) {
        match plan {
            Plan::Leaf(scope, load) => {
                let text_only = matches!(self.nodes[node].kind, BKind::Space { text_only: true, .. });
                self.nodes[node] = BNode { scope, kind: BKind::Space { load, text_only } };
            }
            Plan::Split { axis, at, left, right } => {
                let scope = self.nodes[node].scope.clone();
                let (l, r) = scope.split(self.s, axis, at);
                let (li, ri) = self.split(node, axis, at, l, r);
                self.apply_plan(li, *left);
                self.apply_plan(ri, *right);
            }
        }
    }

    fn to_node(&self, n: usize) -> KdtNode {
        match &self.nodes[n].kind {
            BKind::Internal { axis, at, left, right } => KdtNode::Internal {
                axis: *axis,
                at: *at,
                left: Box::new(self.to_node(*left)),
                right: Box::new(self.to_node(*right)),
            },
            BKind::Space { .. } => KdtNode::SpaceLeaf { worker: 0 },
            BKind::Text(parts) => KdtNode::TextLeaf {
                parts: parts.iter().map(|(t, _)| TermPart { terms: t.clone(), worker: 0 }).collect(),
            },
        }
    }

    fn finish(self, params: &PartitionParams) -> Partitioning {
        let loads: Vec<f64> = self.units().into_iter().map(|(_, l)| l).collect();
        let assignment = merge_nodes_into_partitions(&loads, params.m);
        let mut tree = KdtTree { frame: self.s.frame, params: params.clone(), root: self.to_node(0) };
        tree.assign_workers(&assignment.unit_worker);
        Partitioning { tree, assignment }
    }
}

fn tree_params(s: &WorkloadSample, params: &PartitionParams) -> Result<PartitionParams> {
    params.validate()?;
    let mut p = params.clone();
    p.lattice_level = s.level;
    Ok(p)
}

/// Hybrid space/text partitioning of a sample.
pub fn partition_sample(s: &WorkloadSample, params: &PartitionParams, costs: &CostModel) -> Result<Partitioning> {
    let params = tree_params(s, params)?;
    let mut b = Builder::new(s, costs);
    if params.m == 1 {
        return Ok(b.finish(&params));
    }

    // Phase 1: isolate regions where object and query vocabularies diverge.
    // Half the leaf budget is reserved for the balancing loop.
    let budget = (params.theta / 2).max(1);
    let mut pending: VecDeque<usize> = VecDeque::from([0]);
    let mut decided = 0usize;
    while let Some(n) = pending.pop_front() {
        let sc = &b.nodes[n].scope;
        if sc.objs.len() < params.min_split_objects {
            decided += 1;
            continue;
        }
        let sim = sample_similarity(s, &sc.objs, &sc.qrys);
        if sim >= params.delta || decided + pending.len() + 2 > budget {
            decided += 1;
            continue;
        }
        match split_node_space(s, sc) {
            Some((axis, at, l, r, alpha)) if (alpha - sim).abs() > params.epsilon_sim => {
                let (li, ri) = b.split(n, axis, at, l, r);
                pending.push_back(li);
                pending.push_back(ri);
            }
            _ => {
                b.set_text_only(n);
                decided += 1;
            }
        }
    }

    // Phase 2: reach m units with the cheapest allocation of pieces.
    let units = b.units();
    if units.len() < params.m {
        let kmax = params.m - units.len() + 1;
        let mut memo: HashMap<(usize, usize), Proposal> = HashMap::new();
        let mut cost = Vec::with_capacity(units.len());
        for (i, (u, load)) in units.iter().enumerate() {
            let mut row = vec![*load];
            for k in 2..=kmax {
                match b.propose(*u, k) {
                    Some(p) => {
                        row.push(p.total());
                        memo.insert((i, k), p);
                    }
                    None => row.push(f64::INFINITY),
                }
            }
            cost.push(row);
        }
        let alloc = compute_number_partitions(&cost, params.m).map_err(|_| {
            Error::partition(format!("sample cannot be cut into {} units; too few distinct locations or terms", params.m))
        })?;
        for (i, k) in alloc.counts.iter().enumerate() {
            if *k > 1 {
                let p = memo.remove(&(i, *k)).expect("allocated split was evaluated");
                b.apply(units[i].0, p);
            }
        }
    }

    // Balance loop: merge, and cut the heaviest unit while the factor is too high.
    loop {
        let units = b.units();
        let loads: Vec<f64> = units.iter().map(|u| u.1).collect();
        let merged = merge_nodes_into_partitions(&loads, params.m);
        if merged.balance_factor() <= params.sigma || units.len() >= params.theta {
            break;
        }
        let mut order: Vec<usize> = (0..units.len()).collect();
        order.sort_by(|&a, &b| loads[b].total_cmp(&loads[a]));
        let mut done = false;
        for i in order {
            if let Some(p) = b.propose(units[i].0, 2) {
                b.apply(units[i].0, p);
                done = true;
                break;
            }
        }
        if !done {
            break;
        }
    }
    Ok(b.finish(&params))
}

/// Median kd-tree, leaves cut breadth-first until there are at least `m`.
pub fn kd_baseline(s: &WorkloadSample, params: &PartitionParams, costs: &CostModel) -> Result<Partitioning> {
    let params = tree_params(s, params)?;
    let mut b = Builder::new(s, costs);
    let mut queue: VecDeque<(usize, usize)> = VecDeque::from([(0, 0)]);
    let mut leaves = 1;
    while leaves < params.m {
        let Some((n, depth)) = queue.pop_front() else {
            return Err(Error::partition(format!("sample cannot be cut into {} regions", params.m)));
        };
        let first = if depth % 2 == 0 { Axis::X } else { Axis::Y };
        let sc = b.nodes[n].scope.clone();
        let cut = [first, first.other()].into_iter().find_map(|a| quantile_cut(s, &sc, a, 1, 2).map(|at| (a, at)));
        if let Some((axis, at)) = cut {
            let (l, r) = sc.split(s, axis, at);
            let (li, ri) = b.split(n, axis, at, l, r);
            queue.push_back((li, depth + 1));
            queue.push_back((ri, depth + 1));
            leaves += 1;
        }
    }
    Ok(b.finish(&params))
}

/// Cells per axis of the grid baseline.
pub const GRID_BASELINE_LEVEL: u32 = 6;

/// Uniform 64x64 grid, cells packed onto workers.
pub fn grid_baseline(s: &WorkloadSample, params: &PartitionParams, costs: &CostModel) -> Result<Partitioning> {
    let params = tree_params(s, params)?;
    if s.level < GRID_BASELINE_LEVEL {
        return Err(Error::invalid(format!("grid baseline needs lattice level >= {GRID_BASELINE_LEVEL}")));
    }
    let cell = 1u32 << (s.level - GRID_BASELINE_LEVEL);
    let mut b = Builder::new(s, costs);
    let mut stack = vec![0usize];
    while let Some(n) = stack.pop() {
        let sc = b.nodes[n].scope.clone();
        let axis = if sc.range.extent(Axis::X) > cell {
            Axis::X
        } else if sc.range.extent(Axis::Y) > cell {
            Axis::Y
        } else {
            continue;
        };
        let at = sc.range.lo(axis) + sc.range.extent(axis) / 2;
        let (l, r) = sc.split(s, axis, at);
        let (li, ri) = b.split(n, axis, at, l, r);
        stack.push(ri);
        stack.push(li);
    }
    Ok(b.finish(&params))
}

/// Whole space, query vocabulary dealt into `m` subsets by term load.
pub fn text_baseline(s: &WorkloadSample, params: &PartitionParams, costs: &CostModel) -> Result<Partitioning> {
    let params = tree_params(s, params)?;
    let mut b = Builder::new(s, costs);
    let sc = b.nodes[0].scope.clone();
    let universe = query_term_universe(s, &sc.qrys);
    let loads = term_loads(s, &sc.objs, &sc.qrys, &universe, costs);
    let parts = text_partition(&loads, params.m)
        .into_iter()
        .map(|(ts, _)| {
            let l = worker_load(&text_counts(s, &sc.objs, &sc.qrys, &ts), costs);
            (ts, l)
        })
        .collect();
    b.nodes[0].kind = BKind::Text(parts);
    Ok(b.finish(&params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BooleanExpr, GeoPoint, Rect, SpaceFrame, SpatioTextualObject, StsQuery, TermId, TermStats};

    fn t(i: u32) -> TermId {
        TermId(i)
    }

    fn obj(id: u64, x: f64, y: f64, terms: &[u32]) -> SpatioTextualObject {
        SpatioTextualObject::new(id, GeoPoint::new(x, y), terms.iter().map(|&i| t(i)).collect()).unwrap()
    }

    fn and_q(id: u64, r: Rect, terms: &[u32]) -> StsQuery {
        let ts: Vec<TermId> = terms.iter().map(|&i| t(i)).collect();
        StsQuery::new(id, BooleanExpr::all_of(&ts).unwrap(), r).unwrap()
    }

    fn sample(objs: &[SpatioTextualObject], qrys: &[StsQuery], level: u32) -> WorkloadSample {
        let mut stats = TermStats::new();
        for o in objs {
            stats.observe(&o.terms);
        }
        let frame = SpaceFrame::new(Rect::new(0.0, 0.0, 64.0, 64.0));
        WorkloadSample::new(objs, qrys, &stats, frame, level)
    }

    #[test]
    fn co_located_objects_cannot_be_split() {
        let objs: Vec<_> = (0..10).map(|i| obj(i, 5.0, 5.0, &[1])).collect();
        let s = sample(&objs, &[], 6);
        assert!(split_node_space(&s, &Scope::root(&s)).is_none());
    }

    #[test]
    fn points_on_a_horizontal_line_split_along_x() {
        let objs: Vec<_> = (0..40).map(|i| obj(i, i as f64 * 1.5 + 0.5, 10.0, &[1, 2])).collect();
        let qrys = vec![and_q(1, Rect::new(0.0, 9.0, 64.0, 11.0), &[1])];
        let s = sample(&objs, &qrys, 6);
        let root = Scope::root(&s);
        let sim = sample_similarity(&s, &root.objs, &root.qrys);
        let (axis, _, l, r, alpha) = split_node_space(&s, &root).unwrap();
        assert_eq!(axis, Axis::X);
        assert_eq!(l.objs.len(), 20);
        assert_eq!(r.objs.len(), 20);
        assert!((alpha - sim).abs() < 1e-12);
    }

    #[test]
    fn split_prefers_axis_with_divergent_halves() {
        // top half: objects talk about 1, queries too. bottom half: objects talk about 2, queries about 3.
        let mut objs = Vec::new();
        let mut qrys = Vec::new();
        for i in 0..40u64 {
            let x = (i % 20) as f64 * 3.0 + 1.0;
            if i < 20 {
                objs.push(obj(i, x, 50.0, &[1]));
                qrys.push(and_q(i, Rect::new(x, 49.0, x + 1.0, 51.0), &[1]));
            } else {
                objs.push(obj(i, x, 10.0, &[2]));
                qrys.push(and_q(i, Rect::new(x, 9.0, x + 1.0, 11.0), &[3]));
            }
        }
        let s = sample(&objs, &qrys, 6);
        let root = Scope::root(&s);
        let (axis, _, _, _, alpha) = split_node_space(&s, &root).unwrap();
        assert_eq!(axis, Axis::Y);
        let cx = quantile_cut(&s, &root, Axis::X, 1, 2).unwrap();
        let (l, r) = root.split(&s, Axis::X, cx);
        let ax = sample_similarity(&s, &l.objs, &l.qrys).min(sample_similarity(&s, &r.objs, &r.qrys));
        assert!(alpha < ax);
        assert_eq!(alpha, 0.0);
    }

    #[test]
    fn text_split_of_equal_terms_is_even() {
        let objs: Vec<_> = (0..4).map(|i| obj(i, 5.0, 5.0, &[i as u32])).collect();
        let qrys: Vec<_> = (0..4).map(|i| and_q(i, Rect::new(0.0, 0.0, 10.0, 10.0), &[i as u32])).collect();
        let s = sample(&objs, &qrys, 6);
        let root = Scope::root(&s);
        let universe = query_term_universe(&s, &root.qrys);
        let parts = text_plan(&s, &root, &universe, 2, &CostModel::default()).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].0.len(), 2);
        assert_eq!(parts[1].0.len(), 2);
        assert_eq!(parts[0].1, parts[1].1);
    }

    #[test]
    fn whole_region_queries_favour_a_text_split() {
        let mut objs = Vec::new();
        for i in 0..64u64 {
            objs.push(obj(i, (i % 8) as f64 * 8.0 + 1.0, (i / 8) as f64 * 8.0 + 1.0, &[(i % 4) as u32]));
        }
        let qrys: Vec<_> = (0..16).map(|i| and_q(i, Rect::new(0.0, 0.0, 64.0, 64.0), &[(i % 4) as u32])).collect();
        let s = sample(&objs, &qrys, 6);
        let c = CostModel::default();
        let b = Builder::new(&s, &c);
        let p = b.propose(UnitRef { node: 0, part: None }, 2).unwrap();
        assert!(p.is_text());
    }

    #[test]
    fn point_queries_with_shared_vocabulary_favour_a_space_split() {
        let mut objs = Vec::new();
        let mut qrys = Vec::new();
        for i in 0..64u64 {
            let (x, y) = ((i % 8) as f64 * 8.0 + 1.0, (i / 8) as f64 * 8.0 + 1.0);
            objs.push(obj(i, x, y, &[1, 2, 3, 4]));
            qrys.push(and_q(i, Rect::new(x, y, x, y), &[(i % 4) as u32 + 1]));
        }
        let s = sample(&objs, &qrys, 6);
        let c = CostModel::default();
        let b = Builder::new(&s, &c);
        let p = b.propose(UnitRef { node: 0, part: None }, 2).unwrap();
        assert!(!p.is_text());
    }

    #[test]
    fn unsplittable_node_has_no_proposal() {
        let objs: Vec<_> = (0..10).map(|i| obj(i, 5.0, 5.0, &[1])).collect();
        let qrys = vec![and_q(1, Rect::new(0.0, 0.0, 10.0, 10.0), &[1])];
        let s = sample(&objs, &qrys, 6);
        let c = CostModel::default();
        let b = Builder::new(&s, &c);
        assert!(b.propose(UnitRef { node: 0, part: None }, 2).is_none());
        assert!(partition_sample(&s, &PartitionParams::new(2), &c).is_err());
    }
}
