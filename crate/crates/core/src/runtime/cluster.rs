use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::sync::Arc;
use std::time::Instant;

use super::message::{Channel, Message};
use super::metrics::{quantile, MetricsReport, MigrationEvent, WindowMetrics};
use super::RunConfig;
use crate::adjust::{
    compute_tau, global_check_and_repartition, phase1_adjust, select_cells, should_retire, Directive, MigrationAlgo,
    shed_fraction, WorkerTotals,
};
use crate::dispatch::{detect_imbalance, CellId, GridTIndex, H2Delta, RoutingStats};
use crate::error::{Error, Result};
use crate::model::{
    MatchResult, QueryId, SpaceFrame, SpatioTextualObject, StreamElement, StsQuery, TermId, TermStats, WorkerId,
};
use crate::partition::{frame_of, grid_baseline, KdtTree, WorkloadSample};
use crate::worker::{encoded_size, Gi2Index, MigrationPayload};

/// Final state of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Deduplicated matches, sorted.
    pub matches: Vec<MatchResult>,
    pub metrics: MetricsReport,
    pub tree: KdtTree,
}

struct Epoch {
    id: u32,
    tree: KdtTree,
    grids: Vec<GridTIndex>,
}

struct Worker {
    indexes: Vec<(u32, Gi2Index)>,
    inbox: Channel,
    busy_until: f64,
}

impl Worker {
    fn index(&mut self, epoch: u32) -> &mut Gi2Index {
        &mut self.indexes.iter_mut().find(|(e, _)| *e == epoch).expect("worker has an index per live epoch").1
    }

    /// Processes one data message; returns the work done and the matches found.
    fn handle(&mut self, msg: Message, costs: &crate::model::CostModel) -> (f64, Vec<MatchResult>) {
        match msg {
            Message::Object { epoch, object, .. } => {
                let ix = self.index(epoch);
                let before = ix.scanned();
                let res = ix.match_object(&object);
                (costs.c2 + costs.c1 * (ix.scanned() - before) as f64, res)
            }
            Message::QueryInsert { epoch, query, postings } => {
                self.index(epoch).insert_postings(&query, &postings);
                (costs.c3, Vec::new())
            }
            Message::QueryDelete { epoch, id, .. } => {
                self.index(epoch).delete_query(id);
                (costs.c4, Vec::new())
            }
            _ => (0.0, Vec::new()),
        }
    }

    /// Handles migration control messages. Prepare returns the exported cells.
    fn control(&mut self, msg: &Message, fail: bool) -> Result<Option<MigrationPayload>> {
        match msg {
            Message::MigratePrepare { epoch, cells, terms: None } => self.index(*epoch).export_cells(cells).map(Some),
            Message::MigratePrepare { epoch, cells, terms: Some(ts) } => {
                self.index(*epoch).export_terms(cells[0], ts).map(Some)
            }
            Message::MigratePayload { epoch, bytes } => {
                if fail {
                    return Err(Error::Migration("injected import failure".into()));
                }
                let p = MigrationPayload::decode(bytes)?;
                self.index(*epoch).import_cells(&p)?;
                Ok(None)
            }
            _ => Ok(None),
        }
    }
}

enum RouteOp {
    Move(CellId, Vec<TermId>),
    Reassign(CellId),
}

struct Handoff {
    epoch: u32,
    src: WorkerId,
    dst: WorkerId,
    started: u64,
    commit_at: u64,
    payload: MigrationPayload,
    bytes: Arc<[u8]>,
    ops: Vec<RouteOp>,
    text_before: Vec<(CellId, bool)>,
    /// Per dispatcher: tuple position and the held message.
    buffers: Vec<Vec<(u64, Message)>>,
    event: MigrationEvent,
    fail: bool,
}

struct OpenTuple {
    arrival: f64,
    wall: Instant,
    remaining: u32,
    done: f64,
}

struct Window {
    routing: RoutingStats,
    latencies: Vec<f64>,
    start: Instant,
    tuples: u64,
}

/// Dispatchers, workers and the merger driven one tuple at a time.
pub struct Cluster {
    cfg: RunConfig,
    frame: SpaceFrame,
    epochs: Vec<Epoch>,
    workers: Vec<Worker>,
    control: Vec<Channel>,
    merger_in: Channel,
    merged: HashSet<MatchResult>,
    handoff: Option<Handoff>,
    tuple: u64,
    window_idx: u64,
    win: Window,
    metrics: MetricsReport,
    live: BTreeMap<QueryId, Arc<StsQuery>>,
    recent: VecDeque<SpatioTextualObject>,
    open: HashMap<u64, OpenTuple>,
    migrations_started: usize,
    started: Instant,
}

fn dispatcher_of(id: u64, d: usize) -> usize {
    let mut z = id.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ((z ^ (z >> 31)) % d as u64) as usize
}

impl Cluster {
    /// Partitions the warm-up prefix and sets up routing and worker state.
    pub fn new(cfg: RunConfig, warmup: &[StreamElement]) -> Result<Self> {
        cfg.validate()?;
        let mut stats = TermStats::new();
        let mut locs = Vec::new();
        for e in warmup {
            if let StreamElement::Object(o) = e {
                stats.observe(&o.terms);
                locs.push(o.loc);
            }
        }
        let frame = frame_of(locs.iter());
        let sample = WorkloadSample::from_elements(warmup, &stats, frame, cfg.params.lattice_level);
        let part = cfg
            .strategy
            .build(&sample, &cfg.params, &cfg.costs)
            .or_else(|_| grid_baseline(&sample, &cfg.params, &cfg.costs))?;
        let m = cfg.m();
        let mut c = Cluster {
            frame,
            epochs: Vec::new(),
            workers: (0..m).map(|_| Worker { indexes: Vec::new(), inbox: Channel::default(), busy_until: 0.0 }).collect(),
            control: vec![Channel::default(); cfg.d],
            merger_in: Channel::default(),
            merged: HashSet::new(),
            handoff: None,
            tuple: 0,
            window_idx: 0,
            win: Window { routing: RoutingStats::new(m), latencies: Vec::new(), start: Instant::now(), tuples: 0 },
            metrics: MetricsReport::default(),
            live: BTreeMap::new(),
            recent: VecDeque::new(),
            open: HashMap::new(),
            migrations_started: 0,
            started: Instant::now(),
            cfg,
        };
        c.add_epoch(part.tree, Arc::new(stats));
        Ok(c)
    }

    fn add_epoch(&mut self, tree: KdtTree, stats: Arc<TermStats>) {
        let id = self.epochs.last().map_or(0, |e| e.id + 1);
        let grid = GridTIndex::from_tree(&tree, stats.clone(), self.cfg.grid_level);
        for (w, worker) in self.workers.iter_mut().enumerate() {
            let mut ix = Gi2Index::new(self.frame, grid.level(), stats.clone()).with_profiles();
            ix.own_cells(grid.cells_of_worker(w));
            for c in grid.cells_of_worker(w) {
                ix.set_text_partitioned(c, grid.route(c).is_text());
            }
            worker.indexes.push((id, ix));
        }
        self.epochs.push(Epoch { id, tree, grids: vec![grid; self.cfg.d] });
    }

    fn epoch_pos(&self, id: u32) -> usize {
        self.epochs.iter().position(|e| e.id == id).expect("live epoch")
    }

    /// The tree currently used for new queries.
    pub fn tree(&self) -> &KdtTree {
        &self.epochs.last().expect("at least one epoch").tree
    }

    pub fn grid(&self) -> &GridTIndex {
        &self.epochs.last().expect("at least one epoch").grids[0]
    }

    pub fn dual_routing(&self) -> bool {
        self.epochs.len() > 1
    }

    pub fn migrating(&self) -> bool {
        self.handoff.is_some()
    }

    pub fn tuples(&self) -> u64 {
        self.tuple
    }

    /// Matches found so far, deduplicated and sorted.
    pub fn matches(&self) -> Vec<MatchResult> {
        let mut v: Vec<MatchResult> = self.merged.iter().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn metrics(&self) -> &MetricsReport {
        &self.metrics
    }

    pub fn add_malformed(&mut self, n: u64) {
        self.metrics.malformed += n;
    }

    /// Feeds one stream element.
    pub fn push(&mut self, e: &StreamElement) -> Result<()> {
        let i = self.tuple;
        if self.handoff.as_ref().is_some_and(|h| h.commit_at <= i) {
            self.commit()?;
        }
        self.tuple += 1;
        self.win.tuples += 1;
        self.metrics.processed += 1;
        let now = i as f64;
        self.open.insert(i, OpenTuple { arrival: now, wall: Instant::now(), remaining: 0, done: now });
        let k = dispatcher_of(e.id(), self.cfg.d);
        for (w, msg) in self.route(k, e) {
            self.deliver(k, i, w, msg, now);
        }
        self.try_close(i);
        if self.tuple.is_multiple_of(self.cfg.window as u64) {
            self.end_window()?;
        }
        Ok(())
    }

    fn route(&mut self, k: usize, e: &StreamElement) -> Vec<(WorkerId, Message)> {
        let mut out = Vec::new();
        match e {
            StreamElement::Object(o) => {
                let obj = Arc::new(o.clone());
                let mut any = false;
                for ep in &self.epochs {
                    let r = ep.grids[k].route_object(&obj);
                    self.win.routing.object(&r.decision);
                    any |= !r.decision.discarded;
                    let live: Arc<[TermId]> = r.live_terms.into();
                    for &w in &r.decision.destinations {
                        out.push((w, Message::Object { epoch: ep.id, object: obj.clone(), cell: r.cell, live_terms: live.clone() }));
                    }
                }
                if !any {
                    self.metrics.discarded += 1;
                }
                if self.cfg.global_every.is_some() {
                    self.recent.push_back(o.clone());
                    if self.recent.len() > self.cfg.global_sample {
                        self.recent.pop_front();
                    }
                }
            }
            StreamElement::Insert(q) => {
                let q = Arc::new(q.clone());
                let pos = self.epochs.len() - 1;
                out = self.route_insert(pos, k, &q);
                self.live.insert(q.id, q);
            }
            StreamElement::Delete(q) => {
                let pos = if self.epochs.len() > 1 && self.epochs[0].grids[k].is_live(q.id) { 0 } else { self.epochs.len() - 1 };
                let ep = &mut self.epochs[pos];
                let (qr, delta) = ep.grids[k].route_query_delete(q);
                self.win.routing.delete(&qr.decision());
                let q = Arc::new(q.clone());
                for (w, postings) in qr.postings {
                    out.push((w, Message::QueryDelete { epoch: ep.id, id: q.id, query: q.clone(), postings }));
                }
                self.broadcast(pos, k, delta);
                self.live.remove(&q.id);
            }
        }
        out
    }

    fn route_insert(&mut self, pos: usize, k: usize, q: &Arc<StsQuery>) -> Vec<(WorkerId, Message)> {
        let ep = &mut self.epochs[pos];
        let (qr, delta) = ep.grids[k].route_query_insert(q);
        self.win.routing.insert(&qr.decision());
        let id = ep.id;
        let out = qr
            .postings
            .into_iter()
            .map(|(w, postings)| (w, Message::QueryInsert { epoch: id, query: q.clone(), postings }))
            .collect();
        self.broadcast(pos, k, delta);
        out
    }

    /// Ships a live-term change to the other replicas and applies it in order.
    fn broadcast(&mut self, pos: usize, from: usize, delta: H2Delta) {
        if self.cfg.d == 1 {
            return;
        }
        let delta = Arc::new(delta);
        let epoch = self.epochs[pos].id;
        for j in (0..self.cfg.d).filter(|&j| j != from) {
            self.control[j].send(self.tuple, self.tuple as f64, Message::H2Delta { epoch, delta: delta.clone() });
            while let Some(env) = self.control[j].recv() {
                if let Message::H2Delta { epoch, delta } = env.msg {
                    let p = self.epoch_pos(epoch);
                    self.epochs[p].grids[j].apply_delta(&delta);
                }
            }
        }
    }

    fn deliver(&mut self, k: usize, tuple: u64, w: WorkerId, msg: Message, ready: f64) {
        if let Some(t) = self.open.get_mut(&tuple) {
            t.remaining += 1;
        }
        if let Some(h) = self.handoff.as_mut() {
            if w == h.src || w == h.dst {
                h.buffers[k].push((tuple, msg));
                return;
            }
        }
        self.workers[w].inbox.send(tuple, ready, msg);
        self.drain(w);
    }

    fn drain(&mut self, w: WorkerId) {
        while let Some(env) = self.workers[w].inbox.recv() {
            let worker = &mut self.workers[w];
            let (work, results) = worker.handle(env.msg, &self.cfg.costs);
            let done = env.ready.max(worker.busy_until) + work * self.cfg.tick_per_work;
            worker.busy_until = done;
            for r in results {
                self.merger_in.send(env.tuple, done, Message::Match(r));
            }
            while let Some(m) = self.merger_in.recv() {
                if let Message::Match(r) = m.msg {
                    if !self.merged.insert(r) {
                        self.metrics.duplicates += 1;
                    }
                }
            }
            if let Some(t) = self.open.get_mut(&env.tuple) {
                t.remaining -= 1;
                t.done = t.done.max(done);
            }
            self.try_close(env.tuple);
        }
    }

    fn try_close(&mut self, tuple: u64) {
        if self.open.get(&tuple).is_some_and(|t| t.remaining == 0) {
            let t = self.open.remove(&tuple).unwrap();
            let ticks = t.done - t.arrival;
            self.metrics.latency_ticks.record(ticks);
            self.metrics.latency_us.record(t.wall.elapsed().as_secs_f64() * 1e6);
            self.win.latencies.push(ticks);
        }
    }

    fn end_window(&mut self) -> Result<()> {
        self.record_window();
        if self.handoff.is_none() {
            if self.epochs.len() > 1 {
                self.maybe_retire();
            } else {
                let due = self.cfg.global_every.is_some_and(|n| self.window_idx.is_multiple_of(n));
                if !(due && self.maybe_repartition()) && self.cfg.migration != MigrationAlgo::Off {
                    self.local_adjust()?;
                }
            }
        }
        for w in &mut self.workers {
            for (_, ix) in &mut w.indexes {
                ix.reset_window();
            }
        }
        Ok(())
    }

    fn record_window(&mut self) {
        self.window_idx += 1;
        let loads = self.win.routing.loads(&self.cfg.costs);
        let m = self.cfg.m();
        let mut lat = std::mem::take(&mut self.win.latencies);
        self.metrics.windows.push(WindowMetrics {
            window: self.window_idx,
            tuples: self.win.tuples,
            wall_secs: self.win.start.elapsed().as_secs_f64(),
            p50_latency: quantile(&mut lat, 0.5),
            p99_latency: quantile(&mut lat, 0.99),
            loads,
            routing: std::mem::replace(&mut self.win.routing, RoutingStats::new(m)),
        });
        self.win.start = Instant::now();
        self.win.tuples = 0;
    }

    /// Local adjustment between the most and least loaded workers of the last window.
    fn local_adjust(&mut self) -> Result<()> {
        let loads = self.metrics.windows.last().expect("window recorded").loads.clone();
        let Some((o, l)) = detect_imbalance(&loads, self.cfg.params.sigma) else { return Ok(()) };
        let t0 = Instant::now();
        let epoch = self.epochs[0].id;
        let p = self.cfg.phase1_cells;
        let costs = self.cfg.costs;
        let stats_o = self.workers[o].index(epoch).cell_stats();
        let mut top: Vec<&crate::worker::CellStat> = stats_o.iter().filter(|s| s.load > 0.0).collect();
        top.sort_by(|a, b| b.load.total_cmp(&a.load).then(a.cell.cmp(&b.cell)));
        top.truncate(p);
        let over: Vec<_> = top
            .iter()
            .map(|s| (s.load, self.workers[o].index(epoch).cell_profile(s.cell).expect("owned")))
            .collect();
        let under: Vec<_> = top.iter().filter_map(|s| self.workers[l].index(epoch).cell_profile(s.cell)).collect();
        let totals = [o, l].map(|w| {
            let ix = self.workers[w].index(epoch);
            WorkerTotals::new(ix.window_objects() as f64, ix.live_queries() as f64)
        });
        let directives = phase1_adjust(&over, &under, p, &costs, totals[0], totals[1]);

        let load_of: HashMap<CellId, f64> = stats_o.iter().map(|s| (s.cell, s.load)).collect();
        let sum_o: f64 = stats_o.iter().map(|s| s.load).sum();
        let share = if loads[o] > 0.0 { compute_tau(loads[o], loads[l]) / loads[o] } else { 0.0 };
        let mut tau = shed_fraction(totals[0], share, &costs) * sum_o;
        for d in &directives {
            tau -= match d {
                Directive::Split { cell, moved, .. } => load_of[cell] * moved,
                Directive::Merge { cell, .. } => load_of[cell],
            };
        }
        let touched: HashSet<CellId> = directives.iter().map(|d| d.cell()).collect();
        let rest: Vec<_> = stats_o.iter().filter(|s| !touched.contains(&s.cell)).cloned().collect();
        let seed = self.cfg.seed ^ self.window_idx;
        let mut plan = select_cells(self.cfg.migration, &rest, tau, seed);
        if plan.infeasible {
            // retry once with half the budget
            plan = select_cells(self.cfg.migration, &rest, tau / 2.0, seed);
            if plan.infeasible {
                plan.cells.clear();
            }
        }
        let plan_ms = t0.elapsed().as_secs_f64() * 1e3;
        if plan.cells.is_empty() && directives.is_empty() {
            return Ok(());
        }

        let mut event = MigrationEvent::local(self.window_idx, o, l, self.cfg.migration);
        event.plan_ms = plan_ms;
        event.phase1 = directives.len();
        event.n_cells = plan.cells.len();
        event.sum_load = plan.load;
        event.sum_size = plan.cost;

        let mut msgs = Vec::new();
        let mut ops = Vec::new();
        for d in &directives {
            match d {
                Directive::Split { cell, moved_terms, .. } => {
                    msgs.push(Message::MigratePrepare { epoch, cells: vec![*cell], terms: Some(moved_terms.clone()) });
                    ops.push(RouteOp::Move(*cell, moved_terms.clone()));
                }
                Directive::Merge { cell, .. } => {
                    msgs.push(Message::MigratePrepare { epoch, cells: vec![*cell], terms: None });
                    ops.push(RouteOp::Reassign(*cell));
                }
            }
        }
        if !plan.cells.is_empty() {
            msgs.push(Message::MigratePrepare { epoch, cells: plan.cells.clone(), terms: None });
            ops.extend(plan.cells.iter().map(|&c| RouteOp::Reassign(c)));
        }
        let text_before: Vec<(CellId, bool)> = stats_o.iter().filter(|s| touched.contains(&s.cell) || plan.cells.contains(&s.cell)).map(|s| (s.cell, s.text_partitioned)).collect();
        let mut payload = MigrationPayload::default();
        for msg in &msgs {
            let part = self.workers[o].control(msg, false)?.expect("prepare exports");
            payload.cells.extend(part.cells);
        }
        let bytes: Arc<[u8]> = payload.encode().into();
        event.payload_bytes = bytes.len();
        let fail = self.cfg.fail_migration == Some(self.migrations_started);
        self.migrations_started += 1;
        let commit_at = self.tuple + 1 + bytes.len() as u64 / self.cfg.bytes_per_tick;
        self.handoff = Some(Handoff {
            epoch,
            src: o,
            dst: l,
            started: self.tuple,
            commit_at,
            payload,
            bytes,
            ops,
            text_before,
            buffers: vec![Vec::new(); self.cfg.d],
            event,
            fail,
        });
        Ok(())
    }

    /// Installs the moved cells, switches routing and releases held messages.
    fn commit(&mut self) -> Result<()> {
        let Some(mut h) = self.handoff.take() else { return Ok(()) };
        let pos = self.epoch_pos(h.epoch);
        let imported = self.workers[h.dst].control(&Message::MigratePayload { epoch: h.epoch, bytes: h.bytes.clone() }, h.fail);
        match imported {
            Ok(_) => {
                for g in &mut self.epochs[pos].grids {
                    for op in &h.ops {
                        match op {
                            RouteOp::Move(c, ts) => g.move_terms(*c, ts, h.dst),
                            RouteOp::Reassign(c) => g.reassign(*c, h.src, h.dst),
                        }
                    }
                }
                let grid = &self.epochs[pos].grids[0];
                for &(c, _) in &h.text_before {
                    let text = grid.route(c).is_text();
                    self.workers[h.src].index(h.epoch).set_text_partitioned(c, text);
                    self.workers[h.dst].index(h.epoch).set_text_partitioned(c, text);
                }
            }
            Err(_) => {
                self.workers[h.src].index(h.epoch).import_cells(&h.payload)?;
                for &(c, t) in &h.text_before {
                    self.workers[h.src].index(h.epoch).set_text_partitioned(c, t);
                }
                h.event.rolled_back = true;
            }
        }
        self.workers[h.src].control(&Message::MigrateCommit { epoch: h.epoch }, false)?;
        self.workers[h.dst].control(&Message::MigrateCommit { epoch: h.epoch }, false)?;

        let now = self.tuple as f64;
        let mut held: Vec<(u64, usize, Message)> =
            h.buffers.drain(..).enumerate().flat_map(|(k, b)| b.into_iter().map(move |(t, m)| (t, k, m))).collect();
        held.sort_by_key(|x| x.0);
        let pair = [h.src, h.dst];
        let mut i = 0;
        while i < held.len() {
            let (tuple, k) = (held[i].0, held[i].1);
            let mut j = i;
            let mut postings: Vec<(CellId, TermId)> = Vec::new();
            while j < held.len() && held[j].0 == tuple {
                if let Message::QueryInsert { postings: p, .. } | Message::QueryDelete { postings: p, .. } = &held[j].2 {
                    postings.extend_from_slice(p);
                }
                j += 1;
            }
            if let Some(t) = self.open.get_mut(&tuple) {
                t.remaining -= (j - i) as u32;
            }
            let grid = &self.epochs[self.epoch_pos(h.epoch)].grids[k];
            let sends: Vec<(WorkerId, Message)> = match &held[i].2 {
                Message::Object { epoch, object, cell, live_terms } => grid
                    .object_destinations(*cell, live_terms)
                    .destinations
                    .into_iter()
                    .filter(|w| pair.contains(w))
                    .map(|w| (w, Message::Object { epoch: *epoch, object: object.clone(), cell: *cell, live_terms: live_terms.clone() }))
                    .collect(),
                Message::QueryInsert { epoch, query, .. } => grid
                    .assign_postings(&postings)
                    .postings
                    .into_iter()
                    .map(|(w, p)| (w, Message::QueryInsert { epoch: *epoch, query: query.clone(), postings: p }))
                    .collect(),
                Message::QueryDelete { epoch, id, query, .. } => grid
                    .assign_postings(&postings)
                    .postings
                    .into_iter()
                    .map(|(w, p)| (w, Message::QueryDelete { epoch: *epoch, id: *id, query: query.clone(), postings: p }))
                    .collect(),
                other => unreachable!("only data messages are held: {other:?}"),
            };
            for (w, msg) in sends {
                if let Some(t) = self.open.get_mut(&tuple) {
                    t.remaining += 1;
                }
                self.workers[w].inbox.send(tuple, now, msg);
                self.drain(w);
            }
            self.try_close(tuple);
            i = j;
        }
        h.event.duration_ticks = self.tuple - h.started;
        self.metrics.migrations.push(h.event);
        Ok(())
    }

    /// Builds a candidate partitioning on recent data; switches to dual routing if it is clearly better.
    fn maybe_repartition(&mut self) -> bool {
        if self.recent.is_empty() || self.live.is_empty() {
            return false;
        }
        let objs: Vec<SpatioTextualObject> = self.recent.iter().cloned().collect();
        let qs: Vec<StsQuery> = self.live.values().map(|q| (**q).clone()).collect();
        let mut stats = TermStats::new();
        for o in &objs {
            stats.observe(&o.terms);
        }
        let sample = WorkloadSample::new(&objs, &qs, &stats, self.frame, self.cfg.params.lattice_level);
        let check = global_check_and_repartition(
            &sample,
            &objs,
            &qs,
            &self.epochs[0].grids[0],
            self.cfg.strategy,
            &self.cfg.params,
            &self.cfg.costs,
            self.cfg.grid_level,
        );
        match check {
            Ok(c) => match c.candidate {
                Some(p) => {
                    self.add_epoch(p.tree, Arc::new(stats));
                    self.metrics.repartitions += 1;
                    true
                }
                None => false,
            },
            Err(_) => false,
        }
    }

    /// Moves the remaining old queries to the new strategy once few are left.
    fn maybe_retire(&mut self) {
        let old = self.epochs[0].grids[0].live_count();
        let new = self.epochs[1].grids[0].live_count();
        if !should_retire(old, new) {
            return;
        }
        let mut ids: Vec<QueryId> = self.epochs[0].grids[0].live_ids().collect();
        ids.sort_unstable();
        let mut bytes = 0;
        let tuple = self.tuple;
        for id in &ids {
            let q = self.live[id].clone();
            bytes += encoded_size(&q);
            for (w, msg) in self.route_insert(1, 0, &q) {
                self.workers[w].inbox.send(tuple, tuple as f64, msg);
                self.drain(w);
            }
        }
        let old_id = self.epochs[0].id;
        for w in &mut self.workers {
            w.indexes.retain(|(e, _)| *e != old_id);
        }
        self.epochs.remove(0);
        let mut ev = MigrationEvent::local(self.window_idx, 0, 0, MigrationAlgo::Off);
        ev.algo = "global".into();
        ev.sum_size = bytes;
        ev.n_cells = ids.len();
        self.metrics.migrations.push(ev);
    }

    /// Completes any pending migration and returns the run output.
    pub fn finish(mut self) -> Result<RunOutput> {
        self.commit()?;
        if self.win.tuples > 0 {
            self.record_window();
        }
        self.metrics.wall_secs = self.started.elapsed().as_secs_f64();
        self.metrics.messages = self.workers.iter().map(|w| w.inbox.sent()).sum::<u64>()
            + self.control.iter().map(|c| c.sent()).sum::<u64>()
            + self.merger_in.sent();
        debug_assert!(self.open.is_empty());
        let matches = self.matches();
        let tree = self.epochs.pop().expect("epoch").tree;
        Ok(RunOutput { matches, metrics: self.metrics, tree })
    }
}
