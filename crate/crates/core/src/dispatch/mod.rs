//! Dispatcher-side routing.

mod grid;

use std::sync::Arc;

pub use grid::{CellId, CellRoute, GridTIndex, H2Delta, ObjectRouting, QueryRouting, RoutingDecision, TextRoute};

use crate::model::{worker_load, CostModel, TermStats, WorkerId, WorkerLoadSample};
use crate::partition::KdtTree;

/// Routing grid at the coarsest granularity that keeps every leaf a union of cells.
pub fn build_grid_from_kdt(tree: &KdtTree, stats: Arc<TermStats>) -> GridTIndex {
    GridTIndex::from_tree(tree, stats, 0)
}

/// `(most loaded, least loaded)` when their ratio exceeds `sigma`. Ties go to the lower id.
pub fn detect_imbalance(loads: &[f64], sigma: f64) -> Option<(WorkerId, WorkerId)> {
    if loads.len() < 2 {
        return None;
    }
    let mut hi = 0;
    let mut lo = 0;
    for (i, &l) in loads.iter().enumerate() {
        if l > loads[hi] {
            hi = i;
        }
        if l < loads[lo] {
            lo = i;
        }
    }
    let (max, min) = (loads[hi], loads[lo]);
    if max <= 0.0 || hi == lo {
        return None;
    }
    (min <= 0.0 || max / min > sigma).then_some((hi, lo))
}

/// Per-worker routing counters for one accounting window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoutingStats {
    pub objects: Vec<u64>,
    pub inserts: Vec<u64>,
    pub deletes: Vec<u64>,
    pub discarded: u64,
}

impl RoutingStats {
    pub fn new(m: usize) -> Self {
        RoutingStats { objects: vec![0; m], inserts: vec![0; m], deletes: vec![0; m], discarded: 0 }
    }

    pub fn object(&mut self, d: &RoutingDecision) {
        if d.discarded {
            self.discarded += 1;
        }
        for &w in &d.destinations {
            self.objects[w] += 1;
        }
    }

    pub fn insert(&mut self, d: &RoutingDecision) {
        for &w in &d.destinations {
            self.inserts[w] += 1;
        }
    }

    pub fn delete(&mut self, d: &RoutingDecision) {
        for &w in &d.destinations {
            self.deletes[w] += 1;
        }
    }

    pub fn loads(&self, costs: &CostModel) -> Vec<f64> {
        (0..self.objects.len())
            .map(|w| worker_load(&WorkerLoadSample::new(self.objects[w], self.inserts[w], self.deletes[w]), costs))
            .collect()
    }

    /// `window,worker,objects,inserts,deletes,load` rows.
    pub fn csv_rows(&self, window: u64, costs: &CostModel) -> Vec<String> {
        self.loads(costs)
            .iter()
            .enumerate()
            .map(|(w, l)| format!("{window},{w},{},{},{},{l}", self.objects[w], self.inserts[w], self.deletes[w]))
            .collect()
    }

    pub fn reset(&mut self) {
        let m = self.objects.len();
        *self = RoutingStats::new(m);
    }
}
