use std::collections::HashSet;
use std::sync::Arc;

use crate::dispatch::GridTIndex;
use crate::error::Result;
use crate::model::{worker_load, CostModel, SpatioTextualObject, StsQuery, TermStats, WorkerLoadSample};
use crate::partition::{PartitionParams, PartitionStrategy, Partitioning, WorkloadSample};

/// Candidate load must drop below this fraction of the current load to repartition.
pub const REPARTITION_TRIGGER: f64 = 0.8;
/// The old strategy retires once its live queries fall under this share of all live queries.
pub const RETIRE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct GlobalCheck {
    pub current_load: f64,
    pub candidate_load: f64,
    /// Set when the candidate beats the current tree by the trigger margin.
    pub candidate: Option<Partitioning>,
}

impl GlobalCheck {
    pub fn ratio(&self) -> f64 {
        if self.current_load > 0.0 {
            self.candidate_load / self.current_load
        } else {
            1.0
        }
    }
}

/// Per-worker load of `objects` and `queries` sent through `grid`, whose
/// live-term map must already hold `queries`.
pub fn routed_loads(grid: &GridTIndex, objects: &[SpatioTextualObject], queries: &[StsQuery], m: usize, costs: &CostModel) -> Vec<f64> {
    let mut counts = vec![WorkerLoadSample::default(); m];
    for q in queries {
        let to: HashSet<usize> = grid.assign_postings(&grid.query_postings(q)).postings.iter().map(|p| p.0).collect();
        for w in to {
            counts[w].n_inserts += 1.0;
        }
    }
    for o in objects {
        for &w in &grid.route_object(o).decision.destinations {
            counts[w].n_objects += 1.0;
        }
    }
    counts.iter().map(|c| worker_load(c, costs)).collect()
}

/// Builds a fresh tree on a recent sample and compares it with the current
/// routing, migrations included, on the same objects and live queries.
#[allow(clippy::too_many_arguments)]
pub fn global_check_and_repartition(
    sample: &WorkloadSample,
    objects: &[SpatioTextualObject],
    queries: &[StsQuery],
    current: &GridTIndex,
    strategy: PartitionStrategy,
    params: &PartitionParams,
    costs: &CostModel,
    grid_level: u32,
) -> Result<GlobalCheck> {
    let current_load = routed_loads(current, objects, queries, params.m, costs).iter().sum();
    let cand = strategy.build(sample, params, costs)?;
    let stats: Arc<TermStats> = Arc::new(sample.stats.clone());
    let mut grid = GridTIndex::from_tree(&cand.tree, stats, grid_level);
    for q in queries {
        grid.route_query_insert(q);
    }
    let candidate_load = routed_loads(&grid, objects, queries, params.m, costs).iter().sum();
    let trigger = candidate_load < REPARTITION_TRIGGER * current_load;
    Ok(GlobalCheck { current_load, candidate_load, candidate: trigger.then_some(cand) })
}

/// Whether dual routing can end.
pub fn should_retire(old_live: usize, new_live: usize) -> bool {
    let total = old_live + new_live;
    total == 0 || (old_live as f64) < RETIRE_FRACTION * total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GeoPoint, Rect, StreamElement};
    use crate::partition::frame_of;
    use crate::workload::Scenario;

    fn workload(seed: u64) -> (Vec<SpatioTextualObject>, Vec<StsQuery>) {
        let (_, trace) = Scenario::new(4000, 600, "q3", seed).generate().unwrap();
        let mut os = Vec::new();
        let mut qs = Vec::new();
        for e in trace {
            match e {
                StreamElement::Object(o) => os.push(o),
                StreamElement::Insert(q) => qs.push(q),
                StreamElement::Delete(_) => {}
            }
        }
        (os, qs)
    }

    fn check(
        objs: &[SpatioTextualObject],
        qs: &[StsQuery],
        tree_on: &WorkloadSample,
        sample: &WorkloadSample,
        params: &PartitionParams,
    ) -> GlobalCheck {
        let c = CostModel::default();
        let current = PartitionStrategy::Hybrid.build(tree_on, params, &c).unwrap();
        let mut grid = GridTIndex::from_tree(&current.tree, Arc::new(sample.stats.clone()), 6);
        for q in qs {
            grid.route_query_insert(q);
        }
        global_check_and_repartition(sample, objs, qs, &grid, PartitionStrategy::Hybrid, params, &c, 6).unwrap()
    }

    #[test]
    fn unchanged_workload_keeps_the_tree() {
        let (os, qs) = workload(1);
        let params = PartitionParams::new(4);
        let mut stats = TermStats::new();
        os.iter().for_each(|o| stats.observe(&o.terms));
        let s = WorkloadSample::new(&os, &qs, &stats, frame_of(os.iter().map(|o| &o.loc)), params.lattice_level);
        let g = check(&os, &qs, &s, &s, &params);
        assert!((g.ratio() - 1.0).abs() < 1e-9, "{}", g.ratio());
        assert!(g.candidate.is_none());
    }

    #[test]
    fn workload_moved_into_one_corner_triggers() {
        let (os, qs) = workload(2);
        let params = PartitionParams::new(4);
        let mut stats = TermStats::new();
        os.iter().for_each(|o| stats.observe(&o.terms));
        let frame = frame_of(os.iter().map(|o| &o.loc));
        let before = WorkloadSample::new(&os, &qs, &stats, frame, params.lattice_level);
        let (ox, oy) = (frame.bounds.min.x, frame.bounds.min.y);
        let squeeze = |p: &GeoPoint| GeoPoint::new(ox + (p.x - ox) * 0.2, oy + (p.y - oy) * 0.2);
        let moved_os: Vec<SpatioTextualObject> =
            os.iter().map(|o| SpatioTextualObject::new(o.id.0, squeeze(&o.loc), o.terms.clone()).unwrap()).collect();
        let moved_qs: Vec<StsQuery> = qs
            .iter()
            .map(|q| {
                let (a, b) = (squeeze(&q.region.min), squeeze(&q.region.max));
                StsQuery::new(q.id.0, q.expr.clone(), Rect::new(a.x, a.y, b.x, b.y)).unwrap()
            })
            .collect();
        let after = WorkloadSample::new(&moved_os, &moved_qs, &stats, frame, params.lattice_level);
        let g = check(&moved_os, &moved_qs, &before, &after, &params);
        assert!(g.ratio() < REPARTITION_TRIGGER, "{}", g.ratio());
        assert!(g.candidate.is_some());
    }

    #[test]
    fn retirement_threshold() {
        assert!(should_retire(0, 0));
        assert!(should_retire(4, 96));
        assert!(!should_retire(5, 95));
        assert!(!should_retire(50, 50));
    }
}
