//! Workload partitioning into a kd-tree whose leaves may be split by terms.

mod alloc;
mod build;
mod load;
mod sample;
mod tree;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

pub use alloc::{
    balance_factor, compute_number_partitions, merge_nodes_into_partitions, text_partition, Allocation,
    PartitionAssignment,
};
pub use build::{grid_baseline, kd_baseline, partition_sample, text_baseline, GRID_BASELINE_LEVEL};
pub use load::{estimate_partition_load, text_similarity};
pub use sample::{frame_of, SampleObject, SampleQuery, WorkloadSample};
pub use tree::{term_bucket, text_part_of, KdtNode, KdtTree, LeafUnit, TermPart, TERM_BUCKETS};

use crate::error::{Error, Result};
use crate::model::{worker_load, Axis, CellRange, CostModel, SpatioTextualObject, StsQuery, TermStats, WorkerLoadSample};

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionParams {
    pub m: usize,
    /// Balance threshold on `L_max / L_min`.
    pub sigma: f64,
    /// Text similarity at or above which a region is treated as space-friendly.
    pub delta: f64,
    /// Leaf unit budget.
    pub theta: usize,
    /// How close the children's similarity must be to the parent's to stop splitting.
    pub epsilon_sim: f64,
    /// Regions with fewer sample objects are not split in the first phase.
    pub min_split_objects: usize,
    /// Split positions are indices on a `2^lattice_level` lattice.
    pub lattice_level: u32,
}

impl PartitionParams {
    pub fn new(m: usize) -> Self {
        PartitionParams {
            m,
            sigma: 1.3,
            delta: 0.7,
            theta: 4 * m,
            epsilon_sim: 0.01,
            min_split_objects: 32,
            lattice_level: 6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::invalid("need at least one worker"));
        }
        if self.sigma.is_nan() || self.sigma <= 1.0 {
            return Err(Error::invalid("sigma must exceed 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        if self.theta < self.m {
            return Err(Error::invalid("theta must be at least m"));
        }
        if self.epsilon_sim.is_nan() || self.epsilon_sim < 0.0 {
            return Err(Error::invalid("epsilon_sim must be non-negative"));
        }
        if self.lattice_level > crate::model::MAX_LEVEL {
            return Err(Error::invalid(format!("lattice level above {}", crate::model::MAX_LEVEL)));
        }
        Ok(())
    }
}

/// A finished tree and the estimated loads of its units on the build sample.
#[derive(Debug, Clone)]
pub struct Partitioning {
    pub tree: KdtTree,
    pub assignment: PartitionAssignment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceBaseline {
    Grid,
    KdTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartitionStrategy {
    Hybrid,
    SpaceGrid,
    SpaceKdtree,
    TextFrequency,
}

impl PartitionStrategy {
    pub const ALL: [PartitionStrategy; 4] =
        [PartitionStrategy::Hybrid, PartitionStrategy::SpaceGrid, PartitionStrategy::SpaceKdtree, PartitionStrategy::TextFrequency];

    pub fn build(self, s: &WorkloadSample, params: &PartitionParams, costs: &CostModel) -> Result<Partitioning> {
        match self {
            PartitionStrategy::Hybrid => partition_sample(s, params, costs),
            PartitionStrategy::SpaceGrid => grid_baseline(s, params, costs),
            PartitionStrategy::SpaceKdtree => kd_baseline(s, params, costs),
            PartitionStrategy::TextFrequency => text_baseline(s, params, costs),
        }
    }
}

impl fmt::Display for PartitionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartitionStrategy::Hybrid => "hybrid",
            PartitionStrategy::SpaceGrid => "space-grid",
            PartitionStrategy::SpaceKdtree => "space-kdtree",
            PartitionStrategy::TextFrequency => "text-frequency",
        })
    }
}

impl FromStr for PartitionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PartitionStrategy::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown strategy `{s}`")))
    }
}

/// Hybrid partitioning of raw samples. The frame is the objects' bounding box
/// and term frequencies come from the objects.
pub fn partition_workload(
    objects: &[SpatioTextualObject],
    queries: &[StsQuery],
    params: &PartitionParams,
    costs: &CostModel,
) -> Result<Partitioning> {
    params.validate()?;
    if objects.is_empty() || queries.is_empty() {
        return Err(Error::invalid("partitioning needs non-empty object and query samples"));
    }
    let s = sample_from(objects, queries, params.lattice_level);
    partition_sample(&s, params, costs)
}

fn sample_from(objects: &[SpatioTextualObject], queries: &[StsQuery], level: u32) -> WorkloadSample {
    let mut stats = TermStats::new();
    for o in objects {
        stats.observe(&o.terms);
    }
    let frame = frame_of(objects.iter().map(|o| &o.loc));
    WorkloadSample::new(objects, queries, &stats, frame, level)
}

pub fn baseline_space_partition(
    objects: &[SpatioTextualObject],
    queries: &[StsQuery],
    params: &PartitionParams,
    costs: &CostModel,
    kind: SpaceBaseline,
) -> Result<Partitioning> {
    let s = sample_from(objects, queries, params.lattice_level);
    match kind {
        SpaceBaseline::Grid => grid_baseline(&s, params, costs),
        SpaceBaseline::KdTree => kd_baseline(&s, params, costs),
    }
}

pub fn baseline_text_partition(
    objects: &[SpatioTextualObject],
    queries: &[StsQuery],
    params: &PartitionParams,
    costs: &CostModel,
) -> Result<Partitioning> {
    text_baseline(&sample_from(objects, queries, params.lattice_level), params, costs)
}

/// Unit loads of an existing tree on a sample cut from the same frame and lattice.
pub fn estimate_tree_load(tree: &KdtTree, s: &WorkloadSample, costs: &CostModel) -> Result<PartitionAssignment> {
    if s.level != tree.level() || s.frame != tree.frame {
        return Err(Error::invalid("sample and tree use different lattices"));
    }
    let mut loads = Vec::new();
    let mut workers = Vec::new();
    estimate_node(&tree.root, tree.root_range(), s, &s.all_objects(), &s.all_queries(), costs, &mut loads, &mut workers);
    Ok(PartitionAssignment::from_units(workers, loads, tree.workers()))
}

#[allow(clippy::too_many_arguments)]
fn estimate_node(
    n: &KdtNode,
    range: CellRange,
    s: &WorkloadSample,
    objs: &[u32],
    qrys: &[u32],
    costs: &CostModel,
    loads: &mut Vec<f64>,
    workers: &mut Vec<usize>,
) {
    match n {
        KdtNode::Internal { axis, at, left, right } => {
            let (lr, rr) = range.split(*axis, *at);
            let coord = |i: &&u32| {
                let o = &s.objects[**i as usize];
                if *axis == Axis::X {
                    o.cx
                } else {
                    o.cy
                }
            };
            let lo: Vec<u32> = objs.iter().filter(|i| coord(i) < *at).copied().collect();
            let ro: Vec<u32> = objs.iter().filter(|i| coord(i) >= *at).copied().collect();
            let lq: Vec<u32> = qrys.iter().copied().filter(|&i| s.queries[i as usize].span.lo(*axis) < *at).collect();
            let rq: Vec<u32> = qrys.iter().copied().filter(|&i| s.queries[i as usize].span.hi(*axis) >= *at).collect();
            estimate_node(left, lr, s, &lo, &lq, costs, loads, workers);
            estimate_node(right, rr, s, &ro, &rq, costs, loads, workers);
        }
        KdtNode::SpaceLeaf { worker } => {
            let mut c = WorkerLoadSample { n_objects: objs.len() as f64, ..Default::default() };
            for &i in qrys {
                let q = &s.queries[i as usize];
                c.n_inserts += q.inserted as u8 as f64;
                c.n_deletes += q.deleted as u8 as f64;
            }
            loads.push(worker_load(&c, costs));
            workers.push(*worker);
        }
        KdtNode::TextLeaf { parts } => {
            let lookup = tree::part_lookup(parts);
            let part_of = |t| lookup.get(&t).copied().unwrap_or_else(|| term_bucket(t) % parts.len());
            let mut counts = vec![WorkerLoadSample::default(); parts.len()];
            let mut live = HashMap::new();
            for &i in qrys {
                let q = &s.queries[i as usize];
                let hit: HashSet<usize> = q
                    .index
                    .iter()
                    .map(|t| {
                        let j = part_of(t);
                        live.insert(t, j);
                        j
                    })
                    .collect();
                for j in hit {
                    counts[j].n_inserts += q.inserted as u8 as f64;
                    counts[j].n_deletes += q.deleted as u8 as f64;
                }
            }
            for &i in objs {
                let hit: HashSet<usize> = s.objects[i as usize].terms.iter().filter_map(|t| live.get(&t).copied()).collect();
                for j in hit {
                    counts[j].n_objects += 1.0;
                }
            }
            for (p, c) in parts.iter().zip(&counts) {
                loads.push(worker_load(c, costs));
                workers.push(p.worker);
            }
        }
    }
}
