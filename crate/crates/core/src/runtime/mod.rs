//! Deterministic single-process cluster simulation.

mod cluster;
mod message;
mod metrics;
mod oracle;

pub use cluster::{Cluster, RunOutput};
pub use message::{Channel, Envelope, Message};
pub use metrics::{quantile, Histogram, MetricsReport, MigrationEvent, WindowMetrics};
pub use oracle::{brute_force_matches, diff_count, merge_dedup};

use crate::adjust::{MigrationAlgo, DEFAULT_PHASE1_CELLS};
use crate::error::{Error, Result};
use crate::model::{CostModel, MatchResult, StreamElement};
use crate::partition::{PartitionParams, PartitionStrategy};
use crate::worker::DEFAULT_GI2_LEVEL;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Partitioning parameters; `params.m` is the worker count.
    pub params: PartitionParams,
    /// Dispatcher count.
    pub d: usize,
    pub strategy: PartitionStrategy,
    pub migration: MigrationAlgo,
    pub costs: CostModel,
    /// Cells examined by the split/merge pass.
    pub phase1_cells: usize,
    pub seed: u64,
    /// Tuples held back to build the initial partitioning.
    pub warmup: usize,
    /// Tuples per accounting window.
    pub window: usize,
    /// Minimum routing grid level.
    pub grid_level: u32,
    /// Windows between repartition checks; `None` disables them.
    pub global_every: Option<u64>,
    /// Recent objects kept for repartition checks.
    pub global_sample: usize,
    /// Migration transfer speed.
    pub bytes_per_tick: u64,
    /// Simulated time per unit of worker work.
    pub tick_per_work: f64,
    /// Make the import of this migration (0-based) fail.
    pub fail_migration: Option<usize>,
}

impl RunConfig {
    pub fn new(m: usize) -> Self {
        RunConfig {
            params: PartitionParams::new(m),
            d: 1,
            strategy: PartitionStrategy::Hybrid,
            migration: MigrationAlgo::Gr,
            costs: CostModel::default(),
            phase1_cells: DEFAULT_PHASE1_CELLS,
            seed: 0,
            warmup: 50_000,
            window: 10_000,
            grid_level: DEFAULT_GI2_LEVEL,
            global_every: None,
            global_sample: 20_000,
            bytes_per_tick: 4096,
            tick_per_work: 1e-3,
            fail_migration: None,
        }
    }

    pub fn m(&self) -> usize {
        self.params.m
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.d == 0 {
            return Err(Error::invalid("need at least one dispatcher"));
        }
        if self.window == 0 || self.bytes_per_tick == 0 {
            return Err(Error::invalid("window and transfer speed must be positive"));
        }
        if self.global_every == Some(0) {
            return Err(Error::invalid("repartition check interval must be positive"));
        }
        if !(self.tick_per_work >= 0.0) {
            return Err(Error::invalid("tick_per_work must be non-negative"));
        }
        Ok(())
    }
}

/// Replays a trace through a fresh cluster built on its first `warmup` tuples.
pub fn run(cfg: &RunConfig, trace: &[StreamElement]) -> Result<RunOutput> {
    let w = cfg.warmup.min(trace.len());
    let mut c = Cluster::new(cfg.clone(), &trace[..w])?;
    for e in trace {
        c.push(e)?;
    }
    c.finish()
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub output: RunOutput,
    pub expected: Vec<MatchResult>,
    pub diffs: usize,
}

/// Runs the trace and compares the result with the centralised matcher.
pub fn verify(cfg: &RunConfig, trace: &[StreamElement]) -> Result<Verification> {
    let output = run(cfg, trace)?;
    let expected = brute_force_matches(trace);
    let diffs = diff_count(&output.matches, &expected);
    Ok(Verification { output, expected, diffs })
}
