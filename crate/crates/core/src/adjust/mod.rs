//! Local and global load adjustment.

mod bench;
mod global;
mod phase1;
mod select;

use std::fmt;
use std::str::FromStr;

pub use bench::{migration_bench, random_instance, run_instance, BenchInstance, BenchResult, BenchRow};
pub use global::{global_check_and_repartition, routed_loads, should_retire, GlobalCheck, REPARTITION_TRIGGER, RETIRE_FRACTION};
use crate::model::CostModel;
pub use phase1::{evaluate_merge, evaluate_split, phase1_adjust, share_load, Directive, SplitCandidate, WorkerTotals};
pub use select::{quantize_kb, select_cells, select_cells_dp, select_cells_gr, select_cells_ra, select_cells_si};

use crate::dispatch::CellId;
use crate::error::{Error, Result};
use crate::model::WorkerId;

/// Cells examined by the split/merge pass.
pub const DEFAULT_PHASE1_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MigrationAlgo {
    Dp,
    #[default]
    Gr,
    Si,
    Ra,
    Off,
}

impl MigrationAlgo {
    pub const ALL: [MigrationAlgo; 5] = [MigrationAlgo::Dp, MigrationAlgo::Gr, MigrationAlgo::Si, MigrationAlgo::Ra, MigrationAlgo::Off];
}

impl fmt::Display for MigrationAlgo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MigrationAlgo::Dp => "dp",
            MigrationAlgo::Gr => "gr",
            MigrationAlgo::Si => "si",
            MigrationAlgo::Ra => "ra",
            MigrationAlgo::Off => "off",
        })
    }
}

impl FromStr for MigrationAlgo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        MigrationAlgo::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown migration algorithm `{s}`")))
    }
}

/// Cells chosen to move from one worker to another.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MigrationPlan {
    pub source: WorkerId,
    pub target: WorkerId,
    pub cells: Vec<CellId>,
    /// Sum of the chosen cells' loads.
    pub load: f64,
    /// Sum of the chosen cells' sizes.
    pub cost: u64,
    /// No subset reaches the budget; `cells` then lists everything.
    pub infeasible: bool,
    pub algo: MigrationAlgo,
    pub phase1: Vec<Directive>,
}

impl MigrationPlan {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty() && self.phase1.is_empty()
    }
}

/// Load to move so that both workers end up equal.
pub fn compute_tau(l_o: f64, l_l: f64) -> f64 {
    ((l_o - l_l) / 2.0).max(0.0)
}

/// Fraction of a worker's objects and queries to shed so its load drops by `share` of itself.
///
/// Worker load grows with the product of both counts, so shedding a fraction
/// `f` of each lowers it by more than `f`.
pub fn shed_fraction(tot: WorkerTotals, share: f64, c: &CostModel) -> f64 {
    let full = tot.load(c);
    if full <= 0.0 || share <= 0.0 {
        return 0.0;
    }
    let target = full * (1.0 - share.min(1.0));
    let at = |f: f64| WorkerTotals::new(tot.objects * (1.0 - f), tot.queries * (1.0 - f)).load(c);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = (lo + hi) / 2.0;
        if at(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
