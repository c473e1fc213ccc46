//! Allocation routines: how many pieces each node gets, how terms are dealt
//! into subsets, and how leaves are packed onto workers.

use crate::error::{Error, Result};
use crate::model::{TermId, TermSet, WorkerId};

/// `L_max / L_min`. An idle worker next to a busy one counts as unbounded imbalance.
pub fn balance_factor(loads: &[f64]) -> f64 {
    let max = loads.iter().copied().fold(0.0f64, f64::max);
    let min = loads.iter().copied().fold(f64::INFINITY, f64::min);
    if loads.is_empty() || max <= 0.0 {
        1.0
    } else if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Pieces per node, each at least one.
    pub counts: Vec<usize>,
    pub total: f64,
}

/// Splits `m` pieces among nodes to minimise the summed load.
///
/// `cost[i][k - 1]` is the load of node `i` cut into `k` pieces; unavailable
/// or infeasible entries are `f64::INFINITY`. Runs
/// `L[i,j] = min_{1<=k<=j-i+1} L[i-1, j-k] + C[i,k]`.
pub fn compute_number_partitions(cost: &[Vec<f64>], m: usize) -> Result<Allocation> {
    let n = cost.len();
    if n == 0 || n > m {
        return Err(Error::invalid(format!("cannot spread {m} partitions over {n} nodes")));
    }
    let c = |i: usize, k: usize| cost[i].get(k - 1).copied().unwrap_or(f64::INFINITY);
    let inf = f64::INFINITY;
    let mut l = vec![vec![inf; m + 1]; n + 1];
    let mut pick = vec![vec![0usize; m + 1]; n + 1];
    l[0][0] = 0.0;
    for i in 1..=n {
        for j in i..=m {
            for k in 1..=(j + 1 - i) {
                let prev = l[i - 1][j - k];
                if prev == inf {
                    continue;
                }
                let v = prev + c(i - 1, k);
                if v < l[i][j] {
                    l[i][j] = v;
                    pick[i][j] = k;
                }
            }
        }
    }
    if !l[n][m].is_finite() {
        return Err(Error::partition(format!("no feasible way to form {m} partitions")));
    }
    let mut counts = vec![0; n];
    let mut j = m;
    for i in (1..=n).rev() {
        counts[i - 1] = pick[i][j];
        j -= pick[i][j];
    }
    Ok(Allocation { counts, total: l[n][m] })
}

/// Longest-processing-time dealing of terms into `p` disjoint subsets.
///
/// Heaviest term first (ties by id), each onto the currently lightest subset;
/// among equally light subsets the one holding fewer terms wins, so zero-load
/// terms are dealt round-robin. With fewer than `p` terms some subsets stay empty.
pub fn text_partition(term_loads: &[(TermId, f64)], p: usize) -> Vec<(TermSet, f64)> {
    let p = p.max(1);
    let mut order: Vec<(TermId, f64)> = term_loads.to_vec();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut bins: Vec<(Vec<TermId>, f64)> = vec![(Vec::new(), 0.0); p];
    for (t, load) in order {
        let k = (0..p)
            .min_by(|&x, &y| bins[x].1.total_cmp(&bins[y].1).then(bins[x].0.len().cmp(&bins[y].0.len())))
            .unwrap_or(0);
        bins[k].0.push(t);
        bins[k].1 += load;
    }
    bins.into_iter().map(|(v, l)| (TermSet::new(v), l)).collect()
}

/// Leaf-unit to worker mapping together with the resulting loads.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionAssignment {
    pub unit_worker: Vec<WorkerId>,
    pub unit_loads: Vec<f64>,
    pub worker_loads: Vec<f64>,
}

impl PartitionAssignment {
    pub fn from_units(unit_worker: Vec<WorkerId>, unit_loads: Vec<f64>, m: usize) -> Self {
        let mut worker_loads = vec![0.0; m];
        for (w, l) in unit_worker.iter().zip(&unit_loads) {
            worker_loads[*w] += l;
        }
        PartitionAssignment { unit_worker, unit_loads, worker_loads }
    }

    pub fn balance_factor(&self) -> f64 {
        balance_factor(&self.worker_loads)
    }

    pub fn total_load(&self) -> f64 {
        self.worker_loads.iter().sum()
    }

    pub fn workers(&self) -> usize {
        self.worker_loads.len()
    }
}

/// Packs leaves onto `m` partitions.
///
/// Leaves are taken by descending load. Empty partitions are filled first.
/// After that a leaf goes to the partition whose load grows least; since unit
/// loads are additive every partition grows by the same amount, and the tie is
/// broken towards the lightest partition, which is also where the fallback
/// rule (keep the balance factor from rising) sends it.
pub fn merge_nodes_into_partitions(loads: &[f64], m: usize) -> PartitionAssignment {
    let m = m.max(1);
    let mut order: Vec<usize> = (0..loads.len()).collect();
    order.sort_by(|&a, &b| loads[b].total_cmp(&loads[a]));
    let mut part_load = vec![0.0f64; m];
    let mut part_size = vec![0usize; m];
    let mut unit_worker = vec![0; loads.len()];
    for i in order {
        let k = match part_size.iter().position(|&c| c == 0) {
            Some(k) => k,
            None => (0..m)
                .min_by(|&x, &y| part_load[x].total_cmp(&part_load[y]).then(part_size[x].cmp(&part_size[y])))
                .unwrap_or(0),
        };
        unit_worker[i] = k;
        part_load[k] += loads[i];
        part_size[k] += 1;
    }
    PartitionAssignment::from_units(unit_worker, loads.to_vec(), m)
}
