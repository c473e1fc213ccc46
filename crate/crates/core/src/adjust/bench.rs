use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{select_cells, MigrationAlgo};
use crate::worker::CellStat;

/// A worker's cells with a load budget to shed.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchInstance {
    pub cells: Vec<CellStat>,
    pub tau: f64,
}

/// Random cells shaped like a worker's window: a cell holding `q` queries that
/// received `o` objects has load `o * q` and size close to `q` encoded queries.
/// The budget is 10-40% of the total load.
pub fn random_instance(n: usize, seed: u64) -> BenchInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells: Vec<CellStat> = (0..n)
        .map(|i| {
            let q: u64 = rng.random_range(1..=60);
            let o: u64 = if rng.random_bool(0.15) { 0 } else { rng.random_range(1..=40) };
            let size = (0..q).map(|_| rng.random_range(50..=110u64)).sum();
            CellStat { cell: i as u32, load: (o * q) as f64, size, text_partitioned: false }
        })
        .collect();
    let total: f64 = cells.iter().map(|c| c.load).sum();
    let tau = total * rng.random_range(0.1..0.4);
    BenchInstance { cells, tau }
}

/// Outcome of one algorithm on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub algo: MigrationAlgo,
    pub cost: u64,
    pub load: f64,
    pub micros: f64,
    pub infeasible: bool,
}

pub fn run_instance(inst: &BenchInstance, algos: &[MigrationAlgo], seed: u64) -> Vec<BenchResult> {
    algos
        .iter()
        .map(|&algo| {
            let t = Instant::now();
            let p = select_cells(algo, &inst.cells, inst.tau, seed);
            BenchResult {
                algo,
                cost: p.cost,
                load: p.load,
                micros: t.elapsed().as_secs_f64() * 1e6,
                infeasible: p.infeasible,
            }
        })
        .collect()
}

/// Per-algorithm means over `instances` random instances of `cells` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub algo: MigrationAlgo,
    pub mean_cost: f64,
    pub mean_load: f64,
    pub mean_micros: f64,
    pub infeasible: usize,
}

pub fn migration_bench(instances: usize, cells: usize, seed: u64, algos: &[MigrationAlgo]) -> Vec<BenchRow> {
    let mut rows: Vec<BenchRow> = algos
        .iter()
        .map(|&algo| BenchRow { algo, mean_cost: 0.0, mean_load: 0.0, mean_micros: 0.0, infeasible: 0 })
        .collect();
    for i in 0..instances {
        let s = seed.wrapping_add(i as u64);
        for (row, r) in rows.iter_mut().zip(run_instance(&random_instance(cells, s), algos, s)) {
            row.mean_cost += r.cost as f64;
            row.mean_load += r.load;
            row.mean_micros += r.micros;
            row.infeasible += r.infeasible as usize;
        }
    }
    let n = instances.max(1) as f64;
    for r in &mut rows {
        r.mean_cost /= n;
        r.mean_load /= n;
        r.mean_micros /= n;
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_seeded_and_feasible() {
        assert_eq!(random_instance(50, 3), random_instance(50, 3));
        assert_ne!(random_instance(50, 3), random_instance(50, 4));
        let rows = migration_bench(20, 50, 1, &[MigrationAlgo::Gr, MigrationAlgo::Si]);
        for r in &rows {
            assert_eq!(r.infeasible, 0);
        }
    }
}
