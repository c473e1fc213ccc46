//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spatext::adjust::{random_instance, select_cells, select_cells_dp, MigrationAlgo};
use spatext::model::{
    BooleanExpr, CostModel, GeoPoint, MatchResult, QueryId, Rect, SpaceFrame, SpatioTextualObject, StreamElement,
    StsQuery, TermId, TermSet, TermStats,
};
use spatext::partition::{
    baseline_space_partition, baseline_text_partition, compute_number_partitions, partition_workload, PartitionParams,
    SpaceBaseline,
};
use spatext::runtime::{run, verify, RunConfig, RunOutput};
use spatext::worker::{CellStat, Gi2Index};
use spatext::workload::{live_counts, Scenario};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn split(trace: &[StreamElement]) -> (Vec<SpatioTextualObject>, Vec<StsQuery>) {
    let mut os = Vec::new();
    let mut qs = Vec::new();
    for e in trace {
        match e {
            StreamElement::Object(o) => os.push(o.clone()),
            StreamElement::Insert(q) => qs.push(q.clone()),
            StreamElement::Delete(_) => {}
        }
    }
    (os, qs)
}

fn sorted_lines(ms: &[MatchResult]) -> Vec<String> {
    let mut v: Vec<String> = ms.iter().map(|m| format!("{}\t{}", m.query_id.0, m.object_id.0)).collect();
    v.sort();
    v
}

fn oracle_exactness() -> Outcome {
    let t0 = Instant::now();
    let (_, trace) = Scenario::new(20_000, 2_000, "q3", 1).generate().unwrap();
    let mut cfg = RunConfig::new(8);
    cfg.migration = MigrationAlgo::Gr;
    cfg.warmup = 5_000;
    cfg.window = 2_000;
    let v = verify(&cfg, &trace).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let same = sorted_lines(&v.output.matches) == sorted_lines(&v.expected);
    outcome(
        same && v.diffs == 0 && secs < 60.0,
        format!(
            "{} matches, {} expected, {} diffs, {} migrations, {secs:.1}s",
            v.output.matches.len(),
            v.expected.len(),
            v.diffs,
            v.output.metrics.migrations.len()
        ),
    )
}

fn hybrid_dominance() -> Outcome {
    let (_, trace) = Scenario::new(10_000, 2_000, "q3", 2).generate().unwrap();
    let (os, qs) = split(&trace);
    let params = PartitionParams::new(8);
    let c = CostModel::default();
    let hybrid = partition_workload(&os, &qs, &params, &c).unwrap().assignment.total_load();
    let kd = baseline_space_partition(&os, &qs, &params, &c, SpaceBaseline::KdTree).unwrap().assignment.total_load();
    let text = baseline_text_partition(&os, &qs, &params, &c).unwrap().assignment.total_load();
    let best = kd.min(text);
    let reduction = 1.0 - hybrid / best;
    outcome(
        hybrid <= kd && hybrid <= text && reduction >= 0.10,
        format!("hybrid {hybrid:.0}, kd {kd:.0}, text {text:.0}, reduction {:.1}%", reduction * 100.0),
    )
}

fn balance_or_budget() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = String::new();
    let mut fails = 0;
    for i in 0..20 {
        let m = rng.random_range(2..=12);
        let profile = ["q1", "q2", "q3"][i % 3];
        let (_, trace) = Scenario::new(rng.random_range(3_000..8_000), rng.random_range(300..1_200), profile, rng.random())
            .generate()
            .unwrap();
        let (os, qs) = split(&trace);
        let mut params = PartitionParams::new(m);
        params.sigma = 1.3;
        params.theta = 4 * m;
        let p = partition_workload(&os, &qs, &params, &CostModel::default()).unwrap();
        let b = p.assignment.balance_factor();
        let leaves = p.tree.unit_count();
        if !(b <= 1.3 || leaves == params.theta) {
            fails += 1;
            worst = format!("; workload {i}: m={m} balance {b:.3} with {leaves} leaves");
        }
    }
    outcome(fails == 0, format!("{fails}/20 violate{worst}"))
}

fn brute_min_cost(cells: &[CellStat], tau: f64) -> u64 {
    let n = cells.len();
    let mut best = u64::MAX;
    for mask in 0u32..(1 << n) {
        let (mut l, mut s) = (0.0, 0);
        for (i, c) in cells.iter().enumerate() {
            if mask >> i & 1 == 1 {
                l += c.load;
                s += c.size;
            }
        }
        if l >= tau {
            best = best.min(s);
        }
    }
    best
}

fn dp_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = 0;
    for i in 0..100 {
        let n = rng.random_range(1..=15);
        let inst = random_instance(n, 400 + i);
        let p = select_cells_dp(&inst.cells, inst.tau, None);
        if p.infeasible || p.cost != brute_min_cost(&inst.cells, inst.tau) {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{bad}/100 differ from the subset minimum"))
}

fn gr_quality() -> Outcome {
    let (mut le_si, mut le_ra) = (0, 0);
    let (mut gr_sum, mut dp_sum) = (0.0, 0.0);
    let n = 1000;
    for i in 0..n {
        let inst = random_instance(100, 5_000 + i);
        let cost = |a| select_cells(a, &inst.cells, inst.tau, i).cost;
        let gr = cost(MigrationAlgo::Gr);
        le_si += (gr <= cost(MigrationAlgo::Si)) as usize;
        le_ra += (gr <= cost(MigrationAlgo::Ra)) as usize;
        gr_sum += gr as f64;
        dp_sum += cost(MigrationAlgo::Dp) as f64;
    }
    let ratio = gr_sum / dp_sum;
    let share = |k: usize| k as f64 / n as f64;
    outcome(
        share(le_si) >= 0.8 && share(le_ra) >= 0.8 && ratio <= 1.25,
        format!("GR<=SI {le_si}/{n}, GR<=RA {le_ra}/{n}, mean GR/DP {ratio:.3}"),
    )
}

fn best_allocation(cost: &[Vec<f64>], left: usize) -> f64 {
    match cost {
        [] if left == 0 => 0.0,
        [] => f64::INFINITY,
        [row, rest @ ..] => (1..=left).map(|k| row[k - 1] + best_allocation(rest, left - k)).fold(f64::INFINITY, f64::min),
    }
}

/// Every table whose entries reachable with `m` workers range over 1..=10,
/// when there are at most `limit` such entries; `None` otherwise.
fn all_tables(n: usize, m: usize, limit: usize) -> Option<Vec<Vec<Vec<f64>>>> {
    let reach = m + 1 - n;
    let free = n * reach;
    if free > limit {
        return None;
    }
    let mut out = Vec::new();
    for code in 0..10usize.pow(free as u32) {
        let mut c = code;
        let table = (0..n)
            .map(|_| {
                (0..m)
                    .map(|k| {
                        if k < reach {
                            let v = c % 10 + 1;
                            c /= 10;
                            v as f64
                        } else {
                            10.0
                        }
                    })
                    .collect()
            })
            .collect();
        out.push(table);
    }
    Some(out)
}

fn allocation_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut exhaustive, mut sampled, mut bad) = (0, 0, 0);
    for n in 1..=4 {
        for m in n..=6 {
            let tables = all_tables(n, m, 5).unwrap_or_else(|| {
                (0..20_000)
                    .map(|_| (0..n).map(|_| (0..m).map(|_| rng.random_range(1..=10) as f64).collect()).collect())
                    .collect()
            });
            let full = all_tables(n, m, 5).is_some();
            for cost in &tables {
                let got = compute_number_partitions(cost, m).unwrap();
                let fits = got.counts.iter().sum::<usize>() == m
                    && got.counts.iter().zip(cost).map(|(&k, r)| r[k - 1]).sum::<f64>() == got.total;
                if !fits || got.total != best_allocation(cost, m) {
                    bad += 1;
                }
            }
            if full {
                exhaustive += tables.len();
            } else {
                sampled += tables.len();
            }
        }
    }
    outcome(bad == 0, format!("{bad} mismatches over {exhaustive} enumerated and {sampled} sampled tables"))
}

fn lazy_deletion() -> Outcome {
    let extent = 100.0;
    let frame = SpaceFrame::new(Rect::new(0.0, 0.0, extent, extent));
    let vocab: Vec<TermId> = (1..=20).map(TermId).collect();
    let stats = Arc::new(TermStats::from_counts(vocab.iter().map(|&t| (t, 1000 - t.0 as u64))));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ix = Gi2Index::new(frame, 6, stats);
    ix.own_cells(0..64 * 64);
    let mut live: Vec<QueryId> = Vec::new();
    let mut deleted: Vec<QueryId> = Vec::new();
    let pick = |rng: &mut ChaCha8Rng, k: usize| -> Vec<TermId> { (0..k).map(|_| vocab[rng.random_range(0..vocab.len())]).collect() };
    for id in 0..600u64 {
        let c = GeoPoint::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent));
        let k = rng.random_range(1..=3);
        let terms = pick(&mut rng, k);
        let expr = if rng.random_bool(0.5) { BooleanExpr::any_of(&terms) } else { BooleanExpr::all_of(&terms) }.unwrap();
        ix.insert_query(&StsQuery::new(id, expr, Rect::square(c, rng.random_range(1.0..30.0))).unwrap());
        live.push(QueryId(id));
    }
    let mut leaked = 0;
    for step in 0..10_000u64 {
        if step % 20 == 0 && !live.is_empty() {
            let id = live.swap_remove(rng.random_range(0..live.len()));
            ix.delete_query(id);
            deleted.push(id);
        }
        let k = rng.random_range(1..=4);
        let o = SpatioTextualObject::new(
            step,
            GeoPoint::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent)),
            TermSet::new(pick(&mut rng, k)),
        )
        .unwrap();
        leaked += ix.match_object(&o).iter().filter(|m| deleted.contains(&m.query_id)).count();
    }
    // one object per cell carrying the whole vocabulary walks every list
    let cell = extent / 64.0;
    for iy in 0..64 {
        for ix_ in 0..64 {
            let p = GeoPoint::new((ix_ as f64 + 0.5) * cell, (iy as f64 + 0.5) * cell);
            let o = SpatioTextualObject::new(1_000_000 + iy * 64 + ix_, p, TermSet::new(vocab.clone())).unwrap();
            leaked += ix.match_object(&o).iter().filter(|m| deleted.contains(&m.query_id)).count();
        }
    }
    let postings: u64 = deleted.iter().map(|&id| ix.postings_of(id) as u64).sum();
    outcome(
        leaked == 0 && postings == 0 && ix.pending_deletes() == 0,
        format!("{} deletes, {leaked} results after delete, {postings} postings left", deleted.len()),
    )
}

fn migration_safety() -> Outcome {
    let mut bad = 0;
    let mut moved = 0;
    let mut rolled_back = 0;
    for trial in 0..20u64 {
        let (_, trace) = Scenario::new(8_000, 1_000, ["q1", "q2", "q3"][trial as usize % 3], 100 + trial).generate().unwrap();
        let mut cfg = RunConfig::new(6);
        cfg.warmup = 2_000;
        cfg.window = 1_000;
        cfg.params.sigma = 1.1;
        cfg.seed = trial;
        cfg.d = 1 + trial as usize % 3;
        cfg.migration = MigrationAlgo::Off;
        let off = run(&cfg, &trace).unwrap();
        cfg.migration = MigrationAlgo::Gr;
        if trial == 19 {
            cfg.fail_migration = Some(0);
        }
        let on = run(&cfg, &trace).unwrap();
        moved += on.metrics.migrations.len();
        rolled_back += on.metrics.migrations.iter().filter(|e| e.rolled_back).count();
        if sorted_lines(&on.matches) != sorted_lines(&off.matches) {
            bad += 1;
        }
    }
    outcome(
        bad == 0 && moved > 0 && rolled_back > 0,
        format!("{bad}/20 differ; {moved} migrations, {rolled_back} rolled back"),
    )
}

/// Per-window maximum worker load for windows starting at or after `from`.
fn window_maxima(out: &RunOutput, window: usize, from: usize) -> Vec<f64> {
    out.metrics
        .windows
        .iter()
        .filter(|w| (w.window as usize - 1) * window >= from && w.tuples == window as u64)
        .map(|w| w.loads.iter().copied().fold(0.0, f64::max))
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn adjustment_benefit() -> Outcome {
    let window = 10_000;
    let (mut off_sum, mut gr_sum, mut even_sum) = (0.0, 0.0, 0.0);
    for seed in 0..3 {
        let mut sc = Scenario::new(200_000, 20_000, "q3", seed);
        // continental-scale frame so query sides relate to grid cells as in the field data
        sc.objects.extent = 4000.0;
        sc.objects.cluster_spread = 60.0;
        sc.schedule.mu = 4000.0;
        let (_, trace, flips) = sc.generate_flipping(5, 0.1).unwrap();
        let mut cfg = RunConfig::new(8);
        cfg.warmup = flips[0].min(4 * window);
        cfg.window = window;
        cfg.seed = seed;
        cfg.migration = MigrationAlgo::Off;
        let off = run(&cfg, &trace).unwrap();
        cfg.migration = MigrationAlgo::Gr;
        let gr = run(&cfg, &trace).unwrap();
        off_sum += mean(&window_maxima(&off, window, flips[0]));
        gr_sum += mean(&window_maxima(&gr, window, flips[0]));
        // what a perfect, free rebalancing of the unadjusted run would give
        let post: Vec<f64> = off
            .metrics
            .windows
            .iter()
            .filter(|w| (w.window as usize - 1) * window >= flips[0] && w.tuples == window as u64)
            .map(|w| mean(&w.loads))
            .collect();
        even_sum += mean(&post);
    }
    let ratio = gr_sum / off_sum;
    outcome(
        ratio <= 0.9,
        format!("GR/off mean window max {ratio:.3} (even-split bound {:.3})", even_sum / off_sum),
    )
}

fn generator_statistics() -> Outcome {
    let mu = 500.0;
    let mut sc = Scenario::new(60_000, 6_000, "q1", 10);
    sc.schedule.mu = mu;
    let (_, trace) = sc.generate().unwrap();
    let objects = trace.iter().filter(|e| matches!(e, StreamElement::Object(_))).count();
    let ops = trace.len() - objects;
    let ratio = objects as f64 / ops as f64;
    let live = live_counts(&trace);
    let sigma = 0.2 * mu;
    // steady state: after the first deletions are due, before the end-of-trace flush
    let inserts_before: Vec<usize> = trace
        .iter()
        .filter(|e| !matches!(e, StreamElement::Object(_)))
        .scan(0, |n, e| {
            *n += matches!(e, StreamElement::Insert(_)) as usize;
            Some(*n)
        })
        .collect();
    let last = 6_000;
    let steady: Vec<i64> = live
        .iter()
        .zip(&inserts_before)
        .filter(|(_, &n)| n as f64 >= mu + 3.0 * sigma && n < last)
        .map(|(&l, _)| l)
        .collect();
    let outside = steady.iter().filter(|&&l| (l as f64 - mu).abs() > 3.0 * sigma).count();
    let (lo, hi) = (steady.iter().min().copied().unwrap_or(0), steady.iter().max().copied().unwrap_or(0));
    outcome(
        (ratio - 5.0).abs() <= 0.05 && outside == 0 && !steady.is_empty(),
        format!("ratio {ratio:.4}, live {lo}..{hi} over {} steady points, {outside} outside mu+-3sigma", steady.len()),
    )
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Outcome); 10] = [
        ("AC1 oracle exactness", oracle_exactness),
        ("AC2 hybrid dominance", hybrid_dominance),
        ("AC3 balance or budget", balance_or_budget),
        ("AC4 migration DP exactness", dp_exactness),
        ("AC5 GR quality", gr_quality),
        ("AC6 allocation DP exactness", allocation_exactness),
        ("AC7 lazy deletion", lazy_deletion),
        ("AC8 migration safety", migration_safety),
        ("AC9 adjustment benefit", adjustment_benefit),
        ("AC10 generator statistics", generator_statistics),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let t = Instant::now();
        let o = check();
        failed += !o.pass as usize;
        println!("[{}] {name}: {} ({:.1}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail, t.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
