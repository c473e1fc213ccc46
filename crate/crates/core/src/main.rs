use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use spatext::adjust::{migration_bench, MigrationAlgo};
use spatext::model::trace::{read_trace, write_trace};
use spatext::model::{CostModel, StreamElement, TermDict, TermStats};
use spatext::partition::{estimate_tree_load, frame_of, PartitionParams, PartitionStrategy, WorkloadSample};
use spatext::runtime::{brute_force_matches, diff_count, Cluster, RunConfig, RunOutput};
use spatext::workload::{corpus_stats, synthesize_queries, schedule_stream, ObjectGen, QueryGen, Scenario, StreamSchedule};
use spatext::{Error, Result};

#[derive(Parser)]
#[command(name = "spatext", version, about = "Spatio-textual publish/subscribe simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize an interleaved object/query trace.
    Gen(GenArgs),
    /// Build a partitioning tree on a trace prefix and print per-worker estimated loads.
    Partition(PartitionArgs),
    /// Replay a trace through the simulated cluster and write metrics.
    Run(RunArgs),
    /// Compare migration cell selection algorithms on random cell sets.
    MigrateBench(BenchArgs),
    /// Replay a trace and diff the output against a centralised matcher.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Query profile: q1, q2 or q3.
    #[arg(long, default_value = "q1")]
    profile: String,
    /// Number of query insertions.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Number of synthesized objects (defaults to enough for the 5:1 ratio).
    #[arg(long)]
    objects: Option<usize>,
    /// Read objects from this trace instead of synthesizing them.
    #[arg(long)]
    objects_file: Option<PathBuf>,
    /// Objects per query operation.
    #[arg(long, default_value_t = 5.0)]
    ratio: f64,
    /// Mean query lifetime in later insertions (defaults to count/4).
    #[arg(long)]
    mu: Option<f64>,
    /// Trace units per kilometre.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct PartitionOpts {
    #[arg(long, default_value = "hybrid")]
    strategy: PartitionStrategy,
    #[arg(long, default_value_t = 8)]
    m: usize,
    #[arg(long, default_value_t = 1.3)]
    sigma: f64,
    #[arg(long, default_value_t = 0.7)]
    delta: f64,
    /// Leaf budget (defaults to 4m).
    #[arg(long)]
    theta: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    epsilon_sim: f64,
    /// Cost coefficients c1,c2,c3,c4.
    #[arg(long, default_value = "1,1,1,1")]
    costs: String,
}

impl PartitionOpts {
    fn params(&self) -> Result<PartitionParams> {
        let mut p = PartitionParams::new(self.m);
        p.sigma = self.sigma;
        p.delta = self.delta;
        p.theta = self.theta.unwrap_or(4 * self.m);
        p.epsilon_sim = self.epsilon_sim;
        p.validate()?;
        Ok(p)
    }

    fn costs(&self) -> Result<CostModel> {
        let v: Vec<f64> = self
            .costs
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::invalid(format!("bad cost coefficient `{s}`"))))
            .collect::<Result<_>>()?;
        match v[..] {
            [c1, c2, c3, c4] => CostModel::new(c1, c2, c3, c4),
            _ => Err(Error::invalid("expected four cost coefficients")),
        }
    }
}

#[derive(Args)]
struct PartitionArgs {
    /// Input trace.
    #[arg(long)]
    trace: PathBuf,
    #[command(flatten)]
    opts: PartitionOpts,
    /// Trace prefix used as the sample.
    #[arg(long, default_value_t = 50_000)]
    sample: usize,
    /// Write the serialized tree here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SimOpts {
    /// Input trace.
    #[arg(long)]
    trace: PathBuf,
    #[command(flatten)]
    opts: PartitionOpts,
    /// Dispatcher count.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Cell selection algorithm: dp, gr, si, ra or off.
    #[arg(long, default_value = "gr")]
    migration: MigrationAlgo,
    #[arg(long, default_value_t = 50_000)]
    warmup: usize,
    #[arg(long, default_value_t = 10_000)]
    window: usize,
    /// Windows between repartition checks; disabled when absent.
    #[arg(long)]
    global_every: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SimOpts {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::new(self.opts.m);
        cfg.params = self.opts.params()?;
        cfg.costs = self.opts.costs()?;
        cfg.strategy = self.opts.strategy;
        cfg.d = self.d;
        cfg.migration = self.migration;
        cfg.warmup = self.warmup;
        cfg.window = self.window;
        cfg.global_every = self.global_every;
        cfg.seed = self.seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    sim: SimOpts,
    /// Per-window metrics CSV; stdout when absent.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Migration log CSV.
    #[arg(long)]
    migrations: Option<PathBuf>,
    /// Per-window routing statistics CSV.
    #[arg(long)]
    routing: Option<PathBuf>,
    /// Also compare against the centralised matcher and fail on differences.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    sim: SimOpts,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 100)]
    cells: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_trace(path: &Path, dict: &mut TermDict) -> Result<(Vec<StreamElement>, usize)> {
    let f = File::open(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let t = read_trace(BufReader::new(f), dict)?;
    Ok((t.elements, t.malformed))
}

fn gen(a: &GenArgs) -> Result<()> {
    let mut sc = Scenario::new(0, a.count, &a.profile, a.seed);
    sc.queries = QueryGen { count: a.count, scale: a.scale, ..sc.queries };
    sc.schedule = StreamSchedule { ratio: a.ratio, mu: a.mu.unwrap_or(sc.schedule.mu), ..sc.schedule };
    let (dict, trace) = match &a.objects_file {
        None => {
            let needed = (2.0 * a.count as f64 * a.ratio).ceil() as usize;
            sc.objects = ObjectGen { count: a.objects.unwrap_or(needed), ..sc.objects };
            sc.generate()?
        }
        Some(p) => {
            let mut dict = TermDict::new();
            let (elems, _) = load_trace(p, &mut dict)?;
            let objects: Vec<_> = elems
                .into_iter()
                .filter_map(|e| match e {
                    StreamElement::Object(o) => Some(o),
                    _ => None,
                })
                .collect();
            let stats = corpus_stats(&objects);
            let locs: Vec<_> = objects.iter().map(|o| o.loc).collect();
            let queries = synthesize_queries(&stats, &locs, &sc.query_profile()?, &sc.queries, a.seed ^ 0xC0FFEE)?;
            let trace = schedule_stream(&objects, &queries, &sc.schedule)?;
            (dict, trace)
        }
    };
    write_trace(output(a.out.as_deref())?, &trace, &dict)
}

fn partition(a: &PartitionArgs) -> Result<()> {
    let mut dict = TermDict::new();
    let (trace, _) = load_trace(&a.trace, &mut dict)?;
    let prefix = &trace[..a.sample.min(trace.len())];
    let params = a.opts.params()?;
    let costs = a.opts.costs()?;
    let mut stats = TermStats::new();
    for e in prefix {
        if let StreamElement::Object(o) = e {
            stats.observe(&o.terms);
        }
    }
    let frame = frame_of(prefix.iter().filter_map(|e| match e {
        StreamElement::Object(o) => Some(&o.loc),
        _ => None,
    }));
    let sample = WorkloadSample::from_elements(prefix, &stats, frame, params.lattice_level);
    let p = a.opts.strategy.build(&sample, &params, &costs)?;
    let loads = estimate_tree_load(&p.tree, &sample, &costs)?;
    let text = p.tree.to_text(&dict);
    match &a.out {
        Some(path) => std::fs::write(path, &text)?,
        None => print!("{text}"),
    }
    println!("# leaves {} balance {:.4} total {}", p.tree.unit_count(), loads.balance_factor(), loads.total_load());
    for (w, l) in loads.worker_loads.iter().enumerate() {
        println!("load w{w} {l}");
    }
    Ok(())
}

fn simulate(sim: &SimOpts) -> Result<(Vec<StreamElement>, RunConfig, RunOutput)> {
    let mut dict = TermDict::new();
    let (trace, malformed) = load_trace(&sim.trace, &mut dict)?;
    let cfg = sim.config()?;
    let mut c = Cluster::new(cfg.clone(), &trace[..cfg.warmup.min(trace.len())])?;
    c.add_malformed(malformed as u64);
    for e in &trace {
        c.push(e)?;
    }
    Ok((trace, cfg, c.finish()?))
}

fn run_cmd(a: &RunArgs) -> Result<bool> {
    let (trace, cfg, out) = simulate(&a.sim)?;
    output(a.metrics.as_deref())?.write_all(out.metrics.windows_csv().as_bytes())?;
    if let Some(p) = &a.migrations {
        std::fs::write(p, out.metrics.migrations_csv())?;
    }
    if let Some(p) = &a.routing {
        std::fs::write(p, out.metrics.routing_csv(&cfg.costs))?;
    }
    let m = &out.metrics;
    eprintln!(
        "processed {} malformed {} matches {} migrations {} repartitions {} throughput {:.0}/s",
        m.processed,
        m.malformed,
        out.matches.len(),
        m.migrations.len(),
        m.repartitions,
        m.throughput()
    );
    if a.check {
        let diffs = diff_count(&out.matches, &brute_force_matches(&trace));
        eprintln!("{diffs} diffs");
        return Ok(diffs == 0);
    }
    Ok(true)
}

fn verify(a: &VerifyArgs) -> Result<bool> {
    let (trace, _, out) = simulate(&a.sim)?;
    let expected = brute_force_matches(&trace);
    let diffs = diff_count(&out.matches, &expected);
    println!("{} matches, {} expected, {diffs} diffs", out.matches.len(), expected.len());
    Ok(diffs == 0)
}

fn bench(a: &BenchArgs) -> Result<()> {
    let algos = [MigrationAlgo::Dp, MigrationAlgo::Gr, MigrationAlgo::Si, MigrationAlgo::Ra];
    println!("algo,mean_cost_bytes,mean_load,mean_time_us,infeasible");
    for r in migration_bench(a.instances, a.cells, a.seed, &algos) {
        println!("{},{:.1},{:.1},{:.2},{}", r.algo, r.mean_cost, r.mean_load, r.mean_micros, r.infeasible);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Gen(a) => gen(a).map(|_| true),
        Cmd::Partition(a) => partition(a).map(|_| true),
        Cmd::Run(a) => run_cmd(a),
        Cmd::MigrateBench(a) => bench(a).map(|_| true),
        Cmd::Verify(a) => verify(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}\n\n{}", Cli::command().render_usage());
            ExitCode::from(2)
        }
    }
}
