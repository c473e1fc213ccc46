use std::fmt::Write as _;

use crate::adjust::MigrationAlgo;
use crate::dispatch::RoutingStats;
use crate::model::WorkerId;

/// Power-of-two bucketed histogram. Bucket `i` counts values in `[2^(i-1), 2^i)`; bucket 0 counts values below 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Histogram {
    pub buckets: Vec<u64>,
    pub count: u64,
    pub sum: f64,
    pub max: f64,
}

impl Histogram {
    pub fn record(&mut self, v: f64) {
        let v = v.max(0.0);
        let b = if v < 1.0 { 0 } else { v.log2().floor() as usize + 1 };
        if self.buckets.len() <= b {
            self.buckets.resize(b + 1, 0);
        }
        self.buckets[b] += 1;
        self.count += 1;
        self.sum += v;
        self.max = self.max.max(v);
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Upper bound of the bucket holding quantile `q`.
    pub fn quantile(&self, q: f64) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let target = (q * self.count as f64).ceil().max(1.0) as u64;
        let mut acc = 0;
        for (i, &n) in self.buckets.iter().enumerate() {
            acc += n;
            if acc >= target {
                return if i == 0 { 1.0 } else { (1u64 << i) as f64 };
            }
        }
        self.max
    }
}

/// Exact quantile of an unsorted sample.
pub fn quantile(values: &mut [f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let i = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len()) - 1;
    values[i]
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowMetrics {
    pub window: u64,
    pub tuples: u64,
    pub wall_secs: f64,
    pub p50_latency: f64,
    pub p99_latency: f64,
    /// Worker load over the window from routed request counts.
    pub loads: Vec<f64>,
    pub routing: RoutingStats,
}

impl WindowMetrics {
    pub fn throughput(&self) -> f64 {
        if self.wall_secs > 0.0 {
            self.tuples as f64 / self.wall_secs
        } else {
            0.0
        }
    }

    pub fn max_load(&self) -> f64 {
        self.loads.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MigrationEvent {
    pub window: u64,
    pub src: WorkerId,
    pub dst: WorkerId,
    pub n_cells: usize,
    pub sum_load: f64,
    pub sum_size: u64,
    /// Selection algorithm, or `global` for the end of dual routing.
    pub algo: String,
    pub plan_ms: f64,
    pub phase1: usize,
    pub payload_bytes: usize,
    pub duration_ticks: u64,
    pub rolled_back: bool,
}

impl MigrationEvent {
    pub fn log_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.3}",
            self.window, self.src, self.dst, self.n_cells, self.sum_load, self.sum_size, self.algo, self.plan_ms
        )
    }

    /// The log line without wall-clock fields.
    pub fn stable_key(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.window,
            self.src,
            self.dst,
            self.n_cells,
            self.sum_load,
            self.sum_size,
            self.algo,
            self.phase1,
            self.rolled_back
        )
    }

    pub fn local(window: u64, src: WorkerId, dst: WorkerId, algo: MigrationAlgo) -> Self {
        MigrationEvent {
            window,
            src,
            dst,
            n_cells: 0,
            sum_load: 0.0,
            sum_size: 0,
            algo: algo.to_string(),
            plan_ms: 0.0,
            phase1: 0,
            payload_bytes: 0,
            duration_ticks: 0,
            rolled_back: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub processed: u64,
    pub malformed: u64,
    pub wall_secs: f64,
    /// Tuple latency from arrival to last worker completion, in ticks (one tick per arriving tuple).
    pub latency_ticks: Histogram,
    pub latency_us: Histogram,
    pub windows: Vec<WindowMetrics>,
    pub migrations: Vec<MigrationEvent>,
    pub discarded: u64,
    pub duplicates: u64,
    pub repartitions: u64,
    pub messages: u64,
}

impl MetricsReport {
    pub fn throughput(&self) -> f64 {
        if self.wall_secs > 0.0 {
            self.processed as f64 / self.wall_secs
        } else {
            0.0
        }
    }

    /// `window,throughput,p50_latency,p99_latency,load_w0,...`
    pub fn windows_csv(&self) -> String {
        let m = self.windows.first().map_or(0, |w| w.loads.len());
        let mut s = String::from("window,throughput,p50_latency,p99_latency");
        for w in 0..m {
            let _ = write!(s, ",load_w{w}");
        }
        s.push('\n');
        for w in &self.windows {
            let _ = write!(s, "{},{:.1},{:.4},{:.4}", w.window, w.throughput(), w.p50_latency, w.p99_latency);
            for l in &w.loads {
                let _ = write!(s, ",{l}");
            }
            s.push('\n');
        }
        s
    }

    /// `window,worker,objects,inserts,deletes,load`
    pub fn routing_csv(&self, costs: &crate::model::CostModel) -> String {
        let mut s = String::from("window,worker,objects,inserts,deletes,load\n");
        for w in &self.windows {
            for row in w.routing.csv_rows(w.window, costs) {
                s.push_str(&row);
                s.push('\n');
            }
        }
        s
    }

    /// `window,src,dst,n_cells,sum_L,sum_S,algo,plan_ms`
    pub fn migrations_csv(&self) -> String {
        let mut s = String::from("window,src,dst,n_cells,sum_L,sum_S,algo,plan_ms\n");
        for e in &self.migrations {
            s.push_str(&e.log_line());
            s.push('\n');
        }
        s
    }
}
