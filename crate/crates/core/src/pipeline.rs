//! End-to-end scheduling: trace -> reuse graph -> epoch order -> per step
//! (remap -> balance -> chunk) with buffer state carried across steps and
//! epochs, scored under the cost model.
//!
//! The executor plans and simulates in one pass. Before each step it
//! snapshots every node's buffer, remaps the global batch against it,
//! balances fetches, then lets each node consume its list (hits first, then
//! fetches). Clairvoyant eviction at planning time ranks residents by the
//! next global step that needs them anywhere in the schedule, since the
//! remap will route a reused sample back to the node holding it.

use std::fmt::Write as _;
use std::path::Path;

use crate::balance::{balance_step, barrier_time, chunked_barrier_time, ensure_balanced, std_dev};
use crate::buffer_sim::{BufferState, Outcome, Policy, NEVER};
use crate::chunking::{chunked_fraction, plan_chunks, ChunkPlan, DEFAULT_THRESHOLD};
use crate::cost_model::{derive_threshold, read_cost, CostModel, DEFAULT_THRESHOLD_CAP};
use crate::epoch_order::{brute_force_order, pso_order, EpochOrder, PsoParams};
use crate::error::{Error, Result, StageExt};
use crate::locality::{remap_step, slice_step, Source};
use crate::plan::{EpochPlan, SchedulePlan, StepPlan};
use crate::reuse_graph::{build_reuse_graph, ReuseGraph, WindowMode};
use crate::trace::{generate_trace, AccessTrace, SampleId, TraceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threshold {
    Fixed(usize),
    /// Derived from the cost model's break-even span.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderMethod {
    #[default]
    Pso,
    Exact,
}

/// Independent switches for the three optimizations. `reorder` and `remap`
/// together form the access-order optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Optimizations {
    pub reorder: bool,
    pub remap: bool,
    pub balance: bool,
    pub chunking: bool,
}

impl Optimizations {
    pub const ALL: Self = Self {
        reorder: true,
        remap: true,
        balance: true,
        chunking: true,
    };
    pub const NONE: Self = Self {
        reorder: false,
        remap: false,
        balance: false,
        chunking: false,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub trace: TraceConfig,
    /// Per-node buffer capacity in samples.
    pub buffer_size: usize,
    pub policy: Policy,
    pub mode: WindowMode,
    pub threshold: Threshold,
    pub order_method: OrderMethod,
    pub pso: PsoParams,
    pub model: CostModel,
    pub optim: Optimizations,
    /// Keep samples a chunk read pulled in without being asked for.
    pub insert_redundant: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let trace = TraceConfig::new(4096, 8, 4, 32, 42);
        Self {
            trace,
            buffer_size: 256,
            policy: Policy::Clairvoyant,
            mode: WindowMode::Global,
            threshold: Threshold::Fixed(DEFAULT_THRESHOLD),
            order_method: OrderMethod::Pso,
            pso: PsoParams {
                seed: trace.seed,
                ..PsoParams::default()
            },
            model: CostModel::anchored(),
            optim: Optimizations::ALL,
            insert_redundant: false,
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got `{v}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
}

impl PipelineConfig {
    /// Apply one `key=value` setting. A `seed` change also reseeds PSO
    /// unless `pso.seed` is set afterwards.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "dataset_size" => self.trace.dataset_size = parse_num(key, v)?,
            "num_epochs" => self.trace.num_epochs = parse_num(key, v)?,
            "num_nodes" => self.trace.num_nodes = parse_num(key, v)?,
            "local_batch" => self.trace.local_batch = parse_num(key, v)?,
            "seed" => {
                self.trace.seed = parse_num(key, v)?;
                self.pso.seed = self.trace.seed;
            }
            "drop_last" => self.trace.drop_last = parse_bool(key, v)?,
            "buffer_size" => self.buffer_size = parse_num(key, v)?,
            "policy" => self.policy = v.parse()?,
            "mode" => self.mode = v.parse()?,
            "threshold" => {
                self.threshold = if v == "auto" {
                    Threshold::Auto
                } else {
                    Threshold::Fixed(parse_num(key, v)?)
                }
            }
            "order_method" => {
                self.order_method = match v {
                    "pso" => OrderMethod::Pso,
                    "exact" => OrderMethod::Exact,
                    _ => return Err(Error::Config(format!("order_method: unknown `{v}`"))),
                }
            }
            "pso.swarm_size" => self.pso.swarm_size = parse_num(key, v)?,
            "pso.max_iters" => self.pso.max_iters = parse_num(key, v)?,
            "pso.p_personal" => self.pso.p_personal = parse_num(key, v)?,
            "pso.p_global" => self.pso.p_global = parse_num(key, v)?,
            "pso.stagnation_limit" => self.pso.stagnation_limit = parse_num(key, v)?,
            "pso.seed" => self.pso.seed = parse_num(key, v)?,
            "seek_cost" => self.model.seek_cost = parse_num(key, v)?,
            "stream_cost" => self.model.stream_cost = parse_num(key, v)?,
            "reorder" => self.optim.reorder = parse_bool(key, v)?,
            "remap" => self.optim.remap = parse_bool(key, v)?,
            "balance" => self.optim.balance = parse_bool(key, v)?,
            "chunking" => self.optim.chunking = parse_bool(key, v)?,
            "insert_redundant" => self.insert_redundant = parse_bool(key, v)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Flat `key=value` lines; `#` starts a comment line.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, "expected key=value"))?;
            c.set(k, v).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let t = &self.trace;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("dataset_size", t.dataset_size.to_string());
        kv("num_epochs", t.num_epochs.to_string());
        kv("num_nodes", t.num_nodes.to_string());
        kv("local_batch", t.local_batch.to_string());
        kv("seed", t.seed.to_string());
        kv("drop_last", t.drop_last.to_string());
        kv("buffer_size", self.buffer_size.to_string());
        kv("policy", self.policy.to_string());
        kv("mode", self.mode.to_string());
        kv(
            "threshold",
            match self.threshold {
                Threshold::Fixed(n) => n.to_string(),
                Threshold::Auto => "auto".into(),
            },
        );
        kv(
            "order_method",
            match self.order_method {
                OrderMethod::Pso => "pso",
                OrderMethod::Exact => "exact",
            }
            .into(),
        );
        kv("pso.swarm_size", self.pso.swarm_size.to_string());
        kv("pso.max_iters", self.pso.max_iters.to_string());
        kv("pso.p_personal", self.pso.p_personal.to_string());
        kv("pso.p_global", self.pso.p_global.to_string());
        kv("pso.stagnation_limit", self.pso.stagnation_limit.to_string());
        kv("pso.seed", self.pso.seed.to_string());
        kv("seek_cost", self.model.seek_cost.to_string());
        kv("stream_cost", self.model.stream_cost.to_string());
        kv("reorder", self.optim.reorder.to_string());
        kv("remap", self.optim.remap.to_string());
        kv("balance", self.optim.balance.to_string());
        kv("chunking", self.optim.chunking.to_string());
        kv("insert_redundant", self.insert_redundant.to_string());
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.trace.validate()?;
        if self.buffer_size == 0 {
            return Err(Error::Config("buffer_size must be >= 1".into()));
        }
        if let Threshold::Fixed(0) = self.threshold {
            return Err(Error::Config("threshold must be >= 1".into()));
        }
        self.pso.validate()?;
        self.model.validate()
    }

    pub fn resolved_threshold(&self) -> usize {
        match self.threshold {
            Threshold::Fixed(n) => n,
            Threshold::Auto => derive_threshold(&self.model, DEFAULT_THRESHOLD_CAP),
        }
    }
}

/// Knobs for one executor pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleOptions {
    pub capacity: usize,
    pub policy: Policy,
    pub remap: bool,
    pub balance: bool,
    /// `None` reads every fetch on its own.
    pub chunk_threshold: Option<usize>,
    pub insert_redundant: bool,
    pub model: CostModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    /// Trace epoch index.
    pub epoch: usize,
    pub step: usize,
    pub node: usize,
    pub hits: usize,
    pub misses: usize,
    pub fetches_before: usize,
    pub fetches_after: usize,
    pub barrier_before: f64,
    pub barrier_after: f64,
    pub batch_size: usize,
    pub read_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub total_accesses: usize,
    pub hits: usize,
    /// Storage fetches over the whole run.
    pub misses: usize,
    /// Storage fetches per scheduled epoch.
    pub misses_per_epoch: Vec<usize>,
    /// Sum over steps of the slowest node's read cost.
    pub barrier_total: f64,
    /// Sum of every node's read cost.
    pub read_cost_total: f64,
    pub chunked_percent: f64,
    pub redundant: usize,
    pub max_batch_std: f64,
}

impl Summary {
    pub fn hit_rate(&self) -> f64 {
        if self.total_accesses == 0 {
            0.0
        } else {
            self.hits as f64 / self.total_accesses as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScheduleRun {
    pub plan: SchedulePlan,
    pub policy: Policy,
    pub rows: Vec<MetricsRow>,
    pub summary: Summary,
}

impl ScheduleRun {
    /// `epoch,step,node,hits,misses,policy,fetches_before,fetches_after,
    /// barrier_before,barrier_after,batch_size,read_cost`.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from(
            "epoch,step,node,hits,misses,policy,fetches_before,fetches_after,barrier_before,barrier_after,batch_size,read_cost\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.epoch,
                r.step,
                r.node,
                r.hits,
                r.misses,
                self.policy,
                r.fetches_before,
                r.fetches_after,
                r.barrier_before,
                r.barrier_after,
                r.batch_size,
                r.read_cost
            );
        }
        out
    }
}

/// Next scheduled step of every sample, with a cursor per sample.
struct StepOracle {
    occurrences: Vec<Vec<u64>>,
    cursor: Vec<usize>,
}

impl StepOracle {
    fn new(trace: &AccessTrace, order: &[usize]) -> Result<Self> {
        let steps = trace.steps();
        let mut occurrences = vec![Vec::new(); trace.config().dataset_size];
        for (pos, &e) in order.iter().enumerate() {
            for s in 0..steps {
                let t = (pos * steps + s) as u64;
                for &id in trace.global_batch(e, s)? {
                    occurrences[id as usize].push(t);
                }
            }
        }
        let cursor = vec![0; occurrences.len()];
        Ok(Self {
            occurrences,
            cursor,
        })
    }

    fn next_use(&self, id: SampleId) -> u64 {
        let occ = &self.occurrences[id as usize];
        occ.get(self.cursor[id as usize]).copied().unwrap_or(NEVER)
    }

    /// Mark `id` used at step `t`; returns its next use after `t`.
    fn consume(&mut self, id: SampleId, t: u64) -> u64 {
        let occ = &self.occurrences[id as usize];
        let c = &mut self.cursor[id as usize];
        while *c < occ.len() && occ[*c] <= t {
            *c += 1;
        }
        self.next_use(id)
    }
}

fn node_reads(fetch: &[SampleId], threshold: Option<usize>) -> Result<ChunkPlan> {
    match threshold {
        Some(t) => plan_chunks(fetch, t),
        None => Ok(ChunkPlan::singles(fetch)),
    }
}

fn step_barrier(
    step: &crate::locality::StepAssignment,
    threshold: Option<usize>,
    model: &CostModel,
) -> Result<f64> {
    Ok(match threshold {
        None => barrier_time(step, model),
        Some(_) => {
            let plans = (0..step.num_nodes())
                .map(|k| node_reads(&step.fetches(k), threshold))
                .collect::<Result<Vec<_>>>()?;
            chunked_barrier_time(&plans, model)
        }
    })
}

/// Plan and simulate the trace in the given epoch order.
pub fn execute_schedule(
    trace: &AccessTrace,
    order: &EpochOrder,
    opts: &ScheduleOptions,
) -> Result<ScheduleRun> {
    let cfg = *trace.config();
    let (n, b, steps) = (cfg.num_nodes, cfg.local_batch, trace.steps());
    let mut oracle = StepOracle::new(trace, &order.order)?;
    let mut buffers = (0..n)
        .map(|_| BufferState::new(opts.capacity, opts.policy))
        .collect::<Result<Vec<_>>>()?;
    let mut clock = 0u64;
    let mut rows = Vec::with_capacity(order.order.len() * steps * n);
    let mut epochs = Vec::with_capacity(order.order.len());
    let mut summary = Summary {
        total_accesses: 0,
        hits: 0,
        misses: 0,
        misses_per_epoch: Vec::new(),
        barrier_total: 0.0,
        read_cost_total: 0.0,
        chunked_percent: 0.0,
        redundant: 0,
        max_batch_std: 0.0,
    };

    for (pos, &e) in order.order.iter().enumerate() {
        let mut epoch_plan = EpochPlan {
            epoch: e,
            steps: Vec::with_capacity(steps),
        };
        let mut epoch_misses = 0;
        for s in 0..steps {
            let t = (pos * steps + s) as u64;
            let batch = trace.global_batch(e, s)?;
            let mut step = if opts.remap {
                remap_step(&buffers, batch, b)?
            } else {
                slice_step(&buffers, batch, b)
            };
            let fetches_before = step.fetch_counts();
            let barrier_before = step_barrier(&step, opts.chunk_threshold, &opts.model)?;
            if opts.balance {
                step = balance_step(&step, batch)?;
                ensure_balanced(&step)?;
            }
            step.normalize();

            for (k, node) in step.nodes.iter().enumerate() {
                for a in node {
                    let next = oracle.consume(a.sample, t);
                    let outcome = buffers[k].access(a.sample, clock, next);
                    clock += 1;
                    if a.source == Source::BufferHit && outcome != Outcome::Hit {
                        return Err(Error::Consistency(format!(
                            "sample {} tagged as a hit on node {k} was not resident",
                            a.sample
                        )));
                    }
                    if opts.policy == Policy::Clairvoyant {
                        for (j, other) in buffers.iter_mut().enumerate() {
                            if j != k {
                                other.refresh(a.sample, next);
                            }
                        }
                    }
                }
            }

            let reads = (0..n)
                .map(|k| node_reads(&step.fetches(k), opts.chunk_threshold))
                .collect::<Result<Vec<_>>>()?;
            if opts.insert_redundant {
                for (k, plan) in reads.iter().enumerate() {
                    for id in plan.redundant_ids(&step.fetches(k)) {
                        buffers[k].access(id, clock, oracle.next_use(id));
                        clock += 1;
                    }
                }
            }

            let costs: Vec<f64> = reads.iter().map(|p| read_cost(p, &opts.model)).collect();
            let barrier_after = costs.iter().copied().fold(0.0, f64::max);
            let sizes = step.sizes();
            let fetch_counts = step.fetch_counts();
            for k in 0..n {
                let misses = fetch_counts[k];
                rows.push(MetricsRow {
                    epoch: e,
                    step: s,
                    node: k,
                    hits: sizes[k] - misses,
                    misses,
                    fetches_before: fetches_before[k],
                    fetches_after: misses,
                    barrier_before,
                    barrier_after,
                    batch_size: sizes[k],
                    read_cost: costs[k],
                });
                summary.misses += misses;
                summary.hits += sizes[k] - misses;
                epoch_misses += misses;
            }
            summary.total_accesses += batch.len();
            summary.barrier_total += barrier_after;
            summary.read_cost_total += costs.iter().sum::<f64>();
            summary.redundant += reads.iter().map(|p| p.redundant).sum::<usize>();
            summary.max_batch_std = summary.max_batch_std.max(std_dev(&sizes));
            epoch_plan.steps.push(StepPlan {
                assignment: step,
                reads,
            });
        }
        summary.misses_per_epoch.push(epoch_misses);
        epochs.push(epoch_plan);
    }

    summary.chunked_percent =
        chunked_fraction(epochs.iter().flat_map(|e| e.steps.iter()).flat_map(|s| s.reads.iter()));

    Ok(ScheduleRun {
        plan: SchedulePlan {
            dataset_size: cfg.dataset_size,
            num_nodes: n,
            local_batch: b,
            threshold: opts.chunk_threshold.unwrap_or(1),
            order: order.clone(),
            epochs,
        },
        policy: opts.policy,
        rows,
        summary,
    })
}

/// Epoch order for a graph under the configured method; identity when
/// reordering is disabled.
pub fn choose_order(graph: &ReuseGraph, config: &PipelineConfig, reorder: bool) -> Result<EpochOrder> {
    if !reorder {
        return Ok(EpochOrder::identity(graph));
    }
    match config.order_method {
        OrderMethod::Pso => pso_order(graph, &config.pso),
        OrderMethod::Exact => brute_force_order(graph),
    }
}

fn options_for(config: &PipelineConfig, optim: Optimizations, policy: Policy) -> ScheduleOptions {
    ScheduleOptions {
        capacity: config.buffer_size,
        policy,
        remap: optim.remap,
        balance: optim.balance,
        chunk_threshold: optim.chunking.then(|| config.resolved_threshold()),
        insert_redundant: config.insert_redundant && optim.chunking,
        model: config.model,
    }
}

/// Options of the comparison baseline: original order, slice partition,
/// LRU buffers, no balancing, single reads.
pub fn baseline_options(config: &PipelineConfig) -> ScheduleOptions {
    options_for(config, Optimizations::NONE, Policy::Lru)
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub config: PipelineConfig,
    pub trace: AccessTrace,
    pub graph: ReuseGraph,
    pub order: EpochOrder,
    pub optimized: ScheduleRun,
    pub baseline: ScheduleRun,
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate().stage("config")?;
    let trace = generate_trace(&config.trace).stage("trace")?;
    let graph = build_reuse_graph(&trace, config.buffer_size, config.mode).stage("reuse_graph")?;
    let order = choose_order(&graph, config, config.optim.reorder).stage("epoch_order")?;
    let optimized = execute_schedule(
        &trace,
        &order,
        &options_for(config, config.optim, config.policy),
    )
    .stage("schedule")?;
    let baseline = execute_schedule(&trace, &EpochOrder::identity(&graph), &baseline_options(config))
        .stage("baseline")?;
    Ok(PipelineOutput {
        config: config.clone(),
        trace,
        graph,
        order,
        optimized,
        baseline,
    })
}

fn summary_text(label: &str, s: &Summary, out: &mut String) {
    let _ = writeln!(out, "[{label}]");
    let _ = writeln!(out, "accesses={}", s.total_accesses);
    let _ = writeln!(out, "hits={}", s.hits);
    let _ = writeln!(out, "fetches={}", s.misses);
    let per: Vec<String> = s.misses_per_epoch.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "fetches_per_epoch={}", per.join(" "));
    let _ = writeln!(out, "hit_rate={}", s.hit_rate());
    let _ = writeln!(out, "barrier_total={}", s.barrier_total);
    let _ = writeln!(out, "read_cost_total={}", s.read_cost_total);
    let _ = writeln!(out, "chunked_percent={}", s.chunked_percent);
    let _ = writeln!(out, "redundant={}", s.redundant);
    let _ = writeln!(out, "max_batch_std={}", s.max_batch_std);
}

impl PipelineOutput {
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        summary_text("optimized", &self.optimized.summary, &mut out);
        summary_text("baseline", &self.baseline.summary, &mut out);
        let speedup = ratio(self.baseline.summary.barrier_total, self.optimized.summary.barrier_total);
        let _ = writeln!(out, "[comparison]");
        let _ = writeln!(out, "modeled_speedup={speedup}");
        out
    }

    /// Write trace.txt, graph.txt, order.txt, plan.txt, metrics.csv,
    /// baseline_metrics.csv, summary.txt and config.txt into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::storage(dir, e))?;
        let files = [
            ("config.txt", self.config.to_text()),
            ("trace.txt", self.trace.to_text()),
            ("graph.txt", self.graph.to_text()),
            ("order.txt", self.order.to_text()),
            ("plan.txt", self.optimized.plan.to_text()),
            ("metrics.csv", self.optimized.metrics_csv()),
            ("baseline_metrics.csv", self.baseline.metrics_csv()),
            ("summary.txt", self.summary_text()),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::storage(&path, e))?;
        }
        Ok(())
    }
}

/// `num / den`, with 0/0 read as no change.
pub fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub label: &'static str,
    pub summary: Summary,
}

/// Cumulative ablation: LRU baseline, then access-order optimization
/// (reorder + remap + configured eviction), then balancing, then chunking.
pub fn run_ablation(config: &PipelineConfig) -> Result<Vec<AblationRow>> {
    config.validate().stage("config")?;
    let trace = generate_trace(&config.trace).stage("trace")?;
    let graph = build_reuse_graph(&trace, config.buffer_size, config.mode).stage("reuse_graph")?;
    let identity = EpochOrder::identity(&graph);
    let optimized = choose_order(&graph, config, true).stage("epoch_order")?;

    let optim1 = Optimizations {
        reorder: true,
        remap: true,
        balance: false,
        chunking: false,
    };
    let optim2 = Optimizations {
        balance: true,
        ..optim1
    };
    let steps: [(&'static str, &EpochOrder, ScheduleOptions); 4] = [
        ("baseline (LRU)", &identity, baseline_options(config)),
        ("+ access order", &optimized, options_for(config, optim1, config.policy)),
        ("+ load balance", &optimized, options_for(config, optim2, config.policy)),
        ("+ chunk loading", &optimized, options_for(config, Optimizations::ALL, config.policy)),
    ];
    steps
        .into_iter()
        .map(|(label, order, opts)| {
            Ok(AblationRow {
                label,
                summary: execute_schedule(&trace, order, &opts).stage("schedule")?.summary,
            })
        })
        .collect()
}

/// Plain-text table of an ablation run.
pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<18} {:>10} {:>9} {:>14} {:>14} {:>9} {:>8}",
        "configuration", "fetches", "hit_rate", "barrier_s", "read_cost_s", "chunked%", "speedup"
    );
    let base = rows.first().map(|r| r.summary.barrier_total).unwrap_or(0.0);
    for r in rows {
        let s = &r.summary;
        let _ = writeln!(
            out,
            "{:<18} {:>10} {:>9.4} {:>14.6} {:>14.6} {:>9.2} {:>7.2}x",
            r.label,
            s.misses,
            s.hit_rate(),
            s.barrier_total,
            s.read_cost_total,
            s.chunked_percent,
            ratio(base, s.barrier_total)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PipelineConfig {
        let mut c = PipelineConfig::default();
        c.trace = TraceConfig::new(256, 4, 2, 8, 3);
        c.pso.seed = 3;
        c.buffer_size = 48;
        c
    }

    #[test]
    fn config_text_round_trip() {
        let mut c = small();
        c.threshold = Threshold::Auto;
        c.optim.balance = false;
        c.mode = WindowMode::PerNode;
        let back = PipelineConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn config_errors() {
        assert!(PipelineConfig::from_text("nonsense\n").is_err());
        assert!(PipelineConfig::from_text("colour=blue\n").is_err());
        assert!(PipelineConfig::from_text("balance=maybe\n").is_err());
        let mut c = small();
        c.buffer_size = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn stage_is_reported() {
        let mut c = small();
        c.trace.dataset_size = 3;
        let err = run_pipeline(&c).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "config", .. }));
        assert!(matches!(err.root(), Error::Config(_)));
    }

    #[test]
    fn pipeline_beats_baseline() {
        let out = run_pipeline(&small()).unwrap();
        assert!(out.optimized.summary.misses <= out.baseline.summary.misses);
        assert_eq!(
            out.optimized.summary.total_accesses,
            out.baseline.summary.total_accesses
        );
        assert!(out.optimized.summary.barrier_total <= out.baseline.summary.barrier_total);
    }

    #[test]
    fn first_epoch_is_all_fetches() {
        let out = run_pipeline(&small()).unwrap();
        assert_eq!(out.optimized.summary.misses_per_epoch[0], 256);
        assert_eq!(out.baseline.summary.misses_per_epoch[0], 256);
    }

    #[test]
    fn plan_text_round_trip() {
        let out = run_pipeline(&small()).unwrap();
        let text = out.optimized.plan.to_text();
        let back = SchedulePlan::from_text(&text).unwrap();
        assert_eq!(back, out.optimized.plan);
    }

    #[test]
    fn redundant_insertion_runs() {
        let mut c = small();
        c.insert_redundant = true;
        c.threshold = Threshold::Fixed(40);
        let out = run_pipeline(&c).unwrap();
        assert!(out.optimized.summary.redundant > 0);
    }

    #[test]
    fn ablation_has_four_rows() {
        let rows = run_ablation(&small()).unwrap();
        assert_eq!(rows.len(), 4);
        let table = ablation_table(&rows);
        assert!(table.contains("+ chunk loading"));
    }
}
