use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use loadplan_core::buffer_sim::simulate;
use loadplan_core::cost_model::{
    calibrate, derive_threshold, pattern_cost, CostModel, Pattern, ANCHOR_FULL_CHUNK_SECS,
    ANCHOR_PROCS, ANCHOR_RANDOM_SECS, ANCHOR_TOTAL, DEFAULT_THRESHOLD_CAP,
};
use loadplan_core::epoch_order::{brute_force_order, pso_order};
use loadplan_core::pipeline::{ablation_table, run_ablation, run_pipeline, PipelineConfig};
use loadplan_core::store::{
    bench_csv, bench_patterns, create_store, offsets_csv, parse_bench_csv, Store,
    DEFAULT_DISK_BUDGET,
};
use loadplan_core::{build_reuse_graph, generate_trace, AccessTrace, Error, ReuseGraph, SchedulePlan};

/// Offline data-loading scheduler and trace-driven I/O simulator.
#[derive(Parser, Debug)]
#[command(name = "loadplan", version)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// key=value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set num_nodes=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    dataset_size: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    nodes: Option<usize>,
    #[arg(long, global = true)]
    local_batch: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Per-node buffer capacity in samples.
    #[arg(long, global = true)]
    buffer_size: Option<usize>,
    /// clairvoyant | lru
    #[arg(long, global = true)]
    policy: Option<String>,
    /// global | per-node
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Chunk span limit, or `auto` to derive it from the cost model.
    #[arg(long, global = true)]
    threshold: Option<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| storage(p, e))
                    .with_context(|| format!("reading config {}", p.display()))?;
                PipelineConfig::from_text(&text)?
            }
            None => PipelineConfig::default(),
        };
        let flags = [
            ("dataset_size", self.dataset_size.map(|v| v.to_string())),
            ("num_epochs", self.epochs.map(|v| v.to_string())),
            ("num_nodes", self.nodes.map(|v| v.to_string())),
            ("local_batch", self.local_batch.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("buffer_size", self.buffer_size.map(|v| v.to_string())),
            ("policy", self.policy.clone()),
            ("mode", self.mode.clone()),
            ("threshold", self.threshold.clone()),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                c.set(k, &v)?;
            }
        }
        for kv in &self.overrides {
            let Some((k, v)) = kv.split_once('=') else {
                return Err(Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")).into());
            };
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the access trace and write it as text.
    GenTrace {
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Build the epoch reuse graph from a trace file (or the config).
    BuildGraph {
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Choose an epoch order for a reuse graph.
    Order {
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Exhaustive search (small epoch counts only).
        #[arg(long, conflicts_with = "pso")]
        exact: bool,
        /// Particle swarm search (default).
        #[arg(long)]
        pso: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run the full schedule and write every artifact into a directory.
    Plan {
        #[arg(long, short)]
        out_dir: PathBuf,
    },
    /// Replay a plan file through per-node buffers.
    Simulate {
        #[arg(long)]
        plan: PathBuf,
        /// Buffer capacity per node (defaults to the config's buffer_size).
        #[arg(long)]
        capacity: Option<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Create a sample store and time the four access patterns against it.
    BenchStore {
        #[arg(long)]
        path: PathBuf,
        #[arg(long, default_value_t = 65_536)]
        count: u64,
        #[arg(long, default_value_t = 4096)]
        sample_size: u64,
        #[arg(long, default_value_t = 4)]
        procs: usize,
        /// Seed for the store payload and the random pattern.
        #[arg(long = "fill-seed", default_value_t = 0)]
        fill_seed: u64,
        /// Refuse to write more payload bytes than this.
        #[arg(long, default_value_t = DEFAULT_DISK_BUDGET)]
        disk_budget: u64,
        /// Reuse an existing store instead of recreating it.
        #[arg(long)]
        reuse: bool,
        #[arg(long, short)]
        out_dir: PathBuf,
    },
    /// Fit the two-parameter cost model to random and full-chunk timings.
    Calibrate {
        /// bench.csv from bench-store; otherwise --random/--full or the built-in anchor.
        #[arg(long)]
        bench: Option<PathBuf>,
        #[arg(long, requires = "full")]
        random: Option<f64>,
        #[arg(long, requires = "random")]
        full: Option<f64>,
        /// Total samples the timings cover.
        #[arg(long)]
        total: Option<u64>,
        #[arg(long)]
        procs: Option<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Cumulative ablation table against the LRU baseline.
    Report {
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn storage(path: &Path, source: std::io::Error) -> Error {
    Error::Storage {
        path: path.to_path_buf(),
        source,
    }
}

fn read(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path).map_err(|e| storage(path, e))?)
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| storage(dir, e))?;
    }
    fs::write(path, body).map_err(|e| storage(path, e))?;
    Ok(())
}

fn emit(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(p) => write(p, body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn load_trace(path: Option<&Path>, config: &PipelineConfig) -> Result<AccessTrace> {
    Ok(match path {
        Some(p) => AccessTrace::from_text(&read(p)?)?,
        None => generate_trace(&config.trace)?,
    })
}

fn run(cli: Cli) -> Result<()> {
    let cfg = &cli.config;
    match cli.command {
        Command::GenTrace { out } => {
            let c = cfg.load()?;
            let t = generate_trace(&c.trace)?;
            write(&out, &t.to_text())?;
            eprintln!(
                "wrote {} epochs x {} samples to {}",
                t.epochs().len(),
                t.config().epoch_len(),
                out.display()
            );
        }
        Command::BuildGraph { trace, out } => {
            let c = cfg.load()?;
            let t = load_trace(trace.as_deref(), &c)?;
            let g = build_reuse_graph(&t, c.buffer_size, c.mode)?;
            write(&out, &g.to_text())?;
        }
        Command::Order {
            graph,
            exact,
            pso: _,
            out,
        } => {
            let c = cfg.load()?;
            let g = match graph {
                Some(p) => ReuseGraph::from_text(&read(&p)?)?,
                None => build_reuse_graph(&generate_trace(&c.trace)?, c.buffer_size, c.mode)?,
            };
            let order = if exact {
                brute_force_order(&g)?
            } else {
                pso_order(&g, &c.pso)?
            };
            emit(out.as_deref(), &order.to_text())?;
        }
        Command::Plan { out_dir } => {
            let c = cfg.load()?;
            let out = run_pipeline(&c)?;
            out.write_to(&out_dir)?;
            print!("{}", out.summary_text());
        }
        Command::Simulate {
            plan,
            capacity,
            out,
        } => {
            let c = cfg.load()?;
            let p = SchedulePlan::from_text(&read(&plan)?)?;
            let m = simulate(&p, capacity.unwrap_or(c.buffer_size), c.policy)?;
            emit(out.as_deref(), &m.to_csv())?;
            let per: Vec<String> = m.misses_per_epoch().iter().map(usize::to_string).collect();
            eprintln!(
                "policy={} capacity={} hits={} fetches={} per_epoch=[{}]",
                m.policy,
                m.capacity,
                m.total_hits(),
                m.total_misses(),
                per.join(" ")
            );
        }
        Command::BenchStore {
            path,
            count,
            sample_size,
            procs,
            fill_seed,
            disk_budget,
            reuse,
            out_dir,
        } => {
            if !(reuse && path.exists()) {
                create_store(&path, count, sample_size, fill_seed, disk_budget)?;
            }
            let store = Store::open(&path)?;
            let results = bench_patterns(&store, procs, fill_seed)?;
            fs::create_dir_all(&out_dir).map_err(|e| storage(&out_dir, e))?;
            write(&out_dir.join("bench.csv"), &bench_csv(&results))?;
            write(&out_dir.join("offsets.csv"), &offsets_csv(&results))?;
            for r in &results {
                println!("{:<18} {:>12.6}s", r.pattern.as_str(), r.seconds);
            }
        }
        Command::Calibrate {
            bench,
            random,
            full,
            total,
            procs,
            out,
        } => {
            let (r, f, total, procs) = match (bench, random, full) {
                (Some(p), _, _) => {
                    let rows = parse_bench_csv(&read(&p)?)?;
                    let find = |pat: Pattern| {
                        rows.iter()
                            .find(|row| row.0 == pat)
                            .copied()
                            .ok_or_else(|| Error::Validation(format!("{p:?} has no {pat} row")))
                    };
                    let (rr, fr) = (find(Pattern::Random)?, find(Pattern::FullChunk)?);
                    let Some(total) = total else {
                        bail!(Error::Config("--total is required with --bench".into()));
                    };
                    (rr.2, fr.2, total as usize, procs.unwrap_or(rr.1))
                }
                (None, Some(r), Some(f)) => (
                    r,
                    f,
                    total.map_or(ANCHOR_TOTAL, |t| t as usize),
                    procs.unwrap_or(ANCHOR_PROCS),
                ),
                _ => (
                    ANCHOR_RANDOM_SECS,
                    ANCHOR_FULL_CHUNK_SECS,
                    total.map_or(ANCHOR_TOTAL, |t| t as usize),
                    procs.unwrap_or(ANCHOR_PROCS),
                ),
            };
            let model = calibrate(r, f, total, procs)?;
            emit(out.as_deref(), &model.to_text())?;
            report_model(&model, total, procs)?;
        }
        Command::Report { out } => {
            let c = cfg.load()?;
            let rows = run_ablation(&c)?;
            emit(out.as_deref(), &ablation_table(&rows))?;
        }
    }
    Ok(())
}

fn report_model(model: &CostModel, total: usize, procs: usize) -> Result<()> {
    eprintln!(
        "threshold={} (seek/stream={:.3})",
        derive_threshold(model, DEFAULT_THRESHOLD_CAP),
        model.seek_cost / model.stream_cost
    );
    for p in Pattern::ALL {
        eprintln!("{:<18} {:>12.3}s", p.as_str(), pattern_cost(p, total, procs, model)?);
    }
    Ok(())
}

/// 3 config, 4 storage, 5 invalid or corrupt input, 6 capability limit,
/// 7 calibration, 8 bounds, 1 anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let Some(e) = err.chain().find_map(|c| c.downcast_ref::<Error>()) else {
        return 1;
    };
    match e.root() {
        Error::Config(_) => 3,
        Error::Storage { .. } => 4,
        Error::Validation(_)
        | Error::Consistency(_)
        | Error::Parse { .. }
        | Error::Corrupt { .. } => 5,
        Error::Capability(_) => 6,
        Error::Calibration(_) => 7,
        Error::Bounds(_) => 8,
        Error::Stage { .. } => 1,
    }
}

/// Context chain down to the first library error, whose own message
/// already includes its causes.
fn message(err: &anyhow::Error) -> String {
    let mut parts = Vec::new();
    for cause in err.chain() {
        parts.push(cause.to_string());
        if cause.downcast_ref::<Error>().is_some() {
            break;
        }
    }
    parts.join(": ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", message(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
