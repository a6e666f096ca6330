//! Experiment CLI: run a single experiment, a comparison suite, post-hoc
//! cvf analysis of an event log, or partition statistics.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use stabkv::cvf::count_cvf_posthoc;
use stabkv::graph::{partition_stats, Partition};
use stabkv::harness::{
    build_graph, build_partition, cvf_csv, metrics_csv_header, metrics_csv_row,
    run_experiment_paced, run_suite, suite_csv, suite_table, violations_csv, write_run_outputs,
    DelaySpec, ExperimentConfig, GraphSpec, InitSpec, PartitionSpec, SuiteSpec,
};
use stabkv::log::parse_log;
use stabkv::programs::ProgramKind;
use stabkv::runtime::ExecutionMode;

#[derive(Parser)]
#[command(name = "stabkv", about = "Self-stabilizing graph programs over a simulated quorum-replicated key-value store", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its metrics row.
    Run(RunArgs),
    /// Run a suite of experiments (JSON matrix) and print the comparison
    /// table of convergence benefits against the baseline.
    Suite {
        /// JSON file: { "seeds": [..], "experiments": [ { "name", "baseline", "config" } ] }
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Post-hoc cvf analysis of an events.jsonl log.
    Analyze {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partition statistics for a graph + partitioning scheme.
    Stats(StatsArgs),
    /// Generate a graph and write it as an edge-list file (for external
    /// partitioning tools or reproducible inputs).
    Gen {
        /// regular:n,d | social:n,m | grid:r,c | tri:n
        #[arg(long)]
        gen: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Full experiment config as JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// color-planar | color-arbitrary | matching
    #[arg(long)]
    program: Option<String>,
    /// Random-color variant of the arbitrary coloring statement.
    #[arg(long)]
    random_color: bool,
    /// regular:n,d | social:n,m | grid:r,c | tri:n
    #[arg(long)]
    gen: Option<String>,
    /// Edge-list file (one "u v" per line).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// seq | random | file:PATH
    #[arg(long)]
    partition: Option<String>,
    /// seq | eve-s | eve-as | rollback
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    n_replicas: Option<usize>,
    #[arg(long)]
    read_quorum: Option<usize>,
    #[arg(long)]
    write_quorum: Option<usize>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Uniform each-way link delay in ms.
    #[arg(long)]
    delay_ms: Option<u64>,
    /// Rotated delay tiers, e.g. "10,20,30" (each client gets a different
    /// nearest replica).
    #[arg(long)]
    delay_tiers: Option<String>,
    /// Per-link delay file: lines "client replica ms".
    #[arg(long)]
    delay_file: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Repetitions with consecutive seeds starting at --seed.
    #[arg(long, default_value_t = 1)]
    reps: u64,
    /// Enable the neighbor-read skip optimization.
    #[arg(long)]
    opt: bool,
    #[arg(long)]
    epsilon_ms: Option<u64>,
    #[arg(long)]
    lease_ms: Option<u64>,
    /// zero | random:SEED
    #[arg(long)]
    init: Option<String>,
    /// Simulated wall-time cap in seconds.
    #[arg(long)]
    cap_s: Option<u64>,
    #[arg(long)]
    term_poll_ms: Option<u64>,
    /// Throughput bucket width in seconds.
    #[arg(long)]
    bucket_s: Option<u64>,
    /// Pace the simulation against real time (realism runs).
    #[arg(long)]
    wall_clock: bool,
    /// Output directory (metrics.csv, throughput.csv, violations.csv,
    /// cvf.csv, events.jsonl).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    gen: Option<String>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value = "seq")]
    partition: String,
    #[arg(long, default_value_t = 8)]
    clients: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn parse_partition(s: &str) -> Result<PartitionSpec> {
    Ok(match s {
        "seq" => PartitionSpec::Sequential,
        "random" => PartitionSpec::Random,
        other => match other.strip_prefix("file:") {
            Some(p) => PartitionSpec::File { path: p.into() },
            None => bail!("unknown partition scheme {other:?} (seq | random | file:PATH)"),
        },
    })
}

fn parse_program(s: &str) -> Result<ProgramKind> {
    Ok(match s {
        "color-planar" => ProgramKind::ColorPlanar,
        "color-arbitrary" => ProgramKind::ColorArbitrary,
        "matching" => ProgramKind::Matching,
        other => bail!("unknown program {other:?}"),
    })
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)
            .with_context(|| format!("parsing {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = &args.program {
        cfg.program = parse_program(p)?;
    }
    if args.random_color {
        cfg.random_color = true;
    }
    if let Some(g) = &args.gen {
        cfg.graph = GraphSpec::parse(g).with_context(|| format!("bad --gen {g:?}"))?;
    }
    if let Some(path) = &args.graph {
        cfg.graph = GraphSpec::File { path: path.clone() };
    }
    if let Some(p) = &args.partition {
        cfg.partition = parse_partition(p)?;
    }
    if let Some(m) = &args.mode {
        cfg.mode = ExecutionMode::parse(m).with_context(|| format!("bad --mode {m:?}"))?;
        // Pick the matching quorum defaults unless explicitly overridden.
        if args.read_quorum.is_none() && args.write_quorum.is_none() {
            let (r, w) = match cfg.mode {
                ExecutionMode::Seq => (1, 3),
                _ => (1, 1),
            };
            cfg.read_quorum = r;
            cfg.write_quorum = w.min(cfg.n_replicas);
        }
    }
    if let Some(v) = args.clients {
        cfg.clients = v;
    }
    if let Some(v) = args.n_replicas {
        cfg.n_replicas = v;
    }
    if let Some(v) = args.read_quorum {
        cfg.read_quorum = v;
    }
    if let Some(v) = args.write_quorum {
        cfg.write_quorum = v;
    }
    if let Some(v) = args.timeout_ms {
        cfg.timeout_ms = v;
    }
    if let Some(v) = args.delay_ms {
        cfg.delay = DelaySpec::Uniform { ms: v };
    }
    if let Some(t) = &args.delay_tiers {
        let ms: Vec<u64> = t
            .split(',')
            .map(|x| x.trim().parse().context("bad --delay-tiers"))
            .collect::<Result<_>>()?;
        cfg.delay = DelaySpec::Tiers { ms };
    }
    if let Some(p) = &args.delay_file {
        cfg.delay = DelaySpec::File { path: p.clone() };
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if args.opt {
        cfg.opt = true;
    }
    if let Some(v) = args.epsilon_ms {
        cfg.epsilon_ms = v;
    }
    if let Some(v) = args.lease_ms {
        cfg.lease_ms = Some(v);
    }
    if let Some(init) = &args.init {
        cfg.init = match init.strip_prefix("random:") {
            Some(seed) => InitSpec::Random {
                seed: seed.parse().context("bad --init random:SEED")?,
            },
            None if init == "zero" => InitSpec::Zero,
            None => bail!("unknown init {init:?} (zero | random:SEED)"),
        };
    }
    if let Some(v) = args.cap_s {
        cfg.cap_ms = v * 1000;
    }
    if let Some(v) = args.term_poll_ms {
        cfg.term_poll_ms = v;
    }
    if let Some(v) = args.bucket_s {
        cfg.bucket_ms = v * 1000;
    }
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let base = build_config(&args)?;
    let pace = args.wall_clock.then_some(1.0);
    println!("{}", metrics_csv_header());
    for rep in 0..args.reps {
        let mut cfg = base.clone();
        cfg.seed = base.seed + rep;
        let rep_dir = args.out.as_ref().map(|d| {
            if args.reps == 1 {
                d.clone()
            } else {
                d.join(format!("seed-{}", cfg.seed))
            }
        });
        if let Some(dir) = &rep_dir {
            std::fs::create_dir_all(dir)?;
        }
        let event_path = rep_dir.as_ref().map(|d| d.join("events.jsonl"));
        let run = run_experiment_paced(&cfg, event_path.as_deref(), pace)?;
        println!("{}", metrics_csv_row(&run.metrics, cfg.opt));
        if let Some(dir) = &rep_dir {
            write_run_outputs(&run, &cfg, dir)?;
        }
    }
    Ok(())
}

fn cmd_suite(matrix: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let spec: SuiteSpec = serde_json::from_str(&std::fs::read_to_string(&matrix)?)
        .with_context(|| format!("parsing {}", matrix.display()))?;
    let rows = run_suite(&spec)?;
    let table = suite_table(&rows);
    print!("{table}");
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("suite.csv"), suite_csv(&rows))?;
        std::fs::write(dir.join("summary.txt"), table)?;
    }
    Ok(())
}

fn cmd_analyze(log: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let records = parse_log(&std::fs::read_to_string(&log)?)?;
    let stats = count_cvf_posthoc(&records)?;
    let cvf = cvf_csv(&stats);
    let violations = violations_csv(&records);
    print!("{cvf}");
    println!("total_cvf,{}", stats.cvf_total);
    println!("total_stutter,{}", stats.stutter_total);
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("cvf.csv"), cvf)?;
        std::fs::write(dir.join("violations.csv"), violations)?;
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let spec = match (&args.gen, &args.graph) {
        (Some(g), None) => GraphSpec::parse(g).with_context(|| format!("bad --gen {g:?}"))?,
        (None, Some(p)) => GraphSpec::File { path: p.clone() },
        _ => bail!("exactly one of --gen or --graph is required"),
    };
    let g = build_graph(&spec, args.seed)?;
    let pspec = parse_partition(&args.partition)?;
    let p: Partition = build_partition(&pspec, &g, args.clients, args.seed)?;
    let stats = partition_stats(&g, &p)?;
    println!(
        "{:>9} {:>9} {:>9} {:>11} {:>9} {:>9} {:>13} {:>13}",
        "partition", "maxDegree", "minDegree", "totalDegree", "nodeCount", "avgDegree", "externalEdges", "internalEdges"
    );
    println!(
        "# graph: {} nodes, {} edges",
        g.node_count(),
        g.edge_count()
    );
    for s in &stats.per_client {
        println!(
            "{:>9} {:>9} {:>9} {:>11} {:>9} {:>9.2} {:>13} {:>13}",
            s.client,
            s.max_degree,
            s.min_degree,
            s.total_degree,
            s.node_count,
            s.avg_degree,
            s.external_edges,
            s.internal_edges
        );
    }
    Ok(())
}

fn cmd_gen(gen: String, seed: u64, out: PathBuf) -> Result<()> {
    let spec = GraphSpec::parse(&gen).with_context(|| format!("bad --gen {gen:?}"))?;
    let g = build_graph(&spec, seed)?;
    // Order lines so node ids first appear in ascending order; a loader
    // that compacts ids by first appearance then reproduces the labeling.
    let mut edges: Vec<(u32, u32)> = g.edges().collect();
    edges.sort_by_key(|&(u, v)| (v, u));
    let mut text = String::with_capacity(edges.len() * 8);
    for (u, v) in edges {
        text.push_str(&format!("{u} {v}\n"));
    }
    std::fs::write(&out, text)?;
    println!(
        "wrote {} nodes, {} edges to {}",
        g.node_count(),
        g.edge_count(),
        out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Suite { matrix, out } => cmd_suite(matrix, out),
        Command::Analyze { log, out } => cmd_analyze(log, out),
        Command::Stats(args) => cmd_stats(args),
        Command::Gen { gen, seed, out } => cmd_gen(gen, seed, out),
    }
}
