//! Experiment orchestration: wires graph, partition, store, clients,
//! monitor, and termination detector into one simulated run; collects the
//! metrics and emits the CSV outputs.

use std::cell::RefCell;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::ClientId;
use crate::cvf::{count_cvf_posthoc, CvfStats};
use crate::graph::{
    generate_nested_triangulation, generate_planar_grid, generate_random_regular,
    generate_social, load_graph, load_partition, partition_random, partition_sequential, Graph,
    GraphError, NodeId, Partition,
};
use crate::log::{value_hash, Outcome, Record, RunLog, GENESIS};
use crate::monitor::{spawn_monitor, MonitorStats};
use crate::programs::{
    enabled_nodes, is_legitimate, random_state, zero_state, ColorVariant, GlobalState, NbrMeta,
    NdMeta, NodeVars, Program, ProgramKind,
};
use crate::runtime::{
    run_client, ClientCounters, ClientCtx, ExecutionMode, LockEntry, RuntimeConfig,
};
use crate::sim::{Ms, Sim, StopSignal};
use crate::store::{resolve, Key, Store, StoreConfig, StoreError};
use crate::termination::{run_detector, TerminationReport};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub enum GraphSpec {
    Regular { n: usize, d: usize },
    Social { n: usize, m: usize },
    Grid { rows: usize, cols: usize },
    Triangulation { n: usize },
    File { path: PathBuf },
}

impl GraphSpec {
    /// CLI syntax: `regular:n,d` | `social:n,m` | `grid:r,c` | `tri:n`.
    pub fn parse(s: &str) -> Option<GraphSpec> {
        let (kind, args) = s.split_once(':')?;
        let nums: Vec<usize> = args
            .split(',')
            .map(|x| x.trim().parse().ok())
            .collect::<Option<_>>()?;
        match (kind, nums.as_slice()) {
            ("regular", [n, d]) => Some(GraphSpec::Regular { n: *n, d: *d }),
            ("social", [n, m]) => Some(GraphSpec::Social { n: *n, m: *m }),
            ("grid", [r, c]) => Some(GraphSpec::Grid { rows: *r, cols: *c }),
            ("tri", [n]) => Some(GraphSpec::Triangulation { n: *n }),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            GraphSpec::Regular { n, d } => format!("regular-{n}x{d}"),
            GraphSpec::Social { n, m } => format!("social-{n}x{m}"),
            GraphSpec::Grid { rows, cols } => format!("grid-{rows}x{cols}"),
            GraphSpec::Triangulation { n } => format!("tri-{n}"),
            GraphSpec::File { path } => format!(
                "file-{}",
                path.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default()
            ),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub enum PartitionSpec {
    Sequential,
    Random,
    File { path: PathBuf },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub enum DelaySpec {
    /// Same each-way delay on every link.
    Uniform { ms: Ms },
    /// delay(actor, replica) = tiers[(actor + replica) % len]: every client
    /// has a different nearest replica, the heterogeneity that makes quorum
    /// level observable.
    Tiers { ms: Vec<Ms> },
    /// Explicit rows (clients then detector) x replicas.
    Matrix { ms: Vec<Vec<Ms>> },
    /// Lines `client replica ms`; unlisted links default to 0.
    File { path: PathBuf },
}

impl DelaySpec {
    fn max_delay(&self, matrix: &[Vec<Ms>]) -> Ms {
        let _ = self;
        matrix.iter().flatten().copied().max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub enum InitSpec {
    Zero,
    Random { seed: u64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub program: ProgramKind,
    /// Random-color variant of the arbitrary coloring program.
    pub random_color: bool,
    pub graph: GraphSpec,
    pub partition: PartitionSpec,
    pub mode: ExecutionMode,
    pub n_replicas: usize,
    pub read_quorum: usize,
    pub write_quorum: usize,
    pub timeout_ms: Ms,
    pub delay: DelaySpec,
    pub clients: usize,
    pub seed: u64,
    pub opt: bool,
    pub epsilon_ms: Ms,
    /// None: 10x the estimated worst-case action latency.
    pub lease_ms: Option<Ms>,
    pub init: InitSpec,
    /// Simulated wall-time cap; a run that has not converged by then is
    /// reported as non-converged.
    pub cap_ms: Ms,
    pub term_poll_ms: Ms,
    pub monitor_delay_ms: Ms,
    pub action_overhead_ms: Ms,
    /// Throughput bucket width.
    pub bucket_ms: Ms,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            program: ProgramKind::ColorArbitrary,
            random_color: false,
            graph: GraphSpec::Grid { rows: 10, cols: 10 },
            partition: PartitionSpec::Sequential,
            mode: ExecutionMode::Seq,
            n_replicas: 3,
            read_quorum: 1,
            write_quorum: 3,
            timeout_ms: 500,
            delay: DelaySpec::Uniform { ms: 10 },
            clients: 8,
            seed: 1,
            opt: false,
            epsilon_ms: 0,
            lease_ms: None,
            init: InitSpec::Zero,
            cap_ms: 600_000,
            term_poll_ms: 200,
            monitor_delay_ms: 5,
            action_overhead_ms: 1,
            bucket_ms: 10_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Deterministic sub-stream seeding.
fn sub_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(tag)
        .rotate_left(17)
}

pub fn build_graph(spec: &GraphSpec, seed: u64) -> Result<Graph, HarnessError> {
    Ok(match spec {
        GraphSpec::Regular { n, d } => generate_random_regular(*n, *d, sub_seed(seed, 11))?,
        GraphSpec::Social { n, m } => generate_social(*n, *m, sub_seed(seed, 12))?,
        GraphSpec::Grid { rows, cols } => generate_planar_grid(*rows, *cols)?,
        GraphSpec::Triangulation { n } => generate_nested_triangulation(*n, sub_seed(seed, 13))?,
        GraphSpec::File { path } => load_graph(&std::fs::read_to_string(path)?)?,
    })
}

pub fn build_partition(
    spec: &PartitionSpec,
    g: &Graph,
    k: usize,
    seed: u64,
) -> Result<Partition, HarnessError> {
    Ok(match spec {
        PartitionSpec::Sequential => partition_sequential(g, k)?,
        PartitionSpec::Random => partition_random(g, k, sub_seed(seed, 21))?,
        PartitionSpec::File { path } => {
            let p = load_partition(&std::fs::read_to_string(path)?, g.node_count())?;
            if p.client_count() != k {
                return Err(HarnessError::Config(format!(
                    "partition file has {} clients, config wants {k}",
                    p.client_count()
                )));
            }
            p
        }
    })
}

fn build_delay_matrix(
    spec: &DelaySpec,
    actors: usize,
    replicas: usize,
) -> Result<Vec<Vec<Ms>>, HarnessError> {
    let mut m = vec![vec![0; replicas]; actors];
    match spec {
        DelaySpec::Uniform { ms } => {
            for row in &mut m {
                row.fill(*ms);
            }
        }
        DelaySpec::Tiers { ms } => {
            if ms.is_empty() {
                return Err(HarnessError::Config("empty delay tiers".into()));
            }
            for (a, row) in m.iter_mut().enumerate() {
                for (r, cell) in row.iter_mut().enumerate() {
                    *cell = ms[(a + r) % ms.len()];
                }
            }
        }
        DelaySpec::Matrix { ms } => {
            for (a, row) in m.iter_mut().enumerate() {
                for (r, cell) in row.iter_mut().enumerate() {
                    *cell = *ms
                        .get(a)
                        .and_then(|row| row.get(r))
                        .ok_or_else(|| HarnessError::Config("delay matrix too small".into()))?;
                }
            }
        }
        DelaySpec::File { path } => {
            for (lineno, raw) in std::fs::read_to_string(path)?.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let parts: Vec<&str> = line.split_whitespace().collect();
                let parsed: Option<(usize, usize, Ms)> = (|| {
                    let [a, r, d] = parts.as_slice() else {
                        return None;
                    };
                    Some((a.parse().ok()?, r.parse().ok()?, d.parse().ok()?))
                })();
                let (a, r, d) = parsed.ok_or_else(|| {
                    HarnessError::Config(format!("delay file line {}: {raw:?}", lineno + 1))
                })?;
                if a < actors && r < replicas {
                    m[a][r] = d;
                }
            }
        }
    }
    Ok(m)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClientMetrics {
    pub client: ClientId,
    pub scans: u64,
    pub executed: u64,
    pub disabled: u64,
    pub skips_opt: u64,
    pub skips_lock: u64,
    pub skips_quorum: u64,
    pub aborts: u64,
    pub gets: u64,
    pub puts: u64,
    pub neighbor_gets: u64,
    pub lock_wait_ms: Ms,
    pub lock_retries: u64,
    #[serde(skip)]
    pub executed_ts: Vec<Ms>,
}

impl ClientMetrics {
    fn from_counters(client: ClientId, c: &ClientCounters) -> Self {
        ClientMetrics {
            client,
            scans: c.scans,
            executed: c.executed,
            disabled: c.disabled,
            skips_opt: c.skips_opt,
            skips_lock: c.skips_lock,
            skips_quorum: c.skips_quorum,
            aborts: c.aborts,
            gets: c.gets,
            puts: c.puts,
            neighbor_gets: c.neighbor_gets,
            lock_wait_ms: c.lock_wait_ms,
            lock_retries: c.lock_retries,
            executed_ts: c.executed_ts.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunMetrics {
    pub program: ProgramKind,
    pub random_color: bool,
    pub graph_label: String,
    pub mode: ExecutionMode,
    pub seed: u64,
    pub converged: bool,
    pub convergence_ms: Ms,
    pub rounds: u64,
    pub restarts: u64,
    pub final_legitimate: bool,
    pub end_ms: Ms,
    pub cap_ms: Ms,
    pub bucket_ms: Ms,
    pub clients: Vec<ClientMetrics>,
    pub cvf: CvfStats,
    pub monitor: MonitorStats,
    pub write_overlaps: u64,
}

impl RunMetrics {
    pub fn total<F: Fn(&ClientMetrics) -> u64>(&self, f: F) -> u64 {
        self.clients.iter().map(f).sum()
    }
}

pub struct RunArtifacts {
    pub metrics: RunMetrics,
    pub records: Vec<Record>,
    pub final_state: GlobalState,
    pub graph: Rc<Graph>,
    pub partition: Partition,
}

fn validate(cfg: &ExperimentConfig, n: usize) -> Result<(), HarnessError> {
    if cfg.clients == 0 || cfg.clients > n {
        return Err(HarnessError::Config(format!(
            "clients must be in 1..={n} (got {})",
            cfg.clients
        )));
    }
    let store_cfg = StoreConfig::new(
        cfg.n_replicas,
        cfg.read_quorum,
        cfg.write_quorum,
        cfg.timeout_ms,
    )?;
    let required = cfg.mode.required_consistency();
    if store_cfg.classify() != required {
        return Err(HarnessError::Config(format!(
            "mode {} requires {required:?} consistency, but N{}R{}W{} is {:?}",
            cfg.mode,
            cfg.n_replicas,
            cfg.read_quorum,
            cfg.write_quorum,
            store_cfg.classify()
        )));
    }
    Ok(())
}

/// The state the store is seeded with at t=0.
pub fn initial_state(cfg: &ExperimentConfig, g: &Graph) -> GlobalState {
    match cfg.init {
        InitSpec::Zero => zero_state(g, cfg.program),
        InitSpec::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 31));
            random_state(g, cfg.program, &mut rng)
        }
    }
}

/// Omniscient resolved state over all replica contents.
pub fn frozen_state(store: &Store, g: &Graph) -> GlobalState {
    g.nodes()
        .map(|j| {
            let versions = store.frozen_versions(Key::Var(j));
            let winner = resolve(&versions).expect("seeded key");
            (
                j,
                NodeVars::from_bytes(&winner.value).expect("var record decodes"),
            )
        })
        .collect()
}

/// Execute one experiment. The whole run is a deterministic function of the
/// config (including its seed).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    event_log_path: Option<&Path>,
) -> Result<RunArtifacts, HarnessError> {
    run_experiment_paced(cfg, event_log_path, None)
}

/// Like [`run_experiment`], optionally pacing the event loop against real
/// time (pace 1.0 = real time); outputs are identical either way.
pub fn run_experiment_paced(
    cfg: &ExperimentConfig,
    event_log_path: Option<&Path>,
    pace: Option<f64>,
) -> Result<RunArtifacts, HarnessError> {
    let graph = Rc::new(build_graph(&cfg.graph, cfg.seed)?);
    let n = graph.node_count();
    validate(cfg, n)?;
    let partition = build_partition(&cfg.partition, &graph, cfg.clients, cfg.seed)?;
    let store_cfg = StoreConfig::new(
        cfg.n_replicas,
        cfg.read_quorum,
        cfg.write_quorum,
        cfg.timeout_ms,
    )?;

    let sim = Sim::new();
    let actors = cfg.clients + 1; // detector is the last actor
    let store = Store::new(sim.clone(), store_cfg, actors);
    let delays = build_delay_matrix(&cfg.delay, actors, cfg.n_replicas)?;
    store.set_delay_matrix(&delays);
    let max_delay = cfg.delay.max_delay(&delays);

    let lease_ms = cfg.lease_ms.unwrap_or_else(|| {
        // 10x a worst-case action: locking the largest neighborhood (three
        // ops per lock key) plus read and write round trips.
        let est = (3 * (graph.max_degree() as Ms + 1) + 4) * 2 * max_delay.max(1) + 20;
        10 * est
    });

    let log = match event_log_path {
        Some(p) => RunLog::with_file(p)?,
        None => RunLog::new(),
    };

    // Seed initial state (genesis versions at every replica, logged so the
    // analyzers know the abstract value at t=0).
    let init_state = initial_state(cfg, &graph);
    for j in graph.nodes() {
        let bytes = init_state[&j].to_bytes();
        log.push(Record::PutDone {
            client: GENESIS,
            key: Key::Var(j),
            wall_ts: 0,
            t_done: 0,
            clock: Default::default(),
            hash: value_hash(&bytes),
            ok: true,
        });
        store.seed(Key::Var(j), bytes);
        store.seed(Key::Lock(j), LockEntry::free().to_bytes());
        store.seed(Key::NdMeta(j), NdMeta::default().to_bytes());
        store.seed(Key::NbrMeta(j), NbrMeta::default().to_bytes());
    }

    let stop = StopSignal::new();
    let program = Program::new(
        cfg.program,
        if cfg.random_color {
            ColorVariant::Random
        } else {
            ColorVariant::Deterministic
        },
    );

    let (monitor, monitor_stats) = if cfg.mode.monitor_on() {
        let (h, s) = spawn_monitor(
            &sim,
            graph.clone(),
            cfg.clients,
            cfg.monitor_delay_ms,
            log.clone(),
        );
        (Some(h), Some(s))
    } else {
        (None, None)
    };

    let runtime_cfg = RuntimeConfig {
        mode: cfg.mode,
        opt: cfg.opt,
        epsilon_ms: cfg.epsilon_ms,
        lease_ms,
        action_overhead_ms: cfg.action_overhead_ms,
        ..RuntimeConfig::default()
    };

    let action_ids = Rc::new(std::cell::Cell::new(0u64));
    let mut client_ctxs = Vec::with_capacity(cfg.clients);
    for c in 0..cfg.clients as ClientId {
        let ctx = Rc::new(ClientCtx {
            id: c,
            nodes: partition.nodes_of(c),
            graph: graph.clone(),
            program,
            store: store.clone(),
            sim: sim.clone(),
            cfg: runtime_cfg,
            stop: stop.clone(),
            monitor: monitor.clone(),
            log: log.clone(),
            clock: RefCell::new(Default::default()),
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(sub_seed(
                cfg.seed,
                1000 + u64::from(c),
            ))),
            counters: RefCell::new(ClientCounters::default()),
            action_ids: action_ids.clone(),
        });
        client_ctxs.push(ctx.clone());
        sim.spawn(run_client(ctx));
    }

    // Termination detector.
    let report: Rc<RefCell<Option<TerminationReport>>> = Rc::default();
    {
        let report = report.clone();
        let store2 = store.clone();
        let graph2 = graph.clone();
        let stop2 = stop.clone();
        let sim2 = sim.clone();
        let detector_id = cfg.clients as ClientId;
        let poll = cfg.term_poll_ms;
        let frozen = {
            let store = store.clone();
            let graph = graph.clone();
            move || enabled_nodes(&graph, program, &frozen_state(&store, &graph)).is_empty()
        };
        sim.spawn(async move {
            let r = run_detector(
                sim2, store2, graph2, program, detector_id, poll, stop2, frozen,
            )
            .await;
            *report.borrow_mut() = Some(r);
        });
    }

    // Wall-time cap watchdog.
    {
        let stop2 = stop.clone();
        let sim2 = sim.clone();
        let cap = cfg.cap_ms;
        sim.spawn(async move {
            while !stop2.is_set() {
                if sim2.now() >= cap {
                    stop2.set();
                    break;
                }
                let step = (cap - sim2.now()).min(1000);
                sim2.sleep(step).await;
            }
        });
    }

    let end_ms = sim.run_paced(pace);
    log.flush();

    let report = report.borrow().unwrap_or(TerminationReport {
        converged: false,
        convergence_ms: end_ms,
        rounds: 0,
        restarts: 0,
    });
    let final_state = frozen_state(&store, &graph);
    let final_legitimate = is_legitimate(&graph, program, &final_state);
    let records = log.take_records();
    let cvf = count_cvf_posthoc(&records)
        .map_err(|e| HarnessError::Config(format!("cvf analysis: {e}")))?;
    if cfg.mode == ExecutionMode::Seq {
        assert_eq!(
            cvf.cvf_total, 0,
            "sequential consistency must not produce cvf"
        );
    }
    let clients: Vec<ClientMetrics> = client_ctxs
        .iter()
        .map(|ctx| ClientMetrics::from_counters(ctx.id, &ctx.counters.borrow()))
        .collect();
    let metrics = RunMetrics {
        program: cfg.program,
        random_color: cfg.random_color,
        graph_label: cfg.graph.label(),
        mode: cfg.mode,
        seed: cfg.seed,
        converged: report.converged,
        convergence_ms: report.convergence_ms,
        rounds: report.rounds,
        restarts: report.restarts,
        final_legitimate,
        end_ms,
        cap_ms: cfg.cap_ms,
        bucket_ms: cfg.bucket_ms,
        clients,
        cvf,
        monitor: monitor_stats.map(|s| s.borrow().clone()).unwrap_or_default(),
        write_overlaps: count_write_overlaps(&graph, &records),
    };
    Ok(RunArtifacts {
        metrics,
        records,
        final_state,
        graph,
        partition,
    })
}

/// Pairs of write phases on neighboring nodes that overlapped in simulation
/// time; reported, never assumed away.
pub fn count_write_overlaps(g: &Graph, records: &[Record]) -> u64 {
    let mut by_node: std::collections::BTreeMap<NodeId, Vec<(Ms, Ms)>> = Default::default();
    for r in records {
        if let Record::Action {
            node,
            wrote: true,
            write_start: Some(ws),
            t_end,
            ..
        } = r
        {
            by_node.entry(*node).or_default().push((*ws, *t_end));
        }
    }
    let mut overlaps = 0u64;
    for (j, k) in g.edges() {
        let (Some(a), Some(b)) = (by_node.get(&j), by_node.get(&k)) else {
            continue;
        };
        // Per node the intervals are sequential; two-pointer sweep.
        let (mut ia, mut ib) = (0, 0);
        while ia < a.len() && ib < b.len() {
            let (sa, ea) = a[ia];
            let (sb, eb) = b[ib];
            if sa < eb && sb < ea {
                overlaps += 1;
            }
            if ea <= eb {
                ia += 1;
            } else {
                ib += 1;
            }
        }
    }
    overlaps
}

// ---------------------------------------------------------------------------
// CSV and table emission
// ---------------------------------------------------------------------------

pub fn metrics_csv_header() -> String {
    "program,graph,mode,random_color,opt,seed,converged,convergence_ms,rounds,restarts,\
     final_legitimate,cvf,stutter,executed,disabled,skips_opt,skips_lock,skips_quorum,aborts,\
     violations,false_aborts,gets,puts,neighbor_gets,lock_wait_ms,lock_retries,write_overlaps,\
     end_ms"
        .to_string()
}

pub fn metrics_csv_row(m: &RunMetrics, opt: bool) -> String {
    format!(
        "{:?},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        m.program,
        m.graph_label,
        m.mode,
        m.random_color,
        opt,
        m.seed,
        m.converged,
        m.convergence_ms,
        m.rounds,
        m.restarts,
        m.final_legitimate,
        m.cvf.cvf_total,
        m.cvf.stutter_total,
        m.total(|c| c.executed),
        m.total(|c| c.disabled),
        m.total(|c| c.skips_opt),
        m.total(|c| c.skips_lock),
        m.total(|c| c.skips_quorum),
        m.total(|c| c.aborts),
        m.monitor.violations,
        m.monitor.false_positives,
        m.total(|c| c.gets),
        m.total(|c| c.puts),
        m.total(|c| c.neighbor_gets),
        m.total(|c| c.lock_wait_ms),
        m.total(|c| c.lock_retries),
        m.write_overlaps,
        m.end_ms,
    )
}

/// Per-client per-bucket executed-action counts over the run's duration.
/// Schema: `bucket_start,client,ops,mode`.
pub fn emit_throughput(m: &RunMetrics, bucket_ms: Ms) -> String {
    let bucket_ms = bucket_ms.max(1);
    let horizon = m.convergence_ms.max(1);
    let buckets = horizon.div_ceil(bucket_ms);
    let mut out = String::from("bucket_start,client,ops,mode\n");
    for c in &m.clients {
        let mut counts = vec![0u64; buckets as usize];
        for &ts in &c.executed_ts {
            let b = (ts / bucket_ms).min(buckets - 1) as usize;
            counts[b] += 1;
        }
        for (b, count) in counts.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                b as Ms * bucket_ms,
                c.client,
                count,
                m.mode
            ));
        }
    }
    out
}

/// Violation log: one row per detected violation with the outcome each
/// involved action ended with.
pub fn violations_csv(records: &[Record]) -> String {
    let mut outcomes: std::collections::HashMap<u64, (Outcome, Option<Ms>, Ms)> =
        Default::default();
    for r in records {
        if let Record::Action {
            action_id,
            outcome,
            write_start,
            t_end,
            ..
        } = r
        {
            outcomes.insert(*action_id, (*outcome, *write_start, *t_end));
        }
    }
    let phase_at = |action: u64, t: Ms| -> &'static str {
        match outcomes.get(&action) {
            None => "unknown",
            Some((Outcome::Aborted, _, _)) => "read",
            Some((_, Some(ws), _)) if *ws <= t => "write",
            Some((_, _, te)) if *te <= t => "done",
            Some(_) => "read",
        }
    };
    let outcome_of = |action: u64| -> &'static str {
        match outcomes.get(&action) {
            Some((Outcome::Aborted, _, _)) => "aborted",
            Some(_) => "completed",
            None => "unknown",
        }
    };
    let mut out =
        String::from("detect_ts,node_a,node_b,client_a,client_b,phase_a,phase_b,outcome_a,outcome_b\n");
    for r in records {
        if let Record::Violation {
            edge,
            clients,
            actions,
            detect_ts,
            notify_ts,
            ..
        } = r
        {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                detect_ts,
                edge.0,
                edge.1,
                clients.0,
                clients.1,
                phase_at(actions.0, *notify_ts),
                phase_at(actions.1, *notify_ts),
                outcome_of(actions.0),
                outcome_of(actions.1),
            ));
        }
    }
    out
}

/// Per-client cvf classification: `client,executed,cvf,stutter`.
pub fn cvf_csv(stats: &CvfStats) -> String {
    let mut out = String::from("client,executed,cvf,stutter\n");
    for (client, s) in &stats.per_client {
        out.push_str(&format!(
            "{},{},{},{}\n",
            client, s.executed, s.cvf, s.stutter
        ));
    }
    out
}

pub fn write_run_outputs(
    artifacts: &RunArtifacts,
    cfg: &ExperimentConfig,
    dir: &Path,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let m = &artifacts.metrics;
    std::fs::write(
        dir.join("metrics.csv"),
        format!("{}\n{}\n", metrics_csv_header(), metrics_csv_row(m, cfg.opt)),
    )?;
    std::fs::write(
        dir.join("throughput.csv"),
        emit_throughput(m, cfg.bucket_ms),
    )?;
    std::fs::write(
        dir.join("violations.csv"),
        violations_csv(&artifacts.records),
    )?;
    std::fs::write(dir.join("cvf.csv"), cvf_csv(&m.cvf))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    #[serde(default)]
    pub baseline: bool,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub seeds: Vec<u64>,
    pub experiments: Vec<SuiteEntry>,
}

#[derive(Clone, Debug)]
pub struct SuiteRow {
    pub name: String,
    pub baseline: bool,
    pub runs: usize,
    pub converged: usize,
    pub median_convergence_ms: f64,
    /// (baseline - variant) / baseline * 100.
    pub benefit_percent: Option<f64>,
    /// baseline / variant.
    pub speedup: Option<f64>,
}

pub fn median(xs: &mut [f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

pub fn benefit_percent(baseline: f64, variant: f64) -> f64 {
    (baseline - variant) / baseline * 100.0
}

pub fn speedup(baseline: f64, variant: f64) -> f64 {
    baseline / variant
}

/// Run every experiment over every seed; non-converged runs contribute the
/// cap as a lower bound on their convergence time.
pub fn run_suite(spec: &SuiteSpec) -> Result<Vec<SuiteRow>, HarnessError> {
    if spec.seeds.is_empty() {
        return Err(HarnessError::Config("suite needs at least one seed".into()));
    }
    if spec.experiments.iter().filter(|e| e.baseline).count() != 1 {
        return Err(HarnessError::Config(
            "suite needs exactly one baseline experiment".into(),
        ));
    }
    let mut medians: Vec<(usize, f64, usize)> = Vec::new();
    for (i, entry) in spec.experiments.iter().enumerate() {
        let mut times = Vec::new();
        let mut converged = 0;
        for &seed in &spec.seeds {
            let mut cfg = entry.config.clone();
            cfg.seed = seed;
            let run = run_experiment(&cfg, None)?;
            if run.metrics.converged {
                converged += 1;
                times.push(run.metrics.convergence_ms as f64);
            } else {
                times.push(cfg.cap_ms as f64);
            }
        }
        medians.push((i, median(&mut times), converged));
    }
    let base = medians
        .iter()
        .find(|(i, _, _)| spec.experiments[*i].baseline)
        .map(|&(_, m, _)| m)
        .unwrap();
    Ok(medians
        .into_iter()
        .map(|(i, m, converged)| {
            let entry = &spec.experiments[i];
            SuiteRow {
                name: entry.name.clone(),
                baseline: entry.baseline,
                runs: spec.seeds.len(),
                converged,
                median_convergence_ms: m,
                benefit_percent: (!entry.baseline).then(|| benefit_percent(base, m)),
                speedup: (!entry.baseline).then(|| speedup(base, m)),
            }
        })
        .collect())
}

pub fn suite_table(rows: &[SuiteRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:>6} {:>10} {:>16} {:>10} {:>9}\n",
        "experiment", "runs", "converged", "median_conv_ms", "benefit%", "speedup"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<24} {:>6} {:>10} {:>16.0} {:>10} {:>9}\n",
            if r.baseline {
                format!("{} (baseline)", r.name)
            } else {
                r.name.clone()
            },
            r.runs,
            r.converged,
            r.median_convergence_ms,
            r.benefit_percent
                .map(|b| format!("{b:.1}"))
                .unwrap_or_else(|| "-".into()),
            r.speedup
                .map(|s| format!("x{s:.1}"))
                .unwrap_or_else(|| "-".into()),
        ));
    }
    out
}

pub fn suite_csv(rows: &[SuiteRow]) -> String {
    let mut out = String::from("experiment,baseline,runs,converged,median_convergence_ms,benefit_percent,speedup\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.0},{},{}\n",
            r.name,
            r.baseline,
            r.runs,
            r.converged,
            r.median_convergence_ms,
            r.benefit_percent
                .map(|b| format!("{b:.3}"))
                .unwrap_or_default(),
            r.speedup.map(|s| format!("{s:.3}")).unwrap_or_default(),
        ));
    }
    out
}
