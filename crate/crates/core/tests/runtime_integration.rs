//! Cross-module integration: full experiments through the harness, the lock
//! protocol under scripted delay schedules, and the termination detector
//! against scripted writes.

use std::cell::RefCell;
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stabkv::clock::VectorClock;
use stabkv::graph::generate_planar_grid;
use stabkv::harness::{
    frozen_state, initial_state, run_experiment, DelaySpec, ExperimentConfig, GraphSpec, InitSpec,
};
use stabkv::log::Record;
use stabkv::programs::serial::{default_budget, run_serial};
use stabkv::programs::{NodeVars, Program, ProgramKind};
use stabkv::runtime::{acquire_locks, ClientCtx, ExecutionMode, LockEntry, RuntimeConfig};
use stabkv::sim::{Sim, StopSignal};
use stabkv::store::{Key, Store, StoreConfig};
use stabkv::termination::run_detector;

fn base_config() -> ExperimentConfig {
    ExperimentConfig {
        term_poll_ms: 200,
        ..Default::default()
    }
}

#[test]
fn tiny_matching_path_converges_to_maximal_matching() {
    let cfg = ExperimentConfig {
        program: ProgramKind::Matching,
        graph: GraphSpec::Grid { rows: 1, cols: 4 },
        clients: 1,
        mode: ExecutionMode::Seq,
        read_quorum: 1,
        write_quorum: 3,
        delay: DelaySpec::Uniform { ms: 5 },
        ..base_config()
    };
    let run = run_experiment(&cfg, None).unwrap();
    assert!(run.metrics.converged, "tiny run must converge");
    assert!(run.metrics.final_legitimate);
    // With the fixed tie-breaks the serialized semantics pair (0,1) and
    // (2,3); either way the oracle confirmed maximality.
    let matched: Vec<_> = run
        .final_state
        .iter()
        .filter_map(|(j, v)| match v {
            NodeVars::Matching { p: Some(u), .. } => Some((*j, *u)),
            _ => None,
        })
        .collect();
    assert_eq!(matched.len(), 4, "all four nodes matched");
}

#[test]
fn single_client_seq_matches_serial_oracle_exactly() {
    for (program, init) in [
        (ProgramKind::ColorArbitrary, InitSpec::Random { seed: 42 }),
        (ProgramKind::ColorPlanar, InitSpec::Random { seed: 43 }),
        (ProgramKind::Matching, InitSpec::Random { seed: 44 }),
    ] {
        let cfg = ExperimentConfig {
            program,
            graph: GraphSpec::Grid { rows: 5, cols: 5 },
            clients: 1,
            mode: ExecutionMode::Seq,
            delay: DelaySpec::Uniform { ms: 3 },
            init,
            ..base_config()
        };
        let run = run_experiment(&cfg, None).unwrap();
        assert!(run.metrics.converged);
        let g = generate_planar_grid(5, 5).unwrap();
        let init_state = initial_state(&cfg, &g);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let oracle = run_serial(
            &g,
            Program::deterministic(program),
            init_state,
            &mut rng,
            default_budget(&g),
        )
        .unwrap();
        assert_eq!(
            run.final_state, oracle.state,
            "{program:?}: single sequential client must replay the serialized oracle"
        );
    }
}

#[test]
fn seq_runs_have_zero_cvf_and_legitimate_final_states() {
    for program in [
        ProgramKind::ColorArbitrary,
        ProgramKind::ColorPlanar,
        ProgramKind::Matching,
    ] {
        let cfg = ExperimentConfig {
            program,
            graph: GraphSpec::Grid { rows: 5, cols: 6 },
            clients: 4,
            mode: ExecutionMode::Seq,
            delay: DelaySpec::Uniform { ms: 5 },
            ..base_config()
        };
        let run = run_experiment(&cfg, None).unwrap();
        assert!(run.metrics.converged, "{program:?} converges");
        assert!(run.metrics.final_legitimate, "{program:?} legitimate");
        assert_eq!(run.metrics.cvf.cvf_total, 0);
    }
}

fn make_ctx(
    sim: &Sim,
    store: &Store,
    graph: Rc<stabkv::graph::Graph>,
    id: u16,
    mode: ExecutionMode,
) -> Rc<ClientCtx> {
    Rc::new(ClientCtx {
        id,
        nodes: vec![],
        graph,
        program: Program::deterministic(ProgramKind::ColorArbitrary),
        store: store.clone(),
        sim: sim.clone(),
        cfg: RuntimeConfig {
            mode,
            lease_ms: 100_000,
            lock_retry_limit: 0,
            ..Default::default()
        },
        stop: StopSignal::new(),
        monitor: None,
        log: Default::default(),
        clock: RefCell::new(VectorClock::new()),
        rng: RefCell::new(ChaCha8Rng::seed_from_u64(id.into())),
        counters: RefCell::new(Default::default()),
        action_ids: Rc::new(std::cell::Cell::new(0)),
    })
}

/// Under R1W1 with per-client nearest replicas, two clients racing for the
/// same lock can both confirm ownership: the mutual-exclusion violation the
/// rollback monitor exists to catch.
#[test]
fn eventual_store_admits_double_lock_confirmation() {
    let sim = Sim::new();
    let store = Store::new(sim.clone(), StoreConfig::new(3, 1, 1, 500).unwrap(), 2);
    store.set_delay_matrix(&[vec![5, 80, 80], vec![80, 5, 80]]);
    let graph = Rc::new(generate_planar_grid(1, 2).unwrap());
    store.seed(Key::Lock(0), LockEntry::free().to_bytes());
    let a = make_ctx(&sim, &store, graph.clone(), 0, ExecutionMode::EveS);
    let b = make_ctx(&sim, &store, graph, 1, ExecutionMode::EveS);
    let got: Rc<RefCell<Vec<bool>>> = Rc::default();
    for ctx in [a, b] {
        let got = got.clone();
        sim.spawn(async move {
            let owned = acquire_locks(&ctx, &[0]).await;
            got.borrow_mut().push(owned.is_some());
        });
    }
    sim.run();
    assert_eq!(*got.borrow(), vec![true, true], "both clients confirmed");
}

/// The same race on the sequential quorum configuration with uniform delays
/// resolves to a single owner.
#[test]
fn sequential_store_rejects_double_lock_confirmation() {
    let sim = Sim::new();
    let store = Store::new(sim.clone(), StoreConfig::new(3, 1, 3, 500).unwrap(), 2);
    store.set_delay_matrix(&[vec![10, 10, 10], vec![10, 10, 10]]);
    let graph = Rc::new(generate_planar_grid(1, 2).unwrap());
    store.seed(Key::Lock(0), LockEntry::free().to_bytes());
    let a = make_ctx(&sim, &store, graph.clone(), 0, ExecutionMode::Seq);
    let b = make_ctx(&sim, &store, graph, 1, ExecutionMode::Seq);
    let got: Rc<RefCell<Vec<bool>>> = Rc::default();
    for ctx in [a, b] {
        let got = got.clone();
        sim.spawn(async move {
            let owned = acquire_locks(&ctx, &[0]).await;
            got.borrow_mut().push(owned.is_some());
        });
    }
    sim.run();
    let confirms = got.borrow().iter().filter(|&&x| x).count();
    assert_eq!(confirms, 1, "exactly one owner under sequential consistency");
}

/// Expired leases are stealable.
#[test]
fn expired_lease_is_stealable() {
    let sim = Sim::new();
    let store = Store::new(sim.clone(), StoreConfig::new(3, 1, 3, 500).unwrap(), 2);
    let graph = Rc::new(generate_planar_grid(1, 2).unwrap());
    // A stalled holder whose lease ran out at t=50.
    store.seed(
        Key::Lock(0),
        LockEntry {
            owner: Some(1),
            lease_expiry: 50,
        }
        .to_bytes(),
    );
    let ctx = make_ctx(&sim, &store, graph, 0, ExecutionMode::Seq);
    let got: Rc<RefCell<Option<bool>>> = Rc::default();
    let got2 = got.clone();
    let sim2 = sim.clone();
    sim.spawn(async move {
        sim2.sleep(100).await;
        let owned = acquire_locks(&ctx, &[0]).await;
        *got2.borrow_mut() = Some(owned.is_some());
    });
    sim.run();
    assert_eq!(*got.borrow(), Some(true));
}

/// A write landing between the detector's two rounds changes the
/// modification timestamp and forces a restart; no false declaration.
#[test]
fn detector_restarts_when_state_changes_between_rounds() {
    let sim = Sim::new();
    let store = Store::new(sim.clone(), StoreConfig::new(3, 3, 3, 500).unwrap(), 2);
    for r in 0..3 {
        store.set_link_delay(1, r, 5);
        store.set_link_delay(0, r, 5);
    }
    let graph = Rc::new(generate_planar_grid(1, 3).unwrap());
    let program = Program::deterministic(ProgramKind::ColorArbitrary);
    // Legitimate coloring of the path 0-1-2.
    for (j, color) in [(0u32, 0u32), (1, 1), (2, 0)] {
        store.seed(Key::Var(j), NodeVars::Color { color }.to_bytes());
    }
    // Mid-gap perturbation: make node 1 conflict, then restore. Detector
    // round 1 ends around t=10; poll gap is 200, so land the perturbation
    // near t=100 and the restoration near t=400.
    {
        let store = store.clone();
        let sim2 = sim.clone();
        sim.spawn(async move {
            sim2.sleep(90).await;
            store
                .put(0, Key::Var(1), NodeVars::Color { color: 0 }.to_bytes(), &VectorClock::new())
                .await;
            sim2.sleep(300).await;
            let ctx = VectorClock::new().bumped(0);
            store
                .put(0, Key::Var(1), NodeVars::Color { color: 1 }.to_bytes(), &ctx)
                .await;
        });
    }
    let stop = StopSignal::new();
    let report = Rc::new(RefCell::new(None));
    {
        let report = report.clone();
        let sim2 = sim.clone();
        let store2 = store.clone();
        let graph2 = graph.clone();
        let stop2 = stop.clone();
        let frozen = {
            let store = store.clone();
            let graph = graph.clone();
            move || {
                stabkv::programs::enabled_nodes(&graph, program, &frozen_state(&store, &graph))
                    .is_empty()
            }
        };
        sim.spawn(async move {
            let r = run_detector(sim2, store2, graph2, program, 1, 200, stop2, frozen).await;
            *report.borrow_mut() = Some(r);
        });
    }
    sim.run();
    let r = report.borrow().unwrap();
    assert!(r.converged);
    assert!(r.restarts >= 1, "perturbation must force a restart");
    assert!(r.rounds > 2);
}

/// Pre-converged state: declaration after exactly two rounds.
#[test]
fn detector_declares_in_two_rounds_when_preconverged() {
    let sim = Sim::new();
    let store = Store::new(sim.clone(), StoreConfig::new(3, 3, 3, 500).unwrap(), 1);
    let graph = Rc::new(generate_planar_grid(1, 3).unwrap());
    let program = Program::deterministic(ProgramKind::ColorArbitrary);
    for (j, color) in [(0u32, 0u32), (1, 1), (2, 0)] {
        store.seed(Key::Var(j), NodeVars::Color { color }.to_bytes());
    }
    let stop = StopSignal::new();
    let report = Rc::new(RefCell::new(None));
    {
        let report = report.clone();
        let sim2 = sim.clone();
        let store2 = store.clone();
        let graph2 = graph.clone();
        let stop2 = stop.clone();
        sim.spawn(async move {
            let r = run_detector(sim2, store2, graph2, program, 0, 200, stop2, || true).await;
            *report.borrow_mut() = Some(r);
        });
    }
    sim.run();
    let r = report.borrow().unwrap();
    assert!(r.converged);
    assert_eq!(r.rounds, 2);
    assert_eq!(r.restarts, 0);
}

/// The detector never writes: no PutDone record carries its actor id.
#[test]
fn detector_is_read_only_in_full_runs() {
    let cfg = ExperimentConfig {
        program: ProgramKind::ColorArbitrary,
        graph: GraphSpec::Grid { rows: 4, cols: 4 },
        clients: 3,
        mode: ExecutionMode::Seq,
        delay: DelaySpec::Uniform { ms: 5 },
        ..base_config()
    };
    let run = run_experiment(&cfg, None).unwrap();
    let detector_id = cfg.clients as u16;
    assert!(run.records.iter().all(|r| match r {
        Record::PutDone { client, .. } => *client != detector_id,
        _ => true,
    }));
}

/// Round-robin fairness: within each client the per-node visit counts never
/// drift apart by more than one.
#[test]
fn scan_is_round_robin_fair() {
    let cfg = ExperimentConfig {
        program: ProgramKind::Matching,
        graph: GraphSpec::Grid { rows: 4, cols: 5 },
        clients: 3,
        mode: ExecutionMode::EveS,
        read_quorum: 1,
        write_quorum: 1,
        delay: DelaySpec::Tiers { ms: vec![5, 10, 15] },
        ..base_config()
    };
    let run = run_experiment(&cfg, None).unwrap();
    assert!(run.metrics.converged);
    // Recover visit counts from the per-action records.
    let mut visits: std::collections::BTreeMap<(u16, u32), u64> = Default::default();
    for r in &run.records {
        if let Record::Action { client, node, .. } = r {
            *visits.entry((*client, *node)).or_default() += 1;
        }
    }
    for c in 0..cfg.clients as u16 {
        let counts: Vec<u64> = visits
            .iter()
            .filter(|((cc, _), _)| *cc == c)
            .map(|(_, &v)| v)
            .collect();
        assert!(!counts.is_empty());
        let max = counts.iter().max().unwrap();
        let min = counts.iter().min().unwrap();
        assert!(max - min <= 1, "client {c}: visit spread {min}..{max}");
    }
}

/// A run where nothing is ever enabled: zero writes, nonzero reads, and an
/// all-zero throughput series.
#[test]
fn all_disabled_run_reads_but_never_writes() {
    // A single node has no neighbors, so the coloring guard never fires.
    let cfg = ExperimentConfig {
        program: ProgramKind::ColorArbitrary,
        graph: GraphSpec::Grid { rows: 1, cols: 1 },
        clients: 1,
        mode: ExecutionMode::Seq,
        delay: DelaySpec::Uniform { ms: 5 },
        ..base_config()
    };
    let run = run_experiment(&cfg, None).unwrap();
    assert!(run.metrics.converged);
    assert_eq!(run.metrics.total(|c| c.executed), 0);
    assert!(run.metrics.total(|c| c.gets) > 0);
    let csv = stabkv::harness::emit_throughput(&run.metrics, 1000);
    for line in csv.lines().skip(1) {
        let ops: u64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(ops, 0, "idle client must report an all-zero series");
    }
}

/// On a social graph under sequential partitioning the clients owning the
/// hub (low-id) nodes execute far more write-phase actions.
#[test]
fn social_graph_workload_is_skewed_toward_hub_owners() {
    let cfg = ExperimentConfig {
        program: ProgramKind::ColorArbitrary,
        graph: GraphSpec::Social { n: 500, m: 3 },
        clients: 10,
        mode: ExecutionMode::EveAs,
        read_quorum: 1,
        write_quorum: 1,
        delay: DelaySpec::Tiers { ms: vec![10, 20, 30] },
        ..base_config()
    };
    let run = run_experiment(&cfg, None).unwrap();
    assert!(run.metrics.converged);
    let executed: Vec<u64> = run.metrics.clients.iter().map(|c| c.executed).collect();
    let first = executed[0];
    let last = *executed.last().unwrap();
    let mut sorted = executed.clone();
    sorted.sort_unstable();
    let median = sorted[sorted.len() / 2];
    assert!(
        first > median && first >= 2 * last.max(1),
        "hub owner should dominate: {executed:?}"
    );
}

/// With a single client there is no concurrent writer, hence no cvf in any
/// mode.
#[test]
fn single_client_runs_have_no_cvf() {
    for mode in [ExecutionMode::Seq, ExecutionMode::EveAs] {
        let (r, w) = match mode {
            ExecutionMode::Seq => (1, 3),
            _ => (1, 1),
        };
        let cfg = ExperimentConfig {
            program: ProgramKind::ColorArbitrary,
            graph: GraphSpec::Grid { rows: 5, cols: 5 },
            clients: 1,
            mode,
            read_quorum: r,
            write_quorum: w,
            delay: DelaySpec::Tiers { ms: vec![10, 20, 30] },
            ..base_config()
        };
        let run = run_experiment(&cfg, None).unwrap();
        assert!(run.metrics.converged);
        assert_eq!(run.metrics.cvf.cvf_total, 0, "{mode}: lone writer saw cvf");
    }
}

/// Determinism: identical config and seed give bitwise-identical metrics.
#[test]
fn identical_configs_reproduce_metrics() {
    let cfg = ExperimentConfig {
        program: ProgramKind::Matching,
        graph: GraphSpec::Social { n: 60, m: 2 },
        clients: 5,
        mode: ExecutionMode::Rollback,
        read_quorum: 1,
        write_quorum: 1,
        delay: DelaySpec::Tiers { ms: vec![10, 20, 30] },
        seed: 9,
        ..base_config()
    };
    let a = run_experiment(&cfg, None).unwrap();
    let b = run_experiment(&cfg, None).unwrap();
    let row = |r: &stabkv::harness::RunArtifacts| {
        format!(
            "{}\n{}",
            stabkv::harness::metrics_csv_header(),
            stabkv::harness::metrics_csv_row(&r.metrics, false)
        )
    };
    assert_eq!(row(&a), row(&b));
    assert_eq!(a.records.len(), b.records.len());
}
