//! Two-round fixpoint detection.
//!
//! The detector is just another store client, reading at R = N. Round 1
//! takes a full-graph snapshot and checks that no node has an enabled
//! action; round 2, one poll interval later, re-reads and declares
//! termination only if every node's (variables, modification timestamp)
//! pair is unchanged. Any difference restarts from round 1. The detector
//! never writes.

use std::rc::Rc;

use futures::future::join_all;

use crate::clock::ClientId;
use crate::graph::{Graph, NodeId};
use crate::programs::{enabled_nodes, GlobalState, NodeVars, Program};
use crate::sim::{Ms, Sim, StopSignal};
use crate::store::{Key, Store};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TerminationReport {
    pub converged: bool,
    /// Declaration time minus experiment start (simulation ms).
    pub convergence_ms: Ms,
    /// Snapshot rounds executed.
    pub rounds: u64,
    /// Times the detector went back to round 1.
    pub restarts: u64,
}

/// Per-node snapshot entry: resolved variable bytes plus the max wall
/// timestamp over the returned version set.
type Snapshot = Vec<(Vec<u8>, Ms)>;

async fn take_snapshot(
    store: &Store,
    actor: ClientId,
    n: usize,
) -> Option<Snapshot> {
    let quorum = store.config().n_replicas;
    let gets = (0..n as NodeId).map(|j| store.get_quorum(actor, Key::Var(j), quorum));
    let results = join_all(gets).await;
    let mut out = Vec::with_capacity(n);
    for res in results {
        if !res.success {
            return None;
        }
        let ts = res.versions.iter().map(|v| v.wall_ts).max()?;
        let winner = res.resolved()?;
        out.push((winner.value.clone(), ts));
    }
    Some(out)
}

fn decode_state(snapshot: &Snapshot) -> GlobalState {
    snapshot
        .iter()
        .enumerate()
        .map(|(j, (bytes, _))| {
            (
                j as NodeId,
                NodeVars::from_bytes(bytes).expect("var record decodes"),
            )
        })
        .collect()
}

/// Run until termination is declared (setting `stop`) or `stop` is raised
/// externally by the wall-time cap. `frozen_check` is the omniscient
/// no-enabled-node oracle evaluated at the declaration instant; false means
/// a false termination, which is a hard error of the platform.
pub async fn run_detector(
    sim: Sim,
    store: Store,
    graph: Rc<Graph>,
    program: Program,
    actor: ClientId,
    poll_ms: Ms,
    stop: StopSignal,
    frozen_check: impl Fn() -> bool,
) -> TerminationReport {
    let n = graph.node_count();
    let mut rounds = 0u64;
    let mut restarts = 0u64;
    loop {
        if stop.is_set() {
            return TerminationReport {
                converged: false,
                convergence_ms: sim.now(),
                rounds,
                restarts,
            };
        }
        rounds += 1;
        let Some(first) = take_snapshot(&store, actor, n).await else {
            restarts += 1;
            sim.sleep(poll_ms).await;
            continue;
        };
        let state = decode_state(&first);
        if !enabled_nodes(&graph, program, &state).is_empty() {
            restarts += 1;
            sim.sleep(poll_ms).await;
            continue;
        }
        // Stability gap between the rounds: a write still in flight when
        // round 1 ran will have landed (and changed a timestamp) by round 2.
        sim.sleep(poll_ms).await;
        if stop.is_set() {
            return TerminationReport {
                converged: false,
                convergence_ms: sim.now(),
                rounds,
                restarts,
            };
        }
        rounds += 1;
        let Some(second) = take_snapshot(&store, actor, n).await else {
            restarts += 1;
            sim.sleep(poll_ms).await;
            continue;
        };
        if first == second {
            assert!(
                frozen_check(),
                "false termination: an enabled node exists at declaration"
            );
            stop.set();
            return TerminationReport {
                converged: true,
                convergence_ms: sim.now(),
                rounds,
                restarts,
            };
        }
        restarts += 1;
    }
}
