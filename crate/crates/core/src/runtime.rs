//! Passive-node client executor.
//!
//! Each client owns a partition of the nodes and scans it round-robin. Per
//! node it runs the two-phase action execution over the store: a read phase
//! that resolves the neighborhood and evaluates the guard, and a write phase
//! that updates the node's variables. Depending on the execution mode it
//! also takes leased locks on the closed neighborhood, reports
//! critical-section intervals to the violation monitor, and reacts to abort
//! notifications at the read/write boundary.

use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;
use std::rc::Rc;

use futures::future::join_all;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clock::{ClientId, VectorClock};
use crate::graph::{Graph, NodeId};
use crate::log::{value_hash, Outcome, ReadRecord, Record, RunLog};
use crate::monitor::{CsInterval, MonitorHandle};
use crate::programs::{NbrMeta, NdMeta, NeighborhoodSnapshot, NodeVars, Program};
use crate::sim::{Ms, Sim, StopSignal};
use crate::store::{GetResult, Key, Store};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExecutionMode {
    /// Sequential store + locks; the baseline. No cvf can occur.
    Seq,
    /// Eventual store + locks; stabilization absorbs the (rare) cvf.
    EveS,
    /// Eventual store, no locks; aggressive stabilization.
    EveAs,
    /// Eventual store + locks + monitor; detect-rollback.
    Rollback,
}

impl ExecutionMode {
    pub fn locks_on(self) -> bool {
        !matches!(self, ExecutionMode::EveAs)
    }

    pub fn monitor_on(self) -> bool {
        matches!(self, ExecutionMode::Rollback)
    }

    /// The store consistency class this mode requires.
    pub fn required_consistency(self) -> crate::store::Consistency {
        match self {
            ExecutionMode::Seq => crate::store::Consistency::Sequential,
            _ => crate::store::Consistency::Eventual,
        }
    }

    pub fn parse(s: &str) -> Option<ExecutionMode> {
        match s {
            "seq" => Some(ExecutionMode::Seq),
            "eve-s" => Some(ExecutionMode::EveS),
            "eve-as" => Some(ExecutionMode::EveAs),
            "rollback" => Some(ExecutionMode::Rollback),
            _ => None,
        }
    }
}

impl std::fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExecutionMode::Seq => "seq",
            ExecutionMode::EveS => "eve-s",
            ExecutionMode::EveAs => "eve-as",
            ExecutionMode::Rollback => "rollback",
        })
    }
}

/// Interpreted, never trusted: under eventual consistency two clients can
/// both believe they own a lock, which is exactly the fault source under
/// study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LockEntry {
    pub owner: Option<ClientId>,
    pub lease_expiry: Ms,
}

const FREE: u16 = u16::MAX;

impl LockEntry {
    pub fn free() -> Self {
        LockEntry {
            owner: None,
            lease_expiry: 0,
        }
    }

    pub fn to_bytes(self) -> Vec<u8> {
        let mut b = self.owner.unwrap_or(FREE).to_le_bytes().to_vec();
        b.extend_from_slice(&self.lease_expiry.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Option<LockEntry> {
        if b.len() != 10 {
            return None;
        }
        let raw = u16::from_le_bytes(b[..2].try_into().ok()?);
        Some(LockEntry {
            owner: (raw != FREE).then_some(raw),
            lease_expiry: u64::from_le_bytes(b[2..].try_into().ok()?),
        })
    }
}

/// The neighbor-read skip rule: the node was checked after the last
/// neighbor update, with the last execution length and the clock error
/// bound as safety margin.
pub fn should_skip(nd: &NdMeta, nbr: &NbrMeta, epsilon: Ms) -> bool {
    u128::from(nd.nd_change)
        > u128::from(nbr.nbr_change) + u128::from(nd.last_len) + u128::from(epsilon)
}

#[derive(Clone, Copy, Debug)]
pub struct RuntimeConfig {
    pub mode: ExecutionMode,
    pub opt: bool,
    pub epsilon_ms: Ms,
    pub lease_ms: Ms,
    pub lock_retry_limit: u32,
    pub backoff_min_ms: Ms,
    pub backoff_max_ms: Ms,
    /// Local compute cost charged per scan; keeps zero-delay configurations
    /// from looping without advancing virtual time.
    pub action_overhead_ms: Ms,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            mode: ExecutionMode::Seq,
            opt: false,
            epsilon_ms: 0,
            lease_ms: 60_000,
            lock_retry_limit: 50,
            backoff_min_ms: 1,
            // Under hub contention the retry window has to span several
            // competing holders' critical sections, or every episode fails.
            backoff_max_ms: 1024,
            action_overhead_ms: 1,
        }
    }
}

#[derive(Default, Debug, Clone)]
pub struct ClientCounters {
    pub scans: u64,
    pub executed: u64,
    pub disabled: u64,
    pub skips_opt: u64,
    pub skips_lock: u64,
    pub skips_quorum: u64,
    pub aborts: u64,
    pub gets: u64,
    pub puts: u64,
    /// GETs of other nodes' variables during read phases; the quantity the
    /// skip optimization saves.
    pub neighbor_gets: u64,
    pub lock_wait_ms: Ms,
    pub lock_retries: u64,
    /// Completion times of executed (write-phase) actions, for throughput
    /// bucketing.
    pub executed_ts: Vec<Ms>,
    pub visits: BTreeMap<NodeId, u64>,
}

pub struct ClientCtx {
    pub id: ClientId,
    pub nodes: Vec<NodeId>,
    pub graph: Rc<Graph>,
    pub program: Program,
    pub store: Store,
    pub sim: Sim,
    pub cfg: RuntimeConfig,
    pub stop: StopSignal,
    pub monitor: Option<MonitorHandle>,
    pub log: RunLog,
    pub clock: RefCell<VectorClock>,
    pub rng: RefCell<ChaCha8Rng>,
    pub counters: RefCell<ClientCounters>,
    /// Run-global action id allocator (shared by all clients).
    pub action_ids: Rc<Cell<u64>>,
}

impl ClientCtx {
    fn next_action_id(&self) -> u64 {
        let id = self.action_ids.get();
        self.action_ids.set(id + 1);
        id
    }

    fn merge_versions(&self, res: &GetResult) {
        let mut clock = self.clock.borrow_mut();
        for v in &res.versions {
            clock.merge(&v.clock);
        }
    }

    async fn get(&self, key: Key) -> GetResult {
        self.counters.borrow_mut().gets += 1;
        let res = self.store.get(self.id, key).await;
        self.merge_versions(&res);
        res
    }

    /// PUT with the client's causal clock as context; adopts the bumped
    /// clock and logs the completion.
    async fn put(&self, key: Key, value: Vec<u8>) -> bool {
        self.counters.borrow_mut().puts += 1;
        let context = self.clock.borrow().clone();
        let hash = value_hash(&value);
        let res = self.store.put(self.id, key, value, &context).await;
        self.clock.borrow_mut().merge(&res.clock);
        self.log.push(Record::PutDone {
            client: self.id,
            key,
            wall_ts: res.wall_ts,
            t_done: self.sim.now(),
            clock: res.clock.clone(),
            hash,
            ok: res.success,
        });
        res.success
    }
}

/// Scan the assigned nodes round-robin until the stop signal; every node is
/// visited once per pass, which is the fairness the model requires.
pub async fn run_client(ctx: Rc<ClientCtx>) {
    if ctx.nodes.is_empty() {
        return;
    }
    let mut idx = 0;
    while !ctx.stop.is_set() {
        let j = ctx.nodes[idx];
        idx = (idx + 1) % ctx.nodes.len();
        *ctx.counters.borrow_mut().visits.entry(j).or_insert(0) += 1;
        execute_action(&ctx, j).await;
        ctx.sim.sleep(ctx.cfg.action_overhead_ms).await;
    }
}

fn decode_lock(res: &GetResult) -> LockEntry {
    res.resolved()
        .and_then(|v| LockEntry::from_bytes(&v.value))
        .unwrap_or_else(LockEntry::free)
}

/// One attempt to take all locks. The per-key protocol is GET, claim PUT,
/// confirm GET; keys are processed in ascending order with the round trips
/// of each phase pipelined, so a whole neighborhood costs three round trips
/// instead of three per key (a serialized walk holds its prefix long enough
/// that contended neighborhoods collapse into livelock). Returns the
/// confirmed keys, or the first busy/lost node after releasing any wins.
/// Losing a claim race leaves the claim version behind on purpose: the
/// eventual winner's release supersedes it by timestamp.
async fn try_acquire(
    ctx: &ClientCtx,
    nodes: &[NodeId],
    lease: Ms,
) -> Result<Vec<NodeId>, NodeId> {
    // Read all lock keys; claim nothing if any is busy or unreadable.
    ctx.counters.borrow_mut().gets += nodes.len() as u64;
    let reads = join_all(nodes.iter().map(|&n| ctx.store.get(ctx.id, Key::Lock(n)))).await;
    let now = ctx.sim.now();
    for (&node, res) in nodes.iter().zip(&reads) {
        ctx.merge_versions(res);
        if !res.success {
            return Err(node);
        }
        let cur = decode_lock(res);
        let busy = matches!(cur.owner, Some(o) if o != ctx.id && cur.lease_expiry > now);
        if busy {
            return Err(node);
        }
    }
    // Claim every key.
    let claim = LockEntry {
        owner: Some(ctx.id),
        lease_expiry: now + lease,
    };
    let context = ctx.clock.borrow().clone();
    ctx.counters.borrow_mut().puts += nodes.len() as u64;
    let claims = join_all(
        nodes
            .iter()
            .map(|&n| ctx.store.put(ctx.id, Key::Lock(n), claim.to_bytes(), &context)),
    )
    .await;
    for r in &claims {
        ctx.clock.borrow_mut().merge(&r.clock);
    }
    // Confirm self-ownership by resolve.
    ctx.counters.borrow_mut().gets += nodes.len() as u64;
    let confirms = join_all(nodes.iter().map(|&n| ctx.store.get(ctx.id, Key::Lock(n)))).await;
    let mut owned = Vec::with_capacity(nodes.len());
    let mut lost = None;
    for ((&node, res), claim) in nodes.iter().zip(&confirms).zip(&claims) {
        ctx.merge_versions(res);
        let mine = claim.success && res.success && decode_lock(res).owner == Some(ctx.id);
        if mine {
            owned.push(node);
        } else if lost.is_none() {
            lost = Some(node);
        }
    }
    match lost {
        None => Ok(owned),
        Some(node) => {
            release_locks(ctx, &owned).await;
            Err(node)
        }
    }
}

async fn release_locks(ctx: &ClientCtx, owned: &[NodeId]) {
    if owned.is_empty() {
        return;
    }
    let context = ctx.clock.borrow().clone();
    ctx.counters.borrow_mut().puts += owned.len() as u64;
    let puts = owned.iter().map(|&node| {
        ctx.store.put(
            ctx.id,
            Key::Lock(node),
            LockEntry::free().to_bytes(),
            &context,
        )
    });
    let results = join_all(puts).await;
    for r in &results {
        ctx.clock.borrow_mut().merge(&r.clock);
    }
}

/// Acquire with bounded retries and jittered exponential backoff; the lock
/// wait time is charged to the client's counters. After a failure the
/// previously contended key is probed read-only first, so a busy
/// neighborhood does not cost a full acquisition walk per retry.
pub async fn acquire_locks(ctx: &ClientCtx, nodes: &[NodeId]) -> Option<Vec<NodeId>> {
    let start = ctx.sim.now();
    let mut backoff_cap = ctx.cfg.backoff_min_ms;
    let mut result = None;
    let mut contended: Option<NodeId> = None;
    for attempt in 0..=ctx.cfg.lock_retry_limit {
        if let Some(node) = contended {
            let res = ctx.get(Key::Lock(node)).await;
            let busy = res.success
                && res
                    .resolved()
                    .and_then(|v| LockEntry::from_bytes(&v.value))
                    .map(|e| match e.owner {
                        None => false,
                        Some(o) => o != ctx.id && e.lease_expiry > ctx.sim.now(),
                    })
                    .unwrap_or(false);
            if busy {
                ctx.counters.borrow_mut().lock_retries += 1;
                if attempt == ctx.cfg.lock_retry_limit {
                    break;
                }
                let jitter = ctx.rng.borrow_mut().gen_range(0..=backoff_cap);
                ctx.sim.sleep(ctx.cfg.backoff_min_ms + jitter).await;
                backoff_cap = (backoff_cap * 2).min(ctx.cfg.backoff_max_ms);
                continue;
            }
        }
        match try_acquire(ctx, nodes, ctx.cfg.lease_ms).await {
            Ok(owned) => {
                result = Some(owned);
                break;
            }
            Err(node) => contended = Some(node),
        }
        ctx.counters.borrow_mut().lock_retries += 1;
        if attempt == ctx.cfg.lock_retry_limit {
            break;
        }
        let jitter = ctx.rng.borrow_mut().gen_range(0..=backoff_cap);
        ctx.sim.sleep(ctx.cfg.backoff_min_ms + jitter).await;
        backoff_cap = (backoff_cap * 2).min(ctx.cfg.backoff_max_ms);
    }
    ctx.counters.borrow_mut().lock_wait_ms += ctx.sim.now() - start;
    result
}

struct MetaPeek {
    nd: NdMeta,
    nbr: NbrMeta,
}

/// Read the two optimization records of `j`. `nbr_change` is merged by max
/// across concurrent versions so no neighbor's update is lost.
async fn peek_meta(ctx: &ClientCtx, j: NodeId) -> Option<MetaPeek> {
    let (nd_res, nbr_res) = futures::join!(ctx.get(Key::NdMeta(j)), ctx.get(Key::NbrMeta(j)));
    if !nd_res.success || !nbr_res.success {
        return None;
    }
    let nd = nd_res
        .resolved()
        .and_then(|v| NdMeta::from_bytes(&v.value))
        .unwrap_or_default();
    let nbr_change = nbr_res
        .versions
        .iter()
        .filter_map(|v| NbrMeta::from_bytes(&v.value))
        .map(|m| m.nbr_change)
        .max()
        .unwrap_or(0);
    Some(MetaPeek {
        nd,
        nbr: NbrMeta { nbr_change },
    })
}

/// Execute one action of node `j`: skip check, locks, read phase, guard
/// evaluation, abort poll, write phase, release. Exactly one `Action`
/// record is logged per call.
pub async fn execute_action(ctx: &Rc<ClientCtx>, j: NodeId) -> Outcome {
    let action_id = ctx.next_action_id();
    let t_start = ctx.sim.now();
    ctx.counters.borrow_mut().scans += 1;

    let finish = |outcome: Outcome,
                  wrote: bool,
                  write_start: Option<Ms>,
                  reads: Vec<ReadRecord>| {
        ctx.log.push(Record::Action {
            action_id,
            client: ctx.id,
            node: j,
            t_start,
            t_end: ctx.sim.now(),
            outcome,
            wrote,
            write_start,
            reads,
        });
        match outcome {
            Outcome::Executed => {
                let mut c = ctx.counters.borrow_mut();
                c.executed += 1;
                c.executed_ts.push(ctx.sim.now());
            }
            Outcome::Disabled => ctx.counters.borrow_mut().disabled += 1,
            Outcome::SkippedOpt => ctx.counters.borrow_mut().skips_opt += 1,
            Outcome::SkippedLock => ctx.counters.borrow_mut().skips_lock += 1,
            Outcome::SkippedQuorum => ctx.counters.borrow_mut().skips_quorum += 1,
            Outcome::Aborted => ctx.counters.borrow_mut().aborts += 1,
        }
        outcome
    };

    // (a) Skip rule: no neighbor has changed since this node was last
    // checked, so don't even read the neighborhood.
    if ctx.cfg.opt {
        match peek_meta(ctx, j).await {
            None => return finish(Outcome::SkippedQuorum, false, None, Vec::new()),
            Some(meta) => {
                if should_skip(&meta.nd, &meta.nbr, ctx.cfg.epsilon_ms) {
                    return finish(Outcome::SkippedOpt, false, None, Vec::new());
                }
            }
        }
    }

    // (b) Locks on the closed neighborhood, ascending ids.
    let mut owned: Vec<NodeId> = Vec::new();
    if ctx.cfg.mode.locks_on() {
        let mut lock_nodes: Vec<NodeId> = Vec::with_capacity(1 + ctx.graph.degree(j));
        lock_nodes.push(j);
        lock_nodes.extend_from_slice(ctx.graph.neighbors(j));
        lock_nodes.sort_unstable();
        match acquire_locks(ctx, &lock_nodes).await {
            Some(o) => owned = o,
            None => return finish(Outcome::SkippedLock, false, None, Vec::new()),
        }
    }

    // Rollback: enter the critical section.
    if let Some(monitor) = &ctx.monitor {
        ctx.clock.borrow_mut().bump(ctx.id);
        let entry_clock = ctx.clock.borrow().clone();
        ctx.log.push(Record::CsEntry {
            action_id,
            client: ctx.id,
            node: j,
            t: ctx.sim.now(),
            clock: entry_clock.clone(),
        });
        monitor.report_entry(CsInterval {
            client: ctx.id,
            node: j,
            action_id,
            entry_clock,
            entry_ts: ctx.sim.now(),
            exit_clock: None,
            exit_ts: None,
        });
    }

    let exit_cs = |ctx: &ClientCtx| {
        if let Some(monitor) = &ctx.monitor {
            ctx.clock.borrow_mut().bump(ctx.id);
            let exit_clock = ctx.clock.borrow().clone();
            ctx.log.push(Record::CsExit {
                action_id,
                client: ctx.id,
                node: j,
                t: ctx.sim.now(),
                clock: exit_clock.clone(),
            });
            monitor.report_exit(ctx.id, action_id, exit_clock, ctx.sim.now());
        }
    };

    // (c) Read phase: resolve j and all neighbors in parallel.
    let read_init = ctx.sim.now();
    let mut read_nodes: Vec<NodeId> = Vec::with_capacity(1 + ctx.graph.degree(j));
    read_nodes.push(j);
    read_nodes.extend_from_slice(ctx.graph.neighbors(j));
    {
        let mut c = ctx.counters.borrow_mut();
        c.gets += read_nodes.len() as u64;
        c.neighbor_gets += read_nodes.len() as u64 - 1;
    }
    let gets = read_nodes.iter().map(|&k| ctx.store.get(ctx.id, Key::Var(k)));
    let results = join_all(gets).await;
    let mut reads = Vec::with_capacity(results.len());
    let mut vars: BTreeMap<NodeId, NodeVars> = BTreeMap::new();
    let mut quorum_ok = true;
    for (&k, res) in read_nodes.iter().zip(&results) {
        ctx.merge_versions(res);
        if !res.success {
            quorum_ok = false;
            continue;
        }
        let winner = res.resolved().expect("seeded key has a version");
        reads.push(ReadRecord {
            key: Key::Var(k),
            t_init: read_init,
            hash: value_hash(&winner.value),
        });
        let decoded = NodeVars::from_bytes(&winner.value).expect("var record decodes");
        vars.insert(k, decoded);
    }
    if !quorum_ok {
        exit_cs(ctx);
        release_locks(ctx, &owned).await;
        return finish(Outcome::SkippedQuorum, false, None, reads);
    }

    let snapshot = NeighborhoodSnapshot::new(j, vars);
    let result = {
        let mut rng = ctx.rng.borrow_mut();
        ctx.program.eval(&snapshot, &mut *rng)
    };

    // Read/write boundary: the only point where a monitor notification can
    // abort the action. Once the write phase starts it always completes.
    if let Some(monitor) = &ctx.monitor {
        if monitor.flags.consume(ctx.id, action_id) {
            exit_cs(ctx);
            release_locks(ctx, &owned).await;
            return finish(Outcome::Aborted, false, None, reads);
        }
    }

    let mut wrote = false;
    let mut write_start = None;
    let now = ctx.sim.now();
    if let Some(new_vars) = result.write {
        write_start = Some(now);
        wrote = true;
        ctx.put(Key::Var(j), new_vars.to_bytes()).await;
        if ctx.cfg.opt {
            // Stamp our own check at the read time (conservative) and tell
            // every neighbor that this node changed.
            let nd = NdMeta {
                nd_change: read_init,
                last_len: ctx.sim.now() - t_start,
            };
            write_meta(ctx, j, nd, true).await;
        }
    } else if ctx.cfg.opt {
        let nd = NdMeta {
            nd_change: read_init,
            last_len: ctx.sim.now() - t_start,
        };
        write_meta(ctx, j, nd, false).await;
    }

    exit_cs(ctx);
    release_locks(ctx, &owned).await;
    let outcome = if wrote {
        Outcome::Executed
    } else {
        Outcome::Disabled
    };
    finish(outcome, wrote, write_start, reads)
}

/// Write `nd:j` (and on a state change, `nbr:k` for every neighbor k) in
/// one parallel batch.
async fn write_meta(ctx: &ClientCtx, j: NodeId, nd: NdMeta, notify_neighbors: bool) {
    let context = ctx.clock.borrow().clone();
    let now = ctx.sim.now();
    let mut puts = vec![ctx
        .store
        .put(ctx.id, Key::NdMeta(j), nd.to_bytes(), &context)];
    if notify_neighbors {
        for &k in ctx.graph.neighbors(j) {
            puts.push(ctx.store.put(
                ctx.id,
                Key::NbrMeta(k),
                NbrMeta { nbr_change: now }.to_bytes(),
                &context,
            ));
        }
    }
    ctx.counters.borrow_mut().puts += puts.len() as u64;
    let results = join_all(puts).await;
    for r in &results {
        ctx.clock.borrow_mut().merge(&r.clock);
    }
}
