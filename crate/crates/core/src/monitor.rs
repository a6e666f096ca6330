//! Online detector of local-mutual-exclusion violations.
//!
//! Clients report vector-clocked critical-section intervals for the node
//! they are executing. For every graph edge, two intervals on its endpoints
//! must be causally ordered; a concurrent pair is a violation, and both
//! involved clients get their abort flag raised. The runtime decides the
//! reaction: an action still in its read phase aborts, one that entered the
//! write phase completes normally.

use std::cell::{Cell, RefCell};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::rc::Rc;

use crate::clock::{ClientId, VectorClock};
use crate::graph::{Graph, NodeId};
use crate::log::{Record, RunLog};
use crate::sim::{channel, Ms, Sender, Sim};

/// One client's occupancy of a node's neighborhood; `exit_clock = None`
/// means the interval is still open.
#[derive(Clone, Debug)]
pub struct CsInterval {
    pub client: ClientId,
    pub node: NodeId,
    pub action_id: u64,
    pub entry_clock: VectorClock,
    pub entry_ts: Ms,
    pub exit_clock: Option<VectorClock>,
    pub exit_ts: Option<Ms>,
}

impl CsInterval {
    /// `self` happened before `other` starts: closed with exit < entry.
    /// An open exit is treated as unbounded above (conservative).
    fn before(&self, other: &CsInterval) -> bool {
        match &self.exit_clock {
            Some(exit) => exit.lt(&other.entry_clock),
            None => false,
        }
    }

    pub fn concurrent_with(&self, other: &CsInterval) -> bool {
        !self.before(other) && !other.before(self)
    }
}

#[derive(Clone, Debug)]
pub struct Violation {
    /// (smaller node, larger node).
    pub edge: (NodeId, NodeId),
    /// Intervals on edge.0 and edge.1 respectively.
    pub a: CsInterval,
    pub b: CsInterval,
}

type SharedInterval = Rc<RefCell<CsInterval>>;

/// Pairwise concurrency detection over per-edge candidate queues. Used both
/// online (open intervals, conservative) and for offline replay of closed
/// intervals, where it finds exactly the concurrent pairs a brute-force
/// all-pairs comparison finds.
pub struct DetectorCore {
    graph: Rc<Graph>,
    /// Per-edge queues, keyed (min, max); slot 0 holds intervals of the
    /// smaller endpoint.
    edges: HashMap<(NodeId, NodeId), [Vec<SharedInterval>; 2]>,
    /// Open interval per (client, action) for exit matching.
    open: HashMap<(ClientId, u64), SharedInterval>,
    /// Idempotence over duplicate entry reports.
    seen: HashSet<(ClientId, VectorClock)>,
}

impl DetectorCore {
    pub fn new(graph: Rc<Graph>) -> Self {
        DetectorCore {
            graph,
            edges: HashMap::new(),
            open: HashMap::new(),
            seen: HashSet::new(),
        }
    }

    /// Report an interval entry (or a pre-closed interval during replay).
    /// Returns the violations this report exposes.
    pub fn report(&mut self, interval: CsInterval) -> Vec<Violation> {
        if !self
            .seen
            .insert((interval.client, interval.entry_clock.clone()))
        {
            return Vec::new();
        }
        let j = interval.node;
        let rc = Rc::new(RefCell::new(interval));
        self.open
            .insert((rc.borrow().client, rc.borrow().action_id), rc.clone());
        let mut out = Vec::new();
        for &k in self.graph.clone().neighbors(j) {
            let edge = (j.min(k), j.max(k));
            let my_slot = usize::from(j > k);
            let queues = self.edges.entry(edge).or_default();
            let incoming = rc.borrow().clone();
            // Scan the opposite queue: report concurrent pairs, drop
            // candidates that can no longer conflict with anything newer.
            queues[1 - my_slot].retain(|x| {
                let xv = x.borrow().clone();
                if xv.before(&incoming) {
                    return false;
                }
                if incoming.concurrent_with(&xv) {
                    let (a, b) = if my_slot == 1 {
                        (xv, incoming.clone())
                    } else {
                        (incoming.clone(), xv)
                    };
                    out.push(Violation { edge, a, b });
                }
                true
            });
            queues[my_slot].push(rc.clone());
        }
        out
    }

    /// Close a previously reported interval.
    pub fn close(&mut self, client: ClientId, action_id: u64, exit_clock: VectorClock, exit_ts: Ms) {
        if let Some(rc) = self.open.remove(&(client, action_id)) {
            let mut iv = rc.borrow_mut();
            iv.exit_clock = Some(exit_clock);
            iv.exit_ts = Some(exit_ts);
        }
    }
}

/// Replay a stream of closed intervals (in entry order) through the
/// detector; the result on closed intervals is exactly the set of
/// causally-concurrent neighboring pairs.
pub fn replay_closed(graph: Rc<Graph>, intervals: &[CsInterval]) -> Vec<Violation> {
    let mut core = DetectorCore::new(graph);
    let mut out = Vec::new();
    for iv in intervals {
        debug_assert!(iv.exit_clock.is_some(), "replay wants closed intervals");
        out.extend(core.report(iv.clone()));
    }
    out
}

/// Brute-force oracle: all neighboring pairs, quadratic.
pub fn brute_force_violations(graph: &Graph, intervals: &[CsInterval]) -> Vec<Violation> {
    let mut by_node: BTreeMap<NodeId, Vec<&CsInterval>> = BTreeMap::new();
    for iv in intervals {
        by_node.entry(iv.node).or_default().push(iv);
    }
    let mut out = Vec::new();
    for (j, k) in graph.edges() {
        let (Some(ja), Some(kb)) = (by_node.get(&j), by_node.get(&k)) else {
            continue;
        };
        for a in ja {
            for b in kb {
                if a.concurrent_with(b) {
                    out.push(Violation {
                        edge: (j, k),
                        a: (*a).clone(),
                        b: (*b).clone(),
                    });
                }
            }
        }
    }
    out
}

pub enum MonitorMsg {
    Entry(CsInterval),
    Exit {
        client: ClientId,
        action_id: u64,
        exit_clock: VectorClock,
        exit_ts: Ms,
    },
}

#[derive(Default, Debug, Clone)]
pub struct MonitorStats {
    pub violations: u64,
    pub notifies: u64,
    /// Violations flagged with an open interval that turned out ordered
    /// once both intervals closed (conservative false positives).
    pub false_positives: u64,
    pub detection_latency_sum: Ms,
    pub detection_latency_max: Ms,
}

/// Per-client abort flags: the monitor stores the action id it wants
/// aborted; the client consumes the flag at its read/write boundary and
/// aborts only if it still executes that action.
#[derive(Clone)]
pub struct AbortFlags(Rc<Vec<Cell<Option<u64>>>>);

impl AbortFlags {
    pub fn new(clients: usize) -> Self {
        AbortFlags(Rc::new((0..clients).map(|_| Cell::new(None)).collect()))
    }

    pub fn raise(&self, client: ClientId, action_id: u64) {
        self.0[client as usize].set(Some(action_id));
    }

    /// Consume the flag; true iff it targeted `action_id`.
    pub fn consume(&self, client: ClientId, action_id: u64) -> bool {
        let f = self.0[client as usize].take();
        f == Some(action_id)
    }
}

/// Client-side handle: reports travel to the monitor with a fixed each-way
/// delay, and abort notifications travel back with the same delay.
#[derive(Clone)]
pub struct MonitorHandle {
    sim: Sim,
    tx: Sender<MonitorMsg>,
    delay: Ms,
    pub flags: AbortFlags,
}

impl MonitorHandle {
    pub fn report_entry(&self, interval: CsInterval) {
        let tx = self.tx.clone();
        self.sim
            .call_in(self.delay, move || tx.send(MonitorMsg::Entry(interval)));
    }

    pub fn report_exit(&self, client: ClientId, action_id: u64, exit_clock: VectorClock, exit_ts: Ms) {
        let tx = self.tx.clone();
        self.sim.call_in(self.delay, move || {
            tx.send(MonitorMsg::Exit {
                client,
                action_id,
                exit_clock,
                exit_ts,
            })
        });
    }
}

/// Spawn the monitor activity; it drains reports until the run's events dry
/// up. Returns the client handle and the shared stats cell.
pub fn spawn_monitor(
    sim: &Sim,
    graph: Rc<Graph>,
    clients: usize,
    delay: Ms,
    log: RunLog,
) -> (MonitorHandle, Rc<RefCell<MonitorStats>>) {
    let (tx, rx) = channel::<MonitorMsg>();
    let flags = AbortFlags::new(clients);
    let stats: Rc<RefCell<MonitorStats>> = Rc::default();
    let handle = MonitorHandle {
        sim: sim.clone(),
        tx,
        delay,
        flags: flags.clone(),
    };
    let sim2 = sim.clone();
    let stats2 = stats.clone();
    let flags2 = flags;
    sim.spawn(async move {
        struct PendingPair {
            a: Rc<RefCell<CsInterval>>,
            b: Rc<RefCell<CsInterval>>,
        }
        let mut core = DetectorCore::new(graph);
        // Violations with an interval that was open at detection; rechecked
        // when both have closed to count conservative false positives.
        let mut pending_open: Vec<PendingPair> = Vec::new();
        let mut live: HashMap<(ClientId, u64), Rc<RefCell<CsInterval>>> = HashMap::new();
        loop {
            let msg = rx.recv().await;
            match msg {
                MonitorMsg::Entry(interval) => {
                    let key = (interval.client, interval.action_id);
                    let entry_ts = interval.entry_ts;
                    let violations = core.report(interval.clone());
                    live.entry(key)
                        .or_insert_with(|| Rc::new(RefCell::new(interval)));
                    for v in violations {
                        let mut stats = stats2.borrow_mut();
                        stats.violations += 1;
                        stats.notifies += 2;
                        let latency = sim2.now() + delay - entry_ts;
                        stats.detection_latency_sum += latency;
                        stats.detection_latency_max = stats.detection_latency_max.max(latency);
                        drop(stats);
                        let notify_ts = sim2.now() + delay;
                        log.push(Record::Violation {
                            edge: v.edge,
                            clients: (v.a.client, v.b.client),
                            actions: (v.a.action_id, v.b.action_id),
                            detect_ts: sim2.now(),
                            second_entry_ts: entry_ts,
                            notify_ts,
                        });
                        // Raise both abort flags after the notification
                        // delay; the runtime decides abort vs complete.
                        let flags = flags2.clone();
                        let (ca, ia) = (v.a.client, v.a.action_id);
                        let (cb, ib) = (v.b.client, v.b.action_id);
                        sim2.call_in(delay, move || {
                            flags.raise(ca, ia);
                            flags.raise(cb, ib);
                        });
                        let pa = live
                            .get(&(v.a.client, v.a.action_id))
                            .cloned()
                            .unwrap_or_else(|| Rc::new(RefCell::new(v.a.clone())));
                        let pb = live
                            .get(&(v.b.client, v.b.action_id))
                            .cloned()
                            .unwrap_or_else(|| Rc::new(RefCell::new(v.b.clone())));
                        pending_open.push(PendingPair { a: pa, b: pb });
                    }
                }
                MonitorMsg::Exit {
                    client,
                    action_id,
                    exit_clock,
                    exit_ts,
                } => {
                    core.close(client, action_id, exit_clock.clone(), exit_ts);
                    if let Some(rc) = live.get(&(client, action_id)) {
                        let mut iv = rc.borrow_mut();
                        iv.exit_clock = Some(exit_clock);
                        iv.exit_ts = Some(exit_ts);
                    }
                    // Recheck any pending pairs that are now fully closed.
                    pending_open.retain(|pair| {
                        let a = pair.a.borrow();
                        let b = pair.b.borrow();
                        if a.exit_clock.is_some() && b.exit_clock.is_some() {
                            if !a.concurrent_with(&b) {
                                stats2.borrow_mut().false_positives += 1;
                            }
                            false
                        } else {
                            true
                        }
                    });
                }
            }
        }
    });
    (handle, stats)
}
