//! The guarded-command framework and the three silent-stabilizing case-study
//! programs: arbitrary graph coloring, planar graph coloring, and maximal
//! matching. Also the legitimacy oracles that serve as ground truth for the
//! runtime, the termination detector, and the test suites.
//!
//! Every action is a pure function of a neighborhood snapshot and writes only
//! the center node's variables.

pub mod serial;

use std::collections::BTreeMap;

use rand::Rng;

use crate::graph::{Graph, NodeId};
use crate::sim::Ms;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ProgramKind {
    ColorArbitrary,
    ColorPlanar,
    Matching,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ColorVariant {
    Deterministic,
    /// Pick uniformly among the locally available colors instead of the
    /// smallest one; turns the arbitrary-coloring program into a
    /// probabilistically stabilizing one under concurrent races.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Program {
    pub kind: ProgramKind,
    pub variant: ColorVariant,
}

impl Program {
    pub fn new(kind: ProgramKind, variant: ColorVariant) -> Self {
        Program { kind, variant }
    }

    pub fn deterministic(kind: ProgramKind) -> Self {
        Program {
            kind,
            variant: ColorVariant::Deterministic,
        }
    }
}

/// Per-node program variables (one variant per program).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeVars {
    Color { color: u32 },
    Planar { color: u32, x: u64 },
    Matching { p: Option<NodeId>, m: bool },
}

const NULL_PTR: u32 = u32::MAX;

impl NodeVars {
    pub fn zero(kind: ProgramKind) -> NodeVars {
        match kind {
            ProgramKind::ColorArbitrary => NodeVars::Color { color: 0 },
            ProgramKind::ColorPlanar => NodeVars::Planar { color: 0, x: 0 },
            ProgramKind::Matching => NodeVars::Matching { p: None, m: false },
        }
    }

    /// Uniform random values within the program's variable domains; used for
    /// random initial states and fault injection.
    pub fn random(kind: ProgramKind, g: &Graph, j: NodeId, rng: &mut impl Rng) -> NodeVars {
        match kind {
            ProgramKind::ColorArbitrary => NodeVars::Color {
                color: rng.gen_range(0..=g.degree(j) as u32),
            },
            ProgramKind::ColorPlanar => NodeVars::Planar {
                color: rng.gen_range(0..6),
                x: rng.gen_range(0..8),
            },
            ProgramKind::Matching => {
                let adj = g.neighbors(j);
                let pick = rng.gen_range(0..=adj.len());
                NodeVars::Matching {
                    p: if pick == adj.len() {
                        None
                    } else {
                        Some(adj[pick])
                    },
                    m: rng.gen_bool(0.5),
                }
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            NodeVars::Color { color } => {
                let mut b = vec![1u8];
                b.extend_from_slice(&color.to_le_bytes());
                b
            }
            NodeVars::Planar { color, x } => {
                let mut b = vec![2u8];
                b.extend_from_slice(&color.to_le_bytes());
                b.extend_from_slice(&x.to_le_bytes());
                b
            }
            NodeVars::Matching { p, m } => {
                let mut b = vec![3u8];
                b.extend_from_slice(&p.unwrap_or(NULL_PTR).to_le_bytes());
                b.push(u8::from(*m));
                b
            }
        }
    }

    pub fn from_bytes(b: &[u8]) -> Option<NodeVars> {
        let le32 = |s: &[u8]| Some(u32::from_le_bytes(s.try_into().ok()?));
        let le64 = |s: &[u8]| Some(u64::from_le_bytes(s.try_into().ok()?));
        match b.first()? {
            1 if b.len() == 5 => Some(NodeVars::Color {
                color: le32(&b[1..5])?,
            }),
            2 if b.len() == 13 => Some(NodeVars::Planar {
                color: le32(&b[1..5])?,
                x: le64(&b[5..13])?,
            }),
            3 if b.len() == 6 => {
                let raw = le32(&b[1..5])?;
                Some(NodeVars::Matching {
                    p: (raw != NULL_PTR).then_some(raw),
                    m: b[5] != 0,
                })
            }
            _ => None,
        }
    }
}

/// `nd_change` + `Delta` record of a node; written only by the owner client.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NdMeta {
    pub nd_change: Ms,
    pub last_len: Ms,
}

impl NdMeta {
    pub fn to_bytes(self) -> Vec<u8> {
        let mut b = self.nd_change.to_le_bytes().to_vec();
        b.extend_from_slice(&self.last_len.to_le_bytes());
        b
    }
    pub fn from_bytes(b: &[u8]) -> Option<NdMeta> {
        if b.len() != 16 {
            return None;
        }
        Some(NdMeta {
            nd_change: u64::from_le_bytes(b[..8].try_into().ok()?),
            last_len: u64::from_le_bytes(b[8..].try_into().ok()?),
        })
    }
}

/// `nbr_change` of a node; any neighbor's client may write it, and readers
/// take the max across concurrent versions, so no update can be lost.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NbrMeta {
    pub nbr_change: Ms,
}

impl NbrMeta {
    pub fn to_bytes(self) -> Vec<u8> {
        self.nbr_change.to_le_bytes().to_vec()
    }
    pub fn from_bytes(b: &[u8]) -> Option<NbrMeta> {
        Some(NbrMeta {
            nbr_change: u64::from_le_bytes(b.try_into().ok()?),
        })
    }
}

/// The variable values a client resolved for a node and all its neighbors.
#[derive(Clone, Debug)]
pub struct NeighborhoodSnapshot {
    pub center: NodeId,
    pub vars: BTreeMap<NodeId, NodeVars>,
}

impl NeighborhoodSnapshot {
    pub fn new(center: NodeId, vars: BTreeMap<NodeId, NodeVars>) -> Self {
        debug_assert!(vars.contains_key(&center));
        NeighborhoodSnapshot { center, vars }
    }

    fn center_vars(&self) -> &NodeVars {
        &self.vars[&self.center]
    }

    fn neighbor_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.vars.keys().copied().filter(move |&k| k != self.center)
    }
}

/// Guard outcome plus the (center-only) write. Program actions never touch
/// another node's variables; that restriction is carried by the type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionResult {
    pub enabled: bool,
    pub write: Option<NodeVars>,
}

impl ActionResult {
    fn disabled() -> Self {
        ActionResult {
            enabled: false,
            write: None,
        }
    }
    fn fire(vars: NodeVars) -> Self {
        ActionResult {
            enabled: true,
            write: Some(vars),
        }
    }
}

fn color_of(v: &NodeVars) -> u32 {
    match v {
        NodeVars::Color { color } => *color,
        NodeVars::Planar { color, .. } => *color,
        NodeVars::Matching { .. } => panic!("matching vars have no color"),
    }
}

/// Smallest non-negative integer not present in `used`.
fn mex(used: &[u32]) -> u32 {
    let mut c = 0;
    loop {
        if !used.contains(&c) {
            return c;
        }
        c += 1;
    }
}

/// Arbitrary graph coloring. Guard: some higher-id neighbor holds my color
/// (the lower id of a conflicting edge is the one that moves). Statement:
/// deterministic -> smallest color unused in the neighborhood; random ->
/// uniform pick from {0..deg} minus the neighborhood's colors.
pub fn eval_arbitrary_coloring(
    s: &NeighborhoodSnapshot,
    variant: ColorVariant,
    rng: &mut impl Rng,
) -> ActionResult {
    let my = color_of(s.center_vars());
    let conflict = s
        .neighbor_ids()
        .any(|k| k > s.center && color_of(&s.vars[&k]) == my);
    if !conflict {
        return ActionResult::disabled();
    }
    let used: Vec<u32> = s.neighbor_ids().map(|k| color_of(&s.vars[&k])).collect();
    let new_color = match variant {
        ColorVariant::Deterministic => mex(&used),
        ColorVariant::Random => {
            let deg = s.vars.len() as u32 - 1;
            let avail: Vec<u32> = (0..=deg).filter(|c| !used.contains(c)).collect();
            avail[rng.gen_range(0..avail.len())]
        }
    };
    ActionResult::fire(NodeVars::Color { color: new_color })
}

fn planar_parts(v: &NodeVars) -> (u32, u64) {
    match v {
        NodeVars::Planar { color, x } => (*color, *x),
        _ => panic!("expected planar vars"),
    }
}

/// Planar graph coloring via DAG orientation. Edge (j,k) points j->k iff
/// (x.j, j) < (x.k, k); successors are out-neighbors. A1 (degree repair):
/// more than 5 successors -> raise x above the whole neighborhood, making
/// every edge incoming. A2 (recolor): color clashes with a successor ->
/// smallest color in 0..5 unused by successors (one exists, since at most 5
/// successors remain). A1 has priority.
pub fn eval_planar_coloring(s: &NeighborhoodSnapshot) -> ActionResult {
    let (my_color, my_x) = planar_parts(s.center_vars());
    let successors: Vec<NodeId> = s
        .neighbor_ids()
        .filter(|&k| {
            let (_, xk) = planar_parts(&s.vars[&k]);
            (my_x, s.center) < (xk, k)
        })
        .collect();
    if successors.len() > 5 {
        let max_x = s
            .neighbor_ids()
            .map(|k| planar_parts(&s.vars[&k]).1)
            .max()
            .unwrap_or(0);
        return ActionResult::fire(NodeVars::Planar {
            color: my_color,
            x: max_x + 1,
        });
    }
    let succ_colors: Vec<u32> = successors
        .iter()
        .map(|k| planar_parts(&s.vars[k]).0)
        .collect();
    if succ_colors.contains(&my_color) {
        let new_color = (0..6)
            .find(|c| !succ_colors.contains(c))
            .expect("at most 5 successors");
        return ActionResult::fire(NodeVars::Planar {
            color: new_color,
            x: my_x,
        });
    }
    ActionResult::disabled()
}

fn matching_parts(v: &NodeVars) -> (Option<NodeId>, bool) {
    match v {
        NodeVars::Matching { p, m } => (*p, *m),
        _ => panic!("expected matching vars"),
    }
}

/// Maximal matching via propose/accept/abandon. Rules in priority order
/// (first enabled fires):
///   Update:      m.j != PRmarried(j)                       -> fix m.j
///   Marriage:    p.j = NULL and someone points at j        -> accept min
///   Seduction:   p.j = NULL, nobody points at j, and some
///                free unmarried higher-id neighbor exists  -> point at max
///   Abandonment: p.j = u, u doesn't point back, and u is
///                married or below j (a proposal u can never
///                answer)                                   -> p.j := NULL
/// where PRmarried(j) = exists u in adj(j): p.j = u and p.u = j.
pub fn eval_matching(s: &NeighborhoodSnapshot) -> ActionResult {
    let (my_p, my_m) = matching_parts(s.center_vars());
    let j = s.center;
    let points_back = |u: NodeId| matching_parts(&s.vars[&u]).0 == Some(j);
    let married = my_p.map(points_back).unwrap_or(false);
    if my_m != married {
        return ActionResult::fire(NodeVars::Matching {
            p: my_p,
            m: married,
        });
    }
    match my_p {
        None => {
            let suitors: Vec<NodeId> = s.neighbor_ids().filter(|&u| points_back(u)).collect();
            if let Some(&u) = suitors.iter().min() {
                return ActionResult::fire(NodeVars::Matching {
                    p: Some(u),
                    m: my_m,
                });
            }
            let candidate = s
                .neighbor_ids()
                .filter(|&u| {
                    let (pu, mu) = matching_parts(&s.vars[&u]);
                    pu.is_none() && !mu && u > j
                })
                .max();
            if let Some(u) = candidate {
                return ActionResult::fire(NodeVars::Matching {
                    p: Some(u),
                    m: my_m,
                });
            }
        }
        Some(u) => {
            debug_assert!(s.vars.contains_key(&u), "pointer outside neighborhood");
            let (_, mu) = matching_parts(&s.vars[&u]);
            if !points_back(u) && (mu || u < j) {
                return ActionResult::fire(NodeVars::Matching { p: None, m: my_m });
            }
        }
    }
    ActionResult::disabled()
}

impl Program {
    pub fn eval(&self, s: &NeighborhoodSnapshot, rng: &mut impl Rng) -> ActionResult {
        match self.kind {
            ProgramKind::ColorArbitrary => eval_arbitrary_coloring(s, self.variant, rng),
            ProgramKind::ColorPlanar => eval_planar_coloring(s),
            ProgramKind::Matching => eval_matching(s),
        }
    }

    /// Guard-only evaluation: all three programs have deterministic guards
    /// (only the random-color statement draws from the RNG).
    pub fn enabled(&self, s: &NeighborhoodSnapshot) -> bool {
        match self.kind {
            ProgramKind::ColorArbitrary => {
                let my = color_of(s.center_vars());
                s.neighbor_ids()
                    .any(|k| k > s.center && color_of(&s.vars[&k]) == my)
            }
            ProgramKind::ColorPlanar => eval_planar_coloring(s).enabled,
            ProgramKind::Matching => eval_matching(s).enabled,
        }
    }
}

pub type GlobalState = BTreeMap<NodeId, NodeVars>;

/// Snapshot of `j`'s closed neighborhood out of a global state.
pub fn snapshot_from_state(g: &Graph, state: &GlobalState, j: NodeId) -> NeighborhoodSnapshot {
    let mut vars = BTreeMap::new();
    vars.insert(j, state[&j].clone());
    for &k in g.neighbors(j) {
        vars.insert(k, state[&k].clone());
    }
    NeighborhoodSnapshot::new(j, vars)
}

/// Nodes with an enabled action in `state`.
pub fn enabled_nodes(g: &Graph, program: Program, state: &GlobalState) -> Vec<NodeId> {
    g.nodes()
        .filter(|&j| program.enabled(&snapshot_from_state(g, state, j)))
        .collect()
}

/// Silent-stabilization oracle: the program-specific structural properties
/// hold and no action is enabled anywhere.
pub fn is_legitimate(g: &Graph, program: Program, state: &GlobalState) -> bool {
    let structural = match program.kind {
        ProgramKind::ColorArbitrary => proper_coloring(g, state),
        ProgramKind::ColorPlanar => {
            proper_coloring(g, state)
                && state.values().all(|v| color_of(v) <= 5)
                && g.nodes().all(|j| {
                    let (_, xj) = planar_parts(&state[&j]);
                    let out = g
                        .neighbors(j)
                        .iter()
                        .filter(|&&k| (xj, j) < (planar_parts(&state[&k]).1, k))
                        .count();
                    out <= 5
                })
        }
        ProgramKind::Matching => matching_structural(g, state),
    };
    structural && enabled_nodes(g, program, state).is_empty()
}

fn proper_coloring(g: &Graph, state: &GlobalState) -> bool {
    g.edges()
        .all(|(u, v)| color_of(&state[&u]) != color_of(&state[&v]))
}

fn matching_structural(g: &Graph, state: &GlobalState) -> bool {
    // p symmetric where non-NULL, m consistent, and no edge with both
    // endpoints free (maximality).
    for j in g.nodes() {
        let (pj, mj) = matching_parts(&state[&j]);
        match pj {
            Some(u) => {
                if !g.neighbors(j).contains(&u) {
                    return false;
                }
                let (pu, _) = matching_parts(&state[&u]);
                if pu != Some(j) || !mj {
                    return false;
                }
            }
            None => {
                if mj {
                    return false;
                }
            }
        }
    }
    g.edges().all(|(u, v)| {
        let (pu, _) = matching_parts(&state[&u]);
        let (pv, _) = matching_parts(&state[&v]);
        pu.is_some() || pv.is_some()
    })
}

/// All-zero (respectively all-NULL) initial state.
pub fn zero_state(g: &Graph, kind: ProgramKind) -> GlobalState {
    g.nodes().map(|j| (j, NodeVars::zero(kind))).collect()
}

/// Random in-domain initial state.
pub fn random_state(g: &Graph, kind: ProgramKind, rng: &mut impl Rng) -> GlobalState {
    g.nodes()
        .map(|j| (j, NodeVars::random(kind, g, j, rng)))
        .collect()
}

/// Perturb `count` distinct random nodes with random in-domain values; the
/// model of a consistency-violating fault hitting a legitimate state.
pub fn perturb(
    g: &Graph,
    kind: ProgramKind,
    state: &mut GlobalState,
    count: usize,
    rng: &mut impl Rng,
) {
    let n = g.node_count();
    let mut picked = Vec::new();
    while picked.len() < count.min(n) {
        let j = rng.gen_range(0..n as NodeId);
        if !picked.contains(&j) {
            picked.push(j);
            state.insert(j, NodeVars::random(kind, g, j, rng));
        }
    }
}
