//! Serialized reference execution: round-robin over all nodes, each action
//! evaluated against the true global state and applied atomically. This is
//! the interleaving-semantics ground truth that the distributed runtime is
//! compared against.

use rand::Rng;
use thiserror::Error;

use super::{snapshot_from_state, GlobalState, Program};
use crate::graph::Graph;

#[derive(Debug, Error)]
#[error("no silent state within {budget} executed actions")]
pub struct Diverged {
    pub budget: u64,
}

pub struct SerialRun {
    pub state: GlobalState,
    /// Executed (state-changing) actions.
    pub steps: u64,
}

/// Round-robin until a full pass fires nothing. Errors out after `budget`
/// executed actions.
pub fn run_serial(
    g: &Graph,
    program: Program,
    init: GlobalState,
    rng: &mut impl Rng,
    budget: u64,
) -> Result<SerialRun, Diverged> {
    let mut state = init;
    let mut steps = 0u64;
    loop {
        let mut fired = false;
        for j in g.nodes() {
            let snapshot = snapshot_from_state(g, &state, j);
            let result = program.eval(&snapshot, rng);
            if let Some(vars) = result.write {
                debug_assert!(result.enabled);
                state.insert(j, vars);
                fired = true;
                steps += 1;
                if steps > budget {
                    return Err(Diverged { budget });
                }
            }
        }
        if !fired {
            return Ok(SerialRun { state, steps });
        }
    }
}

/// The step budget used by the stabilization property suites:
/// `50 * n * max_degree` executed actions.
pub fn default_budget(g: &Graph) -> u64 {
    50 * g.node_count() as u64 * g.max_degree().max(1) as u64
}
