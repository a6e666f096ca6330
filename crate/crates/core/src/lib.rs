//! Experimental platform for running self-stabilizing graph programs over a
//! simulated quorum-replicated key-value store.
//!
//! Node variables live in the store; a set of clients scans its assigned
//! nodes, evaluates guarded commands against quorum reads, and writes back
//! updates. Depending on the (N, R, W) quorum configuration and whether
//! lock-based local mutual exclusion and a violation monitor are active, the
//! same program executes under four modes (SEQ, EVE-S, EVE-AS, ROLLBACK),
//! letting experiments quantify the trade-off between self-stabilization and
//! detect-rollback when stale reads perturb the computation.

pub mod clock;
pub mod cvf;
pub mod graph;
pub mod harness;
pub mod log;
pub mod monitor;
pub mod programs;
pub mod runtime;
pub mod sim;
pub mod store;
pub mod termination;
