//! Append-only run log: newline-delimited records consumed by the post-hoc
//! analyzers (cvf counting, rollback assertions, monitor replay).
//!
//! The simulation is single-threaded, so append order is the global event
//! order; records written at the same virtual millisecond keep their causal
//! order by position.

use std::cell::RefCell;
use std::io::Write;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::clock::{ClientId, VectorClock};
use crate::graph::NodeId;
use crate::sim::Ms;
use crate::store::Key;

/// Pseudo-client id used for genesis seeding records.
pub const GENESIS: ClientId = ClientId::MAX;

/// Stable 64-bit FNV-1a over value bytes; used to compare values in logs
/// without carrying the bytes around.
pub fn value_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Executed,
    Disabled,
    /// Skip rule of the neighbor-read optimization held.
    SkippedOpt,
    /// Lock acquisition starved out.
    SkippedLock,
    /// GET or PUT quorum failure.
    SkippedQuorum,
    /// Monitor-triggered abort at the read/write boundary.
    Aborted,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReadRecord {
    pub key: Key,
    /// GET initiation time; staleness is judged against the abstract value
    /// at this instant.
    pub t_init: Ms,
    pub hash: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "rec")]
pub enum Record {
    /// A PUT reached its decision point (success or quorum failure).
    PutDone {
        client: ClientId,
        key: Key,
        /// Version stamp (initiation time).
        wall_ts: Ms,
        /// Completion time (when the quorum decision fell).
        t_done: Ms,
        clock: VectorClock,
        hash: u64,
        ok: bool,
    },
    /// One execute_action invocation, with every program-variable read it
    /// resolved.
    Action {
        action_id: u64,
        client: ClientId,
        node: NodeId,
        t_start: Ms,
        t_end: Ms,
        outcome: Outcome,
        /// True iff the write phase was entered (a var PUT was issued).
        wrote: bool,
        write_start: Option<Ms>,
        reads: Vec<ReadRecord>,
    },
    /// Critical-section entry (locks held, read phase about to start).
    CsEntry {
        action_id: u64,
        client: ClientId,
        node: NodeId,
        t: Ms,
        clock: VectorClock,
    },
    /// Critical-section exit (before lock release).
    CsExit {
        action_id: u64,
        client: ClientId,
        node: NodeId,
        t: Ms,
        clock: VectorClock,
    },
    /// Monitor-detected violation of local mutual exclusion on an edge.
    Violation {
        edge: (NodeId, NodeId),
        clients: (ClientId, ClientId),
        actions: (u64, u64),
        detect_ts: Ms,
        /// Entry time of the later interval; detection latency is
        /// `notify_ts - second_entry_ts`.
        second_entry_ts: Ms,
        notify_ts: Ms,
    },
}

#[derive(Default)]
struct LogInner {
    records: Vec<Record>,
    sink: Option<std::io::BufWriter<std::fs::File>>,
}

/// Shared in-memory log, optionally streamed to a JSONL file.
#[derive(Clone, Default)]
pub struct RunLog {
    inner: Rc<RefCell<LogInner>>,
}

impl RunLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_file(path: &std::path::Path) -> std::io::Result<Self> {
        let file = std::fs::File::create(path)?;
        Ok(RunLog {
            inner: Rc::new(RefCell::new(LogInner {
                records: Vec::new(),
                sink: Some(std::io::BufWriter::new(file)),
            })),
        })
    }

    pub fn push(&self, r: Record) {
        let mut inner = self.inner.borrow_mut();
        if let Some(sink) = inner.sink.as_mut() {
            serde_json::to_writer(&mut *sink, &r).expect("log serialization");
            sink.write_all(b"\n").expect("log write");
        }
        inner.records.push(r);
    }

    pub fn flush(&self) {
        if let Some(sink) = self.inner.borrow_mut().sink.as_mut() {
            sink.flush().expect("log flush");
        }
    }

    pub fn records(&self) -> std::cell::Ref<'_, Vec<Record>> {
        std::cell::Ref::map(self.inner.borrow(), |i| &i.records)
    }

    pub fn take_records(&self) -> Vec<Record> {
        std::mem::take(&mut self.inner.borrow_mut().records)
    }
}

/// Parse a JSONL event log.
pub fn parse_log(text: &str) -> Result<Vec<Record>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_roundtrip() {
        let log = RunLog::new();
        log.push(Record::PutDone {
            client: 1,
            key: Key::Var(3),
            wall_ts: 10,
            t_done: 30,
            clock: VectorClock::new().bumped(1),
            hash: value_hash(&[1, 2, 3]),
            ok: true,
        });
        log.push(Record::Action {
            action_id: 0,
            client: 1,
            node: 3,
            t_start: 0,
            t_end: 40,
            outcome: Outcome::Executed,
            wrote: true,
            write_start: Some(10),
            reads: vec![ReadRecord {
                key: Key::Var(3),
                t_init: 0,
                hash: 7,
            }],
        });
        let text: String = log
            .records()
            .iter()
            .map(|r| serde_json::to_string(r).unwrap() + "\n")
            .collect();
        let parsed = parse_log(&text).unwrap();
        assert_eq!(parsed.len(), 2);
        match &parsed[0] {
            Record::PutDone { key, ok, .. } => {
                assert_eq!(*key, Key::Var(3));
                assert!(ok);
            }
            _ => panic!("wrong record"),
        }
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(value_hash(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(value_hash(b"a"), value_hash(b"a"));
        assert_ne!(value_hash(b"a"), value_hash(b"b"));
    }
}
