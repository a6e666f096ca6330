//! Post-hoc consistency-violation-fault accounting.
//!
//! The run log is replayed while the abstract value of every program
//! variable is tracked: the deterministic resolution function applied to
//! every write issued so far (plus the genesis values). In the abstract
//! computation a write changes the state at its stamp point, so the
//! abstract value of a key at time t is the resolver's winner among the
//! versions stamped at or before t. An action that resolved some variable
//! to a different value read inconsistently; if it went on to write, it
//! perturbed the program state and counts as a cvf, otherwise it was a
//! harmless stutter.
//!
//! Replaying offline keeps measurement out of the simulated timing.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::clock::{ClientId, VectorClock};
use crate::log::Record;
use crate::sim::Ms;
use crate::store::Key;

#[derive(Debug, Error)]
pub enum CvfError {
    #[error("read of {key} at t={t} precedes any write (incomplete log)")]
    NoAbstractValue { key: String, t: Ms },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CvfClientStats {
    /// Actions that entered the write phase.
    pub executed: u64,
    /// Executed actions built on at least one inconsistent read.
    pub cvf: u64,
    /// Non-writing actions with an inconsistent read.
    pub stutter: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CvfStats {
    pub per_client: BTreeMap<ClientId, CvfClientStats>,
    pub cvf_total: u64,
    pub stutter_total: u64,
}

/// One write in resolve order: (stamp, clock lex, hash). The hash stands in
/// for the resolver's byte tie-break; it is only reached if two distinct
/// writes carried identical (timestamp, clock) pairs, which cannot happen
/// because every PUT bumps the writer's own counter.
struct AbstractWrite {
    wall_ts: Ms,
    clock: VectorClock,
    hash: u64,
}

/// Replay the log and classify every action. Every issued write is part of
/// the abstract computation (requests are never dropped, so even a
/// quorum-failed PUT reaches the replicas eventually).
pub fn count_cvf_posthoc(records: &[Record]) -> Result<CvfStats, CvfError> {
    let mut writes: BTreeMap<Key, Vec<AbstractWrite>> = BTreeMap::new();
    for r in records {
        if let Record::PutDone {
            key,
            wall_ts,
            clock,
            hash,
            ..
        } = r
        {
            writes.entry(*key).or_default().push(AbstractWrite {
                wall_ts: *wall_ts,
                clock: clock.clone(),
                hash: *hash,
            });
        }
    }
    for list in writes.values_mut() {
        list.sort_by(|a, b| {
            a.wall_ts
                .cmp(&b.wall_ts)
                .then_with(|| a.clock.lex_cmp(&b.clock))
                .then_with(|| a.hash.cmp(&b.hash))
        });
    }
    // Resolve order leads with the stamp, so the winner among writes
    // stamped <= t is simply the last such entry in sorted order.
    let abstract_hash_at = |key: Key, t: Ms| -> Option<u64> {
        let list = writes.get(&key)?;
        let idx = list.partition_point(|w| w.wall_ts <= t);
        if idx == 0 {
            None
        } else {
            Some(list[idx - 1].hash)
        }
    };

    let mut stats = CvfStats::default();
    for r in records {
        if let Record::Action {
            client,
            reads,
            wrote,
            ..
        } = r
        {
            let entry = stats.per_client.entry(*client).or_default();
            if *wrote {
                entry.executed += 1;
            }
            if reads.is_empty() {
                continue;
            }
            let mut stale = false;
            for read in reads {
                let expect =
                    abstract_hash_at(read.key, read.t_init).ok_or(CvfError::NoAbstractValue {
                        key: read.key.to_string(),
                        t: read.t_init,
                    })?;
                if expect != read.hash {
                    stale = true;
                }
            }
            if stale {
                if *wrote {
                    entry.cvf += 1;
                    stats.cvf_total += 1;
                } else {
                    entry.stutter += 1;
                    stats.stutter_total += 1;
                }
            }
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::{Outcome, ReadRecord, GENESIS};

    fn put(client: ClientId, key: Key, wall_ts: Ms, t_done: Ms, hash: u64, ok: bool) -> Record {
        Record::PutDone {
            client,
            key,
            wall_ts,
            t_done,
            clock: VectorClock::new().bumped(client).bumped(client),
            hash,
            ok,
        }
    }

    fn action(client: ClientId, wrote: bool, reads: Vec<(Key, Ms, u64)>) -> Record {
        Record::Action {
            action_id: 0,
            client,
            node: 0,
            t_start: 0,
            t_end: 0,
            outcome: if wrote {
                Outcome::Executed
            } else {
                Outcome::Disabled
            },
            wrote,
            write_start: None,
            reads: reads
                .into_iter()
                .map(|(key, t_init, hash)| ReadRecord { key, t_init, hash })
                .collect(),
        }
    }

    #[test]
    fn consistent_reads_count_nothing() {
        let k = Key::Var(0);
        let log = vec![
            put(GENESIS, k, 0, 0, 10, true),
            action(1, true, vec![(k, 5, 10)]),
            put(1, k, 6, 8, 11, true),
            action(2, false, vec![(k, 9, 11)]),
        ];
        let stats = count_cvf_posthoc(&log).unwrap();
        assert_eq!(stats.cvf_total, 0);
        assert_eq!(stats.stutter_total, 0);
        assert_eq!(stats.per_client[&1].executed, 1);
    }

    #[test]
    fn stale_read_with_write_is_cvf_without_write_is_stutter() {
        let k = Key::Var(0);
        let log = vec![
            put(GENESIS, k, 0, 0, 10, true),
            put(1, k, 4, 6, 11, true),
            // Reads initiated after the write's stamp but resolving the old
            // value: inconsistent.
            action(2, true, vec![(k, 7, 10)]),
            action(3, false, vec![(k, 7, 10)]),
        ];
        let stats = count_cvf_posthoc(&log).unwrap();
        assert_eq!(stats.cvf_total, 1);
        assert_eq!(stats.stutter_total, 1);
        assert_eq!(stats.per_client[&2].cvf, 1);
        assert_eq!(stats.per_client[&3].stutter, 1);
    }

    #[test]
    fn read_before_stamp_expects_previous_value() {
        let k = Key::Var(0);
        let log = vec![
            put(GENESIS, k, 0, 0, 10, true),
            put(1, k, 6, 9, 11, true),
            // Initiated at t=5, before the write was stamped: the genesis
            // value is the consistent answer.
            action(2, true, vec![(k, 5, 10)]),
        ];
        let stats = count_cvf_posthoc(&log).unwrap();
        assert_eq!(stats.cvf_total, 0);
    }

    #[test]
    fn quorum_failed_put_still_enters_the_abstract_computation() {
        let k = Key::Var(0);
        let log = vec![
            put(GENESIS, k, 0, 0, 10, true),
            put(1, k, 4, 1004, 11, false),
            // The value is out there even though the quorum timed out;
            // resolving it is consistent, resolving genesis is not.
            action(2, true, vec![(k, 8, 11)]),
            action(3, true, vec![(k, 8, 10)]),
        ];
        let stats = count_cvf_posthoc(&log).unwrap();
        assert_eq!(stats.per_client[&2].cvf, 0);
        assert_eq!(stats.per_client[&3].cvf, 1);
    }

    #[test]
    fn completion_order_does_not_matter_only_stamps_do() {
        let k = Key::Var(0);
        let log = vec![
            put(GENESIS, k, 0, 0, 10, true),
            // Stamped later but logged (completed) earlier than the next.
            put(2, k, 9, 12, 12, true),
            put(1, k, 4, 30, 11, true),
            action(3, true, vec![(k, 6, 11)]),
            action(4, true, vec![(k, 10, 12)]),
        ];
        let stats = count_cvf_posthoc(&log).unwrap();
        assert_eq!(stats.cvf_total, 0);
    }

    #[test]
    fn missing_genesis_is_an_error() {
        let k = Key::Var(0);
        let log = vec![action(1, true, vec![(k, 5, 10)])];
        assert!(count_cvf_posthoc(&log).is_err());
    }
}
