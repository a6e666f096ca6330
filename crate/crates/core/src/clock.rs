//! Vector clocks: the versioning context of the store and the causality
//! metadata consumed by the violation monitor.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub type ClientId = u16;

/// Map client-id -> counter. Absent entries mean 0; comparison is the
/// standard componentwise partial order; merge is componentwise max.
/// Serialized as a list of (client, counter) pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<(ClientId, u64)>", into = "Vec<(ClientId, u64)>")]
pub struct VectorClock(BTreeMap<ClientId, u64>);

impl From<Vec<(ClientId, u64)>> for VectorClock {
    fn from(v: Vec<(ClientId, u64)>) -> Self {
        VectorClock(v.into_iter().filter(|&(_, n)| n > 0).collect())
    }
}

impl From<VectorClock> for Vec<(ClientId, u64)> {
    fn from(c: VectorClock) -> Self {
        c.0.into_iter().collect()
    }
}

impl VectorClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, c: ClientId) -> u64 {
        self.0.get(&c).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Increment `c`'s counter, returning the new clock.
    pub fn bumped(&self, c: ClientId) -> VectorClock {
        let mut out = self.clone();
        *out.0.entry(c).or_insert(0) += 1;
        out
    }

    pub fn bump(&mut self, c: ClientId) {
        *self.0.entry(c).or_insert(0) += 1;
    }

    /// Componentwise max.
    pub fn merge(&mut self, other: &VectorClock) {
        for (&c, &v) in &other.0 {
            let e = self.0.entry(c).or_insert(0);
            *e = (*e).max(v);
        }
    }

    pub fn merged(&self, other: &VectorClock) -> VectorClock {
        let mut out = self.clone();
        out.merge(other);
        out
    }

    /// Componentwise partial order. `None` means concurrent.
    pub fn partial_cmp(&self, other: &VectorClock) -> Option<Ordering> {
        let mut le = true;
        let mut ge = true;
        for &c in self.0.keys().chain(other.0.keys()) {
            let a = self.get(c);
            let b = other.get(c);
            if a < b {
                ge = false;
            }
            if a > b {
                le = false;
            }
        }
        match (le, ge) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => None,
        }
    }

    pub fn lt(&self, other: &VectorClock) -> bool {
        self.partial_cmp(other) == Some(Ordering::Less)
    }

    pub fn le(&self, other: &VectorClock) -> bool {
        matches!(
            self.partial_cmp(other),
            Some(Ordering::Less) | Some(Ordering::Equal)
        )
    }

    pub fn concurrent(&self, other: &VectorClock) -> bool {
        self.partial_cmp(other).is_none()
    }

    /// Total order used only for deterministic tie-breaking: compare entries
    /// over the union of client ids ascending, absent entries read as 0.
    /// If `a <= b` componentwise and `a != b`, then `a` is lexicographically
    /// smaller, so this order refines the causal partial order.
    pub fn lex_cmp(&self, other: &VectorClock) -> Ordering {
        let mut ids: Vec<ClientId> = self.0.keys().chain(other.0.keys()).copied().collect();
        ids.sort_unstable();
        ids.dedup();
        for c in ids {
            match self.get(c).cmp(&other.get(c)) {
                Ordering::Equal => {}
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl std::fmt::Display for VectorClock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, (c, v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{c}:{v}")?;
        }
        write!(f, "}}")
    }
}
