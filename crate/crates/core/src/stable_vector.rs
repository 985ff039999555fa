//! Round-0 communication primitive.
//!
//! Each process submits its input tuple once; the primitive eventually hands
//! every live process a set of at least `n - f` tuples, and the returned
//! sets form a chain under inclusion. The implementation is simulator-backed:
//! submitted tuples are committed into a single global append-only sequence
//! at scheduler-chosen instants, and each delivered set is a scheduler-chosen
//! prefix of that sequence. Prefixes of a common sequence give Containment by
//! construction; Liveness follows because at least `n - f` processes submit
//! and their tuples are eventually committed.

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::sim::ProcId;

/// The round-0 message `(x_i, i, 0)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputTuple {
    pub value: Point,
    pub sender: ProcId,
    /// Always 0; kept on the wire for the record.
    pub round: u32,
}

impl InputTuple {
    pub fn new(value: Point, sender: ProcId) -> Self {
        InputTuple {
            value,
            sender,
            round: 0,
        }
    }
}

/// The set returned to one process, frozen at delivery.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveredSet {
    pub owner: ProcId,
    /// In commit order; at most one tuple per sender.
    pub tuples: Vec<InputTuple>,
}

impl DeliveredSet {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn senders(&self) -> impl Iterator<Item = ProcId> + '_ {
        self.tuples.iter().map(|t| t.sender)
    }

    pub fn values(&self) -> Vec<Point> {
        self.tuples.iter().map(|t| t.value.clone()).collect()
    }

    /// Set inclusion by (sender, value) pairs.
    pub fn is_subset_of(&self, other: &DeliveredSet) -> bool {
        self.tuples.iter().all(|t| {
            other
                .tuples
                .iter()
                .any(|o| o.sender == t.sender && o.value == t.value)
        })
    }
}

/// Simulator-side state of the primitive.
#[derive(Debug, Default)]
pub struct StableVectorState {
    /// Tuples submitted but not yet committed, in submission order.
    pub pending: Vec<InputTuple>,
    /// The global append-only commit sequence.
    pub committed: Vec<InputTuple>,
}

#[derive(Debug, thiserror::Error)]
pub enum StableVectorError {
    #[error("process {0} submitted twice")]
    DuplicateSubmission(ProcId),
}

impl StableVectorState {
    /// The tuple enters the primitive. Whether it ever commits is up to the
    /// scheduler.
    pub fn submit(&mut self, value: Point, sender: ProcId) -> Result<(), StableVectorError> {
        if self.pending.iter().any(|t| t.sender == sender)
            || self.committed.iter().any(|t| t.sender == sender)
        {
            return Err(StableVectorError::DuplicateSubmission(sender));
        }
        self.pending.push(InputTuple::new(value, sender));
        Ok(())
    }

    pub fn pending_senders(&self) -> Vec<ProcId> {
        self.pending.iter().map(|t| t.sender).collect()
    }

    /// Moves a pending tuple into the commit sequence.
    pub fn commit(&mut self, sender: ProcId) {
        let idx = self
            .pending
            .iter()
            .position(|t| t.sender == sender)
            .expect("commit of a tuple that is not pending");
        let tuple = self.pending.remove(idx);
        self.committed.push(tuple);
    }

    /// Drops a pending tuple (submitter crashed before the commit instant and
    /// the scheduler chose to lose it).
    pub fn drop_pending(&mut self, sender: ProcId) {
        self.pending.retain(|t| t.sender != sender);
    }

    /// The delivered set for `owner`: the first `prefix_len` committed tuples.
    pub fn deliver(&self, owner: ProcId, prefix_len: usize) -> DeliveredSet {
        assert!(prefix_len <= self.committed.len());
        DeliveredSet {
            owner,
            tuples: self.committed[..prefix_len].to_vec(),
        }
    }
}
