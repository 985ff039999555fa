//! Scheduling strategies. All of the run's nondeterminism lives here: the
//! next action to perform, stable-vector commit instants, the prefix length
//! each process gets delivered, and whether a crashed process's pending
//! tuple stays committable.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::ProcId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SchedulerPolicy {
    /// Uniform choice among enabled actions from a seeded generator.
    SeededRandom { seed: u64 },
    /// Withholds everything sourced at `set` until the other live processes
    /// have decided (or nothing else can run), then behaves like
    /// `SeededRandom`. Requires |set| <= f.
    SlowSet { set: BTreeSet<ProcId>, seed: u64 },
    /// Cycles fairly through the action universe; the seed is recorded but
    /// unused.
    RoundRobin { seed: u64 },
}

impl SchedulerPolicy {
    pub fn seed(&self) -> u64 {
        match self {
            SchedulerPolicy::SeededRandom { seed }
            | SchedulerPolicy::SlowSet { seed, .. }
            | SchedulerPolicy::RoundRobin { seed } => *seed,
        }
    }

    pub fn validate(&self, n: usize, f: usize) -> Result<(), String> {
        if let SchedulerPolicy::SlowSet { set, .. } = self {
            if set.len() > f {
                return Err(format!(
                    "slow set of {} exceeds the fault budget f={f}",
                    set.len()
                ));
            }
            if let Some(&p) = set.iter().max() {
                if p >= n {
                    return Err(format!("slow-set id {p} out of range (n={n})"));
                }
            }
        }
        Ok(())
    }
}

/// Live scheduler state for one run.
pub(super) struct Scheduler {
    policy: SchedulerPolicy,
    rng: ChaCha20Rng,
    cursor: usize,
    pub released: bool,
}

impl Scheduler {
    pub fn new(policy: &SchedulerPolicy) -> Self {
        Scheduler {
            policy: policy.clone(),
            rng: ChaCha20Rng::seed_from_u64(policy.seed()),
            cursor: 0,
            released: !matches!(policy, SchedulerPolicy::SlowSet { .. }),
        }
    }

    pub fn slow_set(&self) -> Option<&BTreeSet<ProcId>> {
        match (&self.policy, self.released) {
            (SchedulerPolicy::SlowSet { set, .. }, false) => Some(set),
            _ => None,
        }
    }

    pub fn release(&mut self) {
        self.released = true;
    }

    /// Picks one of the enabled actions, given their ranks in a fixed
    /// canonical universe of size `universe`. Round-robin sweeps the universe
    /// cyclically (so every persistently enabled action runs within one
    /// sweep); the seeded policies choose uniformly.
    pub fn pick(&mut self, ranks: &[usize], universe: usize) -> usize {
        debug_assert!(!ranks.is_empty());
        match self.policy {
            SchedulerPolicy::RoundRobin { .. } => {
                let cur = self.cursor % universe;
                let best = ranks
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, &r)| (r + universe - cur) % universe)
                    .map(|(i, _)| i)
                    .unwrap();
                self.cursor = (ranks[best] + 1) % universe;
                best
            }
            _ => self.rng.random_range(0..ranks.len()),
        }
    }

    /// Prefix length for a stable-vector delivery, in `[min, max]`.
    pub fn choose_prefix(&mut self, min: usize, max: usize) -> usize {
        debug_assert!(min <= max);
        match self.policy {
            SchedulerPolicy::RoundRobin { .. } => max,
            _ => self.rng.random_range(min..=max),
        }
    }

    /// When a process crashes after submitting but before its commit instant,
    /// the scheduler decides whether the tuple can still be committed.
    pub fn keep_pending_after_crash(&mut self) -> bool {
        match self.policy {
            SchedulerPolicy::SeededRandom { .. } => self.rng.random_bool(0.5),
            _ => true,
        }
    }
}
