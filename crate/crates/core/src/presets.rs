//! Canned scenarios and seeded generators for campaigns.
//!
//! Everything here is a pure function of its seed, so campaigns are exactly
//! reproducible: the same experiment spec and seed always produce the same
//! inputs, fault plan and schedule.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::geometry::Point;
use crate::protocol::{compute_t_end, Config, Mode};
use crate::rat::Rat;
use crate::sim::{FaultPlan, ProcId, SchedulerPolicy};

// distinct streams per purpose, all derived from the master seed
const INPUT_STREAM: u64 = 0x496e_7075;
const PLAN_STREAM: u64 = 0x506c_616e;
const CLUSTER_STREAM: u64 = 0x436c_7573;

fn stream(seed: u64, tag: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed ^ tag)
}

/// A rational in `[mu, U]` with denominator at most 64, so input coordinates
/// stay small and arithmetic fast.
fn random_coord(rng: &mut ChaCha20Rng, mu: &Rat, u: &Rat) -> Rat {
    let k = rng.random_range(0..=64i64);
    mu + (u - mu) * Rat::ratio(k, 64)
}

fn random_point(rng: &mut ChaCha20Rng, cfg: &Config) -> Point {
    Point::new(
        (0..cfg.d)
            .map(|_| random_coord(rng, &cfg.mu, &cfg.u))
            .collect(),
    )
}

/// Uniform-random rational inputs in the configured box.
pub fn random_inputs(cfg: &Config, seed: u64) -> Vec<Point> {
    let mut rng = stream(seed, INPUT_STREAM);
    (0..cfg.n).map(|_| random_point(&mut rng, cfg)).collect()
}

/// A crash-heavy random fault plan: the full budget of faulty processes,
/// each with a coin-flipped incorrect input (in the incorrect-inputs mode)
/// and a mix of crash instants skewed toward the early rounds, where crashes
/// actually matter.
pub fn random_fault_plan(cfg: &Config, seed: u64) -> FaultPlan {
    let mut rng = stream(seed, PLAN_STREAM);
    let mut ids: Vec<ProcId> = (0..cfg.n).collect();
    let mut faulty = BTreeSet::new();
    for _ in 0..cfg.f {
        let at = rng.random_range(0..ids.len());
        faulty.insert(ids.swap_remove(at));
    }
    let mut incorrect_inputs = BTreeMap::new();
    let mut crash_after = BTreeMap::new();
    // enough actions to reach the last round if left alone
    let horizon = (compute_t_end(cfg) as u64 + 2) * (2 * cfg.n as u64);
    for &p in &faulty {
        if cfg.mode == Mode::IncorrectInputs && rng.random_bool(0.5) {
            incorrect_inputs.insert(p, random_point(&mut rng, cfg));
        }
        let roll = rng.random_range(0..4u8);
        match roll {
            0 => {} // never crashes
            1 => {
                // round-0 crashes: before submitting, mid round 0
                crash_after.insert(p, rng.random_range(0..3u64));
            }
            _ => {
                crash_after.insert(p, rng.random_range(0..horizon));
            }
        }
    }
    FaultPlan {
        faulty,
        incorrect_inputs,
        crash_after,
    }
}

/// Inputs placed at simplex corners for the smallest legal system
/// `n = (d+2)f + 1`, plus a starved fault-free tail with off-corner inputs.
/// In this layout the common information the fast processes can ever share
/// pins the lower-bound polytope to the single point at the origin.
pub fn degenerate_corner_scenario(
    f: usize,
    d: usize,
    epsilon: Rat,
    seed: u64,
) -> (Config, Vec<Point>, FaultPlan, SchedulerPolicy) {
    let n = (d + 2) * f + 1;
    let cfg = Config {
        n,
        f,
        d,
        epsilon,
        mu: Rat::zero(),
        u: Rat::one(),
        mode: Mode::IncorrectInputs,
    };
    let mut inputs = vec![Point::origin(d); n];
    for j in 1..=d {
        for k in 1..=f {
            let mut coords = vec![Rat::zero(); d];
            coords[j - 1] = Rat::one();
            inputs[j * f + k] = Point::new(coords);
        }
    }
    let slow: BTreeSet<ProcId> = (n - f..n).collect();
    for &p in &slow {
        inputs[p] = Point::new(vec![Rat::one(); d]);
    }
    (
        cfg,
        inputs,
        FaultPlan::none(),
        SchedulerPolicy::SlowSet { set: slow, seed },
    )
}

/// The generic starvation adversary: random inputs, `f` faulty processes
/// with incorrect inputs that never crash, and `f` fault-free processes
/// withheld until everyone else decides.
pub fn slow_set_scenario(cfg: &Config, seed: u64) -> (Vec<Point>, FaultPlan, SchedulerPolicy) {
    let inputs = random_inputs(cfg, seed);
    let mut rng = stream(seed, PLAN_STREAM);
    let mut ids: Vec<ProcId> = (0..cfg.n).collect();
    let mut faulty = BTreeSet::new();
    for _ in 0..cfg.f {
        let at = rng.random_range(0..ids.len());
        faulty.insert(ids.swap_remove(at));
    }
    let mut incorrect_inputs = BTreeMap::new();
    if cfg.mode == Mode::IncorrectInputs {
        for &p in &faulty {
            incorrect_inputs.insert(p, random_point(&mut rng, cfg));
        }
    }
    let mut slow = BTreeSet::new();
    for _ in 0..cfg.f {
        let at = rng.random_range(0..ids.len());
        slow.insert(ids.swap_remove(at));
    }
    (
        inputs,
        FaultPlan {
            faulty,
            incorrect_inputs,
            crash_after: BTreeMap::new(),
        },
        SchedulerPolicy::SlowSet { set: slow, seed },
    )
}

/// Inputs where `2f + 1` processes share one value; used by the
/// weak-optimality fixtures. Returns the inputs and the shared value.
pub fn identical_cluster_inputs(cfg: &Config, seed: u64) -> (Vec<Point>, Point) {
    let mut rng = stream(seed, CLUSTER_STREAM);
    let x_star = random_point(&mut rng, cfg);
    let mut inputs: Vec<Point> = (0..cfg.n).map(|_| random_point(&mut rng, cfg)).collect();
    let mut ids: Vec<ProcId> = (0..cfg.n).collect();
    for _ in 0..(2 * cfg.f + 1).min(cfg.n) {
        let at = rng.random_range(0..ids.len());
        inputs[ids.swap_remove(at)] = x_star.clone();
    }
    (inputs, x_star)
}

/// All processes share the same input.
pub fn identical_inputs(cfg: &Config, seed: u64) -> Vec<Point> {
    let mut rng = stream(seed, CLUSTER_STREAM);
    let x = random_point(&mut rng, cfg);
    vec![x; cfg.n]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> Config {
        Config {
            n: 4,
            f: 1,
            d: 1,
            epsilon: Rat::ratio(1, 10),
            mu: Rat::zero(),
            u: Rat::one(),
            mode: Mode::IncorrectInputs,
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let c = cfg();
        assert_eq!(random_inputs(&c, 7), random_inputs(&c, 7));
        assert_ne!(random_inputs(&c, 7), random_inputs(&c, 8));
        assert_eq!(random_fault_plan(&c, 7), random_fault_plan(&c, 7));
        let plan = random_fault_plan(&c, 7);
        assert!(plan.validate(&c).is_ok());
    }

    #[test]
    fn degenerate_layout() {
        let (cfg, inputs, plan, policy) =
            degenerate_corner_scenario(1, 2, Rat::ratio(1, 10), 0);
        assert_eq!(cfg.n, 5);
        assert!(cfg.validate().is_ok());
        assert!(plan.faulty.is_empty());
        // f+1 = 2 zero inputs, then e_1, e_2, then the slow corner
        assert_eq!(inputs[0], Point::origin(2));
        assert_eq!(inputs[1], Point::origin(2));
        assert_eq!(inputs[2], Point::from_ints(&[1, 0]));
        assert_eq!(inputs[3], Point::from_ints(&[0, 1]));
        assert_eq!(inputs[4], Point::from_ints(&[1, 1]));
        match policy {
            SchedulerPolicy::SlowSet { set, .. } => assert_eq!(set, BTreeSet::from([4])),
            _ => panic!("expected a slow-set policy"),
        }
    }

    #[test]
    fn cluster_has_quorum_of_identical_inputs() {
        let c = cfg();
        let (inputs, x_star) = identical_cluster_inputs(&c, 3);
        let count = inputs.iter().filter(|x| **x == x_star).count();
        assert!(count >= 2 * c.f + 1);
    }

    #[test]
    fn slow_set_disjoint_from_faulty() {
        let mut c = cfg();
        c.n = 7;
        c.f = 2;
        let (_, plan, policy) = slow_set_scenario(&c, 5);
        let slow = match policy {
            SchedulerPolicy::SlowSet { set, .. } => set,
            _ => panic!(),
        };
        assert_eq!(plan.faulty.len(), 2);
        assert_eq!(slow.len(), 2);
        assert!(plan.faulty.is_disjoint(&slow));
    }
}
