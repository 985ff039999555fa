//! The adversary's plan: who is faulty, which inputs are wrong, when crashes
//! happen.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ProcId;
use crate::geometry::Point;
use crate::protocol::{Config, Mode};

/// Crash instants are counted in *process actions*: one stable-vector
/// submission, one single-peer channel send, or one processed delivery each
/// count as one action. A crash budget of `k` means the process halts
/// immediately after its `k`-th action, so a crash can fall between the
/// individual channel sends of one broadcast. A budget of 0 crashes the
/// process before it does anything.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultPlan {
    /// The designated faulty set F, |F| <= f. Members follow the algorithm
    /// faithfully until they crash (if they ever do).
    #[serde(default)]
    pub faulty: BTreeSet<ProcId>,
    /// Wrong starting values, keyed by faulty process.
    #[serde(default, with = "proc_key_map")]
    pub incorrect_inputs: BTreeMap<ProcId, Point>,
    /// Crash budgets, keyed by faulty process; absent means never crashes.
    #[serde(default, with = "proc_key_map")]
    pub crash_after: BTreeMap<ProcId, u64>,
}

/// JSON objects key by string; this keeps process-keyed maps readable as
/// `{"3": ...}` and parseable even through serde's internal buffering.
mod proc_key_map {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::ProcId;

    pub fn serialize<S: Serializer, V: Serialize>(
        map: &BTreeMap<ProcId, V>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_map(map.iter().map(|(k, v)| (k.to_string(), v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>, V: Deserialize<'de>>(
        d: D,
    ) -> Result<BTreeMap<ProcId, V>, D::Error> {
        let raw: BTreeMap<String, V> = BTreeMap::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                k.parse::<ProcId>()
                    .map(|k| (k, v))
                    .map_err(|_| D::Error::custom(format!("bad process id key {k:?}")))
            })
            .collect()
    }
}

impl FaultPlan {
    /// A plan with no faults at all.
    pub fn none() -> Self {
        FaultPlan::default()
    }

    pub fn validate(&self, cfg: &Config) -> Result<(), String> {
        if self.faulty.len() > cfg.f {
            return Err(format!(
                "{} faulty processes exceed the budget f={}",
                self.faulty.len(),
                cfg.f
            ));
        }
        if let Some(&p) = self.faulty.iter().max() {
            if p >= cfg.n {
                return Err(format!("faulty id {p} out of range (n={})", cfg.n));
            }
        }
        for p in self.incorrect_inputs.keys() {
            if !self.faulty.contains(p) {
                return Err(format!("incorrect input for non-faulty process {p}"));
            }
        }
        for p in self.crash_after.keys() {
            if !self.faulty.contains(p) {
                return Err(format!("crash point for non-faulty process {p}"));
            }
        }
        if cfg.mode == Mode::CorrectInputs && !self.incorrect_inputs.is_empty() {
            return Err("incorrect inputs are not allowed in correct-inputs mode".into());
        }
        Ok(())
    }

    /// The value process `p` actually starts with.
    pub fn resolved_input<'a>(&'a self, p: ProcId, nominal: &'a Point) -> &'a Point {
        self.incorrect_inputs.get(&p).unwrap_or(nominal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::Rat;

    fn cfg(mode: Mode) -> Config {
        Config {
            n: 4,
            f: 1,
            d: 1,
            epsilon: Rat::ratio(1, 10),
            mu: Rat::zero(),
            u: Rat::one(),
            mode,
        }
    }

    #[test]
    fn plan_validation() {
        let c = cfg(Mode::IncorrectInputs);
        assert!(FaultPlan::none().validate(&c).is_ok());

        let mut plan = FaultPlan::none();
        plan.faulty.insert(3);
        plan.crash_after.insert(3, 5);
        assert!(plan.validate(&c).is_ok());

        plan.faulty.insert(2);
        assert!(plan.validate(&c).is_err()); // two faulty > f = 1

        let mut plan = FaultPlan::none();
        plan.faulty.insert(1);
        plan.incorrect_inputs
            .insert(1, Point::from_ints(&[1]));
        assert!(plan.validate(&c).is_ok());
        assert!(plan.validate(&cfg(Mode::CorrectInputs)).is_err());

        let mut plan = FaultPlan::none();
        plan.incorrect_inputs
            .insert(0, Point::from_ints(&[0]));
        assert!(plan.validate(&c).is_err()); // 0 is not faulty
    }
}
