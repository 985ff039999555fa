//! The consensus protocol as a deterministic per-process state machine.
//!
//! Round 0 collects inputs through the stable-vector primitive and computes
//! the initial polytope (the safe area of the received values, or their plain
//! hull when inputs are trusted). Each later round broadcasts the current
//! polytope, waits for `n - f` same-round polytopes, and replaces the state
//! with their uniform linear combination. After `t_end` rounds the state is
//! the decision.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    linear_combination, safe_area, ConvexPolytope, GeometryError, Point, PointMultiset,
};
use crate::rat::Rat;
use crate::sim::ProcId;
use crate::stable_vector::DeliveredSet;

/// Whether faulty processes may start from wrong inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Faulty processes may have arbitrary inputs; requires n >= (d+2)f + 1.
    #[serde(rename = "incorrect-inputs")]
    IncorrectInputs,
    /// All inputs are correct; requires n >= 2f + 1 and uses the plain hull
    /// in round 0.
    #[serde(rename = "correct-inputs")]
    CorrectInputs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub n: usize,
    pub f: usize,
    pub d: usize,
    pub epsilon: Rat,
    /// Per-coordinate input lower bound.
    pub mu: Rat,
    /// Per-coordinate input upper bound.
    pub u: Rat,
    pub mode: Mode,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("n={n} too small: mode requires n >= {required}")]
    TooFewProcesses { n: usize, required: usize },
    #[error("dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("input bounds violated: mu must not exceed U")]
    BadBounds,
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.d == 0 || self.d > 2 {
            return Err(ConfigError::BadDimension(self.d));
        }
        let required = match self.mode {
            Mode::IncorrectInputs => (self.d + 2) * self.f + 1,
            Mode::CorrectInputs => 2 * self.f + 1,
        };
        if self.n < required {
            return Err(ConfigError::TooFewProcesses {
                n: self.n,
                required,
            });
        }
        if !self.epsilon.is_positive() {
            return Err(ConfigError::NonPositiveEpsilon);
        }
        if self.mu > self.u {
            return Err(ConfigError::BadBounds);
        }
        Ok(())
    }

    /// `n - f`, the round threshold and the stable-vector liveness bound.
    pub fn quorum(&self) -> usize {
        self.n - self.f
    }
}

/// Smallest positive integer `t` with
/// `(1 - 1/n)^t * sqrt(d * n^2 * max(U^2, mu^2)) < epsilon`,
/// decided on the squared inequality in exact rational arithmetic.
pub fn compute_t_end(cfg: &Config) -> u32 {
    let bound_sq = Rat::from_int((cfg.d * cfg.n * cfg.n) as i64)
        * cfg.u.sq().max(cfg.mu.sq());
    let shrink_sq = Rat::ratio(cfg.n as i64 - 1, cfg.n as i64).sq();
    let eps_sq = cfg.epsilon.sq();
    let mut acc = bound_sq;
    let mut t = 0u32;
    loop {
        acc = acc * &shrink_sq;
        t += 1;
        if acc < eps_sq {
            return t;
        }
    }
}

/// A round `t >= 1` message carrying the sender's previous-round polytope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundMessage {
    pub payload: ConvexPolytope,
    pub sender: ProcId,
    pub round: u32,
}

/// What a protocol step asks the environment to do or record.
#[derive(Clone, Debug, PartialEq)]
pub enum Effect {
    /// Send `(payload, id, round)` to every other process.
    Broadcast { round: u32, payload: ConvexPolytope },
    /// The polytope computed at the end of `round`.
    State { round: u32, polytope: ConvexPolytope },
    /// The threshold fired for `round` with exactly these senders counted.
    Threshold { round: u32, senders: Vec<ProcId> },
    /// Terminal state reached.
    Decide { polytope: ConvexPolytope },
    /// A message arrived too late to be used (its round already resolved).
    LateMessage { from: ProcId, round: u32 },
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("duplicate message from {sender} for round {round}: exactly-once delivery violated")]
    DuplicateMessage { sender: ProcId, round: u32 },
    #[error("stable vector delivered {got} tuples, need at least {need}")]
    ShortDelivery { got: usize, need: usize },
    #[error("stable vector delivered twice")]
    DuplicateDelivery,
    #[error("round-0 polytope is empty: internal invariant violated")]
    EmptyRoundZero,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One process's view of the protocol.
#[derive(Clone, Debug)]
pub struct ProcessState {
    pub id: ProcId,
    pub input: Point,
    /// Current round; 0 until the stable vector returns.
    pub round: u32,
    /// Polytope at the end of the last completed round.
    pub polytope: Option<ConvexPolytope>,
    /// Same-round messages received so far (sender -> payload), own included.
    msg: BTreeMap<ProcId, ConvexPolytope>,
    /// Whether the current round's threshold already fired.
    fired: bool,
    /// Messages for rounds not yet entered, replayed on round entry.
    buffer: BTreeMap<u32, BTreeMap<ProcId, ConvexPolytope>>,
    pub delivered: Option<DeliveredSet>,
    pub decided: Option<ConvexPolytope>,
}

impl ProcessState {
    pub fn new(id: ProcId, input: Point) -> Self {
        ProcessState {
            id,
            input,
            round: 0,
            polytope: None,
            msg: BTreeMap::new(),
            fired: false,
            buffer: BTreeMap::new(),
            delivered: None,
            decided: None,
        }
    }

    pub fn has_decided(&self) -> bool {
        self.decided.is_some()
    }

    /// Round 0, lines 3-6: the stable vector returned `r`.
    pub fn on_stable_vector(
        &mut self,
        cfg: &Config,
        t_end: u32,
        r: DeliveredSet,
    ) -> Result<Vec<Effect>, ProtocolError> {
        if self.delivered.is_some() {
            return Err(ProtocolError::DuplicateDelivery);
        }
        if r.len() < cfg.quorum() {
            return Err(ProtocolError::ShortDelivery {
                got: r.len(),
                need: cfg.quorum(),
            });
        }
        let h0 = round0_polytope(cfg, &r)?;
        self.delivered = Some(r);
        self.polytope = Some(h0.clone());
        let mut effects = vec![Effect::State {
            round: 0,
            polytope: h0,
        }];
        self.enter_round(cfg, t_end, 1, &mut effects)?;
        Ok(effects)
    }

    /// Lines 10-11 (and line 12 when the threshold condition is met).
    pub fn on_round_message(
        &mut self,
        cfg: &Config,
        t_end: u32,
        msg: RoundMessage,
    ) -> Result<Vec<Effect>, ProtocolError> {
        let mut effects = Vec::new();
        if self.has_decided()
            || msg.round < self.current_active_round()
            || (msg.round == self.round && self.fired)
        {
            effects.push(Effect::LateMessage {
                from: msg.sender,
                round: msg.round,
            });
            return Ok(effects);
        }
        if msg.round == self.round && self.round >= 1 {
            if self.msg.insert(msg.sender, msg.payload).is_some() {
                return Err(ProtocolError::DuplicateMessage {
                    sender: msg.sender,
                    round: msg.round,
                });
            }
            self.try_fire(cfg, t_end, &mut effects)?;
        } else {
            // A sender may be several rounds ahead; park until we get there.
            let slot = self.buffer.entry(msg.round).or_default();
            if slot.insert(msg.sender, msg.payload).is_some() {
                return Err(ProtocolError::DuplicateMessage {
                    sender: msg.sender,
                    round: msg.round,
                });
            }
        }
        Ok(effects)
    }

    /// The earliest round this process can still use messages for.
    fn current_active_round(&self) -> u32 {
        if self.round == 0 {
            1
        } else {
            self.round
        }
    }

    fn enter_round(
        &mut self,
        cfg: &Config,
        t_end: u32,
        t: u32,
        effects: &mut Vec<Effect>,
    ) -> Result<(), ProtocolError> {
        self.round = t;
        self.fired = false;
        self.msg = self.buffer.remove(&t).unwrap_or_default();
        let h_prev = self.polytope.clone().expect("entered round t>=1 without h");
        // line 8: own message joins the set before any sends go out
        self.msg.insert(self.id, h_prev.clone());
        effects.push(Effect::Broadcast {
            round: t,
            payload: h_prev,
        });
        self.try_fire(cfg, t_end, effects)
    }

    fn try_fire(
        &mut self,
        cfg: &Config,
        t_end: u32,
        effects: &mut Vec<Effect>,
    ) -> Result<(), ProtocolError> {
        while !self.fired && self.msg.len() >= cfg.quorum() {
            self.fired = true;
            let senders: Vec<ProcId> = self.msg.keys().copied().collect();
            let polys: Vec<ConvexPolytope> = self.msg.values().cloned().collect();
            let count = polys.len();
            let weights = vec![Rat::ratio(1, count as i64); count];
            let combined = linear_combination(&polys, &weights)?;
            effects.push(Effect::Threshold {
                round: self.round,
                senders,
            });
            effects.push(Effect::State {
                round: self.round,
                polytope: combined.clone(),
            });
            self.polytope = Some(combined.clone());
            if self.round < t_end {
                // loop again via enter_round; buffered messages may fire
                // several rounds back to back
                let next = self.round + 1;
                self.round = next;
                self.fired = false;
                self.msg = self.buffer.remove(&next).unwrap_or_default();
                self.msg.insert(self.id, combined.clone());
                effects.push(Effect::Broadcast {
                    round: next,
                    payload: combined,
                });
            } else {
                self.decided = Some(combined.clone());
                effects.push(Effect::Decide { polytope: combined });
            }
        }
        Ok(())
    }
}

/// Lines 4-5: the initial polytope from the delivered value multiset.
pub fn round0_polytope(
    cfg: &Config,
    r: &DeliveredSet,
) -> Result<ConvexPolytope, ProtocolError> {
    let x: PointMultiset = r.values().into();
    let h0 = match cfg.mode {
        Mode::IncorrectInputs => safe_area(cfg.d, &x, cfg.f)?,
        Mode::CorrectInputs => ConvexPolytope::hull_multiset(cfg.d, &x)?,
    };
    if h0.is_empty() {
        return Err(ProtocolError::EmptyRoundZero);
    }
    Ok(h0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable_vector::InputTuple;

    fn pt(x: i64) -> Point {
        Point::from_ints(&[x])
    }

    fn seg(a: i64, b: i64) -> ConvexPolytope {
        ConvexPolytope::hull(1, &[pt(a), pt(b)]).unwrap()
    }

    fn cfg_n4() -> Config {
        Config {
            n: 4,
            f: 1,
            d: 1,
            epsilon: Rat::ratio(1, 100),
            mu: Rat::zero(),
            u: Rat::one(),
            mode: Mode::IncorrectInputs,
        }
    }

    fn delivery(owner: ProcId, values: &[i64]) -> DeliveredSet {
        DeliveredSet {
            owner,
            tuples: values
                .iter()
                .enumerate()
                .map(|(i, &v)| InputTuple::new(pt(v), i))
                .collect(),
        }
    }

    #[test]
    fn config_bounds() {
        assert!(cfg_n4().validate().is_ok());
        let mut c = cfg_n4();
        c.n = 3;
        assert!(matches!(
            c.validate(),
            Err(ConfigError::TooFewProcesses { required: 4, .. })
        ));
        c.mode = Mode::CorrectInputs;
        assert!(c.validate().is_ok());
        c.f = 0;
        c.epsilon = Rat::zero();
        assert!(matches!(c.validate(), Err(ConfigError::NonPositiveEpsilon)));
    }

    #[test]
    fn t_end_examples() {
        // n=4, d=1, U=1, mu=0, eps=1/100 -> 21
        assert_eq!(compute_t_end(&cfg_n4()), 21);

        // degenerate zero bounds -> 1
        let mut c = cfg_n4();
        c.u = Rat::zero();
        c.mu = Rat::zero();
        assert_eq!(compute_t_end(&c), 1);

        // n=5, d=2, U=1, mu=0, eps=1/10 -> 20
        let c = Config {
            n: 5,
            f: 1,
            d: 2,
            epsilon: Rat::ratio(1, 10),
            mu: Rat::zero(),
            u: Rat::one(),
            mode: Mode::IncorrectInputs,
        };
        assert_eq!(compute_t_end(&c), 20);
    }

    #[test]
    fn round0_modes() {
        let cfg = cfg_n4();
        let r = delivery(0, &[0, 1, 2, 3]);
        assert_eq!(round0_polytope(&cfg, &r).unwrap(), seg(1, 2));

        let mut cfg2 = cfg.clone();
        cfg2.mode = Mode::CorrectInputs;
        cfg2.n = 4;
        assert_eq!(round0_polytope(&cfg2, &r).unwrap(), seg(0, 3));
    }

    #[test]
    fn threshold_and_decide_flow() {
        let cfg = cfg_n4();
        let t_end = 2;
        let mut p = ProcessState::new(0, pt(0));
        let fx = p
            .on_stable_vector(&cfg, t_end, delivery(0, &[0, 1, 2, 3]))
            .unwrap();
        // state(0) then broadcast round 1 (own message alone is below threshold)
        assert!(matches!(&fx[0], Effect::State { round: 0, .. }));
        assert!(matches!(&fx[1], Effect::Broadcast { round: 1, .. }));
        assert_eq!(p.round, 1);

        // two peer messages reach the n-f = 3 threshold
        let m = |s: ProcId| RoundMessage {
            payload: seg(1, 2),
            sender: s,
            round: 1,
        };
        assert!(p.on_round_message(&cfg, t_end, m(1)).unwrap().is_empty());
        let fx = p.on_round_message(&cfg, t_end, m(2)).unwrap();
        assert!(fx.iter().any(
            |e| matches!(e, Effect::Threshold { round: 1, senders } if senders == &vec![0, 1, 2])
        ));
        assert_eq!(p.polytope, Some(seg(1, 2)));
        assert_eq!(p.round, 2);

        // late message for round 1 is logged, not used
        let fx = p.on_round_message(&cfg, t_end, m(3)).unwrap();
        assert!(matches!(fx[0], Effect::LateMessage { from: 3, round: 1 }));

        // duplicate in the same round is a simulator bug
        let m2 = |s: ProcId| RoundMessage {
            payload: seg(1, 2),
            sender: s,
            round: 2,
        };
        p.on_round_message(&cfg, t_end, m2(1)).unwrap();
        assert!(matches!(
            p.on_round_message(&cfg, t_end, m2(1)),
            Err(ProtocolError::DuplicateMessage { .. })
        ));

        // final round message triggers decision
        let fx = p.on_round_message(&cfg, t_end, m2(2)).unwrap();
        assert!(fx
            .iter()
            .any(|e| matches!(e, Effect::Decide { polytope } if polytope == &seg(1, 2))));
        assert!(p.has_decided());
    }

    #[test]
    fn future_round_messages_buffer_and_replay() {
        let cfg = cfg_n4();
        let t_end = 3;
        let mut p = ProcessState::new(0, pt(0));
        // messages for rounds 1 and 2 arrive while still in round 0
        for (s, r) in [(1, 1), (2, 1), (3, 1), (1, 2), (2, 2)] {
            let fx = p
                .on_round_message(
                    &cfg,
                    t_end,
                    RoundMessage {
                        payload: seg(0, 1),
                        sender: s,
                        round: r,
                    },
                )
                .unwrap();
            assert!(fx.is_empty());
        }
        // entering round 1 replays the buffer: rounds 1 and 2 fire in cascade
        let fx = p
            .on_stable_vector(&cfg, t_end, delivery(0, &[0, 1, 2, 3]))
            .unwrap();
        let thresholds: Vec<u32> = fx
            .iter()
            .filter_map(|e| match e {
                Effect::Threshold { round, .. } => Some(*round),
                _ => None,
            })
            .collect();
        assert_eq!(thresholds, vec![1, 2]);
        assert_eq!(p.round, 3);
    }

    #[test]
    fn uniform_weights_over_all_n() {
        // all n messages arrive before the threshold check -> weights 1/n
        let cfg = cfg_n4();
        let t_end = 1;
        let mut p = ProcessState::new(0, pt(0));
        for s in 1..4 {
            p.on_round_message(
                &cfg,
                t_end,
                RoundMessage {
                    payload: seg(0, s),
                    sender: s as ProcId,
                    round: 1,
                },
            )
            .unwrap();
        }
        let fx = p
            .on_stable_vector(&cfg, t_end, delivery(0, &[0, 1, 2, 3]))
            .unwrap();
        let senders = fx
            .iter()
            .find_map(|e| match e {
                Effect::Threshold { senders, .. } => Some(senders.clone()),
                _ => None,
            })
            .unwrap();
        assert_eq!(senders.len(), 4);
        // mean of [1,2], [0,1], [0,2], [0,3] with weights 1/4:
        // lo = 1/4, hi = (2+1+2+3)/4 = 2
        let expect = ConvexPolytope::hull(
            1,
            &[
                Point::new(vec![Rat::ratio(1, 4)]),
                Point::new(vec![Rat::from_int(2)]),
            ],
        )
        .unwrap();
        let decided = p.decided.clone().unwrap();
        assert_eq!(decided, expect);
    }
}
