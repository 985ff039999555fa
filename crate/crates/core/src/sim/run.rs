//! The deterministic event loop.
//!
//! Each iteration enumerates the enabled actions in a fixed canonical order
//! and lets the scheduling policy pick one. Identical (config, inputs, plan,
//! policy) therefore reproduce identical traces byte for byte. Logical time
//! is the event count; there are no wall-clock timers.

use std::collections::VecDeque;

use super::policy::Scheduler;
use super::{Event, FaultPlan, ProcId, SchedulerPolicy, SimTrace, TraceMeta};
use crate::geometry::{ConvexPolytope, Point};
use crate::protocol::{
    compute_t_end, Config, ConfigError, Effect, ProcessState, ProtocolError,
};
use crate::stable_vector::{StableVectorError, StableVectorState};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid inputs: {0}")]
    BadInputs(String),
    #[error("invalid fault plan: {0}")]
    BadPlan(String),
    #[error("invalid scheduler policy: {0}")]
    BadPolicy(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    StableVector(#[from] StableVectorError),
    #[error("simulation stalled: {0}")]
    Stuck(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Action {
    Submit(ProcId),
    CommitSv(ProcId),
    DeliverSv(ProcId),
    SendNext(ProcId),
    DeliverMsg { from: ProcId, to: ProcId },
}

impl Action {
    /// Rank in the canonical action universe of size `4n + n*n`.
    fn rank(&self, n: usize) -> usize {
        match *self {
            Action::Submit(p) => p,
            Action::CommitSv(p) => n + p,
            Action::DeliverSv(p) => 2 * n + p,
            Action::SendNext(p) => 3 * n + p,
            Action::DeliverMsg { from, to } => 4 * n + from * n + to,
        }
    }

    /// Whether this action is withheld while `slow` is being starved.
    fn deferred_for(&self, slow: &std::collections::BTreeSet<ProcId>) -> bool {
        match *self {
            Action::CommitSv(p)
            | Action::DeliverSv(p)
            | Action::SendNext(p) => slow.contains(&p),
            Action::DeliverMsg { from, .. } => slow.contains(&from),
            Action::Submit(_) => false,
        }
    }
}

struct Runtime {
    state: ProcessState,
    alive: bool,
    budget: Option<u64>,
    /// Individual channel sends still to perform, in program order.
    outbox: VecDeque<(ProcId, u32, ConvexPolytope)>,
}

struct Sim<'a> {
    cfg: &'a Config,
    t_end: u32,
    procs: Vec<Runtime>,
    submitted: Vec<bool>,
    sv: StableVectorState,
    /// FIFO channel per ordered pair, indexed `from * n + to`.
    channels: Vec<VecDeque<(u32, ConvexPolytope)>>,
    events: Vec<Event>,
    sched: Scheduler,
}

/// Runs one complete execution. All fault-free processes decide; the trace
/// records everything needed to verify the run offline.
pub fn run(
    cfg: &Config,
    inputs: &[Point],
    plan: &FaultPlan,
    policy: &SchedulerPolicy,
) -> Result<SimTrace, SimError> {
    cfg.validate()?;
    plan.validate(cfg).map_err(SimError::BadPlan)?;
    policy.validate(cfg.n, cfg.f).map_err(SimError::BadPolicy)?;
    if inputs.len() != cfg.n {
        return Err(SimError::BadInputs(format!(
            "expected {} inputs, got {}",
            cfg.n,
            inputs.len()
        )));
    }
    let resolved: Vec<Point> = (0..cfg.n)
        .map(|p| plan.resolved_input(p, &inputs[p]).clone())
        .collect();
    for (p, x) in resolved.iter().enumerate() {
        if x.dim() != cfg.d {
            return Err(SimError::BadInputs(format!(
                "input of process {p} has dimension {}, expected {}",
                x.dim(),
                cfg.d
            )));
        }
        if x.coords()
            .iter()
            .any(|c| c < &cfg.mu || c > &cfg.u)
        {
            return Err(SimError::BadInputs(format!(
                "input of process {p} leaves [mu, U]^d"
            )));
        }
    }

    let t_end = compute_t_end(cfg);
    let n = cfg.n;
    let mut sim = Sim {
        cfg,
        t_end,
        procs: (0..n)
            .map(|p| Runtime {
                state: ProcessState::new(p, resolved[p].clone()),
                alive: true,
                budget: plan.crash_after.get(&p).copied(),
                outbox: VecDeque::new(),
            })
            .collect(),
        submitted: vec![false; n],
        sv: StableVectorState::default(),
        channels: vec![VecDeque::new(); n * n],
        events: Vec::new(),
        sched: Scheduler::new(policy),
    };

    // A zero budget crashes the process before it does anything at all.
    for p in 0..n {
        if sim.procs[p].budget == Some(0) {
            sim.procs[p].alive = false;
            sim.events.push(Event::Crash { proc: p });
        }
    }

    let universe = 4 * n + n * n;
    loop {
        sim.maybe_release_slow_set();
        let all = sim.enabled_actions(None);
        if all.is_empty() {
            break;
        }
        let slow = sim.sched.slow_set().cloned();
        let filtered = match slow {
            Some(slow) => {
                let kept = sim.enabled_actions(Some(&slow));
                if kept.is_empty() {
                    // nothing else can run; stop starving so the run finishes
                    sim.sched.release();
                    all
                } else {
                    kept
                }
            }
            None => all,
        };
        let ranks: Vec<usize> = filtered.iter().map(|a| a.rank(n)).collect();
        let idx = sim.sched.pick(&ranks, universe);
        sim.perform(filtered[idx])?;
    }

    for p in 0..n {
        if sim.procs[p].alive && !sim.procs[p].state.has_decided() {
            return Err(SimError::Stuck(format!(
                "process {p} is alive but undecided with no enabled actions"
            )));
        }
    }

    Ok(SimTrace {
        meta: TraceMeta {
            config: cfg.clone(),
            t_end,
            inputs: resolved,
            plan: plan.clone(),
            policy: policy.clone(),
        },
        events: sim.events,
    })
}

impl Sim<'_> {
    fn maybe_release_slow_set(&mut self) {
        let others_done = match self.sched.slow_set() {
            Some(slow) => (0..self.cfg.n)
                .filter(|p| !slow.contains(p))
                .all(|p| !self.procs[p].alive || self.procs[p].state.has_decided()),
            None => false,
        };
        if others_done {
            self.sched.release();
        }
    }

    fn enabled_actions(
        &self,
        slow: Option<&std::collections::BTreeSet<ProcId>>,
    ) -> Vec<Action> {
        let n = self.cfg.n;
        let quorum = self.cfg.quorum();
        let mut out = Vec::new();
        let mut push = |a: Action| {
            if slow.map_or(true, |s| !a.deferred_for(s)) {
                out.push(a);
            }
        };
        for p in 0..n {
            if self.procs[p].alive && !self.submitted[p] {
                push(Action::Submit(p));
            }
        }
        for p in 0..n {
            if self.sv.pending.iter().any(|t| t.sender == p) {
                push(Action::CommitSv(p));
            }
        }
        for p in 0..n {
            if self.procs[p].alive
                && self.submitted[p]
                && self.procs[p].state.delivered.is_none()
                && self.sv.committed.len() >= quorum
            {
                push(Action::DeliverSv(p));
            }
        }
        for p in 0..n {
            if self.procs[p].alive && !self.procs[p].outbox.is_empty() {
                push(Action::SendNext(p));
            }
        }
        for from in 0..n {
            for to in 0..n {
                if from != to
                    && !self.channels[from * n + to].is_empty()
                    && self.procs[to].alive
                    && !self.procs[to].state.has_decided()
                {
                    push(Action::DeliverMsg { from, to });
                }
            }
        }
        out
    }

    fn perform(&mut self, action: Action) -> Result<(), SimError> {
        match action {
            Action::Submit(p) => {
                let value = self.procs[p].state.input.clone();
                self.sv.submit(value.clone(), p)?;
                self.submitted[p] = true;
                self.events.push(Event::SvSubmit { proc: p, value });
                self.charge(p);
            }
            Action::CommitSv(p) => {
                self.sv.commit(p);
                self.events.push(Event::SvCommit { proc: p });
            }
            Action::DeliverSv(p) => {
                let prefix =
                    self.sched
                        .choose_prefix(self.cfg.quorum(), self.sv.committed.len());
                let r = self.sv.deliver(p, prefix);
                self.events.push(Event::SvDeliver {
                    proc: p,
                    tuples: r.tuples.clone(),
                });
                let effects = self.procs[p]
                    .state
                    .on_stable_vector(self.cfg, self.t_end, r)?;
                self.apply_effects(p, effects);
                self.charge(p);
            }
            Action::SendNext(p) => {
                let (to, t, payload) = self.procs[p]
                    .outbox
                    .pop_front()
                    .expect("SendNext on empty outbox");
                self.channels[p * self.cfg.n + to].push_back((t, payload));
                self.events.push(Event::Send { from: p, to, t });
                self.charge(p);
            }
            Action::DeliverMsg { from, to } => {
                let (t, payload) = self.channels[from * self.cfg.n + to]
                    .pop_front()
                    .expect("DeliverMsg on empty channel");
                let effects = self.procs[to].state.on_round_message(
                    self.cfg,
                    self.t_end,
                    crate::protocol::RoundMessage {
                        payload,
                        sender: from,
                        round: t,
                    },
                )?;
                let late = effects
                    .iter()
                    .any(|e| matches!(e, Effect::LateMessage { .. }));
                self.events.push(Event::Deliver { from, to, t, late });
                self.apply_effects(to, effects);
                self.charge(to);
            }
        }
        Ok(())
    }

    fn apply_effects(&mut self, p: ProcId, effects: Vec<Effect>) {
        for e in effects {
            match e {
                Effect::Broadcast { round, payload } => {
                    for to in 0..self.cfg.n {
                        if to != p {
                            self.procs[p].outbox.push_back((to, round, payload.clone()));
                        }
                    }
                }
                Effect::State { round, polytope } => {
                    self.events.push(Event::State {
                        proc: p,
                        t: round,
                        polytope,
                    });
                }
                Effect::Threshold { round, senders } => {
                    self.events.push(Event::Threshold {
                        proc: p,
                        t: round,
                        senders,
                    });
                }
                Effect::Decide { polytope } => {
                    self.events.push(Event::Decide {
                        proc: p,
                        t_end: self.t_end,
                        polytope,
                    });
                }
                Effect::LateMessage { .. } => {} // recorded on the deliver event
            }
        }
    }

    /// One action performed by `p`; crash when the budget runs out.
    fn charge(&mut self, p: ProcId) {
        if let Some(b) = self.procs[p].budget.as_mut() {
            *b -= 1;
            if *b == 0 {
                self.procs[p].alive = false;
                self.procs[p].outbox.clear();
                self.events.push(Event::Crash { proc: p });
                if self.sv.pending.iter().any(|t| t.sender == p)
                    && !self.sched.keep_pending_after_crash()
                {
                    self.sv.drop_pending(p);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Mode;
    use crate::rat::Rat;
    use crate::sim::TraceIndex;

    fn cfg(n: usize, f: usize) -> Config {
        Config {
            n,
            f,
            d: 1,
            epsilon: Rat::ratio(1, 10),
            mu: Rat::zero(),
            u: Rat::from_int(10),
            mode: Mode::IncorrectInputs,
        }
    }

    fn line_inputs(n: usize) -> Vec<Point> {
        (0..n).map(|i| Point::from_ints(&[i as i64])).collect()
    }

    #[test]
    fn fault_free_run_decides_everywhere() {
        let cfg = cfg(4, 1);
        let trace = run(
            &cfg,
            &line_inputs(4),
            &FaultPlan::none(),
            &SchedulerPolicy::SeededRandom { seed: 1 },
        )
        .unwrap();
        let ix = trace.index();
        assert_eq!(ix.decided.len(), 4);
        assert!(ix.crashed.is_empty());
        for p in 0..4 {
            assert!(ix.state(p, 0).is_some());
            assert!(ix.state(p, trace.meta.t_end).is_some());
        }
    }

    #[test]
    fn deterministic_replay() {
        let cfg = cfg(5, 1);
        let mut plan = FaultPlan::none();
        plan.faulty.insert(4);
        plan.crash_after.insert(4, 9);
        plan.incorrect_inputs.insert(4, Point::from_ints(&[9]));
        let policy = SchedulerPolicy::SeededRandom { seed: 33 };
        let a = run(&cfg, &line_inputs(5), &plan, &policy).unwrap();
        let b = run(&cfg, &line_inputs(5), &plan, &policy).unwrap();
        assert_eq!(a, b);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        a.write_jsonl(&mut buf_a).unwrap();
        b.write_jsonl(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
        // a different seed gives a different schedule
        let c = run(
            &cfg,
            &line_inputs(5),
            &plan,
            &SchedulerPolicy::SeededRandom { seed: 34 },
        )
        .unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn crash_before_submit_never_appears() {
        let cfg = cfg(4, 1);
        let mut plan = FaultPlan::none();
        plan.faulty.insert(2);
        plan.crash_after.insert(2, 0);
        let trace = run(
            &cfg,
            &line_inputs(4),
            &plan,
            &SchedulerPolicy::SeededRandom { seed: 5 },
        )
        .unwrap();
        let ix = trace.index();
        assert!(ix.f_of(0).contains(&2));
        for r in ix.delivered.values() {
            assert!(r.senders().all(|s| s != 2));
        }
        // the other three still decide
        assert_eq!(ix.decided.len(), 3);
    }

    #[test]
    fn round_robin_is_deterministic_without_seed_use() {
        let cfg = cfg(4, 1);
        let a = run(
            &cfg,
            &line_inputs(4),
            &FaultPlan::none(),
            &SchedulerPolicy::RoundRobin { seed: 0 },
        )
        .unwrap();
        let b = run(
            &cfg,
            &line_inputs(4),
            &FaultPlan::none(),
            &SchedulerPolicy::RoundRobin { seed: 99 },
        )
        .unwrap();
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn slow_set_starves_until_others_decide() {
        let cfg = cfg(4, 1);
        let slow: std::collections::BTreeSet<ProcId> = [3].into();
        let trace = run(
            &cfg,
            &line_inputs(4),
            &FaultPlan::none(),
            &SchedulerPolicy::SlowSet {
                set: slow.clone(),
                seed: 2,
            },
        )
        .unwrap();
        let ix: TraceIndex = trace.index();
        // everyone decides eventually (the set is released at the end)
        assert_eq!(ix.decided.len(), 4);
        // no delivery from 3 to others happens before their decide events
        let mut decided: std::collections::BTreeSet<ProcId> = Default::default();
        for ev in &trace.events {
            match ev {
                Event::Deliver { from: 3, to, .. } if !slow.contains(to) => {
                    assert!(
                        decided.contains(to) || decided.len() >= 3,
                        "message from the slow process used before decision"
                    );
                }
                Event::Decide { proc, .. } => {
                    decided.insert(*proc);
                }
                _ => {}
            }
        }
        // the fast processes' delivered sets exclude the slow tuple
        for p in 0..3 {
            assert!(ix.delivered[&p].senders().all(|s| s != 3));
        }
    }

    #[test]
    fn rejects_undersized_system() {
        let cfg = cfg(3, 1);
        let err = run(
            &cfg,
            &line_inputs(3),
            &FaultPlan::none(),
            &SchedulerPolicy::SeededRandom { seed: 0 },
        )
        .unwrap_err();
        assert!(matches!(err, SimError::Config(_)));
    }

    #[test]
    fn crash_mid_broadcast_splits_recipients() {
        // budget tuned so the crash lands between round-1 channel sends:
        // submit (1) + sv delivery (1) + first of three sends (1) = 3 actions
        let cfg = cfg(4, 1);
        let mut plan = FaultPlan::none();
        plan.faulty.insert(0);
        plan.crash_after.insert(0, 3);
        let trace = run(
            &cfg,
            &line_inputs(4),
            &plan,
            &SchedulerPolicy::RoundRobin { seed: 0 },
        )
        .unwrap();
        let sends: Vec<(ProcId, u32)> = trace
            .events
            .iter()
            .filter_map(|e| match e {
                Event::Send { from: 0, to, t } => Some((*to, *t)),
                _ => None,
            })
            .collect();
        assert_eq!(sends, vec![(1, 1)], "exactly one of three sends happens");
        let ix = trace.index();
        assert!(!ix.f_of(1).contains(&0), "it did send a round-1 message");
        assert!(ix.f_of(2).contains(&0));
    }
}
