//! The recorded execution: an ordered event log plus derived views.
//!
//! Traces serialize as JSONL, one event per line, with a leading `meta`
//! line carrying the full configuration needed to replay or verify the run
//! offline.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{FaultPlan, ProcId, SchedulerPolicy};
use crate::geometry::{ConvexPolytope, Point};
use crate::protocol::Config;
use crate::stable_vector::{DeliveredSet, InputTuple};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub config: Config,
    pub t_end: u32,
    /// The inputs each process actually started with (incorrect overrides
    /// already applied).
    pub inputs: Vec<Point>,
    pub plan: FaultPlan,
    pub policy: SchedulerPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Meta(TraceMeta),
    Crash {
        proc: ProcId,
    },
    SvSubmit {
        proc: ProcId,
        value: Point,
    },
    SvCommit {
        proc: ProcId,
    },
    SvDeliver {
        proc: ProcId,
        tuples: Vec<InputTuple>,
    },
    State {
        proc: ProcId,
        t: u32,
        polytope: ConvexPolytope,
    },
    Send {
        from: ProcId,
        to: ProcId,
        t: u32,
    },
    Deliver {
        from: ProcId,
        to: ProcId,
        t: u32,
        late: bool,
    },
    Threshold {
        proc: ProcId,
        t: u32,
        senders: Vec<ProcId>,
    },
    Decide {
        proc: ProcId,
        t_end: u32,
        polytope: ConvexPolytope,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTrace {
    pub meta: TraceMeta,
    pub events: Vec<Event>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceReadError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {err}")]
    Parse { line: usize, err: serde_json::Error },
    #[error("trace must start with a meta line")]
    MissingMeta,
}

impl SimTrace {
    pub fn n(&self) -> usize {
        self.meta.config.n
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let meta_line = serde_json::to_string(&Event::Meta(self.meta.clone()))?;
        writeln!(w, "{meta_line}")?;
        for ev in &self.events {
            writeln!(w, "{}", serde_json::to_string(ev)?)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<SimTrace, TraceReadError> {
        let mut meta: Option<TraceMeta> = None;
        let mut events = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: Event = serde_json::from_str(&line)
                .map_err(|err| TraceReadError::Parse { line: i + 1, err })?;
            match ev {
                Event::Meta(m) => {
                    if meta.is_none() {
                        meta = Some(m);
                    } else {
                        events.push(Event::Meta(m));
                    }
                }
                other => events.push(other),
            }
        }
        Ok(SimTrace {
            meta: meta.ok_or(TraceReadError::MissingMeta)?,
            events,
        })
    }

    pub fn index(&self) -> TraceIndex {
        TraceIndex::build(self)
    }
}

/// Precomputed views over a trace.
#[derive(Clone, Debug, Default)]
pub struct TraceIndex {
    /// h_i[t] for every completed round.
    pub states: BTreeMap<(ProcId, u32), ConvexPolytope>,
    /// The message senders counted at each threshold, i.e. MSG_i[t] as used.
    pub thresholds: BTreeMap<(ProcId, u32), Vec<ProcId>>,
    pub delivered: BTreeMap<ProcId, DeliveredSet>,
    pub submitted: BTreeSet<ProcId>,
    pub crashed: BTreeSet<ProcId>,
    /// (p, t) pairs such that p sent at least one round-t message.
    pub sent_round: BTreeSet<(ProcId, u32)>,
    pub decided: BTreeMap<ProcId, ConvexPolytope>,
}

impl TraceIndex {
    fn build(trace: &SimTrace) -> TraceIndex {
        let mut ix = TraceIndex::default();
        for ev in &trace.events {
            match ev {
                Event::Meta(_) => {}
                Event::Crash { proc } => {
                    ix.crashed.insert(*proc);
                }
                Event::SvSubmit { proc, .. } => {
                    ix.submitted.insert(*proc);
                }
                Event::SvCommit { .. } => {}
                Event::SvDeliver { proc, tuples } => {
                    ix.delivered.insert(
                        *proc,
                        DeliveredSet {
                            owner: *proc,
                            tuples: tuples.clone(),
                        },
                    );
                }
                Event::State { proc, t, polytope } => {
                    ix.states.insert((*proc, *t), polytope.clone());
                }
                Event::Send { from, t, .. } => {
                    ix.sent_round.insert((*from, *t));
                }
                Event::Deliver { .. } => {}
                Event::Threshold { proc, t, senders } => {
                    ix.thresholds.insert((*proc, *t), senders.clone());
                }
                Event::Decide { proc, polytope, .. } => {
                    ix.decided.insert(*proc, polytope.clone());
                }
            }
        }
        ix
    }

    /// The set of faulty processes that crashed before sending any round-`t`
    /// message. Round 0 messages are the stable-vector submissions.
    pub fn f_of(&self, t: u32) -> BTreeSet<ProcId> {
        self.crashed
            .iter()
            .copied()
            .filter(|&p| {
                if t == 0 {
                    !self.submitted.contains(&p)
                } else {
                    !self.sent_round.contains(&(p, t))
                }
            })
            .collect()
    }

    pub fn state(&self, p: ProcId, t: u32) -> Option<&ConvexPolytope> {
        self.states.get(&(p, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Mode;
    use crate::rat::Rat;

    fn tiny_trace() -> SimTrace {
        let config = Config {
            n: 4,
            f: 1,
            d: 1,
            epsilon: Rat::ratio(1, 10),
            mu: Rat::zero(),
            u: Rat::one(),
            mode: Mode::IncorrectInputs,
        };
        let mut plan = FaultPlan::none();
        plan.faulty.insert(3);
        plan.crash_after.insert(3, 2);
        SimTrace {
            meta: TraceMeta {
                config,
                t_end: 2,
                inputs: (0..4).map(|i| Point::from_ints(&[i])).collect(),
                plan,
                policy: SchedulerPolicy::SeededRandom { seed: 7 },
            },
            events: vec![
                Event::SvSubmit {
                    proc: 3,
                    value: Point::from_ints(&[3]),
                },
                Event::Send { from: 3, to: 0, t: 1 },
                Event::Crash { proc: 3 },
                Event::Send { from: 0, to: 1, t: 1 },
            ],
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let trace = tiny_trace();
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().contains("\"type\":\"meta\""));
        let back = SimTrace::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn f_of_counts_partial_broadcasts() {
        let trace = tiny_trace();
        let ix = trace.index();
        // 3 submitted, so not in F[0]; it sent one round-1 message, so not in
        // F[1] either; it never sent round-2 messages, so it lands in F[2].
        assert!(ix.f_of(0).is_empty());
        assert!(ix.f_of(1).is_empty());
        assert_eq!(ix.f_of(2), BTreeSet::from([3]));
        assert_eq!(ix.f_of(3), BTreeSet::from([3]));
    }
}
