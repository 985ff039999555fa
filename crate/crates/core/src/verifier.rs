//! Post-hoc checkers for a run's end-to-end guarantees.
//!
//! Everything here consumes only the trace. Membership and containment are
//! decided in exact arithmetic; the agreement threshold is compared on exact
//! squared distances, so the only approximate number anywhere is the reported
//! `f64` distance itself.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::geometry::{
    hausdorff_distance_sq, safe_area, ConvexPolytope, GeometryError, Point, PointMultiset,
};
use crate::matrix_oracle::{self, DecayReport, OracleError, ReconstructionReport};
use crate::protocol::Mode;
use crate::rat::Rat;
use crate::sim::{self, Event, FaultPlan, ProcId, SchedulerPolicy, SimError, SimTrace, TraceIndex};

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("trace is malformed: {0}")]
    Malformed(String),
}

/// Structural sanity of the event log itself: per-channel FIFO with
/// exactly-once delivery, thresholds of quorum size, monotone crash sets,
/// decisions present for every surviving process.
#[derive(Clone, Debug, Serialize)]
pub struct StructureReport {
    pub pass: bool,
    pub issues: Vec<String>,
}

pub fn check_structure(trace: &SimTrace, ix: &TraceIndex) -> StructureReport {
    let n = trace.n();
    let t_end = trace.meta.t_end;
    let mut issues = Vec::new();

    // deliveries on each channel must be a prefix of the sends, in order
    let mut sent: BTreeMap<(ProcId, ProcId), Vec<u32>> = BTreeMap::new();
    let mut delivered: BTreeMap<(ProcId, ProcId), Vec<u32>> = BTreeMap::new();
    for ev in &trace.events {
        match ev {
            Event::Send { from, to, t } => sent.entry((*from, *to)).or_default().push(*t),
            Event::Deliver { from, to, t, .. } => {
                delivered.entry((*from, *to)).or_default().push(*t)
            }
            _ => {}
        }
    }
    for (chan, dels) in &delivered {
        let sends = sent.get(chan).cloned().unwrap_or_default();
        if dels.len() > sends.len() || dels[..] != sends[..dels.len()] {
            issues.push(format!(
                "channel {}->{}: deliveries {:?} are not a prefix of sends {:?}",
                chan.0, chan.1, dels, sends
            ));
        }
    }

    for ((p, t), senders) in &ix.thresholds {
        if senders.len() < trace.meta.config.quorum() {
            issues.push(format!(
                "threshold of {p} at round {t} counted only {} senders",
                senders.len()
            ));
        }
        if !senders.contains(p) {
            issues.push(format!(
                "threshold of {p} at round {t} is missing its own message"
            ));
        }
    }

    for p in ix.crashed.iter() {
        if !trace.meta.plan.faulty.contains(p) {
            issues.push(format!("non-faulty process {p} crashed"));
        }
    }
    for t in 0..=t_end {
        let a = ix.f_of(t);
        let b = ix.f_of(t + 1);
        if !a.is_subset(&b) {
            issues.push(format!("crash sets not monotone between rounds {t} and {}", t + 1));
        }
    }

    for p in 0..n {
        if ix.crashed.contains(&p) {
            continue;
        }
        match ix.decided.get(&p) {
            None => issues.push(format!("surviving process {p} never decided")),
            Some(dec) => {
                if ix.state(p, t_end) != Some(dec) {
                    issues.push(format!(
                        "decision of {p} differs from its round-{t_end} state"
                    ));
                }
                for t in 0..=t_end {
                    if ix.state(p, t).is_none() {
                        issues.push(format!("surviving process {p} has no round-{t} state"));
                    }
                }
            }
        }
    }

    StructureReport {
        pass: issues.is_empty(),
        issues,
    }
}

/// Liveness, Containment and no-fabrication of the round-0 primitive.
#[derive(Clone, Debug, Serialize)]
pub struct StableVectorReport {
    pub pass: bool,
    pub liveness: bool,
    pub containment: bool,
    pub no_fabrication: bool,
    pub issues: Vec<String>,
}

pub fn check_stable_vector(trace: &SimTrace, ix: &TraceIndex) -> StableVectorReport {
    let quorum = trace.meta.config.quorum();
    let mut issues = Vec::new();
    let mut liveness = true;
    for p in 0..trace.n() {
        if trace.meta.plan.faulty.contains(&p) {
            continue;
        }
        match ix.delivered.get(&p) {
            None => {
                liveness = false;
                issues.push(format!("fault-free process {p} got no delivery"));
            }
            Some(r) => {
                if r.len() < quorum {
                    liveness = false;
                    issues.push(format!("delivery to {p} has only {} tuples", r.len()));
                }
                let senders: BTreeSet<ProcId> = r.senders().collect();
                if senders.len() != r.len() {
                    liveness = false;
                    issues.push(format!("delivery to {p} repeats a sender"));
                }
            }
        }
    }
    let sets: Vec<_> = ix.delivered.values().collect();
    let mut containment = true;
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            if !a.is_subset_of(b) && !b.is_subset_of(a) {
                containment = false;
                issues.push(format!(
                    "deliveries to {} and {} are not chain-ordered",
                    a.owner, b.owner
                ));
            }
        }
    }
    let mut submitted: BTreeMap<ProcId, Point> = BTreeMap::new();
    for ev in &trace.events {
        if let Event::SvSubmit { proc, value } = ev {
            submitted.insert(*proc, value.clone());
        }
    }
    let mut no_fabrication = true;
    for r in ix.delivered.values() {
        for tuple in &r.tuples {
            if submitted.get(&tuple.sender) != Some(&tuple.value) {
                no_fabrication = false;
                issues.push(format!(
                    "delivery to {} contains a tuple {:?} never submitted by {}",
                    r.owner, tuple.value, tuple.sender
                ));
            }
        }
    }
    StableVectorReport {
        pass: liveness && containment && no_fabrication,
        liveness,
        containment,
        no_fabrication,
        issues,
    }
}

/// The convex hull of the correct inputs: fault-free processes' inputs in
/// the incorrect-inputs mode, everyone's in the correct-inputs mode.
pub fn correct_input_hull(trace: &SimTrace) -> Result<ConvexPolytope, GeometryError> {
    let cfg = &trace.meta.config;
    let points: Vec<Point> = trace
        .meta
        .inputs
        .iter()
        .enumerate()
        .filter(|(p, _)| {
            cfg.mode == Mode::CorrectInputs || !trace.meta.plan.faulty.contains(p)
        })
        .map(|(_, x)| x.clone())
        .collect();
    ConvexPolytope::hull(cfg.d, &points)
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidityReport {
    pub pass: bool,
    pub states_checked: usize,
    pub violations: Vec<ValidityViolation>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidityViolation {
    pub proc: ProcId,
    pub t: u32,
    pub polytope: ConvexPolytope,
}

/// Every recorded polytope (every process, every round) must be exactly
/// contained in the hull of the correct inputs.
pub fn check_validity(trace: &SimTrace, ix: &TraceIndex) -> Result<ValidityReport, VerifyError> {
    let hull = correct_input_hull(trace)?;
    let mut violations = Vec::new();
    for ((p, t), h) in &ix.states {
        if !hull.contains_polytope(h)? {
            violations.push(ValidityViolation {
                proc: *p,
                t: *t,
                polytope: h.clone(),
            });
        }
    }
    Ok(ValidityReport {
        pass: violations.is_empty(),
        states_checked: ix.states.len(),
        violations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AgreementReport {
    pub pass: bool,
    pub epsilon: Rat,
    /// Exact squared worst pairwise Hausdorff distance at decision.
    pub max_pairwise_sq: Rat,
    /// Reported distance (sqrt of the above), error below 1e-12.
    pub max_pairwise: f64,
    pub pairs_checked: usize,
}

/// Pairwise Hausdorff distance of fault-free decisions, compared against
/// epsilon on exact squares.
pub fn check_agreement(trace: &SimTrace, ix: &TraceIndex) -> Result<AgreementReport, VerifyError> {
    let eps = trace.meta.config.epsilon.clone();
    let decisions: Vec<&ConvexPolytope> = (0..trace.n())
        .filter(|p| !trace.meta.plan.faulty.contains(p))
        .filter_map(|p| ix.decided.get(&p))
        .collect();
    let mut worst = Rat::zero();
    let mut pairs = 0usize;
    for (i, a) in decisions.iter().enumerate() {
        for b in &decisions[i + 1..] {
            pairs += 1;
            worst = worst.max(hausdorff_distance_sq(a, b)?);
        }
    }
    Ok(AgreementReport {
        pass: worst < eps.sq(),
        max_pairwise: worst.sqrt_f64(),
        max_pairwise_sq: worst,
        epsilon: eps,
        pairs_checked: pairs,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundReport {
    pub pass: bool,
    /// The safe area of the values every fault-free process received in
    /// round 0; a lower bound on every polytope at every round.
    pub bound: ConvexPolytope,
    pub common_tuples: usize,
    pub singleton: bool,
    pub violations: Vec<(ProcId, u32)>,
}

/// The common-information polytope: the safe area of the values carried by
/// the intersection of all fault-free deliveries (equivalently, by the
/// Containment chain, the smallest one). The equivalence is asserted.
pub fn lower_bound_polytope(
    trace: &SimTrace,
    ix: &TraceIndex,
) -> Result<(ConvexPolytope, usize), VerifyError> {
    let cfg = &trace.meta.config;
    let fault_free: Vec<ProcId> = (0..trace.n())
        .filter(|p| !trace.meta.plan.faulty.contains(p))
        .collect();
    let sets: Vec<_> = fault_free
        .iter()
        .filter_map(|p| ix.delivered.get(p))
        .collect();
    if sets.len() != fault_free.len() {
        return Err(VerifyError::Malformed(
            "a fault-free process has no recorded delivery".into(),
        ));
    }
    let smallest = sets
        .iter()
        .min_by_key(|r| r.len())
        .expect("at least one fault-free process");
    // the chain minimum must equal the literal n-way intersection
    let literal: Vec<_> = smallest
        .tuples
        .iter()
        .filter(|t| {
            sets.iter().all(|r| {
                r.tuples
                    .iter()
                    .any(|o| o.sender == t.sender && o.value == t.value)
            })
        })
        .collect();
    if literal.len() != smallest.len() {
        return Err(VerifyError::Malformed(
            "containment chain broken: smallest delivery is not the intersection".into(),
        ));
    }
    let values: PointMultiset = smallest.values().into();
    let bound = safe_area(cfg.d, &values, cfg.f)?;
    Ok((bound, smallest.len()))
}

/// Asserts that the common-information polytope sits inside every recorded
/// state of every round, crashed processes' partial histories included.
pub fn check_lower_bound(
    trace: &SimTrace,
    ix: &TraceIndex,
) -> Result<LowerBoundReport, VerifyError> {
    let (bound, common_tuples) = lower_bound_polytope(trace, ix)?;
    if trace.meta.config.mode == Mode::IncorrectInputs && bound.is_empty() {
        return Err(VerifyError::Malformed(
            "common-information polytope is empty above the partition threshold".into(),
        ));
    }
    let mut violations = Vec::new();
    for ((p, t), h) in &ix.states {
        if !h.contains_polytope(&bound)? {
            violations.push((*p, *t));
        }
    }
    Ok(LowerBoundReport {
        pass: violations.is_empty(),
        singleton: bound.n_vertices() == 1,
        common_tuples,
        bound,
        violations,
    })
}

/// The full verdict for one trace: structural checks, the round-0 primitive
/// properties, validity, agreement, the matrix reconstruction, the
/// contraction bounds, and the lower-bound containment.
#[derive(Clone, Debug, Serialize)]
pub struct VerdictReport {
    pub pass: bool,
    pub structure: StructureReport,
    pub stable_vector: StableVectorReport,
    pub validity: ValidityReport,
    pub agreement: AgreementReport,
    pub reconstruction: ReconstructionReport,
    pub decay: DecayReport,
    pub lower_bound: LowerBoundReport,
}

pub fn verify_trace(trace: &SimTrace) -> Result<VerdictReport, VerifyError> {
    let ix = trace.index();
    let structure = check_structure(trace, &ix);
    let stable_vector = check_stable_vector(trace, &ix);
    let validity = check_validity(trace, &ix)?;
    let agreement = check_agreement(trace, &ix)?;
    let reconstruction = matrix_oracle::check_reconstruction(trace, &ix)?;
    let decay = matrix_oracle::check_decay(trace, &ix)?;
    let lower_bound = check_lower_bound(trace, &ix)?;
    Ok(VerdictReport {
        pass: structure.pass
            && stable_vector.pass
            && validity.pass
            && agreement.pass
            && reconstruction.pass
            && decay.pass
            && lower_bound.pass,
        structure,
        stable_vector,
        validity,
        agreement,
        reconstruction,
        decay,
        lower_bound,
    })
}

/// Verdict of the slow-adversary scenario: with `f` processes starved, the
/// others must decide without hearing from them, and every decision must
/// still contain the common-information polytope.
#[derive(Clone, Debug, Serialize)]
pub struct OptimalityScenarioReport {
    pub pass: bool,
    pub verdict: VerdictReport,
    /// No message or tuple from the slow set reached another process before
    /// it decided.
    pub isolated_before_decision: bool,
    pub bound_is_singleton: bool,
    pub issues: Vec<String>,
}

/// Runs a slow-set execution and checks its guarantees. The scenario either
/// comes from [`crate::presets::degenerate_corner_scenario`] (where the
/// bound must be a single point) or from
/// [`crate::presets::slow_set_scenario`].
pub fn check_optimality_scenario(
    cfg: &crate::protocol::Config,
    inputs: &[Point],
    plan: &FaultPlan,
    policy: &SchedulerPolicy,
    expect_singleton: bool,
) -> Result<OptimalityScenarioReport, VerifyError> {
    let slow: BTreeSet<ProcId> = match policy {
        SchedulerPolicy::SlowSet { set, .. } => set.clone(),
        _ => BTreeSet::new(),
    };
    let trace = sim::run(cfg, inputs, plan, policy)?;
    let ix = trace.index();
    let verdict = verify_trace(&trace)?;
    let mut issues = Vec::new();

    let mut decided: BTreeSet<ProcId> = BTreeSet::new();
    let mut isolated = true;
    for ev in &trace.events {
        match ev {
            Event::Deliver { from, to, .. }
                if slow.contains(from) && !slow.contains(to) && !decided.contains(to) =>
            {
                isolated = false;
                issues.push(format!(
                    "process {to} heard from slow process {from} before deciding"
                ));
            }
            Event::Decide { proc, .. } => {
                decided.insert(*proc);
            }
            _ => {}
        }
    }
    for (p, r) in &ix.delivered {
        if !slow.contains(p) && r.senders().any(|s| slow.contains(&s)) {
            isolated = false;
            issues.push(format!("delivery to {p} contains a slow process's tuple"));
        }
    }

    let singleton = verdict.lower_bound.singleton;
    if expect_singleton && !singleton {
        issues.push(format!(
            "expected a single-point bound, got {:?}",
            verdict.lower_bound.bound
        ));
    }
    Ok(OptimalityScenarioReport {
        pass: verdict.pass && isolated && (!expect_singleton || singleton),
        verdict,
        isolated_before_decision: isolated,
        bound_is_singleton: singleton,
        issues,
    })
}
