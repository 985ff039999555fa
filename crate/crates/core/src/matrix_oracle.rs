//! Independent reconstruction of a run through row-stochastic transition
//! matrices.
//!
//! From a trace alone this module rebuilds, for every round, the matrix of
//! averaging weights each process applied, replays the state evolution as
//! matrix-vector products over polytopes, and checks that the result matches
//! the protocol's recorded states exactly. It also verifies the contraction
//! bounds that drive agreement: the coefficients of ergodicity of every
//! per-round matrix and of their running products.


use serde::Serialize;

use crate::geometry::{linear_combination, ConvexPolytope, GeometryError};
use crate::protocol::Mode;
use crate::rat::Rat;
use crate::sim::{ProcId, SimTrace, TraceIndex};

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("trace incomplete: no threshold for process {proc} at round {t}")]
    MissingThreshold { proc: ProcId, t: u32 },
    #[error("trace incomplete: no state for process {proc} at round {t}")]
    MissingState { proc: ProcId, t: u32 },
    #[error("trace has no fault-free process")]
    NoFaultFree,
    #[error("matrix is not row stochastic: {0}")]
    NotStochastic(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// An n-by-n matrix with exact rational entries, every row non-negative and
/// summing to one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StochMatrix {
    rows: Vec<Vec<Rat>>,
}

impl StochMatrix {
    pub fn new(rows: Vec<Vec<Rat>>) -> Result<Self, OracleError> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(OracleError::NotStochastic(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(Rat::is_negative) {
                return Err(OracleError::NotStochastic(format!(
                    "row {i} has a negative entry"
                )));
            }
            let sum: Rat = row.iter().cloned().sum();
            if sum != Rat::one() {
                return Err(OracleError::NotStochastic(format!(
                    "row {i} sums to {sum}"
                )));
            }
        }
        Ok(StochMatrix { rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn entry(&self, i: usize, k: usize) -> &Rat {
        &self.rows[i][k]
    }

    pub fn row(&self, i: usize) -> &[Rat] {
        &self.rows[i]
    }

    /// Standard matrix product; closure under row stochasticity holds
    /// exactly.
    pub fn mat_mul(&self, rhs: &StochMatrix) -> StochMatrix {
        let n = self.n();
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        (0..n)
                            .map(|j| self.entry(i, j) * rhs.entry(j, k))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        StochMatrix { rows }
    }
}

/// Row product over polytopes: the linear combination of the entries of `v`
/// weighted by row `i`. Zero-weight operands are dropped before combining,
/// so empty entries under zero weight never arise in practice.
pub fn row_vec(a: &StochMatrix, i: usize, v: &[ConvexPolytope]) -> Result<ConvexPolytope, GeometryError> {
    let mut hs = Vec::new();
    let mut ws = Vec::new();
    for (k, w) in a.row(i).iter().enumerate() {
        if !w.is_zero() {
            hs.push(v[k].clone());
            ws.push(w.clone());
        }
    }
    linear_combination(&hs, &ws)
}

/// Matrix-vector product over polytopes, one linear combination per row.
/// Identical rows (processes that counted the same sender set) share one
/// computation.
pub fn mat_vec(a: &StochMatrix, v: &[ConvexPolytope]) -> Result<Vec<ConvexPolytope>, GeometryError> {
    let mut first_of: std::collections::BTreeMap<&[Rat], usize> = Default::default();
    let mut out: Vec<ConvexPolytope> = Vec::with_capacity(a.n());
    for i in 0..a.n() {
        match first_of.get(a.row(i)) {
            Some(&j) => out.push(out[j].clone()),
            None => {
                first_of.insert(a.row(i), i);
                out.push(row_vec(a, i, v)?);
            }
        }
    }
    Ok(out)
}

/// Largest column-wise row disagreement, `max_k max_{i,j} |A_ik - A_jk|`.
pub fn ergodicity_delta(a: &StochMatrix) -> Rat {
    let n = a.n();
    let mut worst = Rat::zero();
    for k in 0..n {
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((a.entry(i, k) - a.entry(j, k)).abs());
            }
        }
    }
    worst
}

/// One-step contraction coefficient,
/// `1 - min_{i,j} sum_k min(A_ik, A_jk)`.
pub fn ergodicity_lambda(a: &StochMatrix) -> Rat {
    let n = a.n();
    let mut min_overlap: Option<Rat> = None;
    for i in 0..n {
        for j in (i + 1)..n {
            let overlap: Rat = (0..n)
                .map(|k| a.entry(i, k).clone().min(a.entry(j, k).clone()))
                .sum();
            min_overlap = Some(match min_overlap {
                None => overlap,
                Some(cur) => cur.min(overlap),
            });
        }
    }
    match min_overlap {
        None => Rat::zero(), // 1x1 matrix: trivially contracted
        Some(o) => Rat::one() - o,
    }
}

/// The round-`t` transition matrix of a recorded run.
///
/// Rows of processes that sent at least one round-(t+1) message weight the
/// exact sender set counted at their round-`t` threshold; rows of processes
/// that crashed before any round-(t+1) send are uniform `1/n` (their state no
/// longer influences anyone).
pub fn build_m(trace: &SimTrace, ix: &TraceIndex, t: u32) -> Result<StochMatrix, OracleError> {
    let n = trace.n();
    let f_next = ix.f_of(t + 1);
    let uniform = Rat::ratio(1, n as i64);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        if f_next.contains(&i) {
            rows.push(vec![uniform.clone(); n]);
        } else {
            let senders = ix
                .thresholds
                .get(&(i, t))
                .ok_or(OracleError::MissingThreshold { proc: i, t })?;
            let w = Rat::ratio(1, senders.len() as i64);
            let mut row = vec![Rat::zero(); n];
            for &s in senders {
                row[s] = w.clone();
            }
            rows.push(row);
        }
    }
    StochMatrix::new(rows)
}

/// Lowest-id fault-free process; the stand-in state for processes that never
/// sent a round-1 message.
fn reference_process(trace: &SimTrace) -> Result<ProcId, OracleError> {
    (0..trace.n())
        .find(|p| !trace.meta.plan.faulty.contains(p))
        .ok_or(OracleError::NoFaultFree)
}

/// Initial state vector: recorded round-0 polytopes, with rows of processes
/// in F[1] arbitrarily set to the reference process's round-0 state.
pub fn init_v0(trace: &SimTrace, ix: &TraceIndex) -> Result<Vec<ConvexPolytope>, OracleError> {
    let n = trace.n();
    let f1 = ix.f_of(1);
    let m = reference_process(trace)?;
    let h_m = ix
        .state(m, 0)
        .ok_or(OracleError::MissingState { proc: m, t: 0 })?;
    (0..n)
        .map(|i| {
            if f1.contains(&i) {
                Ok(h_m.clone())
            } else {
                ix.state(i, 0)
                    .cloned()
                    .ok_or(OracleError::MissingState { proc: i, t: 0 })
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconstructionMismatch {
    pub proc: ProcId,
    pub t: u32,
    pub protocol: ConvexPolytope,
    pub reconstructed: ConvexPolytope,
}

/// Outcome of replaying the matrix evolution against the recorded states.
#[derive(Clone, Debug, Serialize)]
pub struct ReconstructionReport {
    pub pass: bool,
    pub rounds_checked: u32,
    pub states_checked: usize,
    pub mismatches: Vec<ReconstructionMismatch>,
}

/// Recomputes every round's state vector as a matrix product and compares
/// it, vertex set by vertex set, with what the protocol recorded. Exact
/// equality is required for every process that was still sending.
pub fn check_reconstruction(
    trace: &SimTrace,
    ix: &TraceIndex,
) -> Result<ReconstructionReport, OracleError> {
    let n = trace.n();
    let t_end = trace.meta.t_end;
    let mut v = init_v0(trace, ix)?;
    let mut mismatches = Vec::new();
    let mut states_checked = 0usize;
    // tau = 0 holds by construction for processes outside F[1]
    for i in 0..n {
        if !ix.f_of(1).contains(&i) {
            states_checked += 1;
            let protocol = ix
                .state(i, 0)
                .ok_or(OracleError::MissingState { proc: i, t: 0 })?;
            if protocol != &v[i] {
                mismatches.push(ReconstructionMismatch {
                    proc: i,
                    t: 0,
                    protocol: protocol.clone(),
                    reconstructed: v[i].clone(),
                });
            }
        }
    }
    for t in 1..=t_end {
        let m = build_m(trace, ix, t)?;
        v = mat_vec(&m, &v)?;
        let f_next = ix.f_of(t + 1);
        for i in 0..n {
            if f_next.contains(&i) {
                continue;
            }
            let protocol = ix
                .state(i, t)
                .ok_or(OracleError::MissingState { proc: i, t })?;
            states_checked += 1;
            if protocol != &v[i] {
                mismatches.push(ReconstructionMismatch {
                    proc: i,
                    t,
                    protocol: protocol.clone(),
                    reconstructed: v[i].clone(),
                });
            }
        }
    }
    Ok(ReconstructionReport {
        pass: mismatches.is_empty(),
        rounds_checked: t_end,
        states_checked,
        mismatches,
    })
}

/// Contraction facts checked exactly on every round of a trace.
#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub pass: bool,
    pub rounds_checked: u32,
    /// Worst observed delta(P[t]) / (1-1/n)^t ratio, as a report margin.
    pub worst_delta_ratio: f64,
    pub violations: Vec<String>,
}

/// Verifies, for every round `t`:
/// - `lambda(M[t]) <= 1 - 1/n`;
/// - rows still sending share a column with weight >= 1/n (fault-free in
///   the incorrect-inputs mode, where the process count guarantees it);
/// - `delta(P[t]) <= prod lambda <= (1-1/n)^t` for `P[t]` the running
///   backward product;
/// - `|P_ik - P_jk| <= (1-1/n)^t` for fault-free i, j;
/// - `P_jk[t] = 0` for senders j and initially-silent k (their inputs never
///   leak into anyone's state).
pub fn check_decay(trace: &SimTrace, ix: &TraceIndex) -> Result<DecayReport, OracleError> {
    let n = trace.n();
    let t_end = trace.meta.t_end;
    let fault_free: Vec<ProcId> = (0..n)
        .filter(|p| !trace.meta.plan.faulty.contains(p))
        .collect();
    let f1 = ix.f_of(1);
    let shrink = Rat::ratio(n as i64 - 1, n as i64);
    let inv_n = Rat::ratio(1, n as i64);
    let mut violations = Vec::new();
    let mut p_mat: Option<StochMatrix> = None;
    let mut lambda_prod = Rat::one();
    let mut bound = Rat::one();
    let mut worst_ratio = 0f64;
    for t in 1..=t_end {
        let m = build_m(trace, ix, t)?;
        bound = bound * &shrink;
        let lam = ergodicity_lambda(&m);
        if lam > shrink {
            violations.push(format!("round {t}: lambda(M) = {lam} exceeds 1 - 1/n"));
        }
        lambda_prod = lambda_prod * &lam;
        let f_next = ix.f_of(t + 1);
        let senders: Vec<ProcId> = (0..n).filter(|p| !f_next.contains(p)).collect();
        for (a, &i) in senders.iter().enumerate() {
            for &j in &senders[a + 1..] {
                let common = (0..n).find(|&g| {
                    let eligible = trace.meta.config.mode == Mode::CorrectInputs
                        || !trace.meta.plan.faulty.contains(&g);
                    eligible && m.entry(i, g) >= &inv_n && m.entry(j, g) >= &inv_n
                });
                if common.is_none() {
                    violations.push(format!(
                        "round {t}: rows {i},{j} share no heavy column"
                    ));
                }
            }
        }
        let p_next = match &p_mat {
            None => m,
            Some(prev) => m.mat_mul(prev), // backward product: P[t] = M[t] P[t-1]
        };
        let delta = ergodicity_delta(&p_next);
        if delta > lambda_prod {
            violations.push(format!(
                "round {t}: delta(P) = {delta} exceeds the lambda product {lambda_prod}"
            ));
        }
        if lambda_prod > bound {
            violations.push(format!(
                "round {t}: lambda product {lambda_prod} exceeds (1-1/n)^t = {bound}"
            ));
        }
        for (a, &i) in fault_free.iter().enumerate() {
            for &j in &fault_free[a + 1..] {
                for k in 0..n {
                    let diff = (p_next.entry(i, k) - p_next.entry(j, k)).abs();
                    if diff > bound {
                        violations.push(format!(
                            "round {t}: |P_{i}{k} - P_{j}{k}| = {diff} exceeds {bound}"
                        ));
                    }
                }
            }
        }
        for &j in &senders {
            for &k in &f1 {
                if !p_next.entry(j, k).is_zero() {
                    violations.push(format!(
                        "round {t}: P_{j}{k} nonzero for initially-silent {k}"
                    ));
                }
            }
        }
        let ratio = if bound.is_zero() {
            0.0
        } else {
            (delta / &bound).to_f64()
        };
        worst_ratio = worst_ratio.max(ratio);
        p_mat = Some(p_next);
    }
    Ok(DecayReport {
        pass: violations.is_empty(),
        rounds_checked: t_end,
        worst_delta_ratio: worst_ratio,
        violations,
    })
}
