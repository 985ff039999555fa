//! Two-step convex function optimization over decided polytopes.
//!
//! Step 1 is the consensus run itself; step 2 minimizes a convex cost over
//! each process's decided polytope. The supported cost families (linear,
//! diagonal quadratic, max-of-affine) all admit exact rational minimization
//! at d <= 2 by candidate-point enumeration, so the optimizer introduces no
//! numerical slack of its own; `delta_opt` is carried as the documented
//! slack term of the value-agreement bound.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{ConvexPolytope, GeometryError, Point};
use crate::rat::Rat;
use crate::sim::{ProcId, SimTrace, TraceIndex};

#[derive(Debug, thiserror::Error)]
pub enum OptError {
    #[error("cost function is invalid: {0}")]
    BadCost(String),
    #[error("cannot minimize over an empty polytope")]
    EmptyPolytope,
    #[error("process {0} has no decision in the trace")]
    NoDecision(ProcId),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One affine piece `coeffs . x + offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub coeffs: Vec<Rat>,
    pub offset: Rat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CostKind {
    /// `coeffs . x`
    Linear { coeffs: Vec<Rat> },
    /// `sum_l weights_l (x_l - center_l)^2`, weights non-negative.
    Quadratic { center: Vec<Rat>, weights: Vec<Rat> },
    /// `max_k (pieces_k . x + offset_k)`: a convex function tabulated as its
    /// affine supports.
    MaxAffine { pieces: Vec<AffinePiece> },
}

/// A convex cost with a declared Lipschitz constant on the input box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    #[serde(flatten)]
    pub kind: CostKind,
    /// Declared bound B with |c(x) - c(y)| <= B d_E(x, y) on the domain.
    pub lipschitz: Rat,
}

impl CostFunction {
    pub fn eval(&self, p: &Point) -> Rat {
        match &self.kind {
            CostKind::Linear { coeffs } => coeffs
                .iter()
                .zip(p.coords())
                .map(|(c, x)| c * x)
                .sum(),
            CostKind::Quadratic { center, weights } => center
                .iter()
                .zip(weights)
                .zip(p.coords())
                .map(|((c, w), x)| w * (x - c).sq())
                .sum(),
            CostKind::MaxAffine { pieces } => pieces
                .iter()
                .map(|piece| {
                    piece
                        .coeffs
                        .iter()
                        .zip(p.coords())
                        .map(|(a, x)| a * x)
                        .sum::<Rat>()
                        + &piece.offset
                })
                .max()
                .expect("at least one piece"),
        }
    }

    fn dim(&self) -> Result<usize, OptError> {
        match &self.kind {
            CostKind::Linear { coeffs } => Ok(coeffs.len()),
            CostKind::Quadratic { center, weights } => {
                if center.len() != weights.len() {
                    return Err(OptError::BadCost(
                        "quadratic center and weights differ in length".into(),
                    ));
                }
                Ok(center.len())
            }
            CostKind::MaxAffine { pieces } => {
                let d = pieces
                    .first()
                    .ok_or_else(|| OptError::BadCost("max-affine needs pieces".into()))?
                    .coeffs
                    .len();
                if pieces.iter().any(|p| p.coeffs.len() != d) {
                    return Err(OptError::BadCost(
                        "max-affine pieces differ in dimension".into(),
                    ));
                }
                Ok(d)
            }
        }
    }

    /// Checks dimensions, convexity requirements, and that the declared
    /// Lipschitz constant really dominates the gradient on the box
    /// (exact sufficient condition, no sampling).
    pub fn validate(&self, d: usize, mu: &Rat, u: &Rat) -> Result<(), OptError> {
        if self.dim()? != d {
            return Err(OptError::BadCost(format!(
                "cost has dimension {}, trace has {d}",
                self.dim()?
            )));
        }
        if self.lipschitz.is_negative() {
            return Err(OptError::BadCost("negative Lipschitz constant".into()));
        }
        let b_sq = self.lipschitz.sq();
        let ok = match &self.kind {
            CostKind::Linear { coeffs } => {
                b_sq >= coeffs.iter().map(Rat::sq).sum()
            }
            CostKind::Quadratic { center, weights } => {
                if weights.iter().any(Rat::is_negative) {
                    return Err(OptError::BadCost(
                        "quadratic weights must be non-negative".into(),
                    ));
                }
                // |grad_l| <= 2 w_l max(|mu - c_l|, |U - c_l|) on the box
                let grad_sq: Rat = center
                    .iter()
                    .zip(weights)
                    .map(|(c, w)| {
                        let reach = (mu - c).abs().max((u - c).abs());
                        (Rat::from_int(2) * w * reach).sq()
                    })
                    .sum();
                b_sq >= grad_sq
            }
            CostKind::MaxAffine { pieces } => pieces
                .iter()
                .all(|p| b_sq >= p.coeffs.iter().map(Rat::sq).sum()),
        };
        if !ok {
            return Err(OptError::BadCost(
                "declared Lipschitz constant is below the gradient bound".into(),
            ));
        }
        Ok(())
    }
}

/// Exact minimizer of the cost over a non-empty polytope. Returns a point of
/// the polytope achieving the minimum value; among minimizing candidates the
/// lexicographically smallest point wins, so results are deterministic.
pub fn minimize_over_polytope(
    cost: &CostFunction,
    h: &ConvexPolytope,
    _delta_opt: &Rat,
) -> Result<(Point, Rat), OptError> {
    if h.is_empty() {
        return Err(OptError::EmptyPolytope);
    }
    let mut candidates: Vec<Point> = h.vertices().to_vec();
    match &cost.kind {
        CostKind::Linear { .. } => {} // linear attains its minimum at a vertex
        CostKind::Quadratic { center, weights } => {
            let center_pt = Point::new(center.clone());
            if h.contains_point(&center_pt)? {
                candidates.push(center_pt.clone());
            }
            // per-edge critical point of the restricted 1-d quadratic
            for (a, b) in h.edges() {
                let dvec = b.sub(&a);
                let denom: Rat = dvec
                    .coords()
                    .iter()
                    .zip(weights)
                    .map(|(dl, w)| w * dl.sq())
                    .sum();
                if denom.is_zero() {
                    continue; // flat along this edge
                }
                let numer: Rat = dvec
                    .coords()
                    .iter()
                    .zip(weights)
                    .zip(a.coords().iter().zip(center))
                    .map(|((dl, w), (al, cl))| w * dl * (cl - al))
                    .sum();
                let t = (numer / denom).max(Rat::zero()).min(Rat::one());
                candidates.push(a.add(&dvec.scale(&t)));
            }
        }
        CostKind::MaxAffine { pieces } => {
            // optima sit where piece-equality lines meet the polytope
            // boundary or each other
            let lines: Vec<(Vec<Rat>, Rat)> = pairwise_equalities(pieces);
            match h.dim() {
                1 => {
                    let (lo, hi) = h.interval().unwrap();
                    for (coef, off) in &lines {
                        if coef[0].is_zero() {
                            continue;
                        }
                        let x = -off / &coef[0];
                        if &x >= lo && &x <= hi {
                            candidates.push(Point::new(vec![x]));
                        }
                    }
                }
                2 => {
                    for (coef, off) in &lines {
                        for (a, b) in h.edges() {
                            if let Some(p) = line_segment_hit(coef, off, &a, &b) {
                                candidates.push(p);
                            }
                        }
                        for (coef2, off2) in &lines {
                            if let Some(p) = line_line_hit(coef, off, coef2, off2) {
                                if h.contains_point(&p)? {
                                    candidates.push(p);
                                }
                            }
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    let mut best: Option<(Point, Rat)> = None;
    for cand in candidates {
        let val = cost.eval(&cand);
        best = Some(match best {
            None => (cand, val),
            Some((bp, bv)) => {
                if val < bv || (val == bv && cand < bp) {
                    (cand, val)
                } else {
                    (bp, bv)
                }
            }
        });
    }
    Ok(best.expect("non-empty polytope has vertices"))
}

/// `(a_k - a_j) . x + (b_k - b_j) = 0` for every pair of pieces.
fn pairwise_equalities(pieces: &[AffinePiece]) -> Vec<(Vec<Rat>, Rat)> {
    let mut out = Vec::new();
    for (k, pk) in pieces.iter().enumerate() {
        for pj in &pieces[k + 1..] {
            let coeffs: Vec<Rat> = pk
                .coeffs
                .iter()
                .zip(&pj.coeffs)
                .map(|(a, b)| a - b)
                .collect();
            if coeffs.iter().all(Rat::is_zero) {
                continue;
            }
            out.push((coeffs, &pk.offset - &pj.offset));
        }
    }
    out
}

/// Where the line `coef . x + off = 0` crosses the closed segment `[a, b]`.
fn line_segment_hit(coef: &[Rat], off: &Rat, a: &Point, b: &Point) -> Option<Point> {
    let va: Rat = coef
        .iter()
        .zip(a.coords())
        .map(|(c, x)| c * x)
        .sum::<Rat>()
        + off;
    let vb: Rat = coef
        .iter()
        .zip(b.coords())
        .map(|(c, x)| c * x)
        .sum::<Rat>()
        + off;
    if va.is_zero() {
        return Some(a.clone());
    }
    let denom = &va - &vb;
    if denom.is_zero() {
        return None; // parallel; endpoints handled via vertices
    }
    let t = &va / &denom;
    if t.is_negative() || t > Rat::one() {
        return None;
    }
    Some(a.add(&b.sub(a).scale(&t)))
}

/// Intersection of two non-parallel lines in the plane.
fn line_line_hit(c1: &[Rat], o1: &Rat, c2: &[Rat], o2: &Rat) -> Option<Point> {
    let det = &c1[0] * &c2[1] - &c1[1] * &c2[0];
    if det.is_zero() {
        return None;
    }
    let x = (&c1[1] * o2 - &c2[1] * o1) / &det;
    let y = (&c2[0] * o1 - &c1[0] * o2) / &det;
    Some(Point::new(vec![x, y]))
}

#[derive(Clone, Debug, Serialize)]
pub struct OptOutput {
    pub point: Point,
    pub value: Rat,
}

/// Weak-optimality fixture result: when a quorum of `2f + 1` processes share
/// an input, every fault-free output must cost no more than that input.
#[derive(Clone, Debug, Serialize)]
pub struct WeakOptimality {
    pub shared_input: Point,
    pub shared_cost: Rat,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizeReport {
    pub delta_opt: Rat,
    pub lipschitz: Rat,
    pub epsilon: Rat,
    /// Per fault-free process: the minimizer and its cost.
    pub outputs: BTreeMap<ProcId, OptOutput>,
    /// Exact worst pairwise |c(y_i) - c(y_j)|.
    pub max_value_spread: Rat,
    /// The bound it must satisfy: epsilon * B + 2 * delta_opt.
    pub value_bound: Rat,
    pub values_agree: bool,
    /// Worst pairwise distance between chosen points. Reported only: the
    /// minimizers themselves may legitimately be far apart even when their
    /// costs agree.
    pub max_point_distance: f64,
    pub weak_optimality: Option<WeakOptimality>,
    pub pass: bool,
}

/// Runs step 2 over every fault-free decision in the trace and checks the
/// value-agreement bound, plus the weak-optimality condition whenever the
/// inputs contain a shared quorum value.
pub fn optimize_run(
    trace: &SimTrace,
    ix: &TraceIndex,
    cost: &CostFunction,
    delta_opt: &Rat,
) -> Result<OptimizeReport, OptError> {
    let cfg = &trace.meta.config;
    cost.validate(cfg.d, &cfg.mu, &cfg.u)?;
    let mut outputs = BTreeMap::new();
    for p in 0..cfg.n {
        if trace.meta.plan.faulty.contains(&p) {
            continue;
        }
        let h = ix.decided.get(&p).ok_or(OptError::NoDecision(p))?;
        let (point, value) = minimize_over_polytope(cost, h, delta_opt)?;
        debug_assert!(h.contains_point(&point).unwrap_or(false));
        outputs.insert(p, OptOutput { point, value });
    }
    let outs: Vec<&OptOutput> = outputs.values().collect();
    let mut max_spread = Rat::zero();
    let mut max_dist_sq = Rat::zero();
    for (i, a) in outs.iter().enumerate() {
        for b in &outs[i + 1..] {
            max_spread = max_spread.max((&a.value - &b.value).abs());
            max_dist_sq = max_dist_sq.max(a.point.dist_sq(&b.point));
        }
    }
    let value_bound =
        &cfg.epsilon * &cost.lipschitz + Rat::from_int(2) * delta_opt;
    let values_agree = max_spread <= value_bound;

    // detect a 2f+1 quorum of identical inputs (faulty or not)
    let mut counts: Vec<(Point, usize)> = Vec::new();
    for x in &trace.meta.inputs {
        match counts.iter_mut().find(|(p, _)| p == x) {
            Some((_, c)) => *c += 1,
            None => counts.push((x.clone(), 1)),
        }
    }
    let weak_optimality = counts
        .into_iter()
        .find(|(_, c)| *c >= 2 * cfg.f + 1)
        .map(|(shared, _)| {
            let shared_cost = cost.eval(&shared);
            let bound = &shared_cost + delta_opt;
            let pass = outputs.values().all(|o| o.value <= bound);
            WeakOptimality {
                shared_input: shared,
                shared_cost,
                pass,
            }
        });

    let pass = values_agree && weak_optimality.as_ref().map_or(true, |w| w.pass);
    Ok(OptimizeReport {
        delta_opt: delta_opt.clone(),
        lipschitz: cost.lipschitz.clone(),
        epsilon: cfg.epsilon.clone(),
        outputs,
        max_value_spread: max_spread,
        value_bound,
        values_agree,
        max_point_distance: max_dist_sq.sqrt_f64(),
        weak_optimality,
        pass,
    })
}
