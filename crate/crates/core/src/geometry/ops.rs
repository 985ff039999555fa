//! Operations on convex polytopes: intersection, safe area, linear
//! combination, Hausdorff distance.

use itertools::Itertools;

use super::{cross_sign, vec_cross_sign, ConvexPolytope, GeometryError, Point, PointMultiset};
use crate::rat::Rat;

/// Absolute error bound of the `f64` Hausdorff distance report. All
/// accept/reject comparisons are done on exact squared distances instead.
pub const HAUSDORFF_ABS_ERROR: f64 = 1e-12;

/// Exact intersection of two convex polytopes of equal dimension.
pub fn intersect_pair(
    a: &ConvexPolytope,
    b: &ConvexPolytope,
) -> Result<ConvexPolytope, GeometryError> {
    let dim = a.dim();
    if b.dim() != dim {
        return Err(GeometryError::DimensionMismatch {
            expected: dim,
            got: b.dim(),
        });
    }
    if a.is_empty() || b.is_empty() {
        return Ok(ConvexPolytope::empty(dim));
    }
    match dim {
        1 => {
            let (alo, ahi) = a.interval().unwrap();
            let (blo, bhi) = b.interval().unwrap();
            let lo = alo.max(blo).clone();
            let hi = ahi.min(bhi).clone();
            if lo > hi {
                Ok(ConvexPolytope::empty(1))
            } else {
                ConvexPolytope::hull(1, &[Point::new(vec![lo]), Point::new(vec![hi])])
            }
        }
        2 => {
            // Candidate vertices of the intersection: vertices of one polytope
            // inside the other, plus all boundary crossing points.
            let mut cand: Vec<Point> = Vec::new();
            for v in a.vertices() {
                if b.contains_point(v)? {
                    cand.push(v.clone());
                }
            }
            for v in b.vertices() {
                if a.contains_point(v)? {
                    cand.push(v.clone());
                }
            }
            for (a1, a2) in a.edges() {
                for (b1, b2) in b.edges() {
                    if let Some(p) = seg_seg_intersection(&a1, &a2, &b1, &b2) {
                        cand.push(p);
                    }
                }
            }
            ConvexPolytope::hull(2, &cand)
        }
        d => Err(GeometryError::UnsupportedDimension(d)),
    }
}

/// Exact intersection of a non-empty sequence of convex polytopes.
pub fn intersect(hs: &[ConvexPolytope]) -> Result<ConvexPolytope, GeometryError> {
    let first = hs.first().ok_or(GeometryError::EmptySequence)?;
    let mut acc = first.clone();
    for h in &hs[1..] {
        acc = intersect_pair(&acc, h)?;
        if acc.is_empty() {
            return Ok(ConvexPolytope::empty(first.dim()));
        }
    }
    Ok(acc)
}

/// Intersection point of closed segments `[a1,a2]` and `[b1,b2]`, when the
/// segments are not parallel. Endpoint touching counts. Parallel overlaps
/// return `None`; their contribution is covered by vertex containment.
fn seg_seg_intersection(a1: &Point, a2: &Point, b1: &Point, b2: &Point) -> Option<Point> {
    let da = a2.sub(a1);
    let db = b2.sub(b1);
    let denom = da.coord(0) * db.coord(1) - da.coord(1) * db.coord(0);
    if denom.is_zero() {
        return None;
    }
    let diff = b1.sub(a1);
    let s = (diff.coord(0) * db.coord(1) - diff.coord(1) * db.coord(0)) / &denom;
    let t = (diff.coord(0) * da.coord(1) - diff.coord(1) * da.coord(0)) / &denom;
    let one = Rat::one();
    if s.is_negative() || s > one || t.is_negative() || t > one {
        return None;
    }
    Some(a1.add(&da.scale(&s)))
}

/// Intersection of the convex hulls of all sub-multisets of `x` of size
/// `|x| - f`. Requires `|x| > f`. Non-empty whenever `|x| >= (d+1)f + 1`.
pub fn safe_area(
    dim: usize,
    x: &PointMultiset,
    f: usize,
) -> Result<ConvexPolytope, GeometryError> {
    if x.len() <= f {
        return Err(GeometryError::TooFewPoints {
            points: x.len(),
            fault_budget: f,
        });
    }
    x.check_dim(dim)?;
    let keep = x.len() - f;
    let mut acc: Option<ConvexPolytope> = None;
    for combo in (0..x.len()).combinations(keep) {
        let subset: Vec<Point> = combo.iter().map(|&i| x.points()[i].clone()).collect();
        let hull = ConvexPolytope::hull(dim, &subset)?;
        acc = Some(match acc {
            None => hull,
            Some(cur) => intersect_pair(&cur, &hull)?,
        });
        if acc.as_ref().unwrap().is_empty() {
            return Ok(ConvexPolytope::empty(dim));
        }
    }
    Ok(acc.unwrap())
}

/// Exact Minkowski sum of two convex polytopes.
pub fn minkowski_sum(
    a: &ConvexPolytope,
    b: &ConvexPolytope,
) -> Result<ConvexPolytope, GeometryError> {
    let dim = a.dim();
    if b.dim() != dim {
        return Err(GeometryError::DimensionMismatch {
            expected: dim,
            got: b.dim(),
        });
    }
    if a.is_empty() || b.is_empty() {
        return Ok(ConvexPolytope::empty(dim));
    }
    weighted_sum(&[(a, Rat::one()), (b, Rat::one())])
}

/// `sum_i w_i h_i` for positive weights over non-empty polytopes of a common
/// dimension: the workhorse behind [`linear_combination`].
///
/// For d = 2 this merges *all* operands' scaled edge vectors by direction in
/// one pass, the standard Minkowski-sum construction generalized to k
/// summands; degenerate operands contribute 0 or 2 edges. One pass keeps the
/// big-rational sorting work linear in the total edge count instead of
/// re-sorting intermediate results per pairwise sum.
fn weighted_sum(operands: &[(&ConvexPolytope, Rat)]) -> Result<ConvexPolytope, GeometryError> {
    let dim = operands[0].0.dim();
    if dim == 1 {
        let mut lo = Rat::zero();
        let mut hi = Rat::zero();
        for (h, w) in operands {
            let (hlo, hhi) = h.interval().unwrap();
            lo = lo + hlo * w;
            hi = hi + hhi * w;
        }
        return ConvexPolytope::hull(1, &[Point::new(vec![lo]), Point::new(vec![hi])]);
    }
    let mut start = Point::origin(dim);
    let mut edges: Vec<Point> = Vec::new();
    for (h, w) in operands {
        let (s, es) = directed_cycle(h);
        start = start.add(&s.scale(w));
        edges.extend(es.into_iter().map(|e| e.scale(w)));
    }
    if edges.is_empty() {
        return Ok(ConvexPolytope::point(start));
    }
    edges.sort_by(angle_cmp);
    // coalesce equal directions
    let mut merged: Vec<Point> = Vec::with_capacity(edges.len());
    for e in edges {
        match merged.last_mut() {
            Some(last) if angle_cmp(last, &e) == std::cmp::Ordering::Equal => {
                *last = last.add(&e);
            }
            _ => merged.push(e),
        }
    }
    let mut verts = Vec::with_capacity(merged.len());
    let mut cur = start;
    for e in &merged {
        verts.push(cur.clone());
        cur = cur.add(e);
    }
    ConvexPolytope::hull(2, &verts)
}

/// CCW edge-vector cycle starting at the bottom-most (then leftmost) vertex.
/// Points have no edges; segments yield the two opposite directed edges.
fn directed_cycle(h: &ConvexPolytope) -> (Point, Vec<Point>) {
    let by_yx = |p: &Point, q: &Point| (p.coord(1), p.coord(0)).cmp(&(q.coord(1), q.coord(0)));
    if h.n_vertices() == 1 {
        return (h.vertices()[0].clone(), vec![]);
    }
    if h.n_vertices() == 2 {
        let (a, b) = (&h.vertices()[0], &h.vertices()[1]);
        let (lo, hi) = if by_yx(a, b) == std::cmp::Ordering::Less {
            (a, b)
        } else {
            (b, a)
        };
        return (lo.clone(), vec![hi.sub(lo), lo.sub(hi)]);
    }
    let cyc = h.cyclic_ccw();
    let k = cyc.len();
    let start = (0..k)
        .min_by(|&p, &q| by_yx(&cyc[p], &cyc[q]))
        .unwrap();
    let edges = (0..k)
        .map(|i| {
            let a = &cyc[(start + i) % k];
            let b = &cyc[(start + i + 1) % k];
            b.sub(a)
        })
        .collect();
    (cyc[start].clone(), edges)
}

/// Order of edge directions counterclockwise from the positive x-axis.
/// Equal means identical direction (opposite directions always fall in
/// different half-classes).
fn angle_cmp(u: &Point, v: &Point) -> std::cmp::Ordering {
    let class = |w: &Point| -> u8 {
        if w.coord(1).is_positive() || (w.coord(1).is_zero() && w.coord(0).is_positive()) {
            0
        } else {
            1
        }
    };
    class(u).cmp(&class(v)).then_with(|| match vec_cross_sign(u, v) {
        std::cmp::Ordering::Greater => std::cmp::Ordering::Less,
        std::cmp::Ordering::Less => std::cmp::Ordering::Greater,
        std::cmp::Ordering::Equal => std::cmp::Ordering::Equal,
    })
}

/// Linear combination of non-empty convex polytopes with non-negative
/// weights summing to one: the set of all weighted sums picking one point
/// per operand. Computed as a chain of scaled Minkowski sums.
pub fn linear_combination(
    hs: &[ConvexPolytope],
    ws: &[Rat],
) -> Result<ConvexPolytope, GeometryError> {
    if hs.is_empty() {
        return Err(GeometryError::EmptySequence);
    }
    if hs.len() != ws.len() {
        return Err(GeometryError::InvalidWeights(format!(
            "{} polytopes but {} weights",
            hs.len(),
            ws.len()
        )));
    }
    let dim = hs[0].dim();
    for h in hs {
        if h.dim() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: h.dim(),
            });
        }
        if h.is_empty() {
            return Err(GeometryError::EmptyOperand);
        }
    }
    if ws.iter().any(Rat::is_negative) {
        return Err(GeometryError::InvalidWeights("negative weight".into()));
    }
    let total: Rat = ws.iter().cloned().sum();
    if total != Rat::one() {
        return Err(GeometryError::InvalidWeights(format!(
            "weights sum to {total}, expected 1"
        )));
    }
    // Zero-weight operands contribute the single point 0 to the sum and can
    // be dropped without changing the result.
    let operands: Vec<(&ConvexPolytope, Rat)> = hs
        .iter()
        .zip(ws)
        .filter(|(_, w)| !w.is_zero())
        .map(|(h, w)| (h, w.clone()))
        .collect();
    weighted_sum(&operands)
}

/// Exact squared Euclidean distance from a point to a non-empty polytope.
pub fn point_polytope_dist_sq(p: &Point, h: &ConvexPolytope) -> Result<Rat, GeometryError> {
    if h.is_empty() {
        return Err(GeometryError::EmptyOperand);
    }
    if p.dim() != h.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: h.dim(),
            got: p.dim(),
        });
    }
    Ok(dist_sq_with_edges(p, h, &h.edges()))
}

/// Distance helper taking the precomputed edge list, so callers testing many
/// points against one polytope derive its boundary cycle only once.
fn dist_sq_with_edges(p: &Point, h: &ConvexPolytope, edges: &[(Point, Point)]) -> Rat {
    if h.dim() == 1 {
        let (lo, hi) = h.interval().unwrap();
        return if p.coord(0) < lo {
            (lo - p.coord(0)).sq()
        } else if p.coord(0) > hi {
            (p.coord(0) - hi).sq()
        } else {
            Rat::zero()
        };
    }
    match h.n_vertices() {
        1 => p.dist_sq(&h.vertices()[0]),
        2 => {
            if h.contains_point(p).unwrap_or(false) {
                Rat::zero()
            } else {
                let (a, b) = &edges[0];
                point_segment_dist_sq(p, a, b)
            }
        }
        _ => {
            // inside iff left of (or on) every directed boundary edge
            let inside = edges
                .iter()
                .all(|(a, b)| cross_sign(a, b, p) != std::cmp::Ordering::Less);
            if inside {
                Rat::zero()
            } else {
                edges
                    .iter()
                    .map(|(a, b)| point_segment_dist_sq(p, a, b))
                    .min()
                    .unwrap()
            }
        }
    }
}

fn point_segment_dist_sq(p: &Point, a: &Point, b: &Point) -> Rat {
    let d = b.sub(a);
    let len_sq = d.dot(&d);
    let t = p.sub(a).dot(&d);
    let t = if t.is_negative() {
        Rat::zero()
    } else if t > len_sq {
        Rat::one()
    } else {
        t / &len_sq
    };
    p.dist_sq(&a.add(&d.scale(&t)))
}

/// Exact squared Hausdorff distance between two non-empty convex polytopes.
///
/// Point-to-set distance is convex in the point, so the outer max is
/// attained at a vertex; both directed maxima are exact rationals.
pub fn hausdorff_distance_sq(
    h1: &ConvexPolytope,
    h2: &ConvexPolytope,
) -> Result<Rat, GeometryError> {
    if h1.is_empty() || h2.is_empty() {
        return Err(GeometryError::EmptyOperand);
    }
    if h1.dim() != h2.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: h1.dim(),
            got: h2.dim(),
        });
    }
    let e1 = h1.edges();
    let e2 = h2.edges();
    let mut worst = Rat::zero();
    for v in h1.vertices() {
        worst = worst.max(dist_sq_with_edges(v, h2, &e2));
    }
    for v in h2.vertices() {
        worst = worst.max(dist_sq_with_edges(v, h1, &e1));
    }
    Ok(worst)
}

/// Hausdorff distance as `f64`, absolute error below [`HAUSDORFF_ABS_ERROR`].
pub fn hausdorff_distance(
    h1: &ConvexPolytope,
    h2: &ConvexPolytope,
) -> Result<f64, GeometryError> {
    Ok(hausdorff_distance_sq(h1, h2)?.sqrt_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt1(x: i64) -> Point {
        Point::from_ints(&[x])
    }

    fn pt2(x: i64, y: i64) -> Point {
        Point::from_ints(&[x, y])
    }

    fn seg(a: i64, b: i64) -> ConvexPolytope {
        ConvexPolytope::hull(1, &[pt1(a), pt1(b)]).unwrap()
    }

    #[test]
    fn interval_intersection() {
        let h = intersect_pair(&seg(0, 2), &seg(1, 3)).unwrap();
        assert_eq!(h, seg(1, 2));
        let h = intersect_pair(&seg(0, 1), &seg(2, 3)).unwrap();
        assert!(h.is_empty());
        let a = seg(0, 2);
        assert_eq!(intersect_pair(&a, &a).unwrap(), a);
    }

    #[test]
    fn polygon_intersection_basic() {
        let sq1 = ConvexPolytope::hull(2, &[pt2(0, 0), pt2(2, 0), pt2(2, 2), pt2(0, 2)]).unwrap();
        let sq2 = ConvexPolytope::hull(2, &[pt2(1, 1), pt2(3, 1), pt2(3, 3), pt2(1, 3)]).unwrap();
        let inter = intersect_pair(&sq1, &sq2).unwrap();
        let expect =
            ConvexPolytope::hull(2, &[pt2(1, 1), pt2(2, 1), pt2(2, 2), pt2(1, 2)]).unwrap();
        assert_eq!(inter, expect);
    }

    #[test]
    fn polygon_intersection_degenerate() {
        // triangles sharing part of an edge -> a segment
        let p = ConvexPolytope::hull(2, &[pt2(0, 0), pt2(4, 0), pt2(2, 2)]).unwrap();
        let q = ConvexPolytope::hull(2, &[pt2(1, 0), pt2(3, 0), pt2(2, -2)]).unwrap();
        let inter = intersect_pair(&p, &q).unwrap();
        assert_eq!(
            inter,
            ConvexPolytope::hull(2, &[pt2(1, 0), pt2(3, 0)]).unwrap()
        );

        // touching at a single vertex
        let r = ConvexPolytope::hull(2, &[pt2(4, 0), pt2(6, 0), pt2(5, 1)]).unwrap();
        let inter = intersect_pair(&p, &r).unwrap();
        assert_eq!(inter, ConvexPolytope::point(pt2(4, 0)));

        // disjoint
        let s = ConvexPolytope::hull(2, &[pt2(10, 10), pt2(11, 10), pt2(10, 11)]).unwrap();
        assert!(intersect_pair(&p, &s).unwrap().is_empty());
    }

    #[test]
    fn intersect_sequence() {
        let hs = vec![seg(0, 10), seg(2, 8), seg(4, 6)];
        assert_eq!(intersect(&hs).unwrap(), seg(4, 6));
        assert!(matches!(intersect(&[]), Err(GeometryError::EmptySequence)));
    }

    #[test]
    fn safe_area_examples() {
        // X = {0,1,2,3}, f = 1 -> [1,2]
        let x = PointMultiset::new(vec![pt1(0), pt1(1), pt1(2), pt1(3)]);
        assert_eq!(safe_area(1, &x, 1).unwrap(), seg(1, 2));

        // f = 0 -> plain hull
        let h = safe_area(1, &x, 0).unwrap();
        assert_eq!(h, seg(0, 3));

        // multiset semantics: {0,0,1,1}, f = 1 -> [0,1]
        let x = PointMultiset::new(vec![pt1(0), pt1(0), pt1(1), pt1(1)]);
        assert_eq!(safe_area(1, &x, 1).unwrap(), seg(0, 1));

        // |X| <= f rejected
        let x = PointMultiset::new(vec![pt1(0)]);
        assert!(matches!(
            safe_area(1, &x, 1),
            Err(GeometryError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn linear_combination_examples() {
        // L([[0,1],[2,4]]; [1/2,1/2]) = [1, 5/2]
        let l = linear_combination(
            &[seg(0, 1), seg(2, 4)],
            &[Rat::ratio(1, 2), Rat::ratio(1, 2)],
        )
        .unwrap();
        let expect = ConvexPolytope::hull(
            1,
            &[pt1(1), Point::new(vec![Rat::ratio(5, 2)])],
        )
        .unwrap();
        assert_eq!(l, expect);

        // identity
        let h = seg(3, 7);
        assert_eq!(linear_combination(&[h.clone()], &[Rat::one()]).unwrap(), h);

        // triangle/point example: 1/2 * tri{(0,0),(1,0),(0,1)} + 1/2 * {(1,1)}
        let tri = ConvexPolytope::hull(2, &[pt2(0, 0), pt2(1, 0), pt2(0, 1)]).unwrap();
        let p = ConvexPolytope::point(pt2(1, 1));
        let l = linear_combination(&[tri, p], &[Rat::ratio(1, 2), Rat::ratio(1, 2)]).unwrap();
        let half = |a: i64, b: i64| Point::new(vec![Rat::ratio(a, 2), Rat::ratio(b, 2)]);
        let expect = ConvexPolytope::hull(2, &[half(1, 1), half(2, 1), half(1, 2)]).unwrap();
        assert_eq!(l, expect);
    }

    #[test]
    fn linear_combination_validation() {
        let h = seg(0, 1);
        assert!(matches!(
            linear_combination(&[h.clone(), ConvexPolytope::empty(1)], &[Rat::one(), Rat::zero()]),
            Err(GeometryError::EmptyOperand)
        ));
        assert!(matches!(
            linear_combination(&[h.clone()], &[Rat::ratio(1, 2)]),
            Err(GeometryError::InvalidWeights(_))
        ));
        assert!(matches!(
            linear_combination(&[h.clone(), h.clone()], &[Rat::ratio(3, 2), -Rat::ratio(1, 2)]),
            Err(GeometryError::InvalidWeights(_))
        ));
        // zero-weight operands are dropped, not an error
        let l = linear_combination(&[h.clone(), seg(5, 9)], &[Rat::one(), Rat::zero()]).unwrap();
        assert_eq!(l, h);
    }

    #[test]
    fn minkowski_squares() {
        let sq = ConvexPolytope::hull(2, &[pt2(0, 0), pt2(1, 0), pt2(1, 1), pt2(0, 1)]).unwrap();
        let sum = minkowski_sum(&sq, &sq).unwrap();
        let expect =
            ConvexPolytope::hull(2, &[pt2(0, 0), pt2(2, 0), pt2(2, 2), pt2(0, 2)]).unwrap();
        assert_eq!(sum, expect);
    }

    #[test]
    fn minkowski_segments() {
        let s1 = ConvexPolytope::hull(2, &[pt2(0, 0), pt2(1, 0)]).unwrap();
        let s2 = ConvexPolytope::hull(2, &[pt2(0, 0), pt2(0, 1)]).unwrap();
        let sum = minkowski_sum(&s1, &s2).unwrap();
        let expect =
            ConvexPolytope::hull(2, &[pt2(0, 0), pt2(1, 0), pt2(1, 1), pt2(0, 1)]).unwrap();
        assert_eq!(sum, expect);

        // parallel segments stay a segment
        let s3 = ConvexPolytope::hull(2, &[pt2(0, 0), pt2(2, 0)]).unwrap();
        let sum = minkowski_sum(&s1, &s3).unwrap();
        assert_eq!(sum, ConvexPolytope::hull(2, &[pt2(0, 0), pt2(3, 0)]).unwrap());
    }

    #[test]
    fn hausdorff_examples() {
        let a = seg(0, 2);
        assert_eq!(hausdorff_distance_sq(&a, &a).unwrap(), Rat::zero());
        let b = seg(1, 3);
        assert_eq!(hausdorff_distance_sq(&a, &b).unwrap(), Rat::one());

        let sq = ConvexPolytope::hull(2, &[pt2(0, 0), pt2(1, 0), pt2(1, 1), pt2(0, 1)]).unwrap();
        let origin = ConvexPolytope::point(pt2(0, 0));
        assert_eq!(
            hausdorff_distance_sq(&sq, &origin).unwrap(),
            Rat::from_int(2)
        );
        let d = hausdorff_distance(&sq, &origin).unwrap();
        assert!((d - std::f64::consts::SQRT_2).abs() < HAUSDORFF_ABS_ERROR);
    }

    #[test]
    fn dist_to_polytope() {
        let tri = ConvexPolytope::hull(2, &[pt2(0, 0), pt2(2, 0), pt2(0, 2)]).unwrap();
        assert_eq!(point_polytope_dist_sq(&pt2(1, 0), &tri).unwrap(), Rat::zero());
        assert_eq!(
            point_polytope_dist_sq(&pt2(-1, 0), &tri).unwrap(),
            Rat::one()
        );
        assert_eq!(
            point_polytope_dist_sq(&pt2(2, 2), &tri).unwrap(),
            Rat::from_int(2)
        );
    }
}
