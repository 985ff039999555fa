//! Exhaustive search for Tverberg partitions at desk scale.

use super::{intersect_pair, ConvexPolytope, GeometryError, Point, PointMultiset};

/// A partition of a point multiset into non-empty parts whose convex hulls
/// share at least one point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TverbergWitness {
    pub parts: Vec<PointMultiset>,
    /// A point common to all part hulls (the lexicographically smallest
    /// vertex of their intersection, for determinism).
    pub witness: Point,
}

/// Searches for a partition of `t_set` into `f + 1` non-empty sub-multisets
/// with intersecting hulls, by exhaustive enumeration of set partitions in
/// restricted-growth-string order (first hit wins, so the result is
/// deterministic).
///
/// Tverberg's theorem guarantees a witness whenever
/// `|T| >= (d+1)f + 1`; below that threshold `None` is possible.
pub fn tverberg_witness(
    dim: usize,
    t_set: &PointMultiset,
    f: usize,
) -> Result<Option<TverbergWitness>, GeometryError> {
    t_set.check_dim(dim)?;
    let parts_wanted = f + 1;
    let n = t_set.len();
    if n < parts_wanted {
        return Ok(None);
    }
    let mut assignment = vec![0usize; n];
    let mut found: Option<TverbergWitness> = None;
    enumerate_partitions(n, parts_wanted, &mut assignment, 1, 0, &mut |assign| {
        let mut parts: Vec<Vec<Point>> = vec![Vec::new(); parts_wanted];
        for (idx, &part) in assign.iter().enumerate() {
            parts[part].push(t_set.points()[idx].clone());
        }
        let mut inter: Option<ConvexPolytope> = None;
        for part in &parts {
            let hull = ConvexPolytope::hull(dim, part)?;
            inter = Some(match inter {
                None => hull,
                Some(cur) => intersect_pair(&cur, &hull)?,
            });
            if inter.as_ref().unwrap().is_empty() {
                return Ok(false);
            }
        }
        let inter = inter.unwrap();
        let witness = inter.vertices()[0].clone();
        found = Some(TverbergWitness {
            parts: parts.into_iter().map(PointMultiset::new).collect(),
            witness,
        });
        Ok(true)
    })?;
    Ok(found)
}

/// Visits every partition of `0..n` into exactly `k` non-empty unlabeled
/// blocks via restricted growth strings. The visitor returns `Ok(true)` to
/// stop early.
fn enumerate_partitions<E>(
    n: usize,
    k: usize,
    assignment: &mut Vec<usize>,
    pos: usize,
    max_used: usize,
    visit: &mut impl FnMut(&[usize]) -> Result<bool, E>,
) -> Result<bool, E> {
    if pos == n {
        return if max_used + 1 == k {
            visit(assignment)
        } else {
            Ok(false)
        };
    }
    // prune: remaining positions must be able to open the missing blocks
    let remaining = n - pos;
    let missing = k.saturating_sub(max_used + 1);
    if missing > remaining {
        return Ok(false);
    }
    let cap = (max_used + 1).min(k - 1);
    for part in 0..=cap {
        assignment[pos] = part;
        let new_max = max_used.max(part);
        if enumerate_partitions(n, k, assignment, pos + 1, new_max, visit)? {
            return Ok(true);
        }
    }
    Ok(false)
}
