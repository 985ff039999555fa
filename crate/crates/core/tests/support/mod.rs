//! Shared helpers for the integration suites: seeded random geometry and
//! independent brute-force oracles.

use ccsim_core::geometry::{ConvexPolytope, Point};
use ccsim_core::Rat;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

pub fn rat(rng: &mut ChaCha20Rng, lo: i64, hi: i64) -> Rat {
    let denom = [1i64, 2, 4, 8][rng.random_range(0..4)];
    Rat::ratio(rng.random_range(lo * denom..=hi * denom), denom)
}

pub fn rand_point(rng: &mut ChaCha20Rng, d: usize) -> Point {
    Point::new((0..d).map(|_| rat(rng, -4, 4)).collect())
}

pub fn rand_points(rng: &mut ChaCha20Rng, d: usize, k: usize) -> Vec<Point> {
    (0..k).map(|_| rand_point(rng, d)).collect()
}

pub fn rand_polytope(rng: &mut ChaCha20Rng, d: usize) -> ConvexPolytope {
    let k = rng.random_range(1..=6);
    ConvexPolytope::hull(d, &rand_points(rng, d, k)).unwrap()
}

/// Independent membership test: p is in hull(S) iff adding p to S leaves the
/// hull unchanged. Shares no code with the half-plane membership path.
pub fn member_by_hull(points: &[Point], p: &Point, d: usize) -> bool {
    let base = ConvexPolytope::hull(d, points).unwrap();
    let mut with = points.to_vec();
    with.push(p.clone());
    ConvexPolytope::hull(d, &with).unwrap() == base
}

/// Brute-force linear combination: enumerate every choice of one vertex per
/// operand, form the weighted sums, hull them.
pub fn lincomb_brute(hs: &[ConvexPolytope], ws: &[Rat]) -> ConvexPolytope {
    let d = hs[0].dim();
    let mut sums: Vec<Point> = vec![Point::origin(d)];
    for (h, w) in hs.iter().zip(ws) {
        let mut next = Vec::with_capacity(sums.len() * h.n_vertices());
        for s in &sums {
            for v in h.vertices() {
                next.push(s.add(&v.scale(w)));
            }
        }
        sums = next;
    }
    ConvexPolytope::hull(d, &sums).unwrap()
}

/// Brute-force squared distance from a point to a polytope: zero if the
/// hull-membership oracle says inside, else the minimum over segment
/// distances for *every* vertex pair (any chord; the boundary edges are a
/// subset, and no chord can be closer than the true distance).
pub fn dist_sq_brute(p: &Point, h: &ConvexPolytope) -> Rat {
    if member_by_hull(h.vertices(), p, h.dim()) {
        return Rat::zero();
    }
    let verts = h.vertices();
    let mut best: Option<Rat> = None;
    for (i, a) in verts.iter().enumerate() {
        for b in verts.iter().skip(i) {
            let d = if a == b {
                p.dist_sq(a)
            } else {
                let dir = b.sub(a);
                let len_sq = dir.dot(&dir);
                let t = p.sub(a).dot(&dir);
                let t = if t.is_negative() {
                    Rat::zero()
                } else if t > len_sq {
                    Rat::one()
                } else {
                    t / &len_sq
                };
                p.dist_sq(&a.add(&dir.scale(&t)))
            };
            best = Some(match best {
                None => d,
                Some(cur) => cur.min(d),
            });
        }
    }
    best.unwrap()
}

pub fn hausdorff_sq_brute(a: &ConvexPolytope, b: &ConvexPolytope) -> Rat {
    let mut worst = Rat::zero();
    for v in a.vertices() {
        worst = worst.max(dist_sq_brute(v, b));
    }
    for v in b.vertices() {
        worst = worst.max(dist_sq_brute(v, a));
    }
    worst
}
