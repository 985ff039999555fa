//! Vertex-represented convex polytopes in canonical form.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{cross_sign, GeometryError, Point, PointMultiset};
use crate::rat::Rat;

/// A convex polytope given by its minimal vertex set, lexicographically
/// sorted. Canonical form makes set equality representation equality:
/// two polytopes denote the same point set iff they compare equal.
///
/// The empty polytope has no vertices. A single vertex is a point, two
/// vertices a segment, three or more a (non-degenerate) polygon.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ConvexPolytope {
    dim: usize,
    verts: Vec<Point>,
}

impl ConvexPolytope {
    pub fn empty(dim: usize) -> Self {
        ConvexPolytope { dim, verts: vec![] }
    }

    pub fn point(p: Point) -> Self {
        ConvexPolytope {
            dim: p.dim(),
            verts: vec![p],
        }
    }

    /// Convex hull of a multiset of points, in canonical minimal form.
    /// The hull of the empty multiset is the empty polytope.
    pub fn hull(dim: usize, points: &[Point]) -> Result<Self, GeometryError> {
        if dim == 0 || dim > 2 {
            return Err(GeometryError::UnsupportedDimension(dim));
        }
        for p in points {
            if p.dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
        }
        let mut pts: Vec<Point> = points.to_vec();
        pts.sort();
        pts.dedup();
        let verts = match dim {
            1 => match pts.len() {
                0 | 1 => pts,
                n => vec![pts[0].clone(), pts[n - 1].clone()],
            },
            2 => hull2(pts),
            _ => unreachable!(),
        };
        Ok(ConvexPolytope { dim, verts })
    }

    pub fn hull_multiset(dim: usize, points: &PointMultiset) -> Result<Self, GeometryError> {
        Self::hull(dim, points.points())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    /// Canonical vertex list (lexicographically sorted).
    pub fn vertices(&self) -> &[Point] {
        &self.verts
    }

    pub fn n_vertices(&self) -> usize {
        self.verts.len()
    }

    /// Interval endpoints for a non-empty 1-dimensional polytope.
    pub fn interval(&self) -> Option<(&Rat, &Rat)> {
        if self.dim != 1 || self.verts.is_empty() {
            return None;
        }
        let lo = self.verts.first().unwrap().coord(0);
        let hi = self.verts.last().unwrap().coord(0);
        Some((lo, hi))
    }

    /// Vertices in counterclockwise cyclic order (d = 2, at least 3 vertices).
    /// Starts at the lexicographically smallest vertex.
    pub fn cyclic_ccw(&self) -> Vec<Point> {
        assert_eq!(self.dim, 2);
        let mut out = self.verts.clone();
        if out.len() < 3 {
            return out;
        }
        let v0 = out[0].clone();
        // v0 is extreme, so all other vertices lie in the half-plane x >= v0.x;
        // sorting by angle around v0 recovers the convex cycle. Ties cannot
        // occur: three collinear vertices would violate minimality.
        out[1..].sort_by(|a, b| {
            if cross_sign(&v0, a, b) == std::cmp::Ordering::Greater {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        });
        out
    }

    /// Boundary edges: one edge for a segment, a closed cycle for a polygon.
    pub fn edges(&self) -> Vec<(Point, Point)> {
        match self.verts.len() {
            0 | 1 => vec![],
            2 => vec![(self.verts[0].clone(), self.verts[1].clone())],
            _ => {
                let cyc = self.cyclic_ccw();
                let k = cyc.len();
                (0..k)
                    .map(|i| (cyc[i].clone(), cyc[(i + 1) % k].clone()))
                    .collect()
            }
        }
    }

    /// Exact membership test; boundary points are inside.
    pub fn contains_point(&self, p: &Point) -> Result<bool, GeometryError> {
        if p.dim() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: p.dim(),
            });
        }
        Ok(match self.dim {
            1 => match self.interval() {
                None => false,
                Some((lo, hi)) => lo <= p.coord(0) && p.coord(0) <= hi,
            },
            2 => self.contains2(p),
            _ => unreachable!(),
        })
    }

    fn contains2(&self, p: &Point) -> bool {
        match self.verts.len() {
            0 => false,
            1 => &self.verts[0] == p,
            2 => {
                let (a, b) = (&self.verts[0], &self.verts[1]);
                if cross_sign(a, b, p) != std::cmp::Ordering::Equal {
                    return false;
                }
                let d = b.sub(a);
                let t = p.sub(a).dot(&d);
                !t.is_negative() && t <= d.dot(&d)
            }
            _ => point_in_ccw_cycle(&self.cyclic_ccw(), p),
        }
    }

    /// `self` contains `inner` iff every vertex of `inner` is in `self`.
    /// The empty polytope is contained in everything.
    pub fn contains_polytope(&self, inner: &ConvexPolytope) -> Result<bool, GeometryError> {
        if inner.dim != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: inner.dim,
            });
        }
        if self.dim == 2 && self.verts.len() >= 3 {
            // one cyclic-order computation shared by all vertex tests
            let cyc = self.cyclic_ccw();
            return Ok(inner.verts.iter().all(|v| point_in_ccw_cycle(&cyc, v)));
        }
        for v in &inner.verts {
            if !self.contains_point(v)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn translate(&self, by: &Point) -> ConvexPolytope {
        // Translation preserves lexicographic order and minimality.
        ConvexPolytope {
            dim: self.dim,
            verts: self.verts.iter().map(|v| v.add(by)).collect(),
        }
    }

    /// Scale all coordinates by a positive factor (preserves canonical form).
    pub fn scale(&self, w: &Rat) -> ConvexPolytope {
        assert!(w.is_positive(), "scale factor must be positive");
        ConvexPolytope {
            dim: self.dim,
            verts: self.verts.iter().map(|v| v.scale(w)).collect(),
        }
    }

    /// Exact measure of the polytope: length for d = 1, area for d = 2.
    /// Degenerate polytopes (points, and segments at d = 2) measure zero.
    pub fn measure(&self) -> Rat {
        match (self.dim, self.verts.len()) {
            (_, 0) | (_, 1) => Rat::zero(),
            (1, _) => {
                let (lo, hi) = self.interval().unwrap();
                hi - lo
            }
            (2, 2) => Rat::zero(),
            (2, _) => {
                // shoelace over the ccw cycle
                let cyc = self.cyclic_ccw();
                let k = cyc.len();
                let twice: Rat = (0..k)
                    .map(|i| {
                        let a = &cyc[i];
                        let b = &cyc[(i + 1) % k];
                        a.coord(0) * b.coord(1) - b.coord(0) * a.coord(1)
                    })
                    .sum();
                twice / Rat::from_int(2)
            }
            _ => unreachable!(),
        }
    }
}

impl std::fmt::Debug for ConvexPolytope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Polytope{:?}", self.verts)
    }
}

/// Membership against a counterclockwise vertex cycle (at least 3 vertices);
/// boundary counts as inside.
pub(crate) fn point_in_ccw_cycle(cyc: &[Point], p: &Point) -> bool {
    let k = cyc.len();
    (0..k).all(|i| cross_sign(&cyc[i], &cyc[(i + 1) % k], p) != std::cmp::Ordering::Less)
}

/// Monotone chain with strict turns; input must be sorted and deduped.
/// Collinear configurations collapse to their extreme points.
fn hull2(pts: Vec<Point>) -> Vec<Point> {
    if pts.len() <= 1 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for p in &pts {
        while lower.len() >= 2
            && cross_sign(&lower[lower.len() - 2], &lower[lower.len() - 1], p)
                != std::cmp::Ordering::Greater
        {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && cross_sign(&upper[upper.len() - 2], &upper[upper.len() - 1], p)
                != std::cmp::Ordering::Greater
        {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    let mut verts = lower;
    verts.extend(upper);
    verts.sort();
    verts.dedup(); // collinear input leaves the two extremes duplicated
    verts
}

#[derive(Serialize, Deserialize)]
struct PolytopeWire {
    d: usize,
    vertices: Vec<Vec<Rat>>,
}

impl Serialize for ConvexPolytope {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PolytopeWire {
            d: self.dim,
            vertices: self.verts.iter().map(|v| v.coords().to_vec()).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ConvexPolytope {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = PolytopeWire::deserialize(deserializer)?;
        let points: Vec<Point> = wire.vertices.into_iter().map(Point::new).collect();
        ConvexPolytope::hull(wire.d, &points).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::super::cross;
    use super::*;

    fn pt1(x: i64) -> Point {
        Point::from_ints(&[x])
    }

    fn pt2(x: i64, y: i64) -> Point {
        Point::from_ints(&[x, y])
    }

    #[test]
    fn hull_collapses_duplicates_and_interior() {
        // {0, 1, 1} on the line -> segment [0, 1]
        let h = ConvexPolytope::hull(1, &[pt1(0), pt1(1), pt1(1)]).unwrap();
        assert_eq!(h.vertices(), &[pt1(0), pt1(1)]);

        // unit square plus its center -> 4 vertices
        let h = ConvexPolytope::hull(
            2,
            &[
                pt2(0, 0),
                pt2(1, 0),
                pt2(0, 1),
                pt2(1, 1),
                Point::new(vec![Rat::ratio(1, 2), Rat::ratio(1, 2)]),
            ],
        )
        .unwrap();
        assert_eq!(h.n_vertices(), 4);

        // singleton
        let h = ConvexPolytope::hull(1, &[pt1(2)]).unwrap();
        assert_eq!(h.vertices(), &[pt1(2)]);
    }

    #[test]
    fn hull_of_empty_is_empty() {
        let h = ConvexPolytope::hull(2, &[]).unwrap();
        assert!(h.is_empty());
    }

    #[test]
    fn hull_collinear_2d() {
        let h = ConvexPolytope::hull(2, &[pt2(0, 0), pt2(1, 1), pt2(2, 2), pt2(3, 3)]).unwrap();
        assert_eq!(h.vertices(), &[pt2(0, 0), pt2(3, 3)]);
    }

    #[test]
    fn hull_idempotent() {
        let h = ConvexPolytope::hull(2, &[pt2(0, 0), pt2(4, 0), pt2(0, 4), pt2(1, 1)]).unwrap();
        let again = ConvexPolytope::hull(2, h.vertices()).unwrap();
        assert_eq!(h, again);
    }

    #[test]
    fn hull_rejects_dimension_mismatch() {
        let err = ConvexPolytope::hull(2, &[pt1(0)]).unwrap_err();
        assert!(matches!(err, GeometryError::DimensionMismatch { .. }));
        assert!(matches!(
            ConvexPolytope::hull(3, &[]),
            Err(GeometryError::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn membership() {
        let seg = ConvexPolytope::hull(1, &[pt1(0), pt1(1)]).unwrap();
        let half = Point::new(vec![Rat::ratio(1, 2)]);
        assert!(seg.contains_point(&half).unwrap());
        assert!(!seg.contains_point(&pt1(2)).unwrap());

        let tri = ConvexPolytope::hull(2, &[pt2(1, 0), pt2(0, 1), pt2(1, 1)]).unwrap();
        assert!(!tri.contains_point(&pt2(0, 0)).unwrap());
        assert!(tri.contains_point(&pt2(1, 1)).unwrap());
        let inside = Point::new(vec![Rat::ratio(3, 4), Rat::ratio(3, 4)]);
        assert!(tri.contains_point(&inside).unwrap());

        // boundary of a segment polytope in 2d
        let seg2 = ConvexPolytope::hull(2, &[pt2(0, 0), pt2(2, 2)]).unwrap();
        assert!(seg2.contains_point(&pt2(1, 1)).unwrap());
        assert!(!seg2.contains_point(&pt2(3, 3)).unwrap());
        assert!(!seg2.contains_point(&pt2(1, 0)).unwrap());
    }

    #[test]
    fn polytope_containment() {
        let outer = ConvexPolytope::hull(1, &[pt1(0), pt1(3)]).unwrap();
        let inner = ConvexPolytope::hull(1, &[pt1(1), pt1(2)]).unwrap();
        assert!(outer.contains_polytope(&inner).unwrap());
        assert!(!inner.contains_polytope(&outer).unwrap());
        assert!(outer
            .contains_polytope(&ConvexPolytope::empty(1))
            .unwrap());
    }

    #[test]
    fn cyclic_order_is_ccw() {
        let sq = ConvexPolytope::hull(2, &[pt2(0, 0), pt2(1, 0), pt2(1, 1), pt2(0, 1)]).unwrap();
        let cyc = sq.cyclic_ccw();
        assert_eq!(cyc, vec![pt2(0, 0), pt2(1, 0), pt2(1, 1), pt2(0, 1)]);
        for i in 0..4 {
            assert!(cross(&cyc[i], &cyc[(i + 1) % 4], &cyc[(i + 2) % 4]).is_positive());
        }
    }

    #[test]
    fn measure_values() {
        let sq = ConvexPolytope::hull(2, &[pt2(0, 0), pt2(2, 0), pt2(2, 2), pt2(0, 2)]).unwrap();
        assert_eq!(sq.measure(), Rat::from_int(4));
        let seg = ConvexPolytope::hull(1, &[pt1(1), pt1(4)]).unwrap();
        assert_eq!(seg.measure(), Rat::from_int(3));
        assert_eq!(ConvexPolytope::point(pt2(1, 1)).measure(), Rat::zero());
    }

    #[test]
    fn serde_wire_format() {
        let h = ConvexPolytope::hull(
            2,
            &[pt2(0, 0), Point::new(vec![Rat::ratio(1, 2), Rat::zero()]), pt2(1, 1)],
        )
        .unwrap();
        let js = serde_json::to_string(&h).unwrap();
        assert!(js.contains("\"d\":2"));
        assert!(js.contains("\"1/2\""));
        let back: ConvexPolytope = serde_json::from_str(&js).unwrap();
        assert_eq!(back, h);
    }
}
