//! Exact convex-polytope calculus in low dimension.
//!
//! All predicates are decided with rational arithmetic; there is no epsilon
//! anywhere. Dimensions 1 and 2 are supported (the campaigns the harness runs
//! stay at desk scale, n <= 10).

mod ops;
mod polytope;
mod tverberg;

pub use ops::{
    hausdorff_distance, hausdorff_distance_sq, intersect, intersect_pair, linear_combination,
    minkowski_sum, point_polytope_dist_sq, safe_area, HAUSDORFF_ABS_ERROR,
};
pub use polytope::ConvexPolytope;
pub use tverberg::{tverberg_witness, TverbergWitness};

use serde::{Deserialize, Serialize};

use crate::rat::Rat;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported dimension {0} (supported: 1, 2)")]
    UnsupportedDimension(usize),
    #[error("operation requires a non-empty polytope")]
    EmptyOperand,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("need more than {fault_budget} points, got {points}")]
    TooFewPoints { points: usize, fault_budget: usize },
    #[error("empty operand sequence")]
    EmptySequence,
}

/// A point in d-dimensional Euclidean space with exact rational coordinates.
///
/// Ordering is lexicographic by coordinates; it is the canonical order used
/// throughout the crate.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<Rat>);

impl Point {
    pub fn new(coords: Vec<Rat>) -> Self {
        Point(coords)
    }

    pub fn from_ints(coords: &[i64]) -> Self {
        Point(coords.iter().map(|&c| Rat::from_int(c)).collect())
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![Rat::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Rat] {
        &self.0
    }

    pub fn coord(&self, l: usize) -> &Rat {
        &self.0[l]
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, w: &Rat) -> Point {
        Point(self.0.iter().map(|c| c * w).collect())
    }

    pub fn dot(&self, other: &Point) -> Rat {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Exact squared Euclidean distance.
    pub fn dist_sq(&self, other: &Point) -> Rat {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).sq())
            .sum()
    }
}

impl std::fmt::Debug for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// 2D cross product of (a - o) and (b - o); sign gives orientation.
#[cfg(test)]
pub(crate) fn cross(o: &Point, a: &Point, b: &Point) -> Rat {
    let ax = a.coord(0) - o.coord(0);
    let ay = a.coord(1) - o.coord(1);
    let bx = b.coord(0) - o.coord(0);
    let by = b.coord(1) - o.coord(1);
    &ax * &by - &ay * &bx
}

/// Sign of the 2D cross product, computed on unreduced integer fractions.
/// Orientation predicates dominate the hull and containment paths, and
/// skipping the gcd reduction of full rational arithmetic makes them several
/// times cheaper on deep-round coordinates.
pub(crate) fn cross_sign(o: &Point, a: &Point, b: &Point) -> std::cmp::Ordering {
    // x - y as the unreduced fraction (xn*yd - yn*xd) / (xd*yd), xd,yd > 0
    let sub = |x: &Rat, y: &Rat| {
        (
            x.numer() * y.denom() - y.numer() * x.denom(),
            x.denom() * y.denom(),
        )
    };
    let (n1, d1) = sub(a.coord(0), o.coord(0));
    let (n2, d2) = sub(b.coord(1), o.coord(1));
    let (n3, d3) = sub(a.coord(1), o.coord(1));
    let (n4, d4) = sub(b.coord(0), o.coord(0));
    (n1 * n2 * d3 * d4).cmp(&(n3 * n4 * d1 * d2))
}

/// Sign of `u.x * v.y - u.y * v.x` for direction vectors, gcd-free.
pub(crate) fn vec_cross_sign(u: &Point, v: &Point) -> std::cmp::Ordering {
    let lhs = u.coord(0).numer() * v.coord(1).numer() * u.coord(1).denom() * v.coord(0).denom();
    let rhs = u.coord(1).numer() * v.coord(0).numer() * u.coord(0).denom() * v.coord(1).denom();
    lhs.cmp(&rhs)
}

/// A multiset of points: duplicates are kept, order is irrelevant.
/// Canonicalized by sorting, so equality is multiset equality.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointMultiset(Vec<Point>);

impl PointMultiset {
    pub fn new(mut points: Vec<Point>) -> Self {
        points.sort();
        PointMultiset(points)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.0.iter()
    }

    /// All points must share this dimension; errors otherwise.
    pub fn check_dim(&self, dim: usize) -> Result<(), GeometryError> {
        for p in &self.0 {
            if p.dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
        }
        Ok(())
    }
}

impl From<Vec<Point>> for PointMultiset {
    fn from(points: Vec<Point>) -> Self {
        PointMultiset::new(points)
    }
}

impl FromIterator<Point> for PointMultiset {
    fn from_iter<I: IntoIterator<Item = Point>>(iter: I) -> Self {
        PointMultiset::new(iter.into_iter().collect())
    }
}
