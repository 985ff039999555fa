//! Exact arbitrary-precision rational scalars.
//!
//! Every coordinate, weight and matrix entry in this crate is a [`Rat`].
//! Values are kept in canonical form (reduced, positive denominator) by the
//! underlying [`num_rational::BigRational`], so equality and ordering are
//! exact and two equal values always have identical representations.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Exact rational scalar. Arithmetic never rounds.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rat(BigRational);

impl Rat {
    pub fn zero() -> Self {
        Rat(BigRational::zero())
    }

    pub fn one() -> Self {
        Rat(BigRational::one())
    }

    pub fn from_int(v: i64) -> Self {
        Rat(BigRational::from_integer(BigInt::from(v)))
    }

    /// `p / q`. Panics if `q == 0`.
    pub fn ratio(p: i64, q: i64) -> Self {
        Rat(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn from_big(p: BigInt, q: BigInt) -> Self {
        Rat(BigRational::new(p, q))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn abs(&self) -> Rat {
        Rat(self.0.abs())
    }

    pub fn sq(&self) -> Rat {
        Rat(&self.0 * &self.0)
    }

    pub fn recip(&self) -> Rat {
        Rat(self.0.recip())
    }

    pub fn min(self, other: Rat) -> Rat {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Rat) -> Rat {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn pow(&self, exp: u32) -> Rat {
        let mut acc = Rat::one();
        for _ in 0..exp {
            acc = &acc * self;
        }
        acc
    }

    /// Nearest-enough `f64`; used only for reporting, never for decisions.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// `sqrt(self)` as an `f64` with absolute error below `1e-12` for the
    /// magnitudes this crate produces (|x| well under 1e60). Comparisons that
    /// matter are always done on exact squared values; this is report-only.
    pub fn sqrt_f64(&self) -> f64 {
        assert!(!self.is_negative(), "sqrt of negative rational");
        // sqrt(p/q) = isqrt(p*q*k^2) / (q*k) with k = 10^18, floor error <= 1/(q*k)
        let k: BigInt = BigInt::from(10u8).pow(18);
        let p = self.0.numer();
        let q = self.0.denom();
        let scaled = (p * q * &k * &k).sqrt();
        Rat(BigRational::new(scaled, q * k)).to_f64()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                Rat((self.0).$method(rhs.0))
            }
        }
        impl $trait<&Rat> for Rat {
            type Output = Rat;
            fn $method(self, rhs: &Rat) -> Rat {
                Rat((self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rat> for &Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                Rat((&self.0).$method(rhs.0))
            }
        }
        impl $trait<&Rat> for &Rat {
            type Output = Rat;
            fn $method(self, rhs: &Rat) -> Rat {
                Rat((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl Neg for &Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-&self.0)
    }
}

impl std::iter::Sum for Rat {
    fn sum<I: Iterator<Item = Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |a, b| a + b)
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid rational literal {0:?} (expected \"p/q\", integer, or decimal)")]
pub struct ParseRatError(String);

impl FromStr for Rat {
    type Err = ParseRatError;

    /// Accepts `"p/q"`, plain integers, and decimal literals like `"0.01"`
    /// or `"-2.5e-3"`. Decimals parse exactly (no float round-trip).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let err = || ParseRatError(s.to_string());
        if let Some((p, q)) = s.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|_| err())?;
            let q: BigInt = q.trim().parse().map_err(|_| err())?;
            if q.is_zero() {
                return Err(err());
            }
            return Ok(Rat(BigRational::new(p, q)));
        }
        // decimal with optional exponent
        let (mantissa, exp) = match s.split_once(['e', 'E']) {
            Some((m, e)) => (m, e.parse::<i32>().map_err(|_| err())?),
            None => (s, 0),
        };
        let (int_part, frac_part) = match mantissa.split_once('.') {
            Some((i, f)) => (i, f),
            None => (mantissa, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        let digits = format!("{int_part}{frac_part}");
        let num: BigInt = if digits == "-" || digits == "+" {
            return Err(err());
        } else {
            digits.parse().map_err(|_| err())?
        };
        let shift = exp - frac_part.len() as i32;
        let ten = BigInt::from(10u8);
        Ok(if shift >= 0 {
            Rat(BigRational::from_integer(num * ten.pow(shift as u32)))
        } else {
            Rat(BigRational::new(num, ten.pow((-shift) as u32)))
        })
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Rat;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a rational as \"p/q\" string or integer")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Rat, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Rat, E> {
                Ok(Rat::from_int(v))
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Rat, E> {
                Ok(Rat(BigRational::from_integer(BigInt::from(v))))
            }
        }
        deserializer.deserialize_any(V)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form() {
        assert_eq!(Rat::ratio(2, 4), Rat::ratio(1, 2));
        assert_eq!(Rat::ratio(1, -2), Rat::ratio(-1, 2));
        assert_eq!(Rat::ratio(1, -2).to_string(), "-1/2");
        assert_eq!(Rat::from_int(7).to_string(), "7");
    }

    #[test]
    fn parse_forms() {
        assert_eq!("3/4".parse::<Rat>().unwrap(), Rat::ratio(3, 4));
        assert_eq!("-6/8".parse::<Rat>().unwrap(), Rat::ratio(-3, 4));
        assert_eq!("0.01".parse::<Rat>().unwrap(), Rat::ratio(1, 100));
        assert_eq!("-2.5e-3".parse::<Rat>().unwrap(), Rat::ratio(-1, 400));
        assert_eq!("1e2".parse::<Rat>().unwrap(), Rat::from_int(100));
        assert_eq!(".5".parse::<Rat>().unwrap(), Rat::ratio(1, 2));
        assert!("1/0".parse::<Rat>().is_err());
        assert!("abc".parse::<Rat>().is_err());
    }

    #[test]
    fn arithmetic_is_exact() {
        let third = Rat::ratio(1, 3);
        let sum: Rat = (0..3).map(|_| third.clone()).sum();
        assert_eq!(sum, Rat::one());
        assert_eq!(Rat::ratio(1, 10).sq(), Rat::ratio(1, 100));
        assert_eq!(Rat::ratio(3, 4).pow(2), Rat::ratio(9, 16));
    }

    #[test]
    fn serde_round_trip() {
        let v = Rat::ratio(-22, 7);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, "\"-22/7\"");
        let back: Rat = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        let from_int: Rat = serde_json::from_str("5").unwrap();
        assert_eq!(from_int, Rat::from_int(5));
    }

    #[test]
    fn sqrt_precision() {
        let two = Rat::from_int(2);
        assert!((two.sqrt_f64() - std::f64::consts::SQRT_2).abs() < 1e-13);
        assert_eq!(Rat::zero().sqrt_f64(), 0.0);
        let v = Rat::ratio(9, 4);
        assert!((v.sqrt_f64() - 1.5).abs() < 1e-13);
    }
}
