//! Exact rational numbers.
//!
//! Every cake point and every value in this crate is a [`Ratio`]. The type is a
//! thin wrapper around an arbitrary-precision rational that is always kept in
//! lowest terms with a positive denominator, and that serializes as `"p/q"`.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact rational number.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Ratio(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {0:?} (expected \"p/q\" or \"p\")")]
pub struct ParseRatioError(pub String);

impl Ratio {
    pub fn new(numer: i64, denom: i64) -> Ratio {
        assert!(denom != 0, "zero denominator");
        Ratio(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn from_integer(n: i64) -> Ratio {
        Ratio(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_big(numer: BigInt, denom: BigInt) -> Ratio {
        assert!(!denom.is_zero(), "zero denominator");
        Ratio(BigRational::new(numer, denom))
    }

    pub fn zero() -> Ratio {
        Ratio(BigRational::zero())
    }

    pub fn one() -> Ratio {
        Ratio(BigRational::one())
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

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    /// Lossy conversion for display purposes only.
    pub fn to_f64(&self) -> f64 {
        use num::ToPrimitive;
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn as_big(&self) -> &BigRational {
        &self.0
    }
}

impl From<BigRational> for Ratio {
    fn from(r: BigRational) -> Ratio {
        Ratio(r)
    }
}

impl From<i64> for Ratio {
    fn from(n: i64) -> Ratio {
        Ratio::from_integer(n)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl fmt::Debug for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Ratio {
    type Err = ParseRatioError;

    fn from_str(s: &str) -> Result<Ratio, ParseRatioError> {
        let err = || ParseRatioError(s.to_string());
        let t = s.trim();
        let (n, d) = match t.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (t, "1"),
        };
        let n: BigInt = n.parse().map_err(|_| err())?;
        let d: BigInt = d.parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        Ok(Ratio(BigRational::new(n, d)))
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Ratio, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident) => {
        impl $tr<Ratio> for Ratio {
            type Output = Ratio;
            fn $method(self, rhs: Ratio) -> Ratio {
                Ratio(self.0.$method(rhs.0))
            }
        }
        impl<'a> $tr<&'a Ratio> for Ratio {
            type Output = Ratio;
            fn $method(self, rhs: &'a Ratio) -> Ratio {
                Ratio(self.0.$method(&rhs.0))
            }
        }
        impl<'a> $tr<Ratio> for &'a Ratio {
            type Output = Ratio;
            fn $method(self, rhs: Ratio) -> Ratio {
                Ratio((&self.0).$method(rhs.0))
            }
        }
        impl<'a, 'b> $tr<&'b Ratio> for &'a Ratio {
            type Output = Ratio;
            fn $method(self, rhs: &'b Ratio) -> Ratio {
                Ratio((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl AddAssign<&Ratio> for Ratio {
    fn add_assign(&mut self, rhs: &Ratio) {
        self.0 += &rhs.0;
    }
}

impl AddAssign<Ratio> for Ratio {
    fn add_assign(&mut self, rhs: Ratio) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&Ratio> for Ratio {
    fn sub_assign(&mut self, rhs: &Ratio) {
        self.0 -= &rhs.0;
    }
}

impl Neg for Ratio {
    type Output = Ratio;
    fn neg(self) -> Ratio {
        Ratio(-self.0)
    }
}

impl Sum for Ratio {
    fn sum<I: Iterator<Item = Ratio>>(iter: I) -> Ratio {
        iter.fold(Ratio::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Ratio> for Ratio {
    fn sum<I: Iterator<Item = &'a Ratio>>(iter: I) -> Ratio {
        iter.fold(Ratio::zero(), |acc, x| acc + x)
    }
}

impl Zero for Ratio {
    fn zero() -> Ratio {
        Ratio::zero()
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

/// Ordering helper used when sorting by value descending.
pub fn cmp_desc(a: &Ratio, b: &Ratio) -> Ordering {
    b.cmp(a)
}

/// Shorthand constructor used heavily in tests and examples.
pub fn r(numer: i64, denom: i64) -> Ratio {
    Ratio::new(numer, denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn always_reduced() {
        let x = Ratio::new(6, -8);
        assert_eq!(x.to_string(), "-3/4");
        assert_eq!(Ratio::new(0, 5).to_string(), "0/1");
    }

    #[test]
    fn parse_forms() {
        assert_eq!("3/4".parse::<Ratio>().unwrap(), r(3, 4));
        assert_eq!("2".parse::<Ratio>().unwrap(), r(2, 1));
        assert_eq!(" 10 / 4 ".parse::<Ratio>().unwrap(), r(5, 2));
        assert!("1/0".parse::<Ratio>().is_err());
        assert!("0.5".parse::<Ratio>().is_err());
    }

    #[test]
    fn json_is_a_string() {
        let j = serde_json::to_string(&r(7, 3)).unwrap();
        assert_eq!(j, "\"7/3\"");
        let back: Ratio = serde_json::from_str(&j).unwrap();
        assert_eq!(back, r(7, 3));
    }

    #[test]
    fn arithmetic_is_exact() {
        let third = r(1, 3);
        let sum = &third + &third + &third;
        assert_eq!(sum, Ratio::one());
        assert_eq!(r(1, 2) * r(2, 3), r(1, 3));
        assert_eq!(r(1, 2) / r(1, 4), r(2, 1));
    }
}
