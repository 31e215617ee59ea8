//! Numeric backends shared by weightings and walk laws: exact rationals or `f64`.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};

/// Exact rational type used in oracle mode.
pub type Q = BigRational;

pub trait Scalar: Num + Clone + PartialOrd + Debug + Display + Send + Sync + 'static {
    /// True when arithmetic is exact.
    const EXACT: bool;

    fn from_frac(num: i64, den: i64) -> Self;

    fn from_usize(n: usize) -> Self {
        Self::from_frac(n as i64, 1)
    }

    fn to_f64(&self) -> f64;

    fn parse_value(s: &str) -> Option<Self>;

    /// Text form: `p/q` for rationals, 17 significant digits for floats.
    fn format_value(&self) -> String;

    fn is_positive(&self) -> bool {
        *self > Self::zero()
    }

    /// `|self - other| <= tol`, or equality when exact.
    fn near(&self, other: &Self, tol: f64) -> bool {
        if Self::EXACT {
            self == other
        } else {
            (self.to_f64() - other.to_f64()).abs() <= tol
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_frac(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn parse_value(s: &str) -> Option<Self> {
        s.parse().ok()
    }

    fn format_value(&self) -> String {
        format!("{:.16e}", self)
    }
}

impl Scalar for Q {
    const EXACT: bool = true;

    fn from_frac(num: i64, den: i64) -> Self {
        Q::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| if self.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
    }

    fn parse_value(s: &str) -> Option<Self> {
        Q::from_str(s).ok()
    }

    fn format_value(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }
}

/// `0/1` or `p/q` for any rational, also for integers.
pub fn format_q(q: &Q) -> String {
    if q.is_zero() {
        "0/1".into()
    } else {
        q.format_value()
    }
}

/// Serde hook writing a rational as the string `p/q`.
pub fn serialize_q<S: serde::Serializer>(q: &Q, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_q(q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_roundtrip_text() {
        let q = Q::from_frac(5, 27);
        assert_eq!(q.format_value(), "5/27");
        assert_eq!(Q::parse_value("5/27").unwrap(), q);
        assert_eq!(format_q(&Q::from_frac(3, 1)), "3/1");
        let x = 1.0f64 / 3.0;
        assert_eq!(f64::parse_value(&x.format_value()).unwrap(), x);
    }

    #[test]
    fn test_near() {
        assert!(0.1f64.near(&(0.1 + 1e-12), 1e-9));
        assert!(!Q::from_frac(1, 3).near(&Q::from_frac(1, 3 + 1), 1.0));
    }
}
