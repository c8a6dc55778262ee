//! Scalar layers shared by the exact and floating-point evaluators.

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A field the difference calculus can run over: exact rationals or `f64`.
pub trait Scalar: Clone + Debug + Num + Neg<Output = Self> {
    fn from_rational(r: &BigRational) -> Self;

    fn from_i64(v: i64) -> Self;
}

impl Scalar for BigRational {
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }

    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
}

impl Scalar for f64 {
    fn from_rational(r: &BigRational) -> Self {
        rational_to_f64(r)
    }

    fn from_i64(v: i64) -> Self {
        v as f64
    }
}

/// Converts a rational to the nearest-ish `f64`, robust to huge numerators
/// and denominators (which overflow a naive `n as f64 / d as f64`).
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    if r.is_zero() {
        return 0.0;
    }
    let numer = r.numer();
    let denom = r.denom();
    let shift = numer.bits() as i64 - denom.bits() as i64;
    // Scale to a quotient with ~64 significant bits, then reapply the exponent.
    let scaled = if shift > 64 {
        numer / (denom << ((shift - 64) as usize))
    } else {
        (numer << ((64 - shift) as usize)) / denom
    };
    let mantissa = scaled.to_f64().unwrap_or(0.0);
    mantissa * 2f64.powi((shift - 64) as i32)
}

/// Parses an exact rational literal such as `"1/2"`, `"3/10"` or `"2"`.
///
/// Decimal literals are rejected so that exact paths stay exact.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if s.contains('.') || s.contains('e') || s.contains('E') {
        return Err(Error::InvalidParameter(format!(
            "'{s}' is not an exact rational; write it as a fraction such as 1/2 or 3/10"
        )));
    }
    let parse_int = |t: &str| {
        t.trim()
            .parse::<BigInt>()
            .map_err(|_| Error::InvalidParameter(format!("cannot parse '{s}' as a rational")))
    };
    match s.split_once('/') {
        Some((n, d)) => {
            let d = parse_int(d)?;
            if d.is_zero() {
                return Err(Error::InvalidParameter(format!("zero denominator in '{s}'")));
            }
            Ok(BigRational::new(parse_int(n)?, d))
        }
        None => Ok(BigRational::from_integer(parse_int(s)?)),
    }
}

/// Canonical `p/q` rendering (integers print without a denominator).
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// `|a - b|` as a rational.
pub fn abs_diff(a: &BigRational, b: &BigRational) -> BigRational {
    (a - b).abs()
}

/// `10^-digits` as an exact rational.
pub fn ten_pow_neg(digits: u32) -> BigRational {
    BigRational::new(BigInt::one(), num_traits::pow(BigInt::from(10), digits as usize))
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}
