//! Exact rational probabilities and the exact/float input split.
//!
//! Every exact-arithmetic path in the crate bottoms out in [`ExactProb`],
//! a checked rational in [0, 1]. Inputs that may be either exact rationals
//! or floats ("3/4" vs "0.75" on the command line) are carried by
//! [`ProbValue`], which never converts silently between the two worlds.

use num::bigint::Sign;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// An exact rational number in [0, 1], stored in lowest terms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExactProb(BigRational);

impl ExactProb {
    pub fn new(value: BigRational) -> Result<Self> {
        if value.is_negative() {
            return Err(Error::domain(format!("probability {value} is negative")));
        }
        if value > BigRational::one() {
            return Err(Error::domain(format!("probability {value} exceeds 1")));
        }
        Ok(ExactProb(value))
    }

    pub fn zero() -> Self {
        ExactProb(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactProb(BigRational::one())
    }

    pub fn from_ratio(numer: i64, denom: i64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::domain("zero denominator"));
        }
        Self::new(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn into_value(self) -> BigRational {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(0.0)
    }

    /// Natural log of the value, safe against f64 over/underflow of the
    /// numerator and denominator separately. Returns -inf for zero.
    pub fn ln(&self) -> f64 {
        ln_bigrational(&self.0)
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

/// Natural log of a positive `BigInt`, exact to f64 precision at any size.
pub fn ln_bigint(x: &BigInt) -> f64 {
    debug_assert!(x.is_positive());
    let bits = x.bits();
    if bits <= 62 {
        return (x.to_u64().unwrap() as f64).ln();
    }
    // top 64 bits as integer, rest as exponent
    let shift = bits - 63;
    let top: BigInt = x >> shift;
    (top.to_u64().unwrap() as f64).ln() + (shift as f64) * std::f64::consts::LN_2
}

/// Natural log of a positive rational; -inf for zero.
pub fn ln_bigrational(x: &BigRational) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    debug_assert!(x.is_positive());
    ln_bigint(x.numer()) - ln_bigint(x.denom())
}

/// A probability given either as an exact rational or as a float.
///
/// The two variants route to different arithmetic paths and are never
/// inferred from one another. A float is still an exact dyadic rational,
/// so exact dynamic programs accept both; the `Exact` variant is what
/// "the user asked for exact arithmetic" means.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbValue {
    Exact(BigRational),
    Float(f64),
}

impl ProbValue {
    pub fn exact_ratio(numer: i64, denom: i64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::domain("zero denominator"));
        }
        Ok(ProbValue::Exact(BigRational::new(
            BigInt::from(numer),
            BigInt::from(denom),
        )))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, ProbValue::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ProbValue::Exact(r) => r.to_f64().unwrap_or(0.0),
            ProbValue::Float(x) => *x,
        }
    }

    /// The value as an exact rational. Floats convert via their exact
    /// dyadic representation, so this never loses information.
    pub fn to_rational(&self) -> Result<BigRational> {
        match self {
            ProbValue::Exact(r) => Ok(r.clone()),
            ProbValue::Float(x) => BigRational::from_float(*x)
                .ok_or_else(|| Error::domain(format!("{x} is not finite"))),
        }
    }

    /// Renders the value the way it was given ("3/4" or "0.75").
    pub fn describe(&self) -> String {
        match self {
            ProbValue::Exact(r) => {
                if r.denom().is_one() {
                    format!("{}", r.numer())
                } else {
                    format!("{}/{}", r.numer(), r.denom())
                }
            }
            ProbValue::Float(x) => format!("{x}"),
        }
    }
}

impl FromStr for ProbValue {
    type Err = Error;

    /// "a/b" parses to the exact rational a/b; anything else parses as a
    /// float literal. The slash is the explicit opt-in to exact paths.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let numer = BigInt::from_str(n.trim())
                .map_err(|_| Error::domain(format!("bad rational numerator {n:?}")))?;
            let denom = BigInt::from_str(d.trim())
                .map_err(|_| Error::domain(format!("bad rational denominator {d:?}")))?;
            if denom.is_zero() {
                return Err(Error::domain("zero denominator"));
            }
            Ok(ProbValue::Exact(BigRational::new(numer, denom)))
        } else {
            let x: f64 = s
                .parse()
                .map_err(|_| Error::domain(format!("bad probability literal {s:?}")))?;
            Ok(ProbValue::Float(x))
        }
    }
}

/// Converts a nonnegative `BigInt` to a `BigRational`-free sign/magnitude
/// pair of u64 limbs, little-endian. Used for exact loading into big floats.
pub fn bigint_limbs(x: &BigInt) -> (bool, Vec<u64>) {
    let (sign, digits) = x.to_u64_digits();
    (sign == Sign::Minus, digits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_prob_rejects_out_of_range() {
        assert!(ExactProb::from_ratio(-1, 2).is_err());
        assert!(ExactProb::from_ratio(3, 2).is_err());
        assert!(ExactProb::from_ratio(1, 2).is_ok());
        assert!(ExactProb::from_ratio(1, 0).is_err());
    }

    #[test]
    fn prob_value_parsing_routes_by_syntax() {
        let exact: ProbValue = "3/4".parse().unwrap();
        assert!(exact.is_exact());
        assert_eq!(exact.to_f64(), 0.75);

        let float: ProbValue = "0.75".parse().unwrap();
        assert!(!float.is_exact());
        assert_eq!(float.to_f64(), 0.75);

        assert!("1/0".parse::<ProbValue>().is_err());
        assert!("abc".parse::<ProbValue>().is_err());
    }

    #[test]
    fn ln_bigint_matches_f64_at_small_sizes() {
        for v in [1u64, 2, 3, 97, 1 << 20, u64::MAX / 2] {
            let got = ln_bigint(&BigInt::from(v));
            let want = (v as f64).ln();
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
        // 2^200: ln = 200 ln 2
        let big = BigInt::one() << 200;
        let got = ln_bigint(&big);
        assert!((got - 200.0 * std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn describe_round_trips_the_input_form() {
        let e: ProbValue = "3/5".parse().unwrap();
        assert_eq!(e.describe(), "3/5");
        let f: ProbValue = "0.6".parse().unwrap();
        assert_eq!(f.describe(), "0.6");
    }
}
