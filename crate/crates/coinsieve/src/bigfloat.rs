//! High-precision scalar context over astro-float.
//!
//! Everything the exponential-sum engine needs at configurable mantissa
//! precision: exact loading of integers and rationals, trig/log/exp, an
//! atan2, and a careful conversion back to f64. Operations are correctly
//! rounded by the backend; we use RoundingMode::None (truncation of the
//! internally extended result), which keeps per-operation relative error
//! below 2^(1-bits) and is what the forward error bounds assume.

use astro_float::{BigFloat, Consts, RoundingMode};
use num::{BigInt, BigRational, Zero};

use crate::error::{Error, Result};
use crate::exact::bigint_limbs;

pub const DEFAULT_PRECISION_BITS: usize = 128;
pub const MIN_PRECISION_BITS: usize = 53;

const RM: RoundingMode = RoundingMode::None;

/// Precision + constants cache bundle. One per worker; not shared.
pub struct Ctx {
    p: usize,
    cc: Consts,
}

impl Ctx {
    pub fn new(precision_bits: usize) -> Result<Self> {
        if precision_bits < MIN_PRECISION_BITS {
            return Err(Error::domain(format!(
                "precision_bits must be >= {MIN_PRECISION_BITS}, got {precision_bits}"
            )));
        }
        let cc = Consts::new()
            .map_err(|e| Error::domain(format!("constants cache init failed: {e:?}")))?;
        Ok(Ctx { p: precision_bits, cc })
    }

    pub fn precision_bits(&self) -> usize {
        self.p
    }

    /// Relative error unit of one arithmetic operation at this precision.
    pub fn unit_roundoff(&self) -> f64 {
        2f64.powi(1 - self.p as i32)
    }

    pub fn pi(&mut self) -> BigFloat {
        self.cc.pi(self.p, RM)
    }

    pub fn two_pi(&mut self) -> BigFloat {
        let pi = self.pi();
        pi.mul(&from_u64(2, self.p), self.p, RM)
    }

    pub fn from_f64(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, self.p)
    }

    pub fn from_u64(&self, x: u64) -> BigFloat {
        from_u64(x, self.p)
    }

    /// Exact value of a BigInt (precision grows to fit if needed).
    pub fn from_bigint(&self, x: &BigInt) -> BigFloat {
        let (neg, limbs) = bigint_limbs(x);
        let p = self.p.max(64 * limbs.len() + 64);
        let base = BigFloat::from_u64(1u64 << 63, p).mul(&BigFloat::from_u64(2, p), p, RM);
        let mut acc = BigFloat::from_u64(0, p);
        for &limb in limbs.iter().rev() {
            acc = acc.mul(&base, p, RM);
            acc = acc.add(&BigFloat::from_u64(limb, p), p, RM);
        }
        if neg {
            acc = acc.neg();
        }
        acc
    }

    /// Rational loaded at working precision (one correctly rounded division).
    pub fn from_rational(&self, x: &BigRational) -> BigFloat {
        if x.is_zero() {
            return BigFloat::from_u64(0, self.p);
        }
        let n = self.from_bigint(x.numer());
        let d = self.from_bigint(x.denom());
        n.div(&d, self.p, RM)
    }

    pub fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.p, RM)
    }

    pub fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, self.p, RM)
    }

    pub fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.p, RM)
    }

    pub fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, self.p, RM)
    }

    pub fn sin(&mut self, x: &BigFloat) -> BigFloat {
        x.sin(self.p, RM, &mut self.cc)
    }

    pub fn cos(&mut self, x: &BigFloat) -> BigFloat {
        x.cos(self.p, RM, &mut self.cc)
    }

    pub fn ln(&mut self, x: &BigFloat) -> BigFloat {
        x.ln(self.p, RM, &mut self.cc)
    }

    pub fn exp(&mut self, x: &BigFloat) -> BigFloat {
        x.exp(self.p, RM, &mut self.cc)
    }

    pub fn sqrt(&self, x: &BigFloat) -> BigFloat {
        x.sqrt(self.p, RM)
    }

    pub fn atan(&mut self, x: &BigFloat) -> BigFloat {
        x.atan(self.p, RM, &mut self.cc)
    }

    /// Four-quadrant arctangent in (-pi, pi].
    pub fn atan2(&mut self, y: &BigFloat, x: &BigFloat) -> BigFloat {
        let zero = BigFloat::from_u64(0, self.p);
        let x_sign = x.cmp(&zero).unwrap_or(0);
        let y_sign = y.cmp(&zero).unwrap_or(0);
        if x_sign > 0 {
            let r = self.div(y, x);
            return self.atan(&r);
        }
        if x_sign < 0 {
            let r = self.div(y, x);
            let a = self.atan(&r);
            let pi = self.pi();
            return if y_sign >= 0 {
                self.add(&a, &pi)
            } else {
                self.sub(&a, &pi)
            };
        }
        // x = 0
        let pi = self.pi();
        let half = self.div(&pi, &self.from_u64(2));
        if y_sign > 0 {
            half
        } else if y_sign < 0 {
            half.neg()
        } else {
            zero
        }
    }

    /// Remainder of a modulo m (sign follows a); both finite, m > 0.
    pub fn rem(&self, a: &BigFloat, m: &BigFloat) -> BigFloat {
        a.rem(m)
    }
}

fn from_u64(x: u64, p: usize) -> BigFloat {
    BigFloat::from_u64(x, p)
}

/// BigFloat -> f64, round to nearest, graceful overflow/underflow.
pub fn to_f64(x: &BigFloat) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf_pos() {
        return f64::INFINITY;
    }
    if x.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    if x.is_zero() {
        return 0.0;
    }
    let words = match x.mantissa_digits() {
        Some(w) if !w.is_empty() => w,
        _ => return 0.0,
    };
    // mantissa is little-endian; interpreted as a fraction in [1/2, 1)
    let top = words[words.len() - 1];
    let next = if words.len() >= 2 { words[words.len() - 2] } else { 0 };
    let frac = (top as f64) * 2f64.powi(-64) + (next as f64) * 2f64.powi(-128);
    let e = x.exponent().unwrap_or(0) as i64;
    let sign = if x.is_negative() { -1.0 } else { 1.0 };
    if e > 1100 {
        return sign * f64::INFINITY;
    }
    if e < -1100 {
        return 0.0 * sign;
    }
    let half = (e / 2) as i32;
    let rest = (e - half as i64) as i32;
    sign * frac * 2f64.powi(half) * 2f64.powi(rest)
}

/// Natural log of |x| as f64: exponent*ln2 + ln(fraction). Safe for
/// magnitudes far outside f64 range. -inf for zero.
pub fn ln_abs_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf() {
        return f64::INFINITY;
    }
    let words = match x.mantissa_digits() {
        Some(w) if !w.is_empty() => w,
        _ => return f64::NEG_INFINITY,
    };
    let top = words[words.len() - 1];
    let next = if words.len() >= 2 { words[words.len() - 2] } else { 0 };
    let frac = (top as f64) * 2f64.powi(-64) + (next as f64) * 2f64.powi(-128);
    let e = x.exponent().unwrap_or(0) as f64;
    e * std::f64::consts::LN_2 + frac.ln()
}
