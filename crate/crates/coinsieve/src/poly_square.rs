//! Square divisibility of P(3) for random coefficients in {-1, 0, 1}:
//! balanced-ternary codes, the entropy-equation threshold, Holder rate
//! bounds, and exact / Monte-Carlo verification of the claim that
//! P(k^2 | P(3) for some k in [B, 2B]) decays geometrically in r where
//! 3^r <= B^2 < 3^(r+1).

use num::{BigInt, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::TernaryCoeffDist;
use crate::residue_dp;
use crate::rng;

// ---------------------------------------------------------------------------
// Balanced ternary
// ---------------------------------------------------------------------------

/// A signed-digit code over {-1, 0, +1}, little-endian: digit j weighs 3^j.
/// An r-digit code represents exactly the integers in (-3^r/2, 3^r/2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalancedTernary {
    digits: Vec<i8>,
}

impl BalancedTernary {
    pub fn digits(&self) -> &[i8] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }
}

/// Encodes n into its unique r-digit balanced-ternary code.
pub fn to_balanced_ternary(n: i64, r: usize) -> Result<BalancedTernary> {
    if r > 39 {
        return Err(Error::domain("r > 39 exceeds the i64 code range"));
    }
    let bound = 3i128.pow(r as u32);
    if 2 * (n as i128).abs() >= bound {
        return Err(Error::domain(format!(
            "{n} is outside the {r}-digit range (-3^{r}/2, 3^{r}/2)"
        )));
    }
    let mut digits = vec![0i8; r];
    let mut v = n as i128;
    for d in digits.iter_mut() {
        let rem = v.rem_euclid(3);
        match rem {
            0 => {
                *d = 0;
                v /= 3;
            }
            1 => {
                *d = 1;
                v = (v - 1) / 3;
            }
            _ => {
                *d = -1;
                v = (v + 1) / 3;
            }
        }
    }
    debug_assert_eq!(v, 0, "range check guarantees termination");
    Ok(BalancedTernary { digits })
}

/// Decodes a balanced-ternary code back to the integer it represents.
pub fn from_balanced_ternary(code: &BalancedTernary) -> i64 {
    let mut acc: i128 = 0;
    for &d in code.digits.iter().rev() {
        acc = acc * 3 + d as i128;
    }
    acc as i64
}

// ---------------------------------------------------------------------------
// Entropy threshold
// ---------------------------------------------------------------------------

/// Solves t^t (1-t)^(1-t) = c for the unique t in [1/2, 1).
///
/// The map is strictly increasing there (log-derivative ln(t/(1-t)) > 0),
/// so bisection on t ln t + (1-t) ln(1-t) = ln c converges cleanly.
pub fn solve_entropy_threshold(c: f64) -> Result<f64> {
    if !(0.5..1.0).contains(&c) {
        return Err(Error::domain(format!(
            "c must lie in [1/2, 1), got {c}"
        )));
    }
    if c == 0.5 {
        return Ok(0.5);
    }
    let target = c.ln();
    let g = |t: f64| t * t.ln() + (1.0 - t) * (1.0 - t).ln() - target;
    let mut lo = 0.5f64;
    let mut hi = 1.0 - 1e-16;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// Holder rate bounds
// ---------------------------------------------------------------------------

/// Per-digit Holder rates at conjugate exponents (p, q):
/// three-term sqrt(3)^(1/p) (rho_0^q + rho_1^q + rho_{-1}^q)^(1/q) and its
/// two-term majorant with rho = max and 1 - rho the rest.
#[derive(Debug, Clone, Copy)]
pub struct RateBound {
    pub p: f64,
    pub q_conj: f64,
    pub r: u32,
    pub per_digit_rate: f64,
    pub per_digit_rate_two_term: f64,
    pub total_bound: f64,
    pub total_bound_two_term: f64,
}

/// ln of the q-norm-style sum (sum_i x_i^q)^(1/q), evaluated in log space
/// so that huge q cannot underflow the powers to zero.
fn ln_q_sum(xs: &[f64], q: f64) -> f64 {
    let lmax = xs
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|x| x.ln())
        .fold(f64::NEG_INFINITY, f64::max);
    if lmax == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|x| ((x.ln() - lmax) * q).exp())
        .sum();
    lmax + s.ln() / q
}

fn rate_at(probs: [f64; 3], p: f64) -> (f64, f64) {
    let q = p / (p - 1.0);
    let ln_root3 = 0.5 * 3f64.ln();
    let three = ln_q_sum(&probs, q);
    let rho = probs[0].max(probs[1]).max(probs[2]);
    let two = ln_q_sum(&[rho, 1.0 - rho], q);
    ((ln_root3 / p + three).exp(), (ln_root3 / p + two).exp())
}

pub fn rate_bound(dist: &TernaryCoeffDist, r: u32, p: f64) -> Result<RateBound> {
    if !(p > 1.0) {
        return Err(Error::domain(format!("Holder exponent p must exceed 1, got {p}")));
    }
    let probs = dist.probs_f64();
    let (three, two) = rate_at(probs, p);
    let q_conj = p / (p - 1.0);
    Ok(RateBound {
        p,
        q_conj,
        r,
        per_digit_rate: three,
        per_digit_rate_two_term: two,
        total_bound: three.powi(r as i32),
        total_bound_two_term: two.powi(r as i32),
    })
}

fn golden_minimize(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Minimizes the three-term per-digit rate over p. The rate is smooth and
/// unimodal in u = 1/p on (0, 1), so golden section suffices.
pub fn optimize_rate(dist: &TernaryCoeffDist, r: u32) -> Result<RateBound> {
    let probs = dist.probs_f64();
    let u = golden_minimize(|u| rate_at(probs, 1.0 / u).0, 1e-9, 1.0 - 1e-9, 1e-10);
    rate_bound(dist, r, 1.0 / u)
}

/// Minimizes the two-term majorant rate over p (its optimum generally
/// differs from the three-term one).
pub fn optimize_rate_two_term(dist: &TernaryCoeffDist, r: u32) -> Result<RateBound> {
    let probs = dist.probs_f64();
    let u = golden_minimize(|u| rate_at(probs, 1.0 / u).1, 1e-9, 1.0 - 1e-9, 1e-10);
    rate_bound(dist, r, 1.0 / u)
}

// ---------------------------------------------------------------------------
// The claim at scale B
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ClaimReport {
    pub b: u64,
    /// The digit scale fixed by 3^r <= B^2 < 3^(r+1).
    pub r: u32,
    /// Optimized three-term per-digit rate and its r-th power.
    pub per_digit_rate: f64,
    pub total_bound: f64,
    /// Two-term majorant versions.
    pub per_digit_rate_two_term: f64,
    pub total_bound_two_term: f64,
    /// The decay constant c of 2^(-c r), reported as -log2(rate).
    pub c_exponent: f64,
    /// Exact sum over k in [B, min(2B, cutoff)] of P(k^2 | P(3)).
    pub exact_union: f64,
    pub exact_union_rational: String,
    /// Last k the DP budget admitted, when it ran out before 2B.
    pub k_cutoff: Option<u64>,
    pub partial: bool,
    /// exact_union <= total_bound, where the analytic chain applies.
    pub union_below_bound: bool,
}

/// The digit scale r with 3^r <= B^2 < 3^(r+1).
pub fn claim_scale_r(b: u64) -> u32 {
    let b2 = (b as u128) * (b as u128);
    let mut r = 0u32;
    let mut pow = 1u128;
    while pow * 3 <= b2 {
        pow *= 3;
        r += 1;
    }
    r
}

/// Exact union mass over k in [B, 2B] against the optimized analytic
/// rate bound at the scale r determined by B.
pub fn claim_bound(dist: &TernaryCoeffDist, b: u64, dp_ops_budget: u64) -> Result<ClaimReport> {
    if b < 2 {
        return Err(Error::domain(format!("B must be >= 2, got {b}")));
    }
    let r = claim_scale_r(b);
    let opt3 = optimize_rate(dist, r)?;
    let opt2 = optimize_rate_two_term(dist, r)?;

    let m = dist.degree();
    let mut exact_union = num::BigRational::zero();
    let mut k_cutoff = None;
    let mut spent = 0u64;
    for k in b..=2 * b {
        let cost = (k * k) * (m as u64 + 1);
        if spent + cost > dp_ops_budget {
            k_cutoff = Some(k - 1);
            break;
        }
        spent += cost;
        let table = residue_dp::ternary_residue_table(dist, k * k)?;
        exact_union += table.prob_of_zero().value();
    }
    if k_cutoff == Some(b - 1) {
        return Err(Error::budget(format!(
            "DP budget {dp_ops_budget} too small for even k = {b}"
        )));
    }

    let exact_f = exact_union.to_f64().unwrap_or(0.0);
    Ok(ClaimReport {
        b,
        r,
        per_digit_rate: opt3.per_digit_rate,
        total_bound: opt3.total_bound,
        per_digit_rate_two_term: opt2.per_digit_rate_two_term,
        total_bound_two_term: opt2.total_bound_two_term,
        c_exponent: -opt3.per_digit_rate.log2(),
        exact_union: exact_f,
        exact_union_rational: format!("{exact_union}"),
        k_cutoff,
        partial: k_cutoff.is_some(),
        union_below_bound: exact_f <= opt3.total_bound,
    })
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct McReport {
    pub b: u64,
    pub k_max: u64,
    pub samples: u64,
    pub hits: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub seed: u64,
}

/// Samples coefficient vectors, evaluates P(3) exactly, and tests square
/// divisibility for k in [B, k_max] by direct division (no factoring).
/// Deterministic in the seed; shards derive independent streams.
pub fn monte_carlo_square_divisor(
    dist: &TernaryCoeffDist,
    b: u64,
    k_max: u64,
    samples: u64,
    seed: u64,
) -> Result<McReport> {
    if samples == 0 {
        return Err(Error::domain("needs at least one sample"));
    }
    if b < 2 || k_max < b {
        return Err(Error::domain("needs 2 <= B <= k_max"));
    }
    let m = dist.degree();
    let squares: Vec<u64> = (b..=k_max).map(|k| k * k).collect();
    const SHARD: u64 = 1 << 14;
    let shards: Vec<(u64, u64)> = (0..samples.div_ceil(SHARD))
        .map(|i| (i, SHARD.min(samples - i * SHARD)))
        .collect();
    let use_i128 = m < 78;
    let hits: u64 = shards
        .par_iter()
        .map(|&(shard, count)| {
            let mut gen = rng::stream(seed, shard);
            let mut h = 0u64;
            let mut coeffs = vec![0i8; m as usize + 1];
            for _ in 0..count {
                for c in coeffs.iter_mut() {
                    *c = dist.sample_coeff(&mut gen);
                }
                let divisible = if use_i128 {
                    let mut v: i128 = 0;
                    for &c in coeffs.iter().rev() {
                        v = v * 3 + c as i128;
                    }
                    squares.iter().any(|&s| v % s as i128 == 0)
                } else {
                    let mut v = BigInt::zero();
                    for &c in coeffs.iter().rev() {
                        v = v * 3 + c;
                    }
                    squares.iter().any(|&s| (&v % BigInt::from(s)).is_zero())
                };
                if divisible {
                    h += 1;
                }
            }
            h
        })
        .sum();
    let estimate = hits as f64 / samples as f64;
    let std_error = (estimate * (1.0 - estimate) / samples as f64).sqrt();
    Ok(McReport {
        b,
        k_max,
        samples,
        hits,
        estimate,
        std_error,
        seed,
    })
}
