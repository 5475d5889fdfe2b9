//! Experiment layer: squarefree-modulus sweeps of |R_q|, sieving-exponent
//! estimation, pseudo-prime masses, an inclusion-exclusion sieve demo,
//! the two inequality harnesses, the product-integral identity, and the
//! end-to-end Holder-chain diagnostic.
//!
//! Sweeps shard across workers but merge in ascending q, so reports are
//! identical for any worker count.

use num::ToPrimitive;
use rayon::prelude::*;

use crate::arith::{self, SpfSieve};
use crate::error::{Error, Result};
use crate::exact::{ExactProb, ProbValue};
use crate::expsum::{self, OrbitEngine};
use crate::measure::BiasedBitMeasure;
use crate::residue_dp;
use crate::rng;

// ---------------------------------------------------------------------------
// Squarefree-odd-modulus sweeps
// ---------------------------------------------------------------------------

/// One modulus row of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub q: u64,
    pub ord2: u64,
    pub squarefree: bool,
    pub abs_rq: f64,
    pub ln_abs_rq: f64,
    pub error_bound: f64,
    /// Running sum of abs_rq up to and including this row.
    pub cumulative: f64,
}

/// Sweep of |R_q| over odd squarefree q in [q_min, q_max].
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rho: String,
    pub rho_f64: f64,
    pub m: u32,
    pub precision_bits: usize,
    pub q_min: u64,
    pub q_max: u64,
    pub records: Vec<SweepRecord>,
    pub cumulative_sum: f64,
}

/// Computes |R_q| for every odd squarefree q in [q_lo, q_hi] and the
/// running sum in ascending q.
pub fn sweep_remainders_range(
    meas: &BiasedBitMeasure,
    q_lo: u64,
    q_hi: u64,
    precision_bits: usize,
) -> Result<SweepReport> {
    if q_hi < 3 || q_hi < q_lo {
        return Err(Error::domain(format!(
            "sweep needs 3 <= q_lo <= q_hi, got [{q_lo}, {q_hi}]"
        )));
    }
    let qs = arith::odd_squarefree_in(q_lo.max(3), q_hi);
    let mut records: Vec<SweepRecord> = qs
        .par_iter()
        .map(|&q| {
            let est = expsum::remainder_term(q, meas, precision_bits)?;
            let ord2 = arith::order_of_two(q)?;
            Ok(SweepRecord {
                q,
                ord2,
                squarefree: true,
                abs_rq: est.abs_value,
                ln_abs_rq: est.ln_abs_value,
                error_bound: est.error_bound,
                cumulative: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut running = 0.0;
    for rec in &mut records {
        running += rec.abs_rq;
        rec.cumulative = running;
    }
    Ok(SweepReport {
        rho: meas.rho().describe(),
        rho_f64: meas.rho_f64(),
        m: meas.m(),
        precision_bits,
        q_min: q_lo.max(3),
        q_max: q_hi,
        records,
        cumulative_sum: running,
    })
}

/// Sweep from q = 3 up to q_max.
pub fn sweep_remainders(
    meas: &BiasedBitMeasure,
    q_max: u64,
    precision_bits: usize,
) -> Result<SweepReport> {
    sweep_remainders_range(meas, 3, q_max, precision_bits)
}

/// Sweeps several bit counts sharing the per-q factor tables, which is
/// where nearly all the cost lives.
pub fn sweep_remainders_multi(
    rho: &ProbValue,
    m_list: &[u32],
    q_max: u64,
    precision_bits: usize,
) -> Result<Vec<SweepReport>> {
    if m_list.is_empty() {
        return Err(Error::domain("need at least one m"));
    }
    let m_ref = *m_list.iter().max().expect("nonempty");
    let meas = BiasedBitMeasure::new(m_ref, rho.clone())?;
    let qs = arith::odd_squarefree_in(3, q_max);

    // per q: one engine, one remainder per m
    let rows: Vec<(u64, u64, Vec<expsum::RemainderEstimate>)> = qs
        .par_iter()
        .map(|&q| {
            let mut engine = OrbitEngine::new(q, &meas, precision_bits)?;
            let ests: Vec<_> = m_list.iter().map(|&m| engine.remainder(m)).collect();
            Ok((q, engine.orbit().order_of_two(), ests))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut reports = Vec::with_capacity(m_list.len());
    for (i, &m) in m_list.iter().enumerate() {
        let mut records: Vec<SweepRecord> = rows
            .iter()
            .map(|(q, ord2, ests)| SweepRecord {
                q: *q,
                ord2: *ord2,
                squarefree: true,
                abs_rq: ests[i].abs_value,
                ln_abs_rq: ests[i].ln_abs_value,
                error_bound: ests[i].error_bound,
                cumulative: 0.0,
            })
            .collect();
        let mut running = 0.0;
        for rec in &mut records {
            running += rec.abs_rq;
            rec.cumulative = running;
        }
        reports.push(SweepReport {
            rho: rho.describe(),
            rho_f64: rho.to_f64(),
            m,
            precision_bits,
            q_min: 3,
            q_max,
            records,
            cumulative_sum: running,
        });
    }
    Ok(reports)
}

// ---------------------------------------------------------------------------
// Sieving-exponent estimation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ExponentRow {
    pub m: u32,
    /// Largest alpha in (0, 1] with the cumulative sum below epsilon.
    pub alpha_hat: f64,
    /// The modulus whose inclusion first pushed the sum past epsilon.
    pub crossing_q: Option<u64>,
    pub cumulative_at_stop: f64,
    /// True when the scan hit the q budget before crossing epsilon, so
    /// alpha_hat is only a certified lower bound.
    pub budget_capped: bool,
}

#[derive(Debug, Clone)]
pub struct ExponentReport {
    pub rho: String,
    pub epsilon: f64,
    pub q_budget: u64,
    pub precision_bits: usize,
    pub rows: Vec<ExponentRow>,
    /// True when any row is budget-capped.
    pub partial: bool,
}

/// For each m, the largest alpha-hat in (0, 1] such that the sum of
/// |R_q| over odd squarefree q < 2^(alpha-hat * m) stays at most epsilon.
///
/// The uniform measure (rho = 1/2) uses the exact counting formula for
/// R_q, so its scans afford much larger budgets than the float-product
/// path.
pub fn estimate_sieving_exponent(
    rho: &ProbValue,
    m_list: &[u32],
    epsilon: f64,
    q_budget: u64,
    precision_bits: usize,
) -> Result<ExponentReport> {
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(Error::domain(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    if m_list.is_empty() || m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("m_list must be strictly increasing and nonempty"));
    }
    if q_budget < 3 {
        return Err(Error::domain("q budget must be at least 3"));
    }
    const UNIFORM_BUDGET_CEIL: u64 = 1 << 26;
    let uniform = match rho {
        ProbValue::Float(x) => *x == 0.5,
        ProbValue::Exact(r) => {
            *r == num::BigRational::new(num::BigInt::from(1), num::BigInt::from(2))
        }
    };
    if uniform && q_budget > UNIFORM_BUDGET_CEIL {
        return Err(Error::domain(format!(
            "uniform-path budget capped at {UNIFORM_BUDGET_CEIL}"
        )));
    }

    let mut rows = Vec::with_capacity(m_list.len());
    for &m in m_list {
        // no point scanning past 2^m: alpha caps at 1 there
        let reach = if m < 63 { (1u64 << m) - 1 } else { u64::MAX };
        let effective_budget = q_budget.min(reach);
        let row = if uniform {
            scan_uniform(m, epsilon, effective_budget)?
        } else {
            scan_float(rho, m, epsilon, effective_budget, precision_bits)?
        };
        rows.push(row);
    }
    let partial = rows.iter().any(|r| r.budget_capped);
    Ok(ExponentReport {
        rho: rho.describe(),
        epsilon,
        q_budget,
        precision_bits,
        rows,
        partial,
    })
}

fn finish_row(m: u32, cum: f64, crossed: Option<u64>, effective_budget: u64) -> ExponentRow {
    match crossed {
        Some(q) => {
            let alpha = ((q as f64).log2() / m as f64).min(1.0).max(f64::MIN_POSITIVE);
            ExponentRow {
                m,
                alpha_hat: alpha,
                crossing_q: Some(q),
                cumulative_at_stop: cum,
                budget_capped: false,
            }
        }
        None => {
            // hitting 2^m is a genuine cap of the alpha domain (alpha = 1),
            // not a budget limitation
            let full_range = (m as u64) <= 62 && effective_budget >= (1u64 << m) - 1;
            let alpha = if full_range {
                1.0
            } else {
                ((effective_budget as f64).log2() / m as f64).min(1.0)
            };
            ExponentRow {
                m,
                alpha_hat: alpha,
                crossing_q: None,
                cumulative_at_stop: cum,
                budget_capped: !full_range,
            }
        }
    }
}

/// Exact |R_q| for the counting measure: (q ceil(N/q) - N) / (q N).
fn scan_uniform(m: u32, epsilon: f64, budget: u64) -> Result<ExponentRow> {
    let flags = arith::squarefree_flags(budget as usize + 1);
    let mut cum = 0.0f64;
    let mut crossed = None;
    let mut q = 3u64;
    while q <= budget {
        if flags[q as usize] {
            cum += uniform_abs_rq(q, m);
            if cum > epsilon {
                crossed = Some(q);
                break;
            }
        }
        q += 2;
    }
    Ok(finish_row(m, cum, crossed, budget))
}

fn uniform_abs_rq(q: u64, m: u32) -> f64 {
    if m <= 120 {
        let n = 1u128 << m;
        let qq = q as u128;
        let count = n.div_ceil(qq);
        let num = (count * qq - n) as f64;
        num / (q as f64 * (m as f64).exp2())
    } else {
        expsum::uniform_remainder_exact(q, m)
            .to_f64()
            .unwrap_or(0.0)
            .abs()
    }
}

fn scan_float(
    rho: &ProbValue,
    m: u32,
    epsilon: f64,
    budget: u64,
    precision_bits: usize,
) -> Result<ExponentRow> {
    let meas = BiasedBitMeasure::new(m, rho.clone())?;
    let qs = arith::odd_squarefree_in(3, budget);
    let mut cum = 0.0f64;
    let mut crossed = None;
    // parallel blocks, sequential accumulation with early exit
    for chunk in qs.chunks(512) {
        let values: Vec<(u64, f64)> = chunk
            .par_iter()
            .map(|&q| {
                let est = expsum::remainder_term(q, &meas, precision_bits)?;
                Ok((q, est.abs_value))
            })
            .collect::<Result<Vec<_>>>()?;
        for (q, abs_rq) in values {
            cum += abs_rq;
            if cum > epsilon {
                crossed = Some(q);
                break;
            }
        }
        if crossed.is_some() {
            break;
        }
    }
    Ok(finish_row(m, cum, crossed, budget))
}

// ---------------------------------------------------------------------------
// Pseudo-prime mass
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PseudoprimeMethod {
    /// Smallest-prime-factor sieve over the whole support (m <= 26).
    ExactSieve,
    /// Seeded sampling with a binomial standard error.
    Sampling { samples: u64, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct PseudoprimeReport {
    pub m: u32,
    pub rho: String,
    pub r: u32,
    /// mu-mass of {2 <= n < 2^m : Omega(n) <= r}.
    pub mass: f64,
    pub mass_exact: Option<ExactProb>,
    pub std_error: Option<f64>,
    pub method: &'static str,
    /// mass * ln(2^m), the normalization of the target asymptotic.
    pub mass_times_log_n: f64,
}

pub const EXACT_ENUMERATION_MAX_M: u32 = 26;

/// Measure of r-pseudo-primes (at most r prime factors with multiplicity,
/// 0 and 1 excluded) under the biased measure.
pub fn pseudoprime_mass(
    meas: &BiasedBitMeasure,
    r: u32,
    method: PseudoprimeMethod,
) -> Result<PseudoprimeReport> {
    if r == 0 {
        return Err(Error::domain("pseudo-prime order r must be >= 1"));
    }
    let m = meas.m();
    let log_n = m as f64 * std::f64::consts::LN_2;
    match method {
        PseudoprimeMethod::ExactSieve => {
            if m > EXACT_ENUMERATION_MAX_M {
                return Err(Error::domain(format!(
                    "exact enumeration is capped at m = {EXACT_ENUMERATION_MAX_M}; use sampling for m = {m}"
                )));
            }
            let limit = 1usize << m;
            let sieve = SpfSieve::new(limit);
            // mass depends on n only through popcount, so tally counts
            // per popcount and weight once
            let mut counts = vec![0u64; m as usize + 1];
            for n in 2..limit {
                if sieve.omega_with_multiplicity(n) <= r {
                    counts[n.count_ones() as usize] += 1;
                }
            }
            let rho = meas.rho().to_rational()?;
            let one_minus = num::BigRational::from_integer(1.into()) - &rho;
            let mut total = num::BigRational::from_integer(0.into());
            let mut weight = pow_rat(&rho, m); // rho^(m-l) (1-rho)^l at l = 0
            for (l, &count) in counts.iter().enumerate() {
                if count > 0 {
                    total += &weight * num::BigRational::from_integer(count.into());
                }
                if l < m as usize {
                    weight = weight / &rho * &one_minus;
                }
            }
            let mass_exact = ExactProb::new(total)?;
            let mass = mass_exact.to_f64();
            Ok(PseudoprimeReport {
                m,
                rho: meas.rho().describe(),
                r,
                mass,
                mass_exact: Some(mass_exact),
                std_error: None,
                method: "exact-sieve",
                mass_times_log_n: mass * log_n,
            })
        }
        PseudoprimeMethod::Sampling { samples, seed } => {
            if samples == 0 {
                return Err(Error::domain("sampling needs at least one sample"));
            }
            if m > 63 {
                return Err(Error::domain("sampling path needs m <= 63"));
            }
            const SHARD: u64 = 1 << 14;
            let shards: Vec<(u64, u64)> = (0..samples.div_ceil(SHARD))
                .map(|i| (i, SHARD.min(samples - i * SHARD)))
                .collect();
            let hits: u64 = shards
                .par_iter()
                .map(|&(shard, count)| {
                    let mut gen = rng::stream(seed, shard);
                    let mut h = 0u64;
                    for _ in 0..count {
                        let n = sample_one(meas, &mut gen);
                        if n >= 2 && arith::omega_u64(n) <= r {
                            h += 1;
                        }
                    }
                    h
                })
                .sum();
            let p_hat = hits as f64 / samples as f64;
            let se = (p_hat * (1.0 - p_hat) / samples as f64).sqrt();
            Ok(PseudoprimeReport {
                m,
                rho: meas.rho().describe(),
                r,
                mass: p_hat,
                mass_exact: None,
                std_error: Some(se),
                method: "sampling",
                mass_times_log_n: p_hat * log_n,
            })
        }
    }
}

fn sample_one<R: rand::Rng>(meas: &BiasedBitMeasure, gen: &mut R) -> u64 {
    let rho = meas.rho_f64();
    let mut n = 0u64;
    for j in 0..meas.m() {
        let u: f64 = gen.random();
        if u >= rho {
            n |= 1 << j;
        }
    }
    n
}

fn pow_rat(x: &num::BigRational, e: u32) -> num::BigRational {
    let mut acc = num::BigRational::from_integer(1.into());
    for _ in 0..e {
        acc *= x;
    }
    acc
}

// ---------------------------------------------------------------------------
// Inclusion-exclusion sieve demo
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LegendreReport {
    pub z: u64,
    pub primes: Vec<u64>,
    /// Main term: sum over squarefree products d of mobius(d)/d.
    pub main_term: f64,
    /// Main term with the computed remainders folded back in.
    pub corrected: f64,
    /// Sum over d > 1 of |R_d| plus their error bounds.
    pub error_budget: f64,
    /// Exact mass of {n : no odd prime < z divides n} from the DP.
    pub exact: f64,
}

/// Inclusion-exclusion over products of odd primes below z, with the
/// remainder budget that a genuine sieve would consume. z stays small:
/// the products must remain within the sweep range.
pub fn legendre_sieve_demo(
    meas: &BiasedBitMeasure,
    z: u64,
    precision_bits: usize,
    product_limit: u64,
) -> Result<LegendreReport> {
    if !(2..=50).contains(&z) {
        return Err(Error::domain(format!("z must lie in [2, 50], got {z}")));
    }
    let sieve = SpfSieve::new(z.max(3) as usize);
    let primes: Vec<u64> = sieve.primes().into_iter().filter(|&p| p > 2 && p < z).collect();
    let product: u64 = primes.iter().product();
    if product > product_limit {
        return Err(Error::domain(format!(
            "products of odd primes below z = {z} reach {product}, beyond the sweep range {product_limit}"
        )));
    }

    let mut main_term = 0.0f64;
    let mut corrected = 0.0f64;
    let mut error_budget = 0.0f64;
    for mask in 0u32..(1 << primes.len()) {
        let d: u64 = primes
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &p)| p)
            .product();
        let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        main_term += sign / d as f64;
        if d == 1 {
            corrected += sign;
        } else {
            let est = expsum::remainder_term(d, meas, precision_bits)?;
            corrected += sign * (1.0 / d as f64 + est.value);
            error_budget += est.abs_value + est.error_bound;
        }
    }

    // exact: mass of residues coprime to the whole product
    let exact = if primes.is_empty() {
        1.0
    } else {
        let table = residue_dp::residue_mass(meas, product)?;
        let mut total = num::BigRational::from_integer(0.into());
        for (a, mass) in table.masses().iter().enumerate() {
            if arith::gcd(a as u64, product) == 1 {
                total += mass.value();
            }
        }
        total.to_f64().unwrap_or(0.0)
    };

    Ok(LegendreReport {
        z,
        primes,
        main_term,
        corrected,
        error_budget,
        exact,
    })
}

// ---------------------------------------------------------------------------
// Inequality harnesses
// ---------------------------------------------------------------------------

/// |rho + (1-rho)e(theta)|^(2 ell) <= 1 - (1-delta) sin^2(pi theta),
/// valid whenever ell > log(1/delta) / (rho(1-rho)).
pub fn lemma3_check(theta: f64, delta: f64, rho: f64, ell: u64) -> Result<bool> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0,1), got {delta}")));
    }
    if !(0.5..1.0).contains(&rho) {
        return Err(Error::domain(format!("rho must lie in [1/2, 1), got {rho}")));
    }
    let threshold = (1.0 / delta).ln() / (rho * (1.0 - rho));
    if (ell as f64) <= threshold {
        return Err(Error::domain(format!(
            "ell = {ell} is outside the regime ell > {threshold:.6}"
        )));
    }
    Ok(lemma3_probe(theta, delta, rho, ell))
}

/// The raw inequality evaluation without the regime guard, for
/// out-of-regime probing.
pub fn lemma3_probe(theta: f64, delta: f64, rho: f64, ell: u64) -> bool {
    let s = (std::f64::consts::PI * theta).sin();
    let mag2 = 1.0 - 4.0 * rho * (1.0 - rho) * s * s;
    let lhs = powu(mag2, ell);
    let rhs = 1.0 - (1.0 - delta) * s * s;
    lhs <= rhs
}

fn powu(base: f64, mut e: u64) -> f64 {
    let mut acc = 1.0f64;
    let mut b = base;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

#[derive(Debug, Clone, Copy)]
pub struct Lemma4Outcome {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// rhs - lhs evaluated through the stable product identity
    /// gamma - (1-delta) sin(2 theta + gamma) sin(gamma).
    pub margin: f64,
}

/// 1 - (1-delta) sin^2(theta) <= 1 + gamma - (1-delta) sin^2(theta+gamma)
/// for 0 < gamma < 1/10; the angle is in radians (no pi factor here).
pub fn lemma4_check(theta_rad: f64, gamma: f64, delta: f64) -> Result<Lemma4Outcome> {
    if !(0.0 < gamma && gamma < 0.1) {
        return Err(Error::domain(format!("gamma must lie in (0, 1/10), got {gamma}")));
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0,1), got {delta}")));
    }
    Ok(lemma4_probe(theta_rad, gamma, delta))
}

pub fn lemma4_probe(theta_rad: f64, gamma: f64, delta: f64) -> Lemma4Outcome {
    let s0 = theta_rad.sin();
    let s1 = (theta_rad + gamma).sin();
    let lhs = 1.0 - (1.0 - delta) * s0 * s0;
    let rhs = 1.0 + gamma - (1.0 - delta) * s1 * s1;
    // sin^2 A - sin^2 B = sin(A+B) sin(A-B)
    let margin = gamma - (1.0 - delta) * (2.0 * theta_rad + gamma).sin() * gamma.sin();
    Lemma4Outcome {
        holds: lhs <= rhs,
        lhs,
        rhs,
        margin,
    }
}

// ---------------------------------------------------------------------------
// Product-integral identity
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct IntegralReport {
    pub h: u32,
    pub delta: f64,
    pub quadrature_points: u64,
    pub quadrature: f64,
    pub closed_form: f64,
    pub abs_diff: f64,
}

/// int_0^1 prod_{j<h} (1 + delta - (1-delta) sin^2(pi 2^j x)) dx against
/// its closed form ((1+3 delta)/2)^h. Each factor is
/// (1+3 delta)/2 + ((1-delta)/2) cos(2 pi 2^j x); the cross terms carry
/// distinct nonzero frequencies below 2^h and the midpoint rule on a
/// power-of-two grid of at least 2^(h+4) points integrates them exactly.
pub fn product_integral_identity(h: u32, delta: f64, quadrature_points: u64) -> Result<IntegralReport> {
    if !(1..=20).contains(&h) {
        return Err(Error::domain(format!("h must lie in [1, 20], got {h}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::domain(format!("delta must lie in [0, 1), got {delta}")));
    }
    if !quadrature_points.is_power_of_two() || quadrature_points < 1u64 << (h + 4) {
        return Err(Error::domain(format!(
            "quadrature needs a power-of-two point count >= 2^{}, got {quadrature_points}",
            h + 4
        )));
    }
    let n = quadrature_points;
    // midpoint rule with compensated summation
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..n {
        let x = (i as f64 + 0.5) / n as f64;
        let mut prod = 1.0f64;
        for j in 0..h {
            let s = (std::f64::consts::PI * (x * (1u64 << j) as f64)).sin();
            prod *= 1.0 + delta - (1.0 - delta) * s * s;
        }
        let y = prod - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    let quadrature = sum / n as f64;
    let closed_form = ((1.0 + 3.0 * delta) / 2.0).powi(h as i32);
    Ok(IntegralReport {
        h,
        delta,
        quadrature_points,
        quadrature,
        closed_form,
        abs_diff: (quadrature - closed_form).abs(),
    })
}

// ---------------------------------------------------------------------------
// Holder-chain diagnostic
// ---------------------------------------------------------------------------

/// The derived parameters of the chain for a given slack delta and scale Q.
#[derive(Debug, Clone, Copy)]
pub struct BoundParams {
    pub delta: f64,
    /// Maximal shift used in the averaging step: pi 2^(h-1) beta.
    pub gamma: f64,
    /// Smallest exponent in the single-factor regime.
    pub ell: u64,
    /// Smallest even Holder exponent above 4 log(1/delta) / (rho(1-rho)).
    pub t_holder: u64,
    /// Block length with 2^h within a factor 2 of Q^2.
    pub h: u32,
    /// Averaging width delta / (4 Q^2).
    pub beta: f64,
}

impl BoundParams {
    pub fn derive(rho: f64, delta: f64, q_scale: u64) -> Result<Self> {
        if !(0.0 < delta && delta < 1.0) {
            return Err(Error::domain(format!("delta must lie in (0,1), got {delta}")));
        }
        if !(0.5..1.0).contains(&rho) {
            return Err(Error::domain(format!("rho must lie in [1/2, 1), got {rho}")));
        }
        if q_scale < 4 {
            return Err(Error::domain("Q must be at least 4"));
        }
        let threshold = (1.0 / delta).ln() / (rho * (1.0 - rho));
        let ell = threshold.floor() as u64 + 1;
        let mut t = (4.0 * threshold).floor() as u64 + 1;
        if t % 2 == 1 {
            t += 1;
        }
        let h = (2.0 * (q_scale as f64).log2()).round() as u32;
        let beta = delta / 4.0 * (q_scale as f64).powi(-2);
        let gamma = std::f64::consts::PI * (1u64 << (h - 1)) as f64 * beta;
        let params = BoundParams {
            delta,
            gamma,
            ell,
            t_holder: t,
            h,
            beta,
        };
        params.validate(rho, q_scale)?;
        Ok(params)
    }

    pub fn validate(&self, rho: f64, q_scale: u64) -> Result<()> {
        let threshold = (1.0 / self.delta).ln() / (rho * (1.0 - rho));
        if (self.ell as f64) <= threshold {
            return Err(Error::domain(format!(
                "ell = {} violates ell > {threshold:.6}",
                self.ell
            )));
        }
        if self.t_holder % 2 != 0 || (self.t_holder as f64) <= 4.0 * threshold {
            return Err(Error::domain(format!(
                "t = {} must be even and exceed {:.6}",
                self.t_holder,
                4.0 * threshold
            )));
        }
        if self.gamma >= 0.1 {
            return Err(Error::domain(format!(
                "gamma = {} violates the gamma < 1/10 regime",
                self.gamma
            )));
        }
        let q2 = (q_scale as f64).powi(2);
        let ratio = (1u64 << self.h) as f64 / q2;
        if !(0.5..=2.0).contains(&ratio) {
            return Err(Error::domain(format!(
                "2^h = {} is not within a factor 2 of Q^2 = {q2}",
                1u64 << self.h
            )));
        }
        let want_beta = self.delta / 4.0 / q2;
        if (self.beta - want_beta).abs() > 1e-18 * want_beta.max(1.0) {
            return Err(Error::domain("beta must equal delta / (4 Q^2)"));
        }
        Ok(())
    }

    /// The bit count the chain telescopes over: t h / 2.
    pub fn chain_m(&self) -> u32 {
        (self.t_holder as u32) * self.h / 2
    }
}

#[derive(Debug, Clone)]
pub struct ChainReport {
    pub q_scale: u64,
    pub delta: f64,
    pub t_holder: u64,
    pub h: u32,
    pub m: u32,
    pub beta: f64,
    pub moduli: Vec<u64>,
    /// True sum of |R_q| over odd squarefree q in (Q, 2Q].
    pub true_sum: f64,
    /// The Holder-telescoped display: (1/Q) sum_q sum_lambda prod_{j<h} |f|^(t/2).
    pub holder_value: f64,
    /// After the single-factor bound: (1/Q) sum_q sum_lambda prod_{j<h} (1-(1-delta)sin^2).
    pub lemma3_value: f64,
    /// The averaged closed-form bound (4/delta) Q ((1+3 delta)/2)^h.
    pub averaged_bound: f64,
    pub ordering_true_le_holder: bool,
    pub ordering_holder_le_lemma3: bool,
    pub ordering_lemma3_le_averaged: bool,
    /// Whether the final bound beats Q^(-1/2) at this scale.
    pub final_comparison: bool,
}

/// Computes every displayed quantity of the chain at scale Q and checks
/// that each step is an upper bound of the previous one. The averaging
/// step is evaluated through its closed form rather than re-derived.
pub fn holder_chain_diagnostic(
    meas: &BiasedBitMeasure,
    q_scale: u64,
    params: &BoundParams,
    precision_bits: usize,
) -> Result<ChainReport> {
    params.validate(meas.rho_f64(), q_scale)?;
    let m = params.chain_m();
    if meas.m() != m {
        return Err(Error::domain(format!(
            "chain needs m = t h / 2 = {m}, measure has m = {}",
            meas.m()
        )));
    }
    let rho = meas.rho_f64();
    let delta = params.delta;
    let h = params.h;
    let t = params.t_holder;
    let moduli = arith::odd_squarefree_in(q_scale + 1, 2 * q_scale);

    let per_q: Vec<(f64, f64, f64)> = moduli
        .par_iter()
        .map(|&q| {
            let est = expsum::remainder_term(q, meas, precision_bits)?;
            // window products over j < h for every lambda, in f64
            let mut holder_sum = 0.0f64;
            let mut lemma3_sum = 0.0f64;
            for lambda in 1..q {
                let mut ln_prod = 0.0f64;
                let mut bound_prod = 1.0f64;
                let mut a = lambda;
                for _ in 0..h {
                    let s = (std::f64::consts::PI * a as f64 / q as f64).sin();
                    let mag2 = 1.0 - 4.0 * rho * (1.0 - rho) * s * s;
                    ln_prod += mag2.ln();
                    bound_prod *= 1.0 - (1.0 - delta) * s * s;
                    a = (a * 2) % q;
                }
                // |f|^(t/2) over the window = exp((t/4) sum ln mag2)
                holder_sum += (t as f64 / 4.0 * ln_prod).exp();
                lemma3_sum += bound_prod;
            }
            Ok((est.abs_value, holder_sum, lemma3_sum))
        })
        .collect::<Result<Vec<_>>>()?;

    let true_sum: f64 = per_q.iter().map(|r| r.0).sum();
    let holder_value: f64 = per_q.iter().map(|r| r.1).sum::<f64>() / q_scale as f64;
    let lemma3_value: f64 = per_q.iter().map(|r| r.2).sum::<f64>() / q_scale as f64;
    let averaged_bound =
        4.0 / delta * q_scale as f64 * ((1.0 + 3.0 * delta) / 2.0).powi(h as i32);

    const REL_SLACK: f64 = 1e-9;
    Ok(ChainReport {
        q_scale,
        delta,
        t_holder: t,
        h,
        m,
        beta: params.beta,
        moduli,
        true_sum,
        holder_value,
        lemma3_value,
        averaged_bound,
        ordering_true_le_holder: true_sum <= holder_value * (1.0 + REL_SLACK),
        ordering_holder_le_lemma3: holder_value <= lemma3_value * (1.0 + REL_SLACK),
        ordering_lemma3_le_averaged: lemma3_value <= averaged_bound * (1.0 + REL_SLACK),
        final_comparison: averaged_bound < (q_scale as f64).powf(-0.5),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ProbValue;
    use num::BigRational;

    fn meas(m: u32, num: i64, den: i64) -> BiasedBitMeasure {
        BiasedBitMeasure::new(m, ProbValue::exact_ratio(num, den).unwrap()).unwrap()
    }

    #[test]
    fn sweep_single_modulus_uniform() {
        let report = sweep_remainders(&meas(2, 1, 2), 3, 128).unwrap();
        assert_eq!(report.records.len(), 1);
        assert!((report.cumulative_sum - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn sweep_excludes_squarefull_and_even() {
        let report = sweep_remainders(&meas(4, 3, 4), 9, 128).unwrap();
        let qs: Vec<u64> = report.records.iter().map(|r| r.q).collect();
        assert_eq!(qs, vec![3, 5, 7]);
        assert!(report.records.iter().all(|r| r.squarefree));
    }

    #[test]
    fn sweep_cumulative_is_nondecreasing_prefix() {
        let report = sweep_remainders(&meas(8, 3, 4), 35, 128).unwrap();
        let mut prev = 0.0;
        for rec in &report.records {
            assert!(rec.cumulative >= prev);
            prev = rec.cumulative;
        }
        assert_eq!(report.cumulative_sum, prev);
    }

    #[test]
    fn sweep_multi_matches_single() {
        let rho = ProbValue::exact_ratio(3, 4).unwrap();
        let multi = sweep_remainders_multi(&rho, &[4, 8], 21, 128).unwrap();
        for report in &multi {
            let single = sweep_remainders(
                &BiasedBitMeasure::new(report.m, rho.clone()).unwrap(),
                21,
                128,
            )
            .unwrap();
            assert_eq!(report.records.len(), single.records.len());
            for (a, b) in report.records.iter().zip(&single.records) {
                assert_eq!(a.abs_rq, b.abs_rq, "m={} q={}", report.m, a.q);
            }
        }
    }

    #[test]
    fn exponent_caps_at_one_when_range_is_exhausted() {
        let rho = ProbValue::exact_ratio(1, 2).unwrap();
        let report = estimate_sieving_exponent(&rho, &[4], 0.99, 64, 128).unwrap();
        assert_eq!(report.rows[0].alpha_hat, 1.0);
        assert!(!report.rows[0].budget_capped);
        assert!(!report.partial);
    }

    #[test]
    fn exponent_uniform_is_high_at_m20() {
        let rho = ProbValue::exact_ratio(1, 2).unwrap();
        let report = estimate_sieving_exponent(&rho, &[20], 0.1, 1 << 19, 128).unwrap();
        assert!(
            report.rows[0].alpha_hat >= 0.9,
            "alpha_hat = {}",
            report.rows[0].alpha_hat
        );
    }

    #[test]
    fn exponent_rejects_bad_epsilon() {
        let rho = ProbValue::Float(0.75);
        assert!(estimate_sieving_exponent(&rho, &[8], 0.0, 99, 128).is_err());
        assert!(estimate_sieving_exponent(&rho, &[8], 1.0, 99, 128).is_err());
        assert!(estimate_sieving_exponent(&rho, &[8, 8], 0.1, 99, 128).is_err());
    }

    #[test]
    fn exponent_crossing_at_heavy_bias() {
        // rho = 0.95, small m: the mass near 0 makes small-q remainders
        // large, so the sum crosses quickly and alpha-hat is small
        let rho = ProbValue::Float(0.95);
        let report = estimate_sieving_exponent(&rho, &[16], 0.1, 4095, 128).unwrap();
        let row = &report.rows[0];
        assert!(row.crossing_q.is_some());
        assert!(row.alpha_hat < 0.5, "alpha_hat = {}", row.alpha_hat);
    }

    #[test]
    fn pseudoprime_r_at_least_m_counts_everything() {
        let mu = meas(10, 3, 4);
        let report = pseudoprime_mass(&mu, 10, PseudoprimeMethod::ExactSieve).unwrap();
        let all = BigRational::from_integer(1.into())
            - mu.point_mass(0).unwrap().value()
            - mu.point_mass(1).unwrap().value();
        assert_eq!(report.mass_exact.unwrap().value(), &all);
    }

    #[test]
    fn pseudoprime_r1_uniform_counts_primes() {
        // two independent routes to the prime count
        let m = 14u32;
        let mu = meas(m, 1, 2);
        let report = pseudoprime_mass(&mu, 1, PseudoprimeMethod::ExactSieve).unwrap();
        let sieve = SpfSieve::new(1 << m);
        let primes = (2..(1usize << m)).filter(|&n| sieve.is_prime(n)).count();
        let expect = BigRational::new((primes as u64).into(), (1u64 << m).into());
        assert_eq!(report.mass_exact.unwrap().value(), &expect);
    }

    #[test]
    fn pseudoprime_mass_increases_with_r() {
        let mu = meas(14, 3, 5);
        let masses: Vec<f64> = (1..=4)
            .map(|r| {
                pseudoprime_mass(&mu, r, PseudoprimeMethod::ExactSieve)
                    .unwrap()
                    .mass
            })
            .collect();
        for w in masses.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn pseudoprime_sampling_agrees_with_exact() {
        let mu = meas(16, 3, 4);
        let exact = pseudoprime_mass(&mu, 2, PseudoprimeMethod::ExactSieve).unwrap();
        let sampled = pseudoprime_mass(
            &mu,
            2,
            PseudoprimeMethod::Sampling {
                samples: 50_000,
                seed: 11,
            },
        )
        .unwrap();
        let se = sampled.std_error.unwrap();
        assert!(
            (sampled.mass - exact.mass).abs() <= 4.0 * se,
            "sampled {} vs exact {} (se {})",
            sampled.mass,
            exact.mass,
            se
        );
    }

    #[test]
    fn pseudoprime_exact_rejects_large_m() {
        let mu = meas(30, 3, 4);
        assert!(pseudoprime_mass(&mu, 2, PseudoprimeMethod::ExactSieve).is_err());
    }

    #[test]
    fn legendre_empty_sieve() {
        let report = legendre_sieve_demo(&meas(10, 3, 4), 2, 128, 100_000).unwrap();
        assert_eq!(report.main_term, 1.0);
        assert_eq!(report.error_budget, 0.0);
        assert_eq!(report.exact, 1.0);
    }

    #[test]
    fn legendre_single_prime_is_exact() {
        // z = 4: only d in {1, 3}; corrected = 1 - (1/3 + R_3) equals the
        // exact DP value up to float conversion
        let report = legendre_sieve_demo(&meas(12, 3, 4), 4, 128, 100_000).unwrap();
        assert_eq!(report.primes, vec![3]);
        assert!(
            (report.corrected - report.exact).abs() < 1e-12,
            "corrected {} vs exact {}",
            report.corrected,
            report.exact
        );
        // the difference equals |R_3| exactly; 1e-13 covers the f64
        // noise of evaluating both sides
        assert!((report.main_term - report.exact).abs() <= report.error_budget + 1e-13);
    }

    #[test]
    fn legendre_two_primes_within_budget() {
        let report = legendre_sieve_demo(&meas(20, 3, 4), 6, 128, 100_000).unwrap();
        assert_eq!(report.primes, vec![3, 5]);
        assert!(
            (report.main_term - report.exact).abs() <= report.error_budget + 1e-13,
            "main {} exact {} budget {}",
            report.main_term,
            report.exact,
            report.error_budget
        );
    }

    #[test]
    fn legendre_rejects_oversized_products() {
        assert!(legendre_sieve_demo(&meas(10, 3, 4), 30, 128, 100_000).is_err());
    }

    #[test]
    fn lemma3_worked_cases() {
        // theta = 0: both sides 1
        assert!(lemma3_check(0.0, 0.5, 0.5, 4).unwrap());
        // theta = 1/2, rho = 1/2, delta = 1/2, ell = 4: 0 <= 1/2
        assert!(lemma3_check(0.5, 0.5, 0.5, 4).unwrap());
        // regime guard: threshold log(2)/(1/4) = 2.77
        assert!(lemma3_check(0.3, 0.5, 0.5, 2).is_err());
    }

    #[test]
    fn lemma3_random_in_regime_sweep() {
        use rand::Rng;
        let mut gen = rng::stream(31, 0);
        for _ in 0..10_000 {
            let theta: f64 = gen.random::<f64>() * 3.0 - 1.0;
            let delta: f64 = 1e-6 + gen.random::<f64>() * (1.0 - 2e-6);
            let rho: f64 = 0.5 + gen.random::<f64>() * 0.495;
            let threshold = (1.0 / delta).ln() / (rho * (1.0 - rho));
            let ell = (threshold.floor() as u64 + 1)
                + (gen.random::<f64>() * threshold.max(1.0) * 2.0) as u64;
            assert!(
                lemma3_check(theta, delta, rho, ell).unwrap(),
                "theta={theta} delta={delta} rho={rho} ell={ell}"
            );
        }
    }

    #[test]
    fn lemma4_worked_case() {
        // theta = 0, gamma = 0.05, delta = 0.1:
        // rhs - lhs = 0.05 - 0.9 sin^2(0.05) >= 0.005
        let out = lemma4_check(0.0, 0.05, 0.1).unwrap();
        assert!(out.holds);
        assert!((out.rhs - out.lhs) >= 0.005);
        let direct = 0.05 - 0.9 * (0.05f64).sin().powi(2);
        assert!(((out.rhs - out.lhs) - direct).abs() < 1e-15);
    }

    #[test]
    fn lemma4_random_in_regime_sweep_with_sharp_margin() {
        use rand::Rng;
        let mut gen = rng::stream(32, 0);
        for _ in 0..10_000 {
            let theta: f64 = gen.random::<f64>() * 20.0 - 10.0;
            let gamma: f64 = 1e-6 + gen.random::<f64>() * (0.1 - 2e-6);
            let delta: f64 = 1e-6 + gen.random::<f64>() * (1.0 - 2e-6);
            let out = lemma4_check(theta, gamma, delta).unwrap();
            assert!(out.holds, "theta={theta} gamma={gamma} delta={delta}");
            assert!(
                out.margin >= delta * gamma * (1.0 - 1e-12),
                "margin {} vs {} at theta={theta} gamma={gamma} delta={delta}",
                out.margin,
                delta * gamma
            );
        }
    }

    #[test]
    fn lemma4_regime_guard() {
        assert!(lemma4_check(0.3, 0.2, 0.5).is_err());
        assert!(lemma4_check(0.3, 0.0, 0.5).is_err());
        assert!(lemma4_check(0.3, 0.05, 1.0).is_err());
    }

    #[test]
    fn integral_identity_h1_delta0() {
        // int (1 - sin^2 pi x) dx = 1/2
        let r = product_integral_identity(1, 0.0, 1 << 5).unwrap();
        assert!((r.quadrature - 0.5).abs() < 1e-14);
        assert!((r.closed_form - 0.5).abs() < 1e-15);
    }

    #[test]
    fn integral_identity_worked_cases() {
        let r = product_integral_identity(8, 0.1, 1 << 12).unwrap();
        assert!((r.closed_form - 0.65f64.powi(8)).abs() < 1e-15);
        assert!(r.abs_diff <= 1e-10, "diff {}", r.abs_diff);
        let r = product_integral_identity(12, 0.01, 1 << 16).unwrap();
        assert!(r.abs_diff <= 1e-10, "diff {}", r.abs_diff);
    }

    #[test]
    fn integral_rejects_bad_resolution() {
        assert!(product_integral_identity(8, 0.1, 1 << 11).is_err());
        assert!(product_integral_identity(8, 0.1, (1 << 12) + 1).is_err());
        assert!(product_integral_identity(0, 0.1, 1 << 10).is_err());
    }

    #[test]
    fn bound_params_derivation() {
        let p = BoundParams::derive(0.75, 0.05, 64).unwrap();
        assert_eq!(p.t_holder, 64);
        assert_eq!(p.h, 12);
        assert_eq!(p.chain_m(), 384);
        assert!(p.gamma < 0.1);
        // below-threshold t rejected
        let mut bad = p;
        bad.t_holder = 32;
        assert!(bad.validate(0.75, 64).is_err());
    }

    #[test]
    fn chain_orderings_at_small_scale() {
        let params = BoundParams::derive(0.75, 0.05, 16).unwrap();
        let mu = BiasedBitMeasure::new(params.chain_m(), ProbValue::exact_ratio(3, 4).unwrap())
            .unwrap();
        let report = holder_chain_diagnostic(&mu, 16, &params, 128).unwrap();
        assert!(
            report.ordering_true_le_holder,
            "true {} vs holder {}",
            report.true_sum,
            report.holder_value
        );
        assert!(report.ordering_holder_le_lemma3);
        assert!(report.ordering_lemma3_le_averaged);
        // at this tiny scale the final Q^(-1/2) comparison fails, and
        // that is the expected report, not an error
        assert!(!report.final_comparison);
    }

    #[test]
    fn chain_rejects_mismatched_m() {
        let params = BoundParams::derive(0.75, 0.05, 16).unwrap();
        let mu = meas(10, 3, 4);
        assert!(holder_chain_diagnostic(&mu, 16, &params, 128).is_err());
    }
}
