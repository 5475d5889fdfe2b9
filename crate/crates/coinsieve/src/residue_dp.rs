//! Exact dynamic programming over digits.
//!
//! Ground truth beneath every floating path: residue-class masses of the
//! biased binary measure and divisibility probabilities for the random
//! ternary polynomial value P(3), all in exact rational arithmetic. The
//! DP states are residues; weights are integer numerators over a power
//! of the probability denominator, so nothing is ever rounded.

use num::{BigInt, BigRational, Integer, One, Zero};

use crate::error::{Error, Result};
use crate::exact::ExactProb;
use crate::measure::{BiasedBitMeasure, TernaryCoeffDist};

/// Exact masses mu[n = a (mod q)] for all residues a.
#[derive(Debug, Clone)]
pub struct ResidueMassTable {
    q: u64,
    masses: Vec<ExactProb>,
}

impl ResidueMassTable {
    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn masses(&self) -> &[ExactProb] {
        &self.masses
    }

    pub fn mass_of_zero(&self) -> &ExactProb {
        &self.masses[0]
    }
}

/// Exact DP over bits: state is the residue mod q; bit j either keeps the
/// residue (weight rho) or shifts it by 2^j mod q (weight 1-rho).
/// O(m q) exact integer operations.
pub fn residue_mass(meas: &BiasedBitMeasure, q: u64) -> Result<ResidueMassTable> {
    if q == 0 {
        return Err(Error::domain("modulus must be >= 1"));
    }
    let rho = meas.rho().to_rational()?;
    let denom = rho.denom().clone();
    let w_zero = rho.numer().clone();
    let w_one = &denom - &w_zero;
    let qu = q as usize;
    let m = meas.m();

    let mut state = vec![BigInt::zero(); qu];
    state[0] = BigInt::one();
    let mut shift = 1u64 % q; // 2^j mod q
    for _ in 0..m {
        let mut next = vec![BigInt::zero(); qu];
        for (a, v) in state.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            next[a] += v * &w_zero;
            let b = (a + shift as usize) % qu;
            next[b] += v * &w_one;
        }
        state = next;
        shift = (shift * 2) % q;
    }

    let total = pow_bigint(&denom, m);
    let masses = state
        .into_iter()
        .map(|num| ExactProb::new(BigRational::new(num, total.clone())))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidueMassTable { q, masses })
}

fn pow_bigint(base: &BigInt, exp: u32) -> BigInt {
    let mut acc = BigInt::one();
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// Exact distribution of P(3) = sum_j xi_j 3^j modulo M.
#[derive(Debug, Clone)]
pub struct TernaryResidueTable {
    modulus: u64,
    probs: Vec<ExactProb>,
}

impl TernaryResidueTable {
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn probs(&self) -> &[ExactProb] {
        &self.probs
    }

    pub fn prob_of_zero(&self) -> &ExactProb {
        &self.probs[0]
    }
}

/// DP over coefficients j = 0..m with transitions xi in {-1, 0, +1}.
/// O(m M) exact integer operations. Needs exact coefficient probabilities.
pub fn ternary_residue_table(dist: &TernaryCoeffDist, modulus: u64) -> Result<TernaryResidueTable> {
    if modulus == 0 {
        return Err(Error::domain("modulus must be >= 1"));
    }
    let ps = dist.exact_probs()?;
    // common denominator D and integer weights for -1, 0, +1
    let d01 = ps[0].denom().lcm(ps[1].denom());
    let denom = d01.lcm(ps[2].denom());
    let weights: Vec<BigInt> = ps
        .iter()
        .map(|p| p.numer() * (&denom / p.denom()))
        .collect();
    let mu = modulus as usize;
    let steps = dist.degree() + 1; // coefficients xi_0 .. xi_m

    let mut state = vec![BigInt::zero(); mu];
    state[0] = BigInt::one();
    let mut shift = 1u64 % modulus; // 3^j mod M
    for _ in 0..steps {
        let mut next = vec![BigInt::zero(); mu];
        let plus = shift as usize;
        let minus = (mu - plus % mu) % mu;
        for (a, v) in state.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            next[(a + minus) % mu] += v * &weights[0];
            next[a] += v * &weights[1];
            next[(a + plus) % mu] += v * &weights[2];
        }
        state = next;
        shift = (shift as u128 * 3 % modulus as u128) as u64;
    }

    let total = pow_bigint(&denom, steps);
    let probs = state
        .into_iter()
        .map(|num| ExactProb::new(BigRational::new(num, total.clone())))
        .collect::<Result<Vec<_>>>()?;
    Ok(TernaryResidueTable { modulus, probs })
}

/// Union-bound report for the event "some k in [B, k_max] has k^2 | P(3)".
#[derive(Debug, Clone)]
pub struct SquareDivisorReport {
    pub b: u64,
    pub k_max: u64,
    pub degree_m: u32,
    /// P(k^2 | P(3)) for each k, from independent DP tables.
    pub per_k: Vec<(u64, ExactProb)>,
    /// Sum of the per-k probabilities; an upper bound that may exceed 1.
    pub union_bound: BigRational,
    /// The exact event probability by full enumeration, present when
    /// 3^(m+1) <= 3^15.
    pub exact_enumeration: Option<ExactProb>,
}

/// Per-k DP tables plus their union bound; exact enumeration is attached
/// at small degree. P(3) = 0 counts as divisible by every k^2.
pub fn square_divisor_union(
    dist: &TernaryCoeffDist,
    b: u64,
    k_max: u64,
) -> Result<SquareDivisorReport> {
    if b < 2 || k_max < b {
        return Err(Error::domain(format!(
            "square divisor scan needs 2 <= B <= k_max, got B={b}, k_max={k_max}"
        )));
    }
    let mut per_k = Vec::new();
    let mut union_bound = BigRational::zero();
    for k in b..=k_max {
        let table = ternary_residue_table(dist, k * k)?;
        let p = table.prob_of_zero().clone();
        union_bound += p.value();
        per_k.push((k, p));
    }
    let exact_enumeration = if dist.degree() + 1 <= 15 {
        Some(enumerate_square_divisor(dist, b, k_max)?)
    } else {
        None
    };
    Ok(SquareDivisorReport {
        b,
        k_max,
        degree_m: dist.degree(),
        per_k,
        union_bound,
        exact_enumeration,
    })
}

/// Exact probability of the union event by brute-force enumeration over
/// all 3^(m+1) coefficient vectors. Probabilities depend on the vector
/// only through its digit counts, so qualifying vectors are tallied per
/// (count of -1, count of 0) cell and weighted afterwards.
pub fn enumerate_square_divisor(dist: &TernaryCoeffDist, b: u64, k_max: u64) -> Result<ExactProb> {
    let m = dist.degree();
    if m + 1 > 15 {
        return Err(Error::budget(format!(
            "enumeration over 3^{} vectors exceeds the 3^15 ceiling",
            m + 1
        )));
    }
    if b < 2 || k_max < b {
        return Err(Error::domain("needs 2 <= B <= k_max"));
    }
    let coeffs = (m + 1) as usize;
    let squares: Vec<i64> = (b..=k_max).map(|k| (k * k) as i64).collect();

    // cell[c_minus][c_zero] = number of qualifying vectors with those counts
    let mut cells = vec![vec![0u64; coeffs + 1]; coeffs + 1];
    let mut digits = vec![-1i8; coeffs];
    let powers: Vec<i64> = (0..coeffs).map(|j| 3i64.pow(j as u32)).collect();
    let mut value: i64 = -powers.iter().sum::<i64>();

    loop {
        if squares.iter().any(|&s| value % s == 0) {
            let c_minus = digits.iter().filter(|&&d| d == -1).count();
            let c_zero = digits.iter().filter(|&&d| d == 0).count();
            cells[c_minus][c_zero] += 1;
        }
        // odometer increment in {-1, 0, 1}^coeffs
        let mut j = 0;
        loop {
            if j == coeffs {
                // wrapped: enumeration complete
                let ps = dist.exact_probs()?;
                let mut total = BigRational::zero();
                for (c_minus, row) in cells.iter().enumerate() {
                    for (c_zero, &count) in row.iter().enumerate() {
                        if count == 0 {
                            continue;
                        }
                        let c_plus = coeffs - c_minus - c_zero;
                        let w = pow_rational(&ps[0], c_minus as u32)
                            * pow_rational(&ps[1], c_zero as u32)
                            * pow_rational(&ps[2], c_plus as u32);
                        total += w * BigRational::from(BigInt::from(count));
                    }
                }
                return ExactProb::new(total);
            }
            if digits[j] < 1 {
                digits[j] += 1;
                value += powers[j];
                break;
            }
            digits[j] = -1;
            value -= 2 * powers[j];
            j += 1;
        }
    }
}

fn pow_rational(x: &BigRational, e: u32) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// Exact probability of the union event by inclusion-exclusion over
/// subsets of [B, k_max], each joint event via one DP mod the lcm of the
/// squares. Rejected when the subset count or an lcm modulus explodes.
pub fn square_divisor_inclusion_exclusion(
    dist: &TernaryCoeffDist,
    b: u64,
    k_max: u64,
) -> Result<ExactProb> {
    if b < 2 || k_max < b {
        return Err(Error::domain("needs 2 <= B <= k_max"));
    }
    let ks: Vec<u64> = (b..=k_max).collect();
    if ks.len() > 16 {
        return Err(Error::budget(format!(
            "inclusion-exclusion over {} moduli needs 2^{} subsets",
            ks.len(),
            ks.len()
        )));
    }
    const LCM_LIMIT: u64 = 1_000_000;
    let mut total = BigRational::zero();
    for mask in 1u32..(1 << ks.len()) {
        let mut l = 1u64;
        for (i, &k) in ks.iter().enumerate() {
            if mask >> i & 1 == 1 {
                let sq = k * k;
                let g = num::integer::gcd(l, sq);
                let next = l / g;
                if next > LCM_LIMIT / sq {
                    return Err(Error::budget(format!(
                        "inclusion-exclusion lcm exceeds {LCM_LIMIT}"
                    )));
                }
                l = next * sq;
            }
        }
        let table = ternary_residue_table(dist, l)?;
        let p = table.prob_of_zero().value().clone();
        if mask.count_ones() % 2 == 1 {
            total += p;
        } else {
            total -= p;
        }
    }
    ExactProb::new(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ProbValue;
    use crate::measure::TernaryProbs;

    fn meas(m: u32, num: i64, den: i64) -> BiasedBitMeasure {
        BiasedBitMeasure::new(m, ProbValue::exact_ratio(num, den).unwrap()).unwrap()
    }

    fn dist(pm: (i64, i64), p0: (i64, i64), pp: (i64, i64), m: u32) -> TernaryCoeffDist {
        let r = |(n, d): (i64, i64)| BigRational::new(BigInt::from(n), BigInt::from(d));
        TernaryCoeffDist::new(TernaryProbs::Exact([r(pm), r(p0), r(pp)]), m).unwrap()
    }

    #[test]
    fn everything_is_zero_mod_one() {
        let t = residue_mass(&meas(5, 3, 4), 1).unwrap();
        assert_eq!(t.masses().len(), 1);
        assert_eq!(t.masses()[0], ExactProb::one());
    }

    #[test]
    fn worked_uniform_m2_q3() {
        // atoms {0,1,2,3} at mass 1/4 have residues (0,1,2,0) mod 3
        let t = residue_mass(&meas(2, 1, 2), 3).unwrap();
        assert_eq!(t.masses()[0], ExactProb::from_ratio(1, 2).unwrap());
        assert_eq!(t.masses()[1], ExactProb::from_ratio(1, 4).unwrap());
        assert_eq!(t.masses()[2], ExactProb::from_ratio(1, 4).unwrap());
    }

    #[test]
    fn tables_sum_to_one_exactly() {
        for (m, num, den, q) in [(7u32, 3i64, 4i64, 5u64), (12, 9, 10, 7), (20, 1, 2, 9), (9, 5, 7, 12)] {
            let t = residue_mass(&meas(m, num, den), q).unwrap();
            let sum: BigRational = t.masses().iter().map(|p| p.value().clone()).sum();
            assert!(sum.is_one(), "m={m} rho={num}/{den} q={q}");
        }
    }

    #[test]
    fn table_matches_direct_enumeration() {
        // small m: sum point masses by residue directly
        let mu = meas(6, 3, 4);
        let q = 5u64;
        let t = residue_mass(&mu, q).unwrap();
        for a in 0..q {
            let direct: BigRational = (0..(1u64 << 6))
                .filter(|n| n % q == a)
                .map(|n| mu.point_mass(n).unwrap().into_value())
                .sum();
            assert_eq!(t.masses()[a as usize].value(), &direct, "residue {a}");
        }
    }

    #[test]
    fn crt_marginalization_consistency() {
        // aggregating the joint table mod q1 q2 by residue classes must
        // reproduce the single-modulus tables
        let mu = meas(10, 7, 9);
        let (q1, q2) = (3u64, 5u64);
        let joint = residue_mass(&mu, q1 * q2).unwrap();
        for (q, _other) in [(q1, q2), (q2, q1)] {
            let single = residue_mass(&mu, q).unwrap();
            for a in 0..q {
                let agg: BigRational = (0..q1 * q2)
                    .filter(|r| r % q == a)
                    .map(|r| joint.masses()[r as usize].value().clone())
                    .sum();
                assert_eq!(&agg, single.masses()[a as usize].value());
            }
        }
    }

    #[test]
    fn ternary_mod_nine_needs_two_zero_digits() {
        // 9 | P(3) iff xi_0 = xi_1 = 0, since |xi_0 + 3 xi_1| <= 4 < 9
        for m in [1u32, 3, 6] {
            let d = dist((1, 4), (1, 2), (1, 4), m);
            let t = ternary_residue_table(&d, 9).unwrap();
            assert_eq!(t.prob_of_zero(), &ExactProb::from_ratio(1, 4).unwrap());
        }
    }

    #[test]
    fn ternary_mod_four_uniform_m1() {
        // 3 = -1 mod 4, so P(3) = xi_0 - xi_1 in [-2, 2]; divisible iff equal
        let d = TernaryCoeffDist::exact_thirds(1);
        let t = ternary_residue_table(&d, 4).unwrap();
        assert_eq!(t.prob_of_zero(), &ExactProb::from_ratio(1, 3).unwrap());
    }

    #[test]
    fn ternary_mod_two_m0() {
        let d = dist((1, 5), (3, 5), (1, 5), 0);
        let t = ternary_residue_table(&d, 2).unwrap();
        assert_eq!(t.prob_of_zero(), &ExactProb::from_ratio(3, 5).unwrap());
    }

    #[test]
    fn ternary_tables_sum_to_one() {
        for modulus in [2u64, 4, 9, 15, 49] {
            let d = dist((1, 6), (1, 2), (1, 3), 5);
            let t = ternary_residue_table(&d, modulus).unwrap();
            let sum: BigRational = t.probs().iter().map(|p| p.value().clone()).sum();
            assert!(sum.is_one(), "modulus {modulus}");
        }
    }

    #[test]
    fn union_m0_only_zero_divisible_by_four() {
        let d = dist((1, 5), (3, 5), (1, 5), 0);
        let r = square_divisor_union(&d, 2, 2).unwrap();
        assert_eq!(
            r.exact_enumeration.unwrap(),
            ExactProb::from_ratio(3, 5).unwrap()
        );
        assert_eq!(r.union_bound, BigRational::new(BigInt::from(3), BigInt::from(5)));
    }

    #[test]
    fn enumeration_matches_inclusion_exclusion() {
        // the worked m=6 uniform case plus asymmetric laws
        let cases = [
            TernaryCoeffDist::exact_thirds(6),
            dist((1, 4), (1, 2), (1, 4), 6),
            dist((1, 6), (2, 3), (1, 6), 5),
            dist((2, 5), (2, 5), (1, 5), 4),
            dist((1, 10), (7, 10), (1, 5), 6),
        ];
        for d in &cases {
            let by_enum = enumerate_square_divisor(d, 2, 5).unwrap();
            let by_ie = square_divisor_inclusion_exclusion(d, 2, 5).unwrap();
            assert_eq!(by_enum, by_ie, "law {}", d.describe());
        }
    }

    #[test]
    fn big_square_only_catches_zero() {
        // B^2 beyond the value range: only P(3) = 0 qualifies
        let d = TernaryCoeffDist::exact_thirds(4);
        let max_abs = (3i64.pow(5) - 1) / 2; // 121
        let b = 12u64; // b^2 = 144 > 121
        assert!((b * b) as i64 > max_abs);
        let r = square_divisor_union(&d, b, b).unwrap();
        let zero_prob = ternary_residue_table(&d, 3u64.pow(6)).unwrap();
        // mod 3^6 > 2 max|P(3)|, residue 0 is exactly the event P(3) = 0
        assert_eq!(r.exact_enumeration.unwrap().value(), zero_prob.prob_of_zero().value());
    }

    #[test]
    fn union_bound_nonincreasing_in_b() {
        let d = dist((3, 10), (2, 5), (3, 10), 5);
        let mut prev: Option<BigRational> = None;
        for b in 2..=5u64 {
            let r = square_divisor_union(&d, b, 6).unwrap();
            if let Some(p) = prev {
                assert!(r.union_bound <= p, "B={b}");
            }
            prev = Some(r.union_bound);
        }
    }

    #[test]
    fn float_dist_rejected_by_dp() {
        let d = TernaryCoeffDist::new(TernaryProbs::Float([0.25, 0.5, 0.25]), 3).unwrap();
        assert!(ternary_residue_table(&d, 9).is_err());
    }
}
