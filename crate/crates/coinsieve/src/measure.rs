//! The biased-coin digit measure on m-bit integers and the ternary
//! coefficient law for random polynomials.
//!
//! The binary measure assigns an integer n with binary digits a_j the
//! mass rho^(m-l) (1-rho)^l where l is the number of one-bits. rho = 1/2
//! is the uniform case; rho -> 1 concentrates mass near 0.

use num::{BigInt, BigRational, One, Signed, ToPrimitive};
use rand::Rng;

use crate::error::{Error, Result};
use crate::exact::{ExactProb, ProbValue};
use crate::rng;

/// The biased-coin measure on {0, ..., 2^m - 1}.
///
/// Invariants: m >= 1 and 1/2 <= rho <= 1. rho = 1 is the degenerate
/// coin, admitted for sampler edge cases only; the dimension formulas
/// reject it.
#[derive(Debug, Clone)]
pub struct BiasedBitMeasure {
    m: u32,
    rho: ProbValue,
}

impl BiasedBitMeasure {
    pub fn new(m: u32, rho: ProbValue) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("bit count m must be positive"));
        }
        let x = rho.to_f64();
        if !(0.5..=1.0).contains(&x) {
            return Err(Error::domain(format!(
                "rho must satisfy 1/2 <= rho <= 1, got {x}"
            )));
        }
        if let ProbValue::Exact(r) = &rho {
            let half = BigRational::new(BigInt::one(), BigInt::from(2));
            if r < &half || r > &BigRational::one() {
                return Err(Error::domain(format!(
                    "rho must satisfy 1/2 <= rho <= 1, got {r}"
                )));
            }
        }
        Ok(BiasedBitMeasure { m, rho })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn rho(&self) -> &ProbValue {
        &self.rho
    }

    pub fn rho_f64(&self) -> f64 {
        self.rho.to_f64()
    }

    /// True when the measure is exactly uniform (rho = 1/2 in either form).
    pub fn is_uniform(&self) -> bool {
        match &self.rho {
            ProbValue::Float(x) => *x == 0.5,
            ProbValue::Exact(r) => *r == BigRational::new(BigInt::one(), BigInt::from(2)),
        }
    }

    pub fn with_m(&self, m: u32) -> Result<Self> {
        Self::new(m, self.rho.clone())
    }

    /// Exact point mass rho^(m-l) (1-rho)^l with l = popcount(n).
    ///
    /// Works for both input forms: a float rho is an exact dyadic
    /// rational and is used as such.
    pub fn point_mass(&self, n: u64) -> Result<ExactProb> {
        self.check_support(n)?;
        let rho = self.rho.to_rational()?;
        let ell = n.count_ones();
        let zero_bits = self.m - ell;
        let one_mass = BigRational::one() - &rho;
        let mass = pow_rational(&rho, zero_bits) * pow_rational(&one_mass, ell);
        ExactProb::new(mass)
    }

    /// Float point mass; same formula evaluated in f64.
    pub fn point_mass_f64(&self, n: u64) -> Result<f64> {
        self.check_support(n)?;
        let rho = self.rho.to_f64();
        let ell = n.count_ones() as i32;
        Ok(rho.powi(self.m as i32 - ell) * (1.0 - rho).powi(ell))
    }

    fn check_support(&self, n: u64) -> Result<()> {
        if self.m > 64 {
            return Err(Error::domain(format!(
                "point mass needs m <= 64 to address atoms, got m={}",
                self.m
            )));
        }
        if self.m < 64 && n >> self.m != 0 {
            return Err(Error::domain(format!(
                "n={n} is outside the support 0..2^{}",
                self.m
            )));
        }
        Ok(())
    }

    /// Draws `count` integers; digit j is zero with probability rho,
    /// independently. The stream is a pure function of the seed.
    pub fn sample(&self, seed: u64, count: usize) -> Result<Vec<u64>> {
        if self.m > 64 {
            return Err(Error::domain("sampling needs m <= 64"));
        }
        let rho = self.rho.to_f64();
        let mut gen = rng::stream(seed, 0);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let mut n = 0u64;
            for j in 0..self.m {
                let u: f64 = gen.random();
                if u >= rho {
                    n |= 1u64 << j;
                }
            }
            out.push(n);
        }
        Ok(out)
    }

    /// The dimension formula as printed in the source: (1-rho) log(1/(1-rho)),
    /// natural log. Rejects rho = 1.
    pub fn paper_dimension(&self) -> Result<f64> {
        let rho = self.rho.to_f64();
        if rho >= 1.0 {
            return Err(Error::domain("dimension is undefined at rho = 1"));
        }
        Ok((1.0 - rho) * (1.0 / (1.0 - rho)).ln())
    }

    /// Standard base-2 digit entropy (rho log 1/rho + (1-rho) log 1/(1-rho)) / log 2.
    /// Equals 1 at rho = 1/2. Rejects rho = 1.
    pub fn digit_entropy_dimension(&self) -> Result<f64> {
        let rho = self.rho.to_f64();
        if rho >= 1.0 {
            return Err(Error::domain("dimension is undefined at rho = 1"));
        }
        let h = rho * (1.0 / rho).ln() + (1.0 - rho) * (1.0 / (1.0 - rho)).ln();
        Ok(h / std::f64::consts::LN_2)
    }
}

fn pow_rational(x: &BigRational, e: u32) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// The coefficient law (rho_minus, rho_zero, rho_plus) on {-1, 0, +1} for
/// a random polynomial with m+1 coefficients.
#[derive(Debug, Clone)]
pub struct TernaryCoeffDist {
    probs: TernaryProbs,
    m: u32,
}

#[derive(Debug, Clone)]
pub enum TernaryProbs {
    Exact([BigRational; 3]),
    Float([f64; 3]),
}

impl TernaryCoeffDist {
    /// Probabilities ordered (P[xi = -1], P[xi = 0], P[xi = +1]).
    pub fn new(probs: TernaryProbs, m: u32) -> Result<Self> {
        match &probs {
            TernaryProbs::Exact(ps) => {
                let sum: BigRational = ps.iter().sum();
                if !sum.is_one() {
                    return Err(Error::domain(format!(
                        "exact coefficient probabilities must sum to 1, got {sum}"
                    )));
                }
                for p in ps {
                    if p.is_negative() || p > &BigRational::one() {
                        return Err(Error::domain(format!("probability {p} out of [0,1]")));
                    }
                }
            }
            TernaryProbs::Float(ps) => {
                let sum: f64 = ps.iter().sum();
                if (sum - 1.0).abs() > 1e-15 {
                    return Err(Error::domain(format!(
                        "float coefficient probabilities must sum to 1 within 1e-15, got {sum}"
                    )));
                }
                for p in ps {
                    if !(0.0..=1.0).contains(p) {
                        return Err(Error::domain(format!("probability {p} out of [0,1]")));
                    }
                }
            }
        }
        Ok(TernaryCoeffDist { probs, m })
    }

    pub fn exact_thirds(m: u32) -> Self {
        let third = BigRational::new(BigInt::one(), BigInt::from(3));
        TernaryCoeffDist {
            probs: TernaryProbs::Exact([third.clone(), third.clone(), third]),
            m,
        }
    }

    /// Parses "a/b,c/d,e/f" (exact) or "x,y,z" (float); mixed forms are
    /// rejected so the arithmetic path is always explicit.
    pub fn parse(spec: &str, m: u32) -> Result<Self> {
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::domain(format!(
                "coefficient law needs three comma-separated probabilities, got {spec:?}"
            )));
        }
        let vals: Vec<ProbValue> = parts
            .iter()
            .map(|p| p.parse())
            .collect::<Result<Vec<_>>>()?;
        let all_exact = vals.iter().all(ProbValue::is_exact);
        let all_float = vals.iter().all(|v| !v.is_exact());
        if all_exact {
            let mut it = vals.into_iter().map(|v| match v {
                ProbValue::Exact(r) => r,
                ProbValue::Float(_) => unreachable!(),
            });
            let ps = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
            Self::new(TernaryProbs::Exact(ps), m)
        } else if all_float {
            let ps = [vals[0].to_f64(), vals[1].to_f64(), vals[2].to_f64()];
            Self::new(TernaryProbs::Float(ps), m)
        } else {
            Err(Error::domain(
                "mixed rational/decimal coefficient probabilities; pick one form",
            ))
        }
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn with_degree(&self, m: u32) -> Self {
        TernaryCoeffDist {
            probs: self.probs.clone(),
            m,
        }
    }

    pub fn probs(&self) -> &TernaryProbs {
        &self.probs
    }

    pub fn probs_f64(&self) -> [f64; 3] {
        match &self.probs {
            TernaryProbs::Exact(ps) => [
                ps[0].to_f64().unwrap_or(0.0),
                ps[1].to_f64().unwrap_or(0.0),
                ps[2].to_f64().unwrap_or(0.0),
            ],
            TernaryProbs::Float(ps) => *ps,
        }
    }

    /// The exact probabilities, required by the dynamic programs.
    pub fn exact_probs(&self) -> Result<[BigRational; 3]> {
        match &self.probs {
            TernaryProbs::Exact(ps) => Ok(ps.clone()),
            TernaryProbs::Float(_) => Err(Error::ExactRequired(
                "this operation needs exact rational coefficient probabilities".into(),
            )),
        }
    }

    /// The derived bias rho = max of the three probabilities.
    pub fn rho_max(&self) -> f64 {
        let ps = self.probs_f64();
        ps[0].max(ps[1]).max(ps[2])
    }

    pub fn describe(&self) -> String {
        match &self.probs {
            TernaryProbs::Exact(ps) => format!("{},{},{}", ps[0], ps[1], ps[2]),
            TernaryProbs::Float(ps) => format!("{},{},{}", ps[0], ps[1], ps[2]),
        }
    }

    /// Draws one coefficient in {-1, 0, +1} from the law.
    pub fn sample_coeff<R: Rng>(&self, gen: &mut R) -> i8 {
        let ps = self.probs_f64();
        let u: f64 = gen.random();
        if u < ps[0] {
            -1
        } else if u < ps[0] + ps[1] {
            0
        } else {
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meas(m: u32, num: i64, den: i64) -> BiasedBitMeasure {
        BiasedBitMeasure::new(m, ProbValue::exact_ratio(num, den).unwrap()).unwrap()
    }

    #[test]
    fn uniform_point_mass_is_constant() {
        let mu = meas(3, 1, 2);
        for n in 0..8 {
            assert_eq!(mu.point_mass(n).unwrap(), ExactProb::from_ratio(1, 8).unwrap());
        }
    }

    #[test]
    fn worked_point_mass_rho_three_quarters() {
        // n = 5 is binary 101: two one-bits, mass (3/4)^1 (1/4)^2 = 3/64
        let mu = meas(3, 3, 4);
        assert_eq!(mu.point_mass(5).unwrap(), ExactProb::from_ratio(3, 64).unwrap());
    }

    #[test]
    fn point_mass_sums_to_one() {
        for (num, den) in [(1i64, 2i64), (3, 4), (9, 10), (5, 7)] {
            let mu = meas(6, num.max(den - num), den); // keep rho >= 1/2
            let total: BigRational = (0..64u64)
                .map(|n| mu.point_mass(n).unwrap().into_value())
                .sum();
            assert!(total.is_one(), "rho={num}/{den}");
        }
    }

    #[test]
    fn point_mass_depends_only_on_popcount() {
        let mu = meas(8, 7, 9);
        let a = mu.point_mass(0b10010010).unwrap();
        let b = mu.point_mass(0b00000111).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_support_rejected() {
        let mu = meas(3, 1, 2);
        assert!(mu.point_mass(8).is_err());
        assert!(mu.point_mass(7).is_ok());
    }

    #[test]
    fn rho_range_enforced() {
        assert!(BiasedBitMeasure::new(3, ProbValue::Float(0.4)).is_err());
        assert!(BiasedBitMeasure::new(3, ProbValue::Float(1.1)).is_err());
        assert!(BiasedBitMeasure::new(3, ProbValue::Float(1.0)).is_ok());
        assert!(BiasedBitMeasure::new(0, ProbValue::Float(0.5)).is_err());
    }

    #[test]
    fn degenerate_coin_samples_all_zero() {
        let mu = BiasedBitMeasure::new(10, ProbValue::Float(1.0)).unwrap();
        let xs = mu.sample(123, 1000).unwrap();
        assert!(xs.iter().all(|&x| x == 0));
    }

    #[test]
    fn uniform_popcount_mean_within_4_sigma() {
        let m = 16u32;
        let n_samples = 100_000usize;
        let mu = meas(m, 1, 2);
        let xs = mu.sample(42, n_samples).unwrap();
        let mean: f64 =
            xs.iter().map(|&x| x.count_ones() as f64).sum::<f64>() / n_samples as f64;
        let sigma = ((m as f64) / 4.0 / n_samples as f64).sqrt();
        assert!(
            (mean - m as f64 / 2.0).abs() <= 4.0 * sigma,
            "mean {mean} vs {} +- {}",
            m as f64 / 2.0,
            4.0 * sigma
        );
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mu = meas(20, 3, 4);
        assert_eq!(mu.sample(9, 100).unwrap(), mu.sample(9, 100).unwrap());
        assert_ne!(mu.sample(9, 100).unwrap(), mu.sample(10, 100).unwrap());
    }

    #[test]
    fn dimensions_at_uniform() {
        let mu = meas(4, 1, 2);
        assert!((mu.digit_entropy_dimension().unwrap() - 1.0).abs() < 1e-15);
        let want = 0.5 * std::f64::consts::LN_2;
        assert!((mu.paper_dimension().unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn dimensions_decrease_toward_degenerate() {
        // the full digit entropy decreases on the whole grid; the
        // one-term formula peaks at rho = 1 - 1/e and decreases past it
        let grid = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95];
        let mut prev_entropy = f64::INFINITY;
        for &rho in &grid {
            let mu = BiasedBitMeasure::new(4, ProbValue::Float(rho)).unwrap();
            let h = mu.digit_entropy_dimension().unwrap();
            assert!(h < prev_entropy, "entropy dimension not decreasing at rho={rho}");
            prev_entropy = h;
        }
        let mut prev_paper = f64::INFINITY;
        for &rho in &grid[2..] {
            let mu = BiasedBitMeasure::new(4, ProbValue::Float(rho)).unwrap();
            let p = mu.paper_dimension().unwrap();
            assert!(p < prev_paper, "paper dimension not decreasing at rho={rho}");
            prev_paper = p;
        }
        // both vanish at the degenerate end
        let near_one = BiasedBitMeasure::new(4, ProbValue::Float(0.999999)).unwrap();
        assert!(near_one.paper_dimension().unwrap() < 2e-5);
        assert!(near_one.digit_entropy_dimension().unwrap() < 4e-5);
    }

    #[test]
    fn dimension_rejects_degenerate_coin() {
        let mu = BiasedBitMeasure::new(4, ProbValue::Float(1.0)).unwrap();
        assert!(mu.paper_dimension().is_err());
        assert!(mu.digit_entropy_dimension().is_err());
    }

    #[test]
    fn ternary_dist_validation() {
        assert!(TernaryCoeffDist::parse("1/3,1/3,1/3", 5).is_ok());
        assert!(TernaryCoeffDist::parse("1/3,1/3,1/2", 5).is_err());
        assert!(TernaryCoeffDist::parse("0.2,0.5,0.3", 5).is_ok());
        assert!(TernaryCoeffDist::parse("0.2,0.5,0.4", 5).is_err());
        assert!(TernaryCoeffDist::parse("1/3,0.3,1/3", 5).is_err());
        let d = TernaryCoeffDist::parse("1/5,3/5,1/5", 5).unwrap();
        assert_eq!(d.rho_max(), 0.6);
    }

    #[test]
    fn small_m_empirical_atoms_match_point_mass() {
        // m <= 4: every atom within 5 sigma over 10^6 draws
        let m = 4u32;
        let n_samples = 1_000_000usize;
        let mu = meas(m, 3, 4);
        let xs = mu.sample(7, n_samples).unwrap();
        let mut counts = vec![0u64; 1 << m];
        for &x in &xs {
            counts[x as usize] += 1;
        }
        for n in 0..(1u64 << m) {
            let p = mu.point_mass(n).unwrap().to_f64();
            let expect = p * n_samples as f64;
            let sigma = (n_samples as f64 * p * (1.0 - p)).sqrt();
            let got = counts[n as usize] as f64;
            assert!(
                (got - expect).abs() <= 5.0 * sigma,
                "atom {n}: got {got}, want {expect} +- {}",
                5.0 * sigma
            );
        }
    }
}
