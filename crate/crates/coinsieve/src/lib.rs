//! coinsieve: a computational laboratory for biased-coin digit measures.
//!
//! The crate computes, exactly where possible and at configurable high
//! precision otherwise, the arithmetic statistics of the measure on
//! m-bit integers whose binary digits are independent coins with
//! P[digit = 0] = rho:
//!
//! - point masses, sampling, and the two dimension formulas (`measure`);
//! - the remainder terms R_q of residue-class masses via exponential
//!   sums, orbit-compressed and evaluated in log-polar form (`expsum`);
//! - exact rational residue-class masses by digit DP, for both the
//!   binary measure and the ternary polynomial value P(3) (`residue_dp`);
//! - squarefree-modulus sweeps, sieving-exponent estimation, pseudo-prime
//!   masses, inequality harnesses, and the product-integral identity
//!   (`sieve_lab`);
//! - balanced ternary codes, the entropy-equation threshold, Holder rate
//!   bounds, and square-divisor experiments for random ternary
//!   polynomials (`poly_square`).
//!
//! The command-line surface lives in `cli`; report serialization in
//! `report`.

pub mod arith;
pub mod bigfloat;
pub mod cli;
pub mod error;
pub mod exact;
pub mod expsum;
pub mod measure;
pub mod poly_square;
pub mod report;
pub mod residue_dp;
pub mod rng;
pub mod sieve_lab;

pub use error::{Error, Result};
pub use exact::{ExactProb, ProbValue};
pub use expsum::{remainder_term, remainder_term_exact, RemainderEstimate, RemainderMethod};
pub use measure::{BiasedBitMeasure, TernaryCoeffDist, TernaryProbs};
pub use residue_dp::{residue_mass, ternary_residue_table, ResidueMassTable, TernaryResidueTable};
