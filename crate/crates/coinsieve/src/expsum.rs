//! Remainder terms of the biased measure via exponential sums.
//!
//! For odd q the deviation of mu[q|n] from 1/q is
//!
//!   R_q = (1/q) sum_{lambda=1}^{q-1} prod_{j<m} (rho + (1-rho) e(lambda 2^j / q))
//!
//! with e(t) = exp(2 pi i t). The inner product is evaluated in log-polar
//! form (summed log-magnitudes and phases) so that values far below f64
//! range survive, and is compressed along the orbits of the doubling map
//! x -> 2x mod q: the factor sequence for each lambda is periodic with
//! the cycle length of its orbit, so one pass of prefix sums per cycle
//! serves every lambda and every m.
//!
//! Conjugate symmetry is built in: factor tables for residues above q/2
//! mirror the lower half with negated phase, so the lambda-sum pairs
//! lambda with q - lambda exactly and the result is real by construction.

use num::complex::Complex64;
use num::{BigRational, ToPrimitive};

use astro_float::BigFloat;

use crate::bigfloat::{ln_abs_f64, to_f64, Ctx};
use crate::error::{Error, Result};
use crate::measure::BiasedBitMeasure;
use crate::residue_dp;
use crate::{arith, exact};

/// rho + (1-rho) e(theta), with theta measured in turns.
pub fn unit_factor(theta_turns: f64, rho: f64) -> Complex64 {
    let ang = 2.0 * std::f64::consts::PI * theta_turns;
    Complex64::new(rho + (1.0 - rho) * ang.cos(), (1.0 - rho) * ang.sin())
}

/// Squared magnitude identity: |rho + (1-rho)e(theta)|^2 = 1 - 4 rho (1-rho) sin^2(pi theta).
pub fn unit_factor_mag2(theta_turns: f64, rho: f64) -> f64 {
    let s = (std::f64::consts::PI * theta_turns).sin();
    1.0 - 4.0 * rho * (1.0 - rho) * s * s
}

/// How a remainder value was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemainderMethod {
    FloatProduct,
    ExactRational,
}

impl RemainderMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            RemainderMethod::FloatProduct => "float-product",
            RemainderMethod::ExactRational => "exact-rational",
        }
    }
}

/// A computed R_q with its rigorous forward error bound.
#[derive(Debug, Clone)]
pub struct RemainderEstimate {
    pub q: u64,
    pub m: u32,
    pub rho: f64,
    pub value: f64,
    pub abs_value: f64,
    /// Natural log of |value|, valid far below f64 range; -inf if zero.
    pub ln_abs_value: f64,
    pub method: RemainderMethod,
    /// Forward error bound; 0 for the exact path.
    pub error_bound: f64,
    /// The exact rational value, present on the exact path.
    pub exact: Option<BigRational>,
}

/// Orbits of the doubling map on nonzero residues mod q.
///
/// lambda * 2^d = lambda (mod q) for d the order of 2 mod q; each orbit's
/// cycle length divides d, and the factor products over a full cycle
/// repeat exactly.
#[derive(Debug, Clone)]
pub struct OrbitFactorization {
    q: u64,
    order_of_two: u64,
    cycles: Vec<Vec<u32>>,
    /// residue -> (cycle index, position within cycle); entry 0 unused
    position: Vec<(u32, u32)>,
}

impl OrbitFactorization {
    pub fn new(q: u64) -> Result<Self> {
        if q < 3 || q % 2 == 0 {
            return Err(Error::domain(format!("orbit factorization needs odd q >= 3, got {q}")));
        }
        let d = arith::order_of_two(q)?;
        let qu = q as usize;
        let mut position = vec![(u32::MAX, u32::MAX); qu];
        let mut cycles = Vec::new();
        for start in 1..qu {
            if position[start].0 != u32::MAX {
                continue;
            }
            let mut cyc = Vec::new();
            let mut a = start;
            loop {
                position[a] = (cycles.len() as u32, cyc.len() as u32);
                cyc.push(a as u32);
                a = (a * 2) % qu;
                if a == start {
                    break;
                }
            }
            cycles.push(cyc);
        }
        Ok(OrbitFactorization { q, order_of_two: d, cycles, position })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn order_of_two(&self) -> u64 {
        self.order_of_two
    }

    pub fn cycles(&self) -> &[Vec<u32>] {
        &self.cycles
    }

    pub fn locate(&self, residue: u64) -> (u32, u32) {
        self.position[residue as usize]
    }
}

/// Reusable per-(q, rho, precision) evaluation tables. Building one costs
/// O(q) high-precision transcendental evaluations; each remainder or
/// orbit-magnitude query afterwards is O(q) table arithmetic for any m.
pub struct OrbitEngine {
    q: u64,
    rho: f64,
    precision_bits: usize,
    orbit: OrbitFactorization,
    ctx: Ctx,
    /// per-cycle prefix sums of log|f| and arg f along the cycle
    prefix_logmag: Vec<Vec<BigFloat>>,
    prefix_phase: Vec<Vec<BigFloat>>,
    /// per-cycle summed absolute error bounds for one full cycle
    cycle_eps_logmag: Vec<f64>,
    cycle_eps_phase: Vec<f64>,
}

impl OrbitEngine {
    pub fn new(q: u64, meas: &BiasedBitMeasure, precision_bits: usize) -> Result<Self> {
        let orbit = OrbitFactorization::new(q)?;
        let mut ctx = Ctx::new(precision_bits)?;
        let u = ctx.unit_roundoff();
        let qu = q as usize;

        let rho_rat = meas.rho().to_rational()?;
        let rho_bf = ctx.from_rational(&rho_rat);
        let one = ctx.from_u64(1);
        let one_minus_rho = ctx.sub(&one, &rho_bf);
        let two_pi = ctx.two_pi();
        let q_bf = ctx.from_u64(q);

        // factor tables for residues 1..q-1, mirrored across q/2
        let mut logmag = vec![None::<BigFloat>; qu];
        let mut phase = vec![None::<BigFloat>; qu];
        let mut eps_logmag = vec![0f64; qu];
        let mut eps_phase = vec![0f64; qu];
        for a in 1..=(qu - 1) / 2 {
            let theta = ctx.div(&ctx.from_u64(a as u64), &q_bf);
            let ang = ctx.mul(&theta, &two_pi);
            let s = ctx.sin(&ang);
            let c = ctx.cos(&ang);
            let re = ctx.add(&rho_bf, &ctx.mul(&one_minus_rho, &c));
            let im = ctx.mul(&one_minus_rho, &s);
            let mag2 = ctx.add(&ctx.mul(&re, &re), &ctx.mul(&im, &im));
            let lm = ctx.ln(&mag2);
            let half = ctx.div(&lm, &ctx.from_u64(2));
            let ph = ctx.atan2(&im, &re);

            let mag2_f = to_f64(&mag2).max(f64::MIN_POSITIVE);
            let lm_f = to_f64(&half);
            // argument and rounding errors through sin/cos/ln/atan at unit
            // roundoff u; constants are deliberately generous
            let e_l = u * (64.0 / mag2_f + 2.0 * (1.0 + lm_f.abs()));
            let e_p = u * (64.0 / mag2_f.sqrt() + 16.0);

            logmag[a] = Some(half.clone());
            phase[a] = Some(ph.clone());
            eps_logmag[a] = e_l;
            eps_phase[a] = e_p;
            // mirror: f((q-a)/q) is the conjugate of f(a/q)
            logmag[qu - a] = Some(half);
            phase[qu - a] = Some(ph.neg());
            eps_logmag[qu - a] = e_l;
            eps_phase[qu - a] = e_p;
        }

        // prefix sums along each doubling cycle
        let mut prefix_logmag = Vec::with_capacity(orbit.cycles().len());
        let mut prefix_phase = Vec::with_capacity(orbit.cycles().len());
        let mut cycle_eps_logmag = Vec::with_capacity(orbit.cycles().len());
        let mut cycle_eps_phase = Vec::with_capacity(orbit.cycles().len());
        for cyc in orbit.cycles() {
            let mut pl = Vec::with_capacity(cyc.len() + 1);
            let mut pp = Vec::with_capacity(cyc.len() + 1);
            pl.push(ctx.from_u64(0));
            pp.push(ctx.from_u64(0));
            let mut el = 0.0;
            let mut ep = 0.0;
            for (i, &a) in cyc.iter().enumerate() {
                let a = a as usize;
                pl.push(ctx.add(&pl[i], logmag[a].as_ref().expect("table built")));
                pp.push(ctx.add(&pp[i], phase[a].as_ref().expect("table built")));
                el += eps_logmag[a];
                ep += eps_phase[a];
            }
            prefix_logmag.push(pl);
            prefix_phase.push(pp);
            cycle_eps_logmag.push(el);
            cycle_eps_phase.push(ep);
        }

        Ok(OrbitEngine {
            q,
            rho: meas.rho_f64(),
            precision_bits,
            orbit,
            ctx,
            prefix_logmag,
            prefix_phase,
            cycle_eps_logmag,
            cycle_eps_phase,
        })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn orbit(&self) -> &OrbitFactorization {
        &self.orbit
    }

    /// Log-magnitude and phase of prod_{j<m} f(lambda 2^j / q), plus
    /// absolute error bounds on each.
    fn lambda_log_product(&self, lambda: u64, m: u32) -> (BigFloat, BigFloat, f64, f64) {
        let (ci, pos) = self.orbit.locate(lambda);
        let ci = ci as usize;
        let pos = pos as usize;
        let pl = &self.prefix_logmag[ci];
        let pp = &self.prefix_phase[ci];
        let d = pl.len() - 1;
        let reps = (m as u64) / (d as u64);
        let k = (m as usize) % d;

        let partial = |pfx: &Vec<BigFloat>| -> BigFloat {
            if pos + k <= d {
                self.ctx.sub(&pfx[pos + k], &pfx[pos])
            } else {
                let tail = self.ctx.sub(&pfx[d], &pfx[pos]);
                self.ctx.add(&tail, &pfx[pos + k - d])
            }
        };

        let reps_bf = self.ctx.from_u64(reps);
        let l = self
            .ctx
            .add(&self.ctx.mul(&reps_bf, &pl[d]), &partial(pl));
        let ph = self
            .ctx
            .add(&self.ctx.mul(&reps_bf, &pp[d]), &partial(pp));

        let u = self.ctx.unit_roundoff();
        let span = (reps + 1) as f64;
        let dl = span * self.cycle_eps_logmag[ci] + (m as f64 + 4.0) * u * (1.0 + to_f64(&l).abs());
        let dp = span * self.cycle_eps_phase[ci] + (m as f64 + 4.0) * u * (1.0 + to_f64(&ph).abs());
        (l, ph, dl, dp)
    }

    /// R_q for the given bit count, with a rigorous forward error bound.
    pub fn remainder(&mut self, m: u32) -> RemainderEstimate {
        let q = self.q;
        let half_count = ((q - 1) / 2) as usize;
        let mut logs = Vec::with_capacity(half_count);
        for lambda in 1..=(q - 1) / 2 {
            logs.push(self.lambda_log_product(lambda, m));
        }

        // scale by the largest magnitude so the sum never underflows
        let lmax = logs
            .iter()
            .map(|(l, _, _, _)| l.clone())
            .reduce(|a, b| if a.cmp(&b).unwrap_or(0) >= 0 { a } else { b })
            .expect("q >= 3 has at least one lambda");
        let lmax_f = to_f64(&lmax);

        let two_pi = self.ctx.two_pi();
        let mut s_re = self.ctx.from_u64(0);
        let mut rel_total = 0.0f64; // sum of exp(L - Lmax) in f64
        let mut err_scaled = 0.0f64; // sum of exp(L - Lmax) * per-term error
        let u = self.ctx.unit_roundoff();
        for (l, ph, dl, dp) in &logs {
            let shifted = self.ctx.sub(l, &lmax);
            let r = self.ctx.exp(&shifted);
            let ph_red = self.ctx.rem(ph, &two_pi);
            let c = self.ctx.cos(&ph_red);
            s_re = self.ctx.add(&s_re, &self.ctx.mul(&r, &c));
            let rel = to_f64(&r);
            rel_total += rel;
            err_scaled += rel * (dl + dp + 8.0 * u);
        }

        // value = (2/q) e^{Lmax} S_re  (conjugate pairs double the real part)
        let scale = self
            .ctx
            .div(&self.ctx.from_u64(2), &self.ctx.from_u64(q));
        let value_bf = {
            let e = self.ctx.exp(&lmax);
            self.ctx.mul(&scale, &self.ctx.mul(&e, &s_re))
        };
        let value = to_f64(&value_bf);
        let ln_abs_value = ln_abs_f64(&value_bf);

        let per_q = 2.0 / q as f64;
        let mut error_bound =
            4.0 * per_q * err_scaled * lmax_f.exp() + 2f64.powi(-52) * value.abs() + 5e-324;
        if value == 0.0 || !error_bound.is_finite() || error_bound == 0.0 {
            // everything underflowed f64; bound by the triangle inequality
            let ub_ln = lmax_f + (per_q * rel_total).max(f64::MIN_POSITIVE).ln();
            error_bound = error_bound.max(ub_ln.exp()).max(5e-324);
        }

        RemainderEstimate {
            q,
            m,
            rho: self.rho,
            value,
            abs_value: value.abs(),
            ln_abs_value,
            method: RemainderMethod::FloatProduct,
            error_bound,
            exact: None,
        }
    }

    /// M_q(m) = max over lambda of |prod_{j<m} f(lambda 2^j / q)|,
    /// reported in natural log together with the maximizer.
    pub fn max_orbit_log_magnitude(&self, m: u32) -> (f64, u64) {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 1u64;
        for lambda in 1..=(self.q - 1) / 2 {
            let (l, _, _, _) = self.lambda_log_product(lambda, m);
            let lf = to_f64(&l);
            if lf > best {
                best = lf;
                arg = lambda;
            }
        }
        (best, arg)
    }

    pub fn precision_bits(&self) -> usize {
        self.precision_bits
    }
}

/// R_q by the float product (log-polar, orbit compressed). q = 1 gives the
/// empty sum 0; even q is rejected.
pub fn remainder_term(q: u64, meas: &BiasedBitMeasure, precision_bits: usize) -> Result<RemainderEstimate> {
    if q == 0 || q % 2 == 0 {
        return Err(Error::domain(format!("remainder term needs odd q >= 1, got {q}")));
    }
    if q == 1 {
        return Ok(RemainderEstimate {
            q: 1,
            m: meas.m(),
            rho: meas.rho_f64(),
            value: 0.0,
            abs_value: 0.0,
            ln_abs_value: f64::NEG_INFINITY,
            method: RemainderMethod::FloatProduct,
            error_bound: 0.0,
            exact: None,
        });
    }
    let mut engine = OrbitEngine::new(q, meas, precision_bits)?;
    Ok(engine.remainder(meas.m()))
}

/// R_q on the exact rational path: residue_mass(q)[0] - 1/q, error 0.
pub fn remainder_term_exact(q: u64, meas: &BiasedBitMeasure) -> Result<RemainderEstimate> {
    if q == 0 || q % 2 == 0 {
        return Err(Error::domain(format!("remainder term needs odd q >= 1, got {q}")));
    }
    let table = residue_dp::residue_mass(meas, q)?;
    let one_over_q = BigRational::new(num::BigInt::from(1), num::BigInt::from(q));
    let r = table.masses()[0].value().clone() - one_over_q;
    let value = r.to_f64().unwrap_or(0.0);
    Ok(RemainderEstimate {
        q,
        m: meas.m(),
        rho: meas.rho_f64(),
        value,
        abs_value: value.abs(),
        ln_abs_value: if num::Zero::is_zero(&r) {
            f64::NEG_INFINITY
        } else {
            exact::ln_bigrational(&num::Signed::abs(&r))
        },
        method: RemainderMethod::ExactRational,
        error_bound: 0.0,
        exact: Some(r),
    })
}

/// Maximum inner-product magnitude over lambda, with |R_q| <= (q-1)/q * M_q(m).
#[derive(Debug, Clone, Copy)]
pub struct OrbitMagnitude {
    pub q: u64,
    pub m: u32,
    pub max: f64,
    pub ln_max: f64,
    pub lambda_argmax: u64,
}

pub fn max_orbit_magnitude(q: u64, meas: &BiasedBitMeasure, precision_bits: usize) -> Result<OrbitMagnitude> {
    max_orbit_magnitude_at(q, meas, meas.m(), precision_bits)
}

/// Same, with an explicit bit count (m = 0 gives the empty product 1).
pub fn max_orbit_magnitude_at(
    q: u64,
    meas: &BiasedBitMeasure,
    m: u32,
    precision_bits: usize,
) -> Result<OrbitMagnitude> {
    if q < 3 || q % 2 == 0 {
        return Err(Error::domain(format!("orbit magnitude needs odd q >= 3, got {q}")));
    }
    let engine = OrbitEngine::new(q, meas, precision_bits)?;
    let (ln_max, lambda_argmax) = engine.max_orbit_log_magnitude(m);
    Ok(OrbitMagnitude {
        q,
        m,
        max: ln_max.exp(),
        ln_max,
        lambda_argmax,
    })
}

/// max over j < window_len of sin^2(pi lambda 2^j / q).
pub fn window_max_sin2(q: u64, lambda: u64, window_len: u32) -> Result<f64> {
    if q < 3 || q % 2 == 0 {
        return Err(Error::domain(format!("window bound needs odd q >= 3, got {q}")));
    }
    if window_len == 0 {
        return Err(Error::domain("window length must be >= 1"));
    }
    if lambda % q == 0 {
        return Err(Error::domain("lambda must be nonzero mod q"));
    }
    let mut a = lambda % q;
    let mut best = 0.0f64;
    for _ in 0..window_len {
        let s = (std::f64::consts::PI * a as f64 / q as f64).sin();
        best = best.max(s * s);
        a = (a * 2) % q;
    }
    Ok(best)
}

/// One row of the small-q decay diagnostic.
#[derive(Debug, Clone)]
pub struct DecayRow {
    pub m: u32,
    pub abs_rq: f64,
    pub ln_abs_rq: f64,
    pub error_bound: f64,
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    pub q: u64,
    pub rho: f64,
    pub rows: Vec<DecayRow>,
    /// Least-squares decay rate of ln|R_q| per bit (positive = decaying).
    pub fitted_rate: Option<f64>,
}

/// |R_q| across a list of bit counts, with the fitted exponential decay
/// rate in m. Diagnostic for the small-q regime log q <= sqrt(m log 2).
pub fn small_q_decay_check(
    q: u64,
    meas: &BiasedBitMeasure,
    m_list: &[u32],
    precision_bits: usize,
) -> Result<DecayReport> {
    if q < 3 || q % 2 == 0 {
        return Err(Error::domain(format!("decay check needs odd q >= 3, got {q}")));
    }
    if m_list.is_empty() {
        return Err(Error::domain("decay check needs at least one m"));
    }
    let m_min = *m_list.iter().min().expect("nonempty");
    let regime = (m_min as f64 * std::f64::consts::LN_2).sqrt();
    if (q as f64).ln() > regime {
        return Err(Error::domain(format!(
            "small-q regime needs ln q <= sqrt(m ln 2): ln {q} = {:.3} > {regime:.3}",
            (q as f64).ln()
        )));
    }
    let mut engine = OrbitEngine::new(q, meas, precision_bits)?;
    let rows: Vec<DecayRow> = m_list
        .iter()
        .map(|&m| {
            let est = engine.remainder(m);
            DecayRow {
                m,
                abs_rq: est.abs_value,
                ln_abs_rq: est.ln_abs_value,
                error_bound: est.error_bound,
            }
        })
        .collect();
    // least-squares slope of ln |R_q| against m
    let fitted_rate = if rows.len() >= 2 && rows.iter().all(|r| r.ln_abs_rq.is_finite()) {
        let n = rows.len() as f64;
        let sx: f64 = rows.iter().map(|r| r.m as f64).sum();
        let sy: f64 = rows.iter().map(|r| r.ln_abs_rq).sum();
        let sxx: f64 = rows.iter().map(|r| (r.m as f64) * (r.m as f64)).sum();
        let sxy: f64 = rows.iter().map(|r| (r.m as f64) * r.ln_abs_rq).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() > 0.0 {
            Some(-(n * sxy - sx * sy) / denom)
        } else {
            None
        }
    } else {
        None
    };
    Ok(DecayReport {
        q,
        rho: meas.rho_f64(),
        rows,
        fitted_rate,
    })
}

/// Exact uniform-measure remainder: for rho = 1/2 the measure is counting
/// measure and R_q = (q ceil(N/q) - N) / (q N) with N = 2^m.
pub fn uniform_remainder_exact(q: u64, m: u32) -> BigRational {
    use num::BigInt;
    let n = BigInt::from(1) << m;
    let qb = BigInt::from(q);
    let count = (&n + &qb - 1) / &qb; // multiples of q in [0, N-1]
    BigRational::new(count * &qb - &n, qb * n)
}
