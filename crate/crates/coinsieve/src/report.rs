//! Machine-readable reports: a schema-versioned JSON envelope shared by
//! every subcommand, and RFC-4180 CSV with a header row and '.' decimal
//! separator. Serialization is fully deterministic: field order is fixed,
//! floats print shortest-round-trip, and non-finite logs become nulls.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expsum::RemainderEstimate;
use crate::poly_square::{ClaimReport, McReport, RateBound};
use crate::sieve_lab::{
    ChainReport, ExponentReport, IntegralReport, LegendreReport, PseudoprimeReport, SweepReport,
};

pub const SCHEMA_TAG: &str = "coinsieve/v1";

/// The envelope every JSON report lives in.
#[derive(Debug, Serialize)]
pub struct Envelope<C: Serialize, R: Serialize> {
    pub schema: &'static str,
    pub command: &'static str,
    pub partial: bool,
    pub config: C,
    pub result: R,
}

impl<C: Serialize, R: Serialize> Envelope<C, R> {
    pub fn new(command: &'static str, partial: bool, config: C, result: R) -> Self {
        Envelope {
            schema: SCHEMA_TAG,
            command,
            partial,
            config,
            result,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Io(format!("json serialization: {e}")))?;
        s.push('\n');
        Ok(s)
    }
}

fn finite_or_none(x: f64) -> Option<f64> {
    if x.is_finite() {
        Some(x)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Result payloads
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct MassResult {
    pub n: u64,
    pub popcount: u32,
    pub mass: f64,
    pub mass_exact: String,
    pub ln_mass: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SampleResult {
    pub values: Vec<u64>,
    pub popcount_mean: f64,
}

#[derive(Debug, Serialize)]
pub struct RqResult {
    pub method: &'static str,
    pub value: f64,
    pub abs_value: f64,
    pub ln_abs_value: Option<f64>,
    pub error_bound: f64,
    /// Exact rational value, present on the exact path.
    pub exact: Option<String>,
    /// Float-product value when both paths ran (rational input).
    pub float_value: Option<f64>,
    pub float_error_bound: Option<f64>,
    /// |float - exact| <= float error bound, when both paths ran.
    pub cross_check_ok: Option<bool>,
}

impl RqResult {
    pub fn from_single(est: &RemainderEstimate) -> Self {
        RqResult {
            method: est.method.as_str(),
            value: est.value,
            abs_value: est.abs_value,
            ln_abs_value: finite_or_none(est.ln_abs_value),
            error_bound: est.error_bound,
            exact: est.exact.as_ref().map(|r| format!("{r}")),
            float_value: None,
            float_error_bound: None,
            cross_check_ok: None,
        }
    }

    pub fn from_both(exact: &RemainderEstimate, float: &RemainderEstimate) -> Self {
        let mut r = Self::from_single(exact);
        r.float_value = Some(float.value);
        r.float_error_bound = Some(float.error_bound);
        r.cross_check_ok = Some((float.value - exact.value).abs() <= float.error_bound);
        r
    }
}

#[derive(Debug, Serialize)]
pub struct SweepRowOut {
    pub q: u64,
    pub ord2: u64,
    pub squarefree: bool,
    pub abs_rq: f64,
    pub ln_abs_rq: Option<f64>,
    pub error_bound: f64,
    pub cumulative: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepResult {
    pub q_min: u64,
    pub q_max: u64,
    pub rows: Vec<SweepRowOut>,
    pub cumulative_sum: f64,
}

impl SweepResult {
    pub fn from_report(rep: &SweepReport) -> Self {
        SweepResult {
            q_min: rep.q_min,
            q_max: rep.q_max,
            rows: rep
                .records
                .iter()
                .map(|r| SweepRowOut {
                    q: r.q,
                    ord2: r.ord2,
                    squarefree: r.squarefree,
                    abs_rq: r.abs_rq,
                    ln_abs_rq: finite_or_none(r.ln_abs_rq),
                    error_bound: r.error_bound,
                    cumulative: r.cumulative,
                })
                .collect(),
            cumulative_sum: rep.cumulative_sum,
        }
    }

    /// The column layout of the sweep CSV: q, ord2, squarefree, abs_Rq,
    /// error_bound, cumulative.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv_writer();
        w.write_record(["q", "ord2", "squarefree", "abs_Rq", "error_bound", "cumulative"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.q.to_string(),
                r.ord2.to_string(),
                r.squarefree.to_string(),
                format!("{}", r.abs_rq),
                format!("{}", r.error_bound),
                format!("{}", r.cumulative),
            ])
            .map_err(csv_err)?;
        }
        finish_csv(w)
    }
}

#[derive(Debug, Serialize)]
pub struct ExponentRowOut {
    pub m: u32,
    pub alpha_hat: f64,
    pub crossing_q: Option<u64>,
    pub cumulative_at_stop: f64,
    pub budget_capped: bool,
}

#[derive(Debug, Serialize)]
pub struct ExponentResult {
    pub rows: Vec<ExponentRowOut>,
}

impl ExponentResult {
    pub fn from_report(rep: &ExponentReport) -> Self {
        ExponentResult {
            rows: rep
                .rows
                .iter()
                .map(|r| ExponentRowOut {
                    m: r.m,
                    alpha_hat: r.alpha_hat,
                    crossing_q: r.crossing_q,
                    cumulative_at_stop: r.cumulative_at_stop,
                    budget_capped: r.budget_capped,
                })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv_writer();
        w.write_record(["m", "alpha_hat", "crossing_q", "cumulative_at_stop", "budget_capped"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.m.to_string(),
                format!("{}", r.alpha_hat),
                r.crossing_q.map(|q| q.to_string()).unwrap_or_default(),
                format!("{}", r.cumulative_at_stop),
                r.budget_capped.to_string(),
            ])
            .map_err(csv_err)?;
        }
        finish_csv(w)
    }
}

#[derive(Debug, Serialize)]
pub struct PseudoprimeResult {
    pub r: u32,
    pub method: &'static str,
    pub mass: f64,
    pub mass_exact: Option<String>,
    pub std_error: Option<f64>,
    pub mass_times_log_n: f64,
}

impl PseudoprimeResult {
    pub fn from_report(rep: &PseudoprimeReport) -> Self {
        PseudoprimeResult {
            r: rep.r,
            method: rep.method,
            mass: rep.mass,
            mass_exact: rep.mass_exact.as_ref().map(|p| format!("{p}")),
            std_error: rep.std_error,
            mass_times_log_n: rep.mass_times_log_n,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct LegendreResult {
    pub primes: Vec<u64>,
    pub main_term: f64,
    pub corrected: f64,
    pub error_budget: f64,
    pub exact: f64,
}

impl LegendreResult {
    pub fn from_report(rep: &LegendreReport) -> Self {
        LegendreResult {
            primes: rep.primes.clone(),
            main_term: rep.main_term,
            corrected: rep.corrected,
            error_budget: rep.error_budget,
            exact: rep.exact,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct LemmaSuiteResult {
    pub tuples: u64,
    pub lemma3_violations: u64,
    pub lemma4_violations: u64,
    /// Smallest observed (rhs - lhs) / (delta gamma) over the lemma-4 sweep.
    pub lemma4_min_margin_ratio: f64,
    pub out_of_regime: bool,
}

#[derive(Debug, Serialize)]
pub struct IntegralResult {
    pub quadrature: f64,
    pub closed_form: f64,
    pub abs_diff: f64,
}

impl IntegralResult {
    pub fn from_report(rep: &IntegralReport) -> Self {
        IntegralResult {
            quadrature: rep.quadrature,
            closed_form: rep.closed_form,
            abs_diff: rep.abs_diff,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ChainResult {
    pub t_holder: u64,
    pub h: u32,
    pub m: u32,
    pub beta: f64,
    pub moduli: Vec<u64>,
    pub true_sum: f64,
    pub holder_value: f64,
    pub lemma3_value: f64,
    pub averaged_bound: f64,
    pub ordering_true_le_holder: bool,
    pub ordering_holder_le_lemma3: bool,
    pub ordering_lemma3_le_averaged: bool,
    pub final_comparison: bool,
}

impl ChainResult {
    pub fn from_report(rep: &ChainReport) -> Self {
        ChainResult {
            t_holder: rep.t_holder,
            h: rep.h,
            m: rep.m,
            beta: rep.beta,
            moduli: rep.moduli.clone(),
            true_sum: rep.true_sum,
            holder_value: rep.holder_value,
            lemma3_value: rep.lemma3_value,
            averaged_bound: rep.averaged_bound,
            ordering_true_le_holder: rep.ordering_true_le_holder,
            ordering_holder_le_lemma3: rep.ordering_holder_le_lemma3,
            ordering_lemma3_le_averaged: rep.ordering_lemma3_le_averaged,
            final_comparison: rep.final_comparison,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EntropyResult {
    pub t: f64,
    pub back_substitution_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct RateResult {
    pub p: f64,
    pub q_conj: f64,
    pub r: u32,
    pub per_digit_rate: f64,
    pub per_digit_rate_two_term: f64,
    pub total_bound: f64,
    pub total_bound_two_term: f64,
    pub c_exponent: f64,
    pub optimized: bool,
}

impl RateResult {
    pub fn from_bound(rb: &RateBound, optimized: bool) -> Self {
        RateResult {
            p: rb.p,
            q_conj: rb.q_conj,
            r: rb.r,
            per_digit_rate: rb.per_digit_rate,
            per_digit_rate_two_term: rb.per_digit_rate_two_term,
            total_bound: rb.total_bound,
            total_bound_two_term: rb.total_bound_two_term,
            c_exponent: -rb.per_digit_rate.log2(),
            optimized,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ClaimResult {
    pub b: u64,
    pub r: u32,
    pub per_digit_rate: f64,
    pub total_bound: f64,
    pub per_digit_rate_two_term: f64,
    pub total_bound_two_term: f64,
    pub c_exponent: f64,
    pub exact_union: f64,
    pub exact_union_rational: String,
    pub k_cutoff: Option<u64>,
    pub union_below_bound: bool,
}

impl ClaimResult {
    pub fn from_report(rep: &ClaimReport) -> Self {
        ClaimResult {
            b: rep.b,
            r: rep.r,
            per_digit_rate: rep.per_digit_rate,
            total_bound: rep.total_bound,
            per_digit_rate_two_term: rep.per_digit_rate_two_term,
            total_bound_two_term: rep.total_bound_two_term,
            c_exponent: rep.c_exponent,
            exact_union: rep.exact_union,
            exact_union_rational: rep.exact_union_rational.clone(),
            k_cutoff: rep.k_cutoff,
            union_below_bound: rep.union_below_bound,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct McResult {
    pub samples: u64,
    pub hits: u64,
    pub estimate: f64,
    pub std_error: f64,
}

impl McResult {
    pub fn from_report(rep: &McReport) -> Self {
        McResult {
            samples: rep.samples,
            hits: rep.hits,
            estimate: rep.estimate,
            std_error: rep.std_error,
        }
    }

    pub fn to_csv(&self, b: u64, k_max: u64, seed: u64) -> Result<String> {
        let mut w = csv_writer();
        w.write_record(["b", "k_max", "samples", "hits", "estimate", "std_error", "seed"])
            .map_err(csv_err)?;
        w.write_record([
            b.to_string(),
            k_max.to_string(),
            self.samples.to_string(),
            self.hits.to_string(),
            format!("{}", self.estimate),
            format!("{}", self.std_error),
            seed.to_string(),
        ])
        .map_err(csv_err)?;
        finish_csv(w)
    }
}

// ---------------------------------------------------------------------------
// Generic key/value CSV for scalar reports
// ---------------------------------------------------------------------------

/// Single-row CSV from (key, value) pairs, for reports that are scalars.
pub fn keyvalue_csv(pairs: &[(&str, String)]) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(pairs.iter().map(|(k, _)| *k)).map_err(csv_err)?;
    w.write_record(pairs.iter().map(|(_, v)| v.as_str()))
        .map_err(csv_err)?;
    finish_csv(w)
}

pub fn sample_csv(values: &[u64]) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(["index", "n", "popcount"]).map_err(csv_err)?;
    for (i, &n) in values.iter().enumerate() {
        w.write_record([i.to_string(), n.to_string(), n.count_ones().to_string()])
            .map_err(csv_err)?;
    }
    finish_csv(w)
}

pub fn fmt_opt_f64(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v}"),
        None => "-inf".to_string(),
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(format!("csv serialization: {e}"))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(format!("csv flush: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(format!("csv utf8: {e}")))
}
