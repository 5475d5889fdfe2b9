//! Command-line surface: one subcommand per experiment, reproducible
//! seeds, machine-readable CSV/JSON output, and exit codes that
//! distinguish precondition violations (2) from exhausted budgets with
//! partial results written (3). Unknown subcommands print usage and
//! exit 1.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::Result;
use crate::exact::ProbValue;
use crate::measure::{BiasedBitMeasure, TernaryCoeffDist};
use crate::report::{self, Envelope};
use crate::{expsum, poly_square, rng, sieve_lab};

#[derive(Parser)]
#[command(
    name = "coinsieve",
    version,
    about = "Laboratory for biased-coin digit measures: remainder terms, exact residue DP, sieving experiments, and ternary square-divisor bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Flags shared by every subcommand. Rational values ("3/4") route to
/// exact arithmetic; decimals ("0.75") route to float paths. The thread
/// count never changes results, only wall time.
#[derive(Args, Clone, Debug)]
struct OutputOpts {
    /// Output format
    #[arg(long, global = false, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed for randomized paths
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mantissa precision (bits) for the float-product engine
    #[arg(long, default_value_t = 128)]
    precision_bits: usize,
    /// Worker threads (0 = machine parallelism)
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Optional timestamp echoed into the JSON metadata; omitted from the
    /// report when absent so identical configs give identical bytes
    #[arg(long)]
    timestamp: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Point mass of the biased measure at n
    Mass {
        /// Probability of a zero digit ("3/4" exact or "0.75" float)
        #[arg(long)]
        rho: String,
        /// Bit count of the support
        #[arg(long)]
        m: u32,
        /// The atom to evaluate
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Draw samples from the measure
    Sample {
        #[arg(long)]
        rho: String,
        #[arg(long)]
        m: u32,
        /// Number of samples
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Remainder term R_q of the residue-class mass identity
    Rq {
        #[arg(long)]
        rho: String,
        #[arg(long)]
        m: u32,
        /// Odd modulus
        #[arg(long)]
        q: u64,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Sweep |R_q| over odd squarefree moduli up to q-max
    Sweep {
        #[arg(long)]
        rho: String,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        q_max: u64,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Estimate the sieving exponent for each m in a list
    Exponent {
        #[arg(long)]
        rho: String,
        /// Comma-separated strictly increasing bit counts
        #[arg(long, value_delimiter = ',')]
        m_list: Vec<u32>,
        /// Mass threshold the cumulative sum may not exceed
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Largest modulus the scan may visit
        #[arg(long, default_value_t = 4095)]
        q_budget: u64,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Mass of r-pseudo-primes (at most r prime factors)
    Pseudoprimes {
        #[arg(long)]
        rho: String,
        #[arg(long)]
        m: u32,
        /// Largest admissible number of prime factors
        #[arg(long)]
        r: u32,
        /// Sample count; switches to the sampling path when given
        #[arg(long)]
        samples: Option<u64>,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Inclusion-exclusion sieve demo over odd primes below z
    Legendre {
        #[arg(long)]
        rho: String,
        #[arg(long)]
        m: u32,
        /// Sieve limit (odd primes below z participate)
        #[arg(long)]
        z: u64,
        /// Largest admissible product of sieve primes
        #[arg(long, default_value_t = 100_000)]
        product_limit: u64,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Random property sweeps of the two bounding inequalities
    Lemmas {
        /// In-regime tuples per lemma
        #[arg(long, default_value_t = 100_000)]
        tuples: u64,
        /// Probe outside the stated regimes and report (not fail on)
        /// violations
        #[arg(long, default_value_t = false)]
        out_of_regime: bool,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Quadrature check of the dyadic product-integral identity
    Integral312 {
        /// Number of dyadic factors
        #[arg(long)]
        h: u32,
        #[arg(long)]
        delta: f64,
        /// Power-of-two quadrature points (default 2^(h+4))
        #[arg(long)]
        quad_points: Option<u64>,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// End-to-end ordering diagnostic of the bounding chain at scale Q
    Chain {
        #[arg(long)]
        rho: String,
        /// Scale Q; moduli in (Q, 2Q] participate
        #[arg(long, name = "Q")]
        q_scale: u64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Solve t^t (1-t)^(1-t) = c on [1/2, 1)
    Entropy {
        /// Right-hand side; accepts "1/sqrt3", a fraction, or a decimal
        #[arg(long)]
        c: String,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Per-digit Holder rate bounds for a coefficient law
    Rate {
        /// Coefficient probabilities "p(-1),p(0),p(+1)"
        #[arg(long, default_value = "1/3,1/3,1/3")]
        dist: String,
        /// Digit scale of the bound
        #[arg(long)]
        r: u32,
        /// Holder exponent; optimized over p when omitted
        #[arg(long)]
        p: Option<f64>,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Square-divisor claim at scale B: exact union vs analytic bound
    Claim {
        #[arg(long, default_value = "1/3,1/3,1/3")]
        dist: String,
        /// Polynomial degree (m+1 coefficients)
        #[arg(long)]
        m: u32,
        #[arg(long)]
        b: u64,
        /// DP operation budget; exceeding it truncates the k range
        #[arg(long, default_value_t = 50_000_000)]
        dp_budget: u64,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Monte-Carlo frequency of square divisors of P(3)
    #[command(name = "mc-squares")]
    McSquares {
        #[arg(long, default_value = "1/3,1/3,1/3")]
        dist: String,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        b: u64,
        #[arg(long)]
        k_max: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[command(flatten)]
        output: OutputOpts,
    },
}

impl Command {
    fn output(&self) -> &OutputOpts {
        match self {
            Command::Mass { output, .. }
            | Command::Sample { output, .. }
            | Command::Rq { output, .. }
            | Command::Sweep { output, .. }
            | Command::Exponent { output, .. }
            | Command::Pseudoprimes { output, .. }
            | Command::Legendre { output, .. }
            | Command::Lemmas { output, .. }
            | Command::Integral312 { output, .. }
            | Command::Chain { output, .. }
            | Command::Entropy { output, .. }
            | Command::Rate { output, .. }
            | Command::Claim { output, .. }
            | Command::McSquares { output, .. } => output,
        }
    }
}

/// Entry point used by the binary: parses std::env args.
pub fn run() -> i32 {
    let args: Vec<std::ffi::OsString> = std::env::args_os().collect();
    run_from(args)
}

/// Testable entry point.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                ErrorKind::InvalidSubcommand => {
                    eprint!("{e}");
                    1
                }
                _ => {
                    eprint!("{e}");
                    2
                }
            };
        }
    };

    let threads = cli.command.output().threads;
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: could not build worker pool: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(outcome) => {
            let opts = cli.command.output();
            match &opts.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, outcome.payload.as_bytes()) {
                        eprintln!("error: writing {}: {e}", path.display());
                        return 2;
                    }
                    println!("{}", outcome.summary);
                }
                None => {
                    print!("{}", outcome.payload);
                }
            }
            if outcome.partial {
                3
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Outcome {
    payload: String,
    summary: String,
    partial: bool,
}

fn parse_rho(s: &str) -> Result<ProbValue> {
    s.parse()
}

fn measure(rho: &str, m: u32) -> Result<(ProbValue, BiasedBitMeasure)> {
    let rho: ProbValue = parse_rho(rho)?;
    let meas = BiasedBitMeasure::new(m, rho.clone())?;
    Ok((rho, meas))
}

fn rho_kind(rho: &ProbValue) -> &'static str {
    if rho.is_exact() {
        "rational"
    } else {
        "float"
    }
}

fn dispatch(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Mass { rho, m, n, output } => {
            let (rho, meas) = measure(rho, *m)?;
            let mass_exact = meas.point_mass(*n)?;
            #[derive(Serialize)]
            struct Config {
                rho: String,
                rho_kind: &'static str,
                m: u32,
                n: u64,
            }
            let config = Config {
                rho: rho.describe(),
                rho_kind: rho_kind(&rho),
                m: *m,
                n: *n,
            };
            let result = report::MassResult {
                n: *n,
                popcount: n.count_ones(),
                mass: mass_exact.to_f64(),
                mass_exact: format!("{mass_exact}"),
                ln_mass: Some(mass_exact.ln()).filter(|x| x.is_finite()),
            };
            let payload = match output.format {
                Format::Json => Envelope::new("mass", false, &config, &result).to_json()?,
                Format::Csv => report::keyvalue_csv(&[
                    ("n", result.n.to_string()),
                    ("popcount", result.popcount.to_string()),
                    ("mass", format!("{}", result.mass)),
                    ("mass_exact", result.mass_exact.clone()),
                    ("ln_mass", report::fmt_opt_f64(result.ln_mass)),
                ])?,
            };
            Ok(Outcome {
                payload,
                summary: format!("mass({}) = {}", n, result.mass_exact),
                partial: false,
            })
        }

        Command::Sample {
            rho,
            m,
            count,
            output,
        } => {
            let (rho, meas) = measure(rho, *m)?;
            let values = meas.sample(output.seed, *count)?;
            let popcount_mean = if values.is_empty() {
                0.0
            } else {
                values.iter().map(|v| v.count_ones() as f64).sum::<f64>() / values.len() as f64
            };
            #[derive(Serialize)]
            struct Config {
                rho: String,
                rho_kind: &'static str,
                m: u32,
                count: usize,
                seed: u64,
            }
            let config = Config {
                rho: rho.describe(),
                rho_kind: rho_kind(&rho),
                m: *m,
                count: *count,
                seed: output.seed,
            };
            let payload = match output.format {
                Format::Json => Envelope::new(
                    "sample",
                    false,
                    config,
                    report::SampleResult {
                        values: values.clone(),
                        popcount_mean,
                    },
                )
                .to_json()?,
                Format::Csv => report::sample_csv(&values)?,
            };
            Ok(Outcome {
                payload,
                summary: format!("{count} samples, popcount mean {popcount_mean}"),
                partial: false,
            })
        }

        Command::Rq { rho, m, q, output } => {
            let (rho, meas) = measure(rho, *m)?;
            let result = if rho.is_exact() {
                let exact = expsum::remainder_term_exact(*q, &meas)?;
                let float = expsum::remainder_term(*q, &meas, output.precision_bits)?;
                report::RqResult::from_both(&exact, &float)
            } else {
                report::RqResult::from_single(&expsum::remainder_term(
                    *q,
                    &meas,
                    output.precision_bits,
                )?)
            };
            #[derive(Serialize)]
            struct Config {
                rho: String,
                rho_kind: &'static str,
                m: u32,
                q: u64,
                precision_bits: usize,
            }
            let config = Config {
                rho: rho.describe(),
                rho_kind: rho_kind(&rho),
                m: *m,
                q: *q,
                precision_bits: output.precision_bits,
            };
            let summary = match &result.exact {
                Some(e) => format!("R_{q} = {} (exact {e})", result.value),
                None => format!("R_{q} = {} +- {}", result.value, result.error_bound),
            };
            let payload = match output.format {
                Format::Json => Envelope::new("rq", false, &config, &result).to_json()?,
                Format::Csv => report::keyvalue_csv(&[
                    ("q", q.to_string()),
                    ("method", result.method.to_string()),
                    ("value", format!("{}", result.value)),
                    ("abs_value", format!("{}", result.abs_value)),
                    ("ln_abs_value", report::fmt_opt_f64(result.ln_abs_value)),
                    ("error_bound", format!("{}", result.error_bound)),
                    ("exact", result.exact.clone().unwrap_or_default()),
                ])?,
            };
            Ok(Outcome {
                payload,
                summary,
                partial: false,
            })
        }

        Command::Sweep {
            rho,
            m,
            q_max,
            output,
        } => {
            let (rho, meas) = measure(rho, *m)?;
            let rep = sieve_lab::sweep_remainders(&meas, *q_max, output.precision_bits)?;
            let result = report::SweepResult::from_report(&rep);
            #[derive(Serialize)]
            struct Config {
                rho: String,
                rho_kind: &'static str,
                m: u32,
                q_max: u64,
                precision_bits: usize,
                epsilon: Option<f64>,
                seed: u64,
                #[serde(skip_serializing_if = "Option::is_none")]
                timestamp: Option<String>,
            }
            let config = Config {
                rho: rho.describe(),
                rho_kind: rho_kind(&rho),
                m: *m,
                q_max: *q_max,
                precision_bits: output.precision_bits,
                epsilon: None,
                seed: output.seed,
                timestamp: output.timestamp.clone(),
            };
            let summary = format!(
                "swept {} moduli up to {}, cumulative {}",
                result.rows.len(),
                q_max,
                result.cumulative_sum
            );
            let payload = match output.format {
                Format::Json => Envelope::new("sweep", false, &config, &result).to_json()?,
                Format::Csv => result.to_csv()?,
            };
            Ok(Outcome {
                payload,
                summary,
                partial: false,
            })
        }

        Command::Exponent {
            rho,
            m_list,
            epsilon,
            q_budget,
            output,
        } => {
            let rho: ProbValue = parse_rho(rho)?;
            let rep = sieve_lab::estimate_sieving_exponent(
                &rho,
                m_list,
                *epsilon,
                *q_budget,
                output.precision_bits,
            )?;
            let partial = rep.partial;
            let result = report::ExponentResult::from_report(&rep);
            #[derive(Serialize)]
            struct Config {
                rho: String,
                rho_kind: &'static str,
                m_list: Vec<u32>,
                epsilon: f64,
                q_budget: u64,
                precision_bits: usize,
            }
            let config = Config {
                rho: rho.describe(),
                rho_kind: rho_kind(&rho),
                m_list: m_list.clone(),
                epsilon: *epsilon,
                q_budget: *q_budget,
                precision_bits: output.precision_bits,
            };
            let summary = result
                .rows
                .iter()
                .map(|r| format!("m={}: alpha={}", r.m, r.alpha_hat))
                .collect::<Vec<_>>()
                .join("; ");
            let payload = match output.format {
                Format::Json => Envelope::new("exponent", partial, &config, &result).to_json()?,
                Format::Csv => result.to_csv()?,
            };
            Ok(Outcome {
                payload,
                summary,
                partial,
            })
        }

        Command::Pseudoprimes {
            rho,
            m,
            r,
            samples,
            output,
        } => {
            let (rho, meas) = measure(rho, *m)?;
            let method = match samples {
                Some(s) => sieve_lab::PseudoprimeMethod::Sampling {
                    samples: *s,
                    seed: output.seed,
                },
                None => sieve_lab::PseudoprimeMethod::ExactSieve,
            };
            let rep = sieve_lab::pseudoprime_mass(&meas, *r, method)?;
            let result = report::PseudoprimeResult::from_report(&rep);
            #[derive(Serialize)]
            struct Config {
                rho: String,
                rho_kind: &'static str,
                m: u32,
                r: u32,
                samples: Option<u64>,
                seed: u64,
            }
            let config = Config {
                rho: rho.describe(),
                rho_kind: rho_kind(&rho),
                m: *m,
                r: *r,
                samples: *samples,
                seed: output.seed,
            };
            let summary = format!(
                "mu(P_{r}) = {} ({}), mass*log N = {}",
                result.mass, result.method, result.mass_times_log_n
            );
            let payload = match output.format {
                Format::Json => Envelope::new("pseudoprimes", false, &config, &result).to_json()?,
                Format::Csv => report::keyvalue_csv(&[
                    ("r", result.r.to_string()),
                    ("method", result.method.to_string()),
                    ("mass", format!("{}", result.mass)),
                    ("mass_exact", result.mass_exact.clone().unwrap_or_default()),
                    (
                        "std_error",
                        result
                            .std_error
                            .map(|x| format!("{x}"))
                            .unwrap_or_default(),
                    ),
                    ("mass_times_log_n", format!("{}", result.mass_times_log_n)),
                ])?,
            };
            Ok(Outcome {
                payload,
                summary,
                partial: false,
            })
        }

        Command::Legendre {
            rho,
            m,
            z,
            product_limit,
            output,
        } => {
            let (rho, meas) = measure(rho, *m)?;
            let rep =
                sieve_lab::legendre_sieve_demo(&meas, *z, output.precision_bits, *product_limit)?;
            let result = report::LegendreResult::from_report(&rep);
            #[derive(Serialize)]
            struct Config {
                rho: String,
                rho_kind: &'static str,
                m: u32,
                z: u64,
                product_limit: u64,
                precision_bits: usize,
            }
            let config = Config {
                rho: rho.describe(),
                rho_kind: rho_kind(&rho),
                m: *m,
                z: *z,
                product_limit: *product_limit,
                precision_bits: output.precision_bits,
            };
            let summary = format!(
                "estimate {} vs exact {} (budget {})",
                result.main_term, result.exact, result.error_budget
            );
            let payload = match output.format {
                Format::Json => Envelope::new("legendre", false, &config, &result).to_json()?,
                Format::Csv => report::keyvalue_csv(&[
                    ("z", z.to_string()),
                    ("main_term", format!("{}", result.main_term)),
                    ("corrected", format!("{}", result.corrected)),
                    ("error_budget", format!("{}", result.error_budget)),
                    ("exact", format!("{}", result.exact)),
                ])?,
            };
            Ok(Outcome {
                payload,
                summary,
                partial: false,
            })
        }

        Command::Lemmas {
            tuples,
            out_of_regime,
            output,
        } => {
            let result = run_lemma_suites(*tuples, output.seed, *out_of_regime)?;
            #[derive(Serialize)]
            struct Config {
                tuples: u64,
                seed: u64,
                out_of_regime: bool,
            }
            let config = Config {
                tuples: *tuples,
                seed: output.seed,
                out_of_regime: *out_of_regime,
            };
            let summary = format!(
                "{} tuples: lemma3 violations {}, lemma4 violations {}",
                result.tuples, result.lemma3_violations, result.lemma4_violations
            );
            let payload = match output.format {
                Format::Json => Envelope::new("lemmas", false, &config, &result).to_json()?,
                Format::Csv => report::keyvalue_csv(&[
                    ("tuples", result.tuples.to_string()),
                    ("lemma3_violations", result.lemma3_violations.to_string()),
                    ("lemma4_violations", result.lemma4_violations.to_string()),
                    (
                        "lemma4_min_margin_ratio",
                        format!("{}", result.lemma4_min_margin_ratio),
                    ),
                    ("out_of_regime", result.out_of_regime.to_string()),
                ])?,
            };
            Ok(Outcome {
                payload,
                summary,
                partial: false,
            })
        }

        Command::Integral312 {
            h,
            delta,
            quad_points,
            output,
        } => {
            let points = quad_points.unwrap_or_else(|| 1u64 << (h + 4).min(40));
            let rep = sieve_lab::product_integral_identity(*h, *delta, points)?;
            let result = report::IntegralResult::from_report(&rep);
            #[derive(Serialize)]
            struct Config {
                h: u32,
                delta: f64,
                quadrature_points: u64,
            }
            let config = Config {
                h: *h,
                delta: *delta,
                quadrature_points: points,
            };
            let summary = format!(
                "quadrature {} vs closed form {} (diff {})",
                result.quadrature, result.closed_form, result.abs_diff
            );
            let payload = match output.format {
                Format::Json => Envelope::new("integral312", false, &config, &result).to_json()?,
                Format::Csv => report::keyvalue_csv(&[
                    ("h", h.to_string()),
                    ("delta", format!("{delta}")),
                    ("quadrature", format!("{}", result.quadrature)),
                    ("closed_form", format!("{}", result.closed_form)),
                    ("abs_diff", format!("{}", result.abs_diff)),
                ])?,
            };
            Ok(Outcome {
                payload,
                summary,
                partial: false,
            })
        }

        Command::Chain {
            rho,
            q_scale,
            delta,
            output,
        } => {
            let rho_val: ProbValue = parse_rho(rho)?;
            let params = sieve_lab::BoundParams::derive(rho_val.to_f64(), *delta, *q_scale)?;
            let meas = BiasedBitMeasure::new(params.chain_m(), rho_val.clone())?;
            let rep =
                sieve_lab::holder_chain_diagnostic(&meas, *q_scale, &params, output.precision_bits)?;
            let result = report::ChainResult::from_report(&rep);
            #[derive(Serialize)]
            struct Config {
                rho: String,
                rho_kind: &'static str,
                q_scale: u64,
                delta: f64,
                precision_bits: usize,
            }
            let config = Config {
                rho: rho_val.describe(),
                rho_kind: rho_kind(&rho_val),
                q_scale: *q_scale,
                delta: *delta,
                precision_bits: output.precision_bits,
            };
            let summary = format!(
                "true {} <= holder {} <= lemma3 {} <= bound {}: orderings {} {} {}",
                result.true_sum,
                result.holder_value,
                result.lemma3_value,
                result.averaged_bound,
                result.ordering_true_le_holder,
                result.ordering_holder_le_lemma3,
                result.ordering_lemma3_le_averaged
            );
            let payload = match output.format {
                Format::Json => Envelope::new("chain", false, &config, &result).to_json()?,
                Format::Csv => report::keyvalue_csv(&[
                    ("q_scale", q_scale.to_string()),
                    ("t", result.t_holder.to_string()),
                    ("h", result.h.to_string()),
                    ("m", result.m.to_string()),
                    ("true_sum", format!("{}", result.true_sum)),
                    ("holder_value", format!("{}", result.holder_value)),
                    ("lemma3_value", format!("{}", result.lemma3_value)),
                    ("averaged_bound", format!("{}", result.averaged_bound)),
                    (
                        "orderings_hold",
                        (result.ordering_true_le_holder
                            && result.ordering_holder_le_lemma3
                            && result.ordering_lemma3_le_averaged)
                            .to_string(),
                    ),
                    ("final_comparison", result.final_comparison.to_string()),
                ])?,
            };
            Ok(Outcome {
                payload,
                summary,
                partial: false,
            })
        }

        Command::Entropy { c, output } => {
            let c_val = parse_entropy_rhs(c)?;
            let t = poly_square::solve_entropy_threshold(c_val)?;
            let back = t.powf(t) * (1.0 - t).powf(1.0 - t);
            let result = report::EntropyResult {
                t,
                back_substitution_residual: (back - c_val).abs(),
            };
            #[derive(Serialize)]
            struct Config {
                c: String,
                c_value: f64,
            }
            let config = Config {
                c: c.clone(),
                c_value: c_val,
            };
            let summary = format!("t = {t}");
            let payload = match output.format {
                Format::Json => Envelope::new("entropy", false, &config, &result).to_json()?,
                Format::Csv => report::keyvalue_csv(&[
                    ("c", format!("{c_val}")),
                    ("t", format!("{t}")),
                    (
                        "back_substitution_residual",
                        format!("{}", result.back_substitution_residual),
                    ),
                ])?,
            };
            Ok(Outcome {
                payload,
                summary,
                partial: false,
            })
        }

        Command::Rate { dist, r, p, output } => {
            let law = TernaryCoeffDist::parse(dist, 0)?;
            let (bound, optimized) = match p {
                Some(p) => (poly_square::rate_bound(&law, *r, *p)?, false),
                None => (poly_square::optimize_rate(&law, *r)?, true),
            };
            let result = report::RateResult::from_bound(&bound, optimized);
            #[derive(Serialize)]
            struct Config {
                dist: String,
                r: u32,
                p: Option<f64>,
            }
            let config = Config {
                dist: law.describe(),
                r: *r,
                p: *p,
            };
            let summary = format!(
                "per-digit rate {} (two-term {}) at p = {}",
                result.per_digit_rate, result.per_digit_rate_two_term, result.p
            );
            let payload = match output.format {
                Format::Json => Envelope::new("rate", false, &config, &result).to_json()?,
                Format::Csv => report::keyvalue_csv(&[
                    ("r", result.r.to_string()),
                    ("p", format!("{}", result.p)),
                    ("per_digit_rate", format!("{}", result.per_digit_rate)),
                    (
                        "per_digit_rate_two_term",
                        format!("{}", result.per_digit_rate_two_term),
                    ),
                    ("total_bound", format!("{}", result.total_bound)),
                    ("c_exponent", format!("{}", result.c_exponent)),
                ])?,
            };
            Ok(Outcome {
                payload,
                summary,
                partial: false,
            })
        }

        Command::Claim {
            dist,
            m,
            b,
            dp_budget,
            output,
        } => {
            let law = TernaryCoeffDist::parse(dist, *m)?;
            let rep = poly_square::claim_bound(&law, *b, *dp_budget)?;
            let partial = rep.partial;
            let result = report::ClaimResult::from_report(&rep);
            #[derive(Serialize)]
            struct Config {
                dist: String,
                m: u32,
                b: u64,
                dp_budget: u64,
            }
            let config = Config {
                dist: law.describe(),
                m: *m,
                b: *b,
                dp_budget: *dp_budget,
            };
            let summary = format!(
                "r = {}, exact union {} vs bound {} (c = {})",
                result.r, result.exact_union, result.total_bound, result.c_exponent
            );
            let payload = match output.format {
                Format::Json => Envelope::new("claim", partial, &config, &result).to_json()?,
                Format::Csv => report::keyvalue_csv(&[
                    ("b", result.b.to_string()),
                    ("r", result.r.to_string()),
                    ("per_digit_rate", format!("{}", result.per_digit_rate)),
                    ("total_bound", format!("{}", result.total_bound)),
                    ("exact_union", format!("{}", result.exact_union)),
                    (
                        "k_cutoff",
                        result.k_cutoff.map(|k| k.to_string()).unwrap_or_default(),
                    ),
                    ("union_below_bound", result.union_below_bound.to_string()),
                ])?,
            };
            Ok(Outcome {
                payload,
                summary,
                partial,
            })
        }

        Command::McSquares {
            dist,
            m,
            b,
            k_max,
            samples,
            output,
        } => {
            let law = TernaryCoeffDist::parse(dist, *m)?;
            let rep = poly_square::monte_carlo_square_divisor(&law, *b, *k_max, *samples, output.seed)?;
            let result = report::McResult::from_report(&rep);
            #[derive(Serialize)]
            struct Config {
                dist: String,
                m: u32,
                b: u64,
                k_max: u64,
                samples: u64,
                seed: u64,
            }
            let config = Config {
                dist: law.describe(),
                m: *m,
                b: *b,
                k_max: *k_max,
                samples: *samples,
                seed: output.seed,
            };
            let summary = format!("estimate {} +- {}", result.estimate, result.std_error);
            let payload = match output.format {
                Format::Json => Envelope::new("mc-squares", false, &config, &result).to_json()?,
                Format::Csv => result.to_csv(*b, *k_max, output.seed)?,
            };
            Ok(Outcome {
                payload,
                summary,
                partial: false,
            })
        }
    }
}

fn parse_entropy_rhs(s: &str) -> Result<f64> {
    let t = s.trim();
    if t == "1/sqrt3" || t == "1/sqrt(3)" {
        return Ok(1.0 / 3f64.sqrt());
    }
    let v: ProbValue = t.parse()?;
    Ok(v.to_f64())
}

fn run_lemma_suites(tuples: u64, seed: u64, out_of_regime: bool) -> Result<report::LemmaSuiteResult> {
    use rand::Rng;
    let mut gen = rng::stream(seed, 0);
    let mut l3_violations = 0u64;
    let mut l4_violations = 0u64;
    let mut min_ratio = f64::INFINITY;
    for _ in 0..tuples {
        if out_of_regime {
            // probe below the exponent threshold and beyond gamma < 1/10;
            // violations are reported, never fatal
            let theta: f64 = gen.random::<f64>() * 3.0 - 1.0;
            let delta: f64 = 1e-6 + gen.random::<f64>() * (1.0 - 2e-6);
            let rho: f64 = 0.5 + gen.random::<f64>() * 0.495;
            let threshold = (1.0 / delta).ln() / (rho * (1.0 - rho));
            let ell = ((threshold * gen.random::<f64>()).floor() as u64).max(1);
            if !sieve_lab::lemma3_probe(theta, delta, rho, ell) {
                l3_violations += 1;
            }
            let gamma: f64 = 0.1 + gen.random::<f64>() * 2.0;
            let out = sieve_lab::lemma4_probe(theta * 10.0, gamma, delta);
            if !out.holds {
                l4_violations += 1;
            }
        } else {
            let theta: f64 = gen.random::<f64>() * 3.0 - 1.0;
            let delta: f64 = 1e-6 + gen.random::<f64>() * (1.0 - 2e-6);
            let rho: f64 = 0.5 + gen.random::<f64>() * 0.495;
            let threshold = (1.0 / delta).ln() / (rho * (1.0 - rho));
            let ell = (threshold.floor() as u64 + 1)
                + (gen.random::<f64>() * threshold.max(1.0) * 2.0) as u64;
            if !sieve_lab::lemma3_check(theta, delta, rho, ell)? {
                l3_violations += 1;
            }
            let theta4: f64 = gen.random::<f64>() * 20.0 - 10.0;
            let gamma: f64 = 1e-6 + gen.random::<f64>() * (0.1 - 2e-6);
            let delta4: f64 = 1e-6 + gen.random::<f64>() * (1.0 - 2e-6);
            let out = sieve_lab::lemma4_check(theta4, gamma, delta4)?;
            if !out.holds {
                l4_violations += 1;
            }
            min_ratio = min_ratio.min(out.margin / (delta4 * gamma));
        }
    }
    Ok(report::LemmaSuiteResult {
        tuples,
        lemma3_violations: l3_violations,
        lemma4_violations: l4_violations,
        lemma4_min_margin_ratio: if min_ratio.is_finite() { min_ratio } else { 0.0 },
        out_of_regime,
    })
}
