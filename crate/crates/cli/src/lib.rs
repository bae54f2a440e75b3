//! `ulc`: command-line front end.
//!
//! JSON goes to stdout by default (`--emit csv` for CSV), a one-line human
//! summary goes to stderr. Exit codes: 0 success, 1 a verification failed,
//! 2 usage or input error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ulc_core::extremal::EXTREMAL_CSV_HEADER;
use ulc_core::seqcore::format_f64;
use ulc_core::{
    certify_dof, family_profile, find_psi_zero, is_ulc_inf, minimize_prob_at_mean,
    property_suite, run_theorem_trials, validate_log_concave, verify_h_nonneg, Error,
    FamilyProfile, HProfileReport, LogConcavityReport, Pmf, SeqFile, SeqKind, TrialConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ulc", version, about = "Ultra-log-concave sequences and Poisson extremality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct EmitArg {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Emit::Json)]
    emit: Emit,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check log-concavity of a sequence file (and ULC when kind = "pmf").
    Validate {
        /// Sequence JSON: {"offset", "values", "kind"}.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        emit: EmitArg,
    },
    /// Certify degrees of freedom of a positive log-concave sequence.
    Dof {
        #[arg(long)]
        input: PathBuf,
        /// Perturbations sampled per radius.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        emit: EmitArg,
    },
    /// Profile of the truncated exponential family at one point.
    Family {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        l: u64,
        #[arg(long)]
        x: f64,
        /// Points of the h-verification grid.
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[command(flatten)]
        emit: EmitArg,
    },
    /// Minimize P(X = n0) over the extreme-point family on [0, L].
    Extremal {
        /// Integral mean n0.
        #[arg(long)]
        mean: u64,
        /// Support bound L.
        #[arg(long)]
        support: u64,
        #[command(flatten)]
        emit: EmitArg,
    },
    /// Monte-Carlo check of P(X = n0) >= P(Pois(n0) = n0).
    Verify {
        #[arg(long)]
        mean: u64,
        #[arg(long)]
        support: u64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        emit: EmitArg,
    },
    /// Convolution closure, convex domination and entropy suites.
    Suite {
        #[arg(long, default_value_t = 10)]
        support: u64,
        /// Cases per sub-suite.
        #[arg(long, default_value_t = 500)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        emit: EmitArg,
    },
}

/// What a subcommand produced.
struct Outcome {
    stdout: String,
    summary: String,
    passed: bool,
}

#[derive(Debug)]
struct UsageError(String);

impl From<Error> for UsageError {
    fn from(e: Error) -> Self {
        UsageError(e.to_string())
    }
}

type CmdResult = Result<Outcome, UsageError>;

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn csv(header: &str, rows: &[String]) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    s
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn num(x: f64) -> String {
    format_f64(x)
}

fn opt_num(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

fn read_seq_file(path: &Path) -> Result<SeqFile, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    SeqFile::from_json(&text).map_err(|e| {
        let full = e.to_string();
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        let msg = full.strip_suffix(&suffix).unwrap_or(&full);
        UsageError(format!("{}:{}:{}: {msg}", path.display(), e.line(), e.column()))
    })
}

#[derive(Serialize)]
struct ValidateOutput {
    #[serde(flatten)]
    report: LogConcavityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    ulc_inf: Option<bool>,
}

fn cmd_validate(input: &Path, emit: Emit) -> CmdResult {
    let file = read_seq_file(input)?;
    let seq = file.to_seq()?;
    let report = validate_log_concave(&seq)?;
    let ulc_inf = match file.kind {
        SeqKind::Pmf => {
            let pmf = Pmf::new(seq)?;
            Some(is_ulc_inf(&pmf)?)
        }
        SeqKind::Weights => None,
    };
    let stdout = match emit {
        Emit::Json => to_json(&ValidateOutput {
            report: report.clone(),
            ulc_inf,
        }),
        Emit::Csv => csv(
            "is_log_concave,contiguous,worst_index,worst_margin,ulc_inf",
            &[format!(
                "{},{},{},{},{}",
                report.is_log_concave,
                report.contiguous,
                opt(report.worst_index),
                num(report.worst_margin),
                opt(ulc_inf)
            )],
        ),
    };
    let summary = if report.is_log_concave {
        "log-concave".to_string()
    } else {
        format!(
            "not log-concave (worst index {}, margin {})",
            opt(report.worst_index),
            report.worst_margin
        )
    };
    Ok(Outcome {
        stdout,
        summary,
        passed: report.is_log_concave,
    })
}

fn cmd_dof(input: &Path, samples: usize, seed: u64, emit: Emit) -> CmdResult {
    let seq = read_seq_file(input)?.to_seq()?;
    if samples == 0 {
        return Err(UsageError("--samples must be positive".into()));
    }
    match certify_dof(&seq, samples, seed) {
        Ok(cert) => {
            let stdout = match emit {
                Emit::Json => to_json(&cert.to_file()),
                Emit::Csv => csv(
                    "basis_size,epsilon,trials,reflected",
                    &[format!(
                        "{},{},{},{}",
                        cert.size(),
                        num(cert.epsilon),
                        cert.trials_checked,
                        cert.reflected
                    )],
                ),
            };
            Ok(Outcome {
                stdout,
                summary: format!(
                    "{} degrees of freedom certified at epsilon {}",
                    cert.size(),
                    cert.epsilon
                ),
                passed: true,
            })
        }
        Err(e @ (Error::NotCertified(_) | Error::Degenerate(_))) => Ok(Outcome {
            stdout: String::new(),
            summary: e.to_string(),
            passed: false,
        }),
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct FamilyOutput {
    profile: FamilyProfile,
    y0: f64,
    h_at_y0: f64,
    h_check: HProfileReport,
}

fn cmd_family(k: u64, l: u64, x: f64, grid: usize, emit: Emit) -> CmdResult {
    let profile = family_profile(k, l, x)?;
    let y0 = find_psi_zero(k, l)?;
    let h_check = verify_h_nonneg(k, l, grid)?;
    let claim1_ok = profile.claim1_rel >= -1e-12;
    let passed = claim1_ok && h_check.passed;
    let summary = format!(
        "k={k} l={l} x={x}: mean {}, h {}, y0 {y0}, h(y0) {}, {}",
        profile.mean,
        profile.h,
        h_check.h_at_y0,
        if passed { "checks pass" } else { "CHECK FAILED" }
    );
    let stdout = match emit {
        Emit::Json => to_json(&FamilyOutput {
            y0,
            h_at_y0: h_check.h_at_y0,
            profile,
            h_check,
        }),
        Emit::Csv => {
            let p = &profile;
            csv(
                "k,l,x,f,f_prime,f_second,ln_f,mean,h,h_prime,psi,claim1,claim1_rel,y0,h_at_y0,h_check_passed",
                &[format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    p.k,
                    p.l,
                    num(p.x),
                    num(p.f),
                    num(p.f_prime),
                    num(p.f_second),
                    num(p.ln_f),
                    num(p.mean),
                    num(p.h),
                    num(p.h_prime),
                    num(p.psi),
                    num(p.claim1),
                    num(p.claim1_rel),
                    num(y0),
                    num(h_check.h_at_y0),
                    h_check.passed
                )],
            )
        }
    };
    Ok(Outcome {
        stdout,
        summary,
        passed,
    })
}

fn cmd_extremal(mean: u64, support: u64, emit: Emit) -> CmdResult {
    let r = minimize_prob_at_mean(mean, support)?;
    let passed = r.min_prob >= r.poisson_prob - 1e-9;
    let stdout = match emit {
        Emit::Json => to_json(&r),
        Emit::Csv => csv(EXTREMAL_CSV_HEADER, &[r.csv_row()]),
    };
    Ok(Outcome {
        stdout,
        summary: format!(
            "n0={mean} L={support}: min P(X=n0) = {} at (k={}, l={}), Poisson {}, gap {}",
            num(r.min_prob), r.best_k, r.best_l, num(r.poisson_prob), num(r.gap)
        ),
        passed,
    })
}

fn cmd_verify(mean: u64, support: u64, trials: u64, seed: u64, emit: Emit) -> CmdResult {
    let cfg = TrialConfig::new(mean, support, trials, seed)?;
    let r = run_theorem_trials(&cfg)?;
    let stdout = match emit {
        Emit::Json => to_json(&r),
        Emit::Csv => csv(
            "n0,L,trials,seed,evaluated,skipped,violations,poisson_prob,min_observed_prob,min_gap,worst_seed",
            &[format!(
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.n0,
                r.support,
                r.trials,
                r.seed,
                r.evaluated,
                r.skipped,
                r.violations,
                num(r.poisson_prob),
                opt_num(r.min_observed_prob),
                opt_num(r.min_gap),
                opt(r.worst_seed)
            )],
        ),
    };
    Ok(Outcome {
        stdout,
        summary: format!(
            "{} of {} trials evaluated, {} violations, min gap {}",
            r.evaluated,
            r.trials,
            r.violations,
            opt_num(r.min_gap)
        ),
        passed: r.violations == 0,
    })
}

fn cmd_suite(support: u64, cases: u64, seed: u64, emit: Emit) -> CmdResult {
    let r = property_suite(support, cases, seed)?;
    let stdout = match emit {
        Emit::Json => to_json(&r),
        Emit::Csv => csv(
            "subsuite,cases,passed,failed,worst",
            &[("closure", &r.closure), ("domination", &r.domination), ("entropy", &r.entropy)]
                .iter()
                .map(|(name, s)| format!("{name},{},{},{},{}", s.cases, s.passed, s.failed, num(s.worst)))
                .collect::<Vec<_>>(),
        ),
    };
    Ok(Outcome {
        stdout,
        summary: format!(
            "closure {}/{}, domination {}/{}, entropy {}/{}",
            r.closure.passed,
            r.closure.cases,
            r.domination.passed,
            r.domination.cases,
            r.entropy.passed,
            r.entropy.cases
        ),
        passed: r.all_passed(),
    })
}

fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Validate { input, emit } => cmd_validate(&input, emit.emit),
        Command::Dof {
            input,
            samples,
            seed,
            emit,
        } => cmd_dof(&input, samples, seed, emit.emit),
        Command::Family { k, l, x, grid, emit } => cmd_family(k, l, x, grid, emit.emit),
        Command::Extremal {
            mean,
            support,
            emit,
        } => cmd_extremal(mean, support, emit.emit),
        Command::Verify {
            mean,
            support,
            trials,
            seed,
            emit,
        } => cmd_verify(mean, support, trials, seed, emit.emit),
        Command::Suite {
            support,
            trials,
            seed,
            emit,
        } => cmd_suite(support, trials, seed, emit.emit),
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(outcome) => {
            let _ = out.write_all(outcome.stdout.as_bytes());
            let _ = writeln!(err, "{}", outcome.summary);
            if outcome.passed {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
        Err(UsageError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}
