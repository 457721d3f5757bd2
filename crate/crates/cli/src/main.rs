//! Command-line front end: point-set generation, witness construction, the
//! exact oracle, certificate sweeps, and the Monte Carlo experiment harness.
//!
//! Exit codes: 0 on success, 1 when an invariant or certificate check fails,
//! 2 on configuration, I/O, or resource errors.

use std::fmt;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use stardisc::binomial::{certify_lcoin, certify_lprob, certify_proof_steps};
use stardisc::{
    build_witness, cross_validate, emit, exact_star_discrepancy, generate_uniform, run_experiment,
    tail_scan, verify_trace, BinomialError, CertificateReport, DecisionRule, Emit,
    ExperimentConfig, ExperimentError, GeometryError, OracleError, OutputFormat, OutputSpec,
    PointSet, WitnessError, DEFAULT_BUDGET,
};

#[derive(Parser)]
#[command(
    name = "stardisc",
    version,
    about = "Witness boxes, tail certificates, and Monte Carlo experiments \
             for the star discrepancy of random point sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_rule(s: &str) -> Result<DecisionRule, String> {
    s.parse()
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// Generate a uniform random point set as CSV (one point per row).
    Generate {
        #[arg(long)]
        points: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the witness construction on a point-set CSV and emit the JSON trace.
    Witness {
        input: PathBuf,
        #[arg(long, default_value = "threshold", value_parser = parse_rule)]
        rule: DecisionRule,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact star discrepancy of a point-set CSV (small instances).
    Exact {
        input: PathBuf,
        /// Maximum number of grid evaluations.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify the binomial tail bounds by exact finite sweeps.
    Certify {
        /// Which sweep: coin, prob, steps, or all.
        #[arg(long, default_value = "all")]
        check: String,
        /// Largest n for the fair-coin sweep.
        #[arg(long, default_value_t = 2048)]
        coin_max: u64,
        /// Range for the general lower-tail sweep.
        #[arg(long, default_value_t = 16)]
        prob_min: u64,
        #[arg(long, default_value_t = 1024)]
        prob_max: u64,
        /// Largest n for the proof-step sweep.
        #[arg(long, default_value_t = 4096)]
        steps_max: u64,
        #[arg(long, default_value = "json", value_parser = parse_format)]
        format: OutputFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo witness experiment; flags override config-file values.
    Experiment {
        /// JSON config file with the ExperimentConfig fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_rule)]
        rule: Option<DecisionRule>,
        #[arg(long)]
        workers: Option<usize>,
        /// Factor on 3s/160 defining a tail event.
        #[arg(long)]
        tail_factor: Option<f64>,
        #[arg(long, value_parser = parse_format)]
        format: Option<OutputFormat>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tail-event fractions across dimensions at a fixed N/s ratio.
    Tailscan {
        /// Dimensions to scan, comma separated (at least two).
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        /// Points per dimension: N = ratio * s.
        #[arg(long, default_value_t = 64)]
        ratio: usize,
        #[arg(long, default_value_t = 2000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "threshold", value_parser = parse_rule)]
        rule: DecisionRule,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        tail_factor: Option<f64>,
        #[arg(long, default_value = "json", value_parser = parse_format)]
        format: OutputFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Witness bound against the exact oracle on small instances (dim <= 3).
    Crossval {
        #[arg(long)]
        points: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, default_value = "json", value_parser = parse_format)]
        format: OutputFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Message plus process exit code.
struct CliError {
    message: String,
    code: i32,
}

impl CliError {
    fn violation(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 1,
        }
    }

    fn fatal(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::TraceVerification { .. } => Self::violation(e.to_string()),
            other => Self::fatal(other.to_string()),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        Self::fatal(e.to_string())
    }
}

impl From<WitnessError> for CliError {
    fn from(e: WitnessError) -> Self {
        Self::fatal(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        Self::fatal(e.to_string())
    }
}

impl From<BinomialError> for CliError {
    fn from(e: BinomialError) -> Self {
        Self::fatal(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::fatal(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::fatal(e.to_string())
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}

/// Writes a report to a path (with CSV summary sibling) or to stdout, where
/// the summary follows a `# summary` marker line.
fn write_report<R: Emit>(
    report: &R,
    format: OutputFormat,
    out: Option<&Path>,
) -> Result<(), CliError> {
    match out {
        Some(path) => emit(report, format, path)?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            match format {
                OutputFormat::Json => report.write_json(&mut lock)?,
                OutputFormat::Csv => {
                    report.write_csv(&mut lock)?;
                    if let Some(footer) = report.csv_footer() {
                        writeln!(lock, "\n# summary")?;
                        lock.write_all(footer.as_bytes())?;
                    }
                }
                OutputFormat::PlotData => report.write_plot_data(&mut lock)?,
            }
        }
    }
    Ok(())
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate {
            points,
            dim,
            seed,
            out,
        } => {
            let set = generate_uniform(points, dim, seed)?;
            match out {
                Some(path) => set.save_csv(&path)?,
                None => set.write_csv(&mut io::stdout().lock())?,
            }
            Ok(())
        }

        Command::Witness { input, rule, out } => {
            let set = PointSet::load_csv(&input)?;
            let witness = build_witness(&set, rule)?;
            if !verify_trace(&set, &witness)? {
                return Err(CliError::violation(
                    "witness trace failed verification; the construction violated its guarantees",
                ));
            }
            write_report(&witness, OutputFormat::Json, out.as_deref())?;
            eprintln!(
                "witness: excess {:.4}, k = {}, mode {:?}",
                witness.excess, witness.k, witness.mode
            );
            Ok(())
        }

        Command::Exact { input, budget, out } => {
            let set = PointSet::load_csv(&input)?;
            let result = exact_star_discrepancy(&set, budget)?;
            write_report(&result, OutputFormat::Json, out.as_deref())?;
            eprintln!(
                "exact: D* = {:.6} ({:?} at {} grid evaluations)",
                result.d_star, result.side, result.evaluations
            );
            Ok(())
        }

        Command::Certify {
            check,
            coin_max,
            prob_min,
            prob_max,
            steps_max,
            format,
            out,
        } => certify(
            &check,
            coin_max,
            prob_min,
            prob_max,
            steps_max,
            format,
            out.as_deref(),
        ),

        Command::Experiment {
            config,
            points,
            dim,
            trials,
            seed,
            rule,
            workers,
            tail_factor,
            format,
            out,
        } => {
            let mut cfg = match &config {
                Some(path) => serde_json::from_reader(File::open(path)?)?,
                None => {
                    let (Some(n), Some(s), Some(m)) = (points, dim, trials) else {
                        return Err(CliError::fatal(
                            "--points, --dim, and --trials are required without --config",
                        ));
                    };
                    ExperimentConfig::new(n, s, m, 0)
                }
            };
            if let Some(n) = points {
                cfg.n_points = n;
            }
            if let Some(s) = dim {
                cfg.dim = s;
            }
            if let Some(m) = trials {
                cfg.trials = m;
            }
            if let Some(v) = seed {
                cfg.base_seed = v;
            }
            if let Some(r) = rule {
                cfg.rule = r;
            }
            if let Some(w) = workers {
                cfg.parallelism = w;
            }
            if let Some(f) = tail_factor {
                cfg.tail_threshold_factor = f;
            }
            if let Some(path) = out {
                cfg.outputs = vec![OutputSpec {
                    format: format.unwrap_or(OutputFormat::Json),
                    path,
                }];
            }

            let report = run_experiment(&cfg)?;
            if cfg.outputs.is_empty() {
                write_report(&report, format.unwrap_or(OutputFormat::Json), None)?;
            } else {
                for spec in &cfg.outputs {
                    emit(&report, spec.format, &spec.path)?;
                }
            }
            eprintln!(
                "experiment: {} trials, mean normalized excess {:.5} (bound {:.7}, met: {}), mean k {:.3}",
                report.trials.len(),
                report.mean_normalized_excess,
                report.normalized_excess_bound,
                report.bound_met,
                report.mean_k
            );
            if !report.guarantees_apply {
                eprintln!(
                    "note: N < 64 or s outside [4, N/4]; the certified bounds are not asserted \
                     in this regime"
                );
            }
            Ok(())
        }

        Command::Tailscan {
            dims,
            ratio,
            trials,
            seed,
            rule,
            workers,
            tail_factor,
            format,
            out,
        } => {
            if ratio == 0 {
                return Err(CliError::fatal("--ratio must be positive"));
            }
            let configs: Vec<ExperimentConfig> = dims
                .iter()
                .map(|&s| {
                    let mut c = ExperimentConfig::new(ratio * s, s, trials, seed);
                    c.rule = rule;
                    c.parallelism = workers;
                    if let Some(f) = tail_factor {
                        c.tail_threshold_factor = f;
                    }
                    c
                })
                .collect();
            let report = tail_scan(&configs)?;
            write_report(&report, format, out.as_deref())?;
            for e in &report.entries {
                eprintln!(
                    "tailscan: s = {:>3}, N = {:>6}: tail fraction {:.4}",
                    e.dim, e.n_points, e.tail_fraction
                );
            }
            if !report.non_increasing {
                return Err(CliError::violation(
                    "tail fraction is not non-increasing in the dimension",
                ));
            }
            Ok(())
        }

        Command::Crossval {
            points,
            dim,
            trials,
            seed,
            workers,
            format,
            out,
        } => {
            let mut cfg = ExperimentConfig::new(points, dim, trials, seed);
            cfg.parallelism = workers;
            let report = cross_validate(&cfg)?;
            write_report(&report, format, out.as_deref())?;
            eprintln!(
                "crossval: {} trials, mean scaled D* {:.4}, mean scaled witness bound {:.4}, {} violations",
                report.trials.len(),
                report.mean_scaled_discrepancy,
                report.mean_scaled_witness,
                report.violations.len()
            );
            if !report.violations.is_empty() {
                return Err(CliError::violation(format!(
                    "{} trials violated oracle dominance or oracle agreement",
                    report.violations.len()
                )));
            }
            Ok(())
        }
    }
}

fn certify(
    check: &str,
    coin_max: u64,
    prob_min: u64,
    prob_max: u64,
    steps_max: u64,
    format: OutputFormat,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let failed;

    match check {
        "coin" => {
            let report = CertificateReport::new("fair_coin_tail", certify_lcoin(coin_max));
            failed = !report.all_hold();
            eprint_certificate(&report);
            write_report(&report, format, out)?;
        }
        "prob" => {
            let report = CertificateReport::new("lower_tail", certify_lprob(prob_min, prob_max)?);
            failed = !report.all_hold();
            eprint_certificate(&report);
            write_report(&report, format, out)?;
        }
        "steps" => {
            let report = certify_proof_steps(steps_max)?;
            failed = !report.all_hold();
            eprintln!(
                "proof steps up to n = {}: central binomial {} checked, window {} checked, \
                 median {} checked, mode mass {} checked, all hold: {}",
                report.n_max,
                report.central_binomial.checked,
                report.window_count.checked,
                report.median.checked,
                report.mode_probability.checked,
                report.all_hold()
            );
            write_report(&report, format, out)?;
        }
        "all" => {
            if format != OutputFormat::Json {
                return Err(CliError::fatal(
                    "--check all emits a combined JSON document; pick a single check for csv",
                ));
            }
            let coin = CertificateReport::new("fair_coin_tail", certify_lcoin(coin_max));
            let prob = CertificateReport::new("lower_tail", certify_lprob(prob_min, prob_max)?);
            let steps = certify_proof_steps(steps_max)?;
            eprint_certificate(&coin);
            eprint_certificate(&prob);
            failed = !coin.all_hold() || !prob.all_hold() || !steps.all_hold();
            let combined = serde_json::json!({
                "fair_coin_tail": coin.summary,
                "lower_tail": prob.summary,
                "proof_steps": steps,
            });
            match out {
                Some(path) => {
                    let mut f = File::create(path)?;
                    serde_json::to_writer_pretty(&mut f, &combined)?;
                    f.write_all(b"\n")?;
                }
                None => {
                    serde_json::to_writer_pretty(io::stdout().lock(), &combined)?;
                    println!();
                }
            }
        }
        other => {
            return Err(CliError::fatal(format!(
                "unknown check {other:?} (expected coin, prob, steps, or all)"
            )));
        }
    }

    if failed {
        return Err(CliError::violation(
            "certificate sweep found a violated bound",
        ));
    }
    Ok(())
}

fn eprint_certificate(report: &CertificateReport) {
    eprintln!(
        "{}: {} queries, all hold: {}, min margin {:.6}",
        report.name,
        report.summary.total,
        report.summary.all_hold,
        report.summary.min_margin.unwrap_or(f64::NAN)
    );
}
